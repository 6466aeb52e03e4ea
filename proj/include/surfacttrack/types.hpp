#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>
#include <vector>

namespace surfacttrack {

using Vec2 = Eigen::Vector2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Nodal values of a piecewise linear scalar function on the interface.
using SurfaceScalarField = Vector;
/// Nodal 2-vectors of a piecewise linear vector function on the interface.
using SurfaceVectorField = std::vector<Vec2>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Rotates clockwise by 90 degrees: for a CCW tangent this is the outward normal.
inline Vec2 rotate_cw(const Vec2& v) { return {v.y(), -v.x()}; }

}  // namespace surfacttrack
