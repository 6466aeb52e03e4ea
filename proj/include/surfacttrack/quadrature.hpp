#pragma once

#include "surfacttrack/types.hpp"

#include <array>

namespace surfacttrack::quad {

// Gauss-Legendre rules mapped to [0,1]; weights sum to 1.
struct LinePoint {
  double t;
  double w;
};

inline constexpr std::array<LinePoint, 4> gauss4 = {{
    {0.5 - 0.43056815579702629, 0.17392742256872693},
    {0.5 - 0.16999052179242813, 0.32607257743127307},
    {0.5 + 0.16999052179242813, 0.32607257743127307},
    {0.5 + 0.43056815579702629, 0.17392742256872693},
}};

/// Barycentric point and weight on a triangle; weights sum to 1.
struct TriPoint {
  std::array<double, 3> l;
  double w;
};

namespace detail {
inline constexpr double a1 = 0.05971587178976982;
inline constexpr double b1 = 0.4701420641051151;
inline constexpr double a2 = 0.7974269853530873;
inline constexpr double b2 = 0.1012865073234563;
inline constexpr double w0 = 0.225;
inline constexpr double w1 = 0.1323941527885062;
inline constexpr double w2 = 0.1259391805448272;
}  // namespace detail

/// Seven-point rule, exact for polynomials of degree five.
inline constexpr std::array<TriPoint, 7> tri7 = {{
    {{1.0 / 3, 1.0 / 3, 1.0 / 3}, detail::w0},
    {{detail::a1, detail::b1, detail::b1}, detail::w1},
    {{detail::b1, detail::a1, detail::b1}, detail::w1},
    {{detail::b1, detail::b1, detail::a1}, detail::w1},
    {{detail::a2, detail::b2, detail::b2}, detail::w2},
    {{detail::b2, detail::a2, detail::b2}, detail::w2},
    {{detail::b2, detail::b2, detail::a2}, detail::w2},
}};

}  // namespace surfacttrack::quad
