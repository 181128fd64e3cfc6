#ifndef NUCDET_TEST_FIXTURES_HPP
#define NUCDET_TEST_FIXTURES_HPP

#include <cmath>

#include "nucdet/grid.hpp"
#include "nucdet/rng.hpp"

namespace fixtures {

using nucdet::Grid2D;

/// Elliptical boundary ring: 1 where the normalized radial coordinate is
/// within half_width (in pixels) of the boundary.
inline Grid2D ring(int side, double cy, double cx, double ra, double rb,
                   double angle = 0.0, double half_width = 0.6) {
    Grid2D g(side, side, 0.0);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const double y = r - cy, x = c - cx;
            const double ca = std::cos(angle), sa = std::sin(angle);
            const double u = (x * ca + y * sa) / ra;
            const double v = (-x * sa + y * ca) / rb;
            const double s = std::sqrt(u * u + v * v);
            if (std::abs(s - 1.0) * std::min(ra, rb) <= half_width)
                g(r, c) = 1.0;
        }
    return g;
}

inline Grid2D circle_ring(int side, double radius, double shift_r = 0.0,
                          double shift_c = 0.0) {
    const double center = (side - 1) / 2.0;
    return ring(side, center + shift_r, center + shift_c, radius, radius);
}

inline Grid2D square_ring(int side, int half) {
    Grid2D g(side, side, 0.0);
    const int cy = side / 2 - 1, cx = side / 2 - 1;
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            const int dy = std::abs(r - cy), dx = std::abs(c - cx);
            if ((dy == half && dx <= half) || (dx == half && dy <= half))
                g(r, c) = 1.0;
        }
    return g;
}

inline Grid2D bar(int side, int col_lo, int col_hi) {
    Grid2D g(side, side, 0.0);
    for (int r = 3; r < side - 3; ++r)
        for (int c = col_lo; c <= col_hi; ++c)
            g(r, c) = 1.0;
    return g;
}

inline Grid2D l_boundary(int side) {
    Grid2D g(side, side, 0.0);
    for (int r = 3; r < side - 3; ++r)
        g(r, 4) = 1.0;
    for (int c = 4; c < side - 4; ++c)
        g(side - 4, c) = 1.0;
    return g;
}

inline Grid2D random_grid(nucdet::Rng& rng, int h, int w, double lo = 0.0,
                          double hi = 1.0) {
    Grid2D g(h, w);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = lo + (hi - lo) * rng.uniform();
    return g;
}

}  // namespace fixtures

#endif
