#include <doctest.h>

#include <cmath>

#include "nucdet/numerics.hpp"
#include "nucdet/rng.hpp"

using namespace nucdet;

namespace {

Grid2D random_grid(Rng& rng, int h, int w, double lo = -1.0, double hi = 1.0) {
    Grid2D g(h, w);
    for (size_t i = 0; i < g.size(); ++i)
        g[i] = lo + (hi - lo) * rng.uniform();
    return g;
}

// Brute-force convolution oracle: explicitly flip the kernel, then correlate.
Grid2D conv_oracle(const Grid2D& in, const Grid2D& k) {
    Grid2D flipped(k.height(), k.width());
    for (int r = 0; r < k.height(); ++r)
        for (int c = 0; c < k.width(); ++c)
            flipped(r, c) = k(k.height() - 1 - r, k.width() - 1 - c);

    const int rh = k.height() / 2, rw = k.width() / 2;
    Grid2D out(in.height(), in.width(), 0.0);
    for (int r = 0; r < in.height(); ++r)
        for (int c = 0; c < in.width(); ++c) {
            double acc = 0.0;
            for (int i = 0; i < k.height(); ++i)
                for (int j = 0; j < k.width(); ++j) {
                    const int rr = r + i - rh, cc = c + j - rw;
                    if (in.in_bounds(rr, cc))
                        acc += in(rr, cc) * flipped(i, j);
                }
            out(r, c) = acc;
        }
    return out;
}

// Brute-force sliding max oracle.
Grid2D pool_oracle(const Grid2D& in, int p) {
    const int radius = p / 2;
    Grid2D out(in.height(), in.width());
    for (int r = 0; r < in.height(); ++r)
        for (int c = 0; c < in.width(); ++c) {
            double best = -1e300;
            for (int rr = r - radius; rr <= r + radius; ++rr)
                for (int cc = c - radius; cc <= c + radius; ++cc)
                    if (in.in_bounds(rr, cc))
                        best = std::max(best, in(rr, cc));
            out(r, c) = best;
        }
    return out;
}

double dot(const Grid2D& a, const Grid2D& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("conv2d_same identity kernel") {
    Rng rng(1);
    const Grid2D input = random_grid(rng, 6, 9);
    Grid2D ident(3, 3, 0.0);
    ident(1, 1) = 1.0;
    const Grid2D out = conv2d_same(input, ident);
    for (size_t i = 0; i < input.size(); ++i)
        CHECK(out[i] == doctest::Approx(input[i]).epsilon(1e-15));
}

TEST_CASE("conv2d_same zero-padding counts") {
    const Grid2D input(5, 5, 1.0);
    const Grid2D ones(3, 3, 1.0);
    const Grid2D out = conv2d_same(input, ones);
    CHECK(out(2, 2) == doctest::Approx(9.0));
    CHECK(out(0, 0) == doctest::Approx(4.0));
    CHECK(out(0, 4) == doctest::Approx(4.0));
    CHECK(out(4, 0) == doctest::Approx(4.0));
    CHECK(out(4, 4) == doctest::Approx(4.0));
    CHECK(out(0, 2) == doctest::Approx(6.0));
}

TEST_CASE("conv2d_same matches the brute-force oracle") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid2D input = random_grid(rng, 7, 7);
        const Grid2D kernel = random_grid(rng, 3, 3);
        const Grid2D got = conv2d_same(input, kernel);
        const Grid2D want = conv_oracle(input, kernel);
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got[i] - want[i]) < 1e-12);
    }
    // non-square kernel too
    const Grid2D input = random_grid(rng, 8, 11);
    const Grid2D kernel = random_grid(rng, 5, 3);
    const Grid2D got = conv2d_same(input, kernel);
    const Grid2D want = conv_oracle(input, kernel);
    for (size_t i = 0; i < got.size(); ++i)
        CHECK(std::abs(got[i] - want[i]) < 1e-12);
}

TEST_CASE("conv2d_same rejects even kernels") {
    const Grid2D input(5, 5, 1.0);
    CHECK_THROWS_AS(conv2d_same(input, Grid2D(2, 3, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(conv2d_same(input, Grid2D(3, 4, 1.0)), std::invalid_argument);
}

TEST_CASE("conv2d_same is linear") {
    Rng rng(3);
    const Grid2D a = random_grid(rng, 9, 9);
    const Grid2D b = random_grid(rng, 9, 9);
    const Grid2D k = random_grid(rng, 5, 5);
    const double ca = 1.7, cb = -0.4;

    Grid2D mix(9, 9);
    for (size_t i = 0; i < mix.size(); ++i)
        mix[i] = ca * a[i] + cb * b[i];
    const Grid2D lhs = conv2d_same(mix, k);
    const Grid2D ra = conv2d_same(a, k);
    const Grid2D rb = conv2d_same(b, k);
    for (size_t i = 0; i < lhs.size(); ++i)
        CHECK(std::abs(lhs[i] - (ca * ra[i] + cb * rb[i])) < 1e-10);
}

TEST_CASE("conv adjoint and kernel-grad satisfy the bilinear identities") {
    Rng rng(4);
    const Grid2D x = random_grid(rng, 10, 8);
    const Grid2D k = random_grid(rng, 3, 5);
    const Grid2D u = random_grid(rng, 10, 8);

    // <conv(x,k), u> = <x, adjoint(u,k)> = <k, kernel_grad(u,x)>
    const double forward = dot(conv2d_same(x, k), u);
    CHECK(forward == doctest::Approx(dot(x, conv2d_same_adjoint(u, k))).epsilon(1e-12));
    CHECK(forward ==
          doctest::Approx(dot(k, conv2d_same_kernel_grad(u, x, 3, 5))).epsilon(1e-12));
}

TEST_CASE("max_pool_same constant invariance") {
    const Grid2D input(6, 6, 0.37);
    const auto [pooled, route] = max_pool_same(input, 3);
    for (size_t i = 0; i < pooled.size(); ++i)
        CHECK(pooled[i] == doctest::Approx(0.37));
}

TEST_CASE("max_pool_same impulse dilation") {
    Grid2D input(7, 7, 0.0);
    input(3, 3) = 1.0;
    const auto [pooled, route] = max_pool_same(input, 3);
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
            const bool in_block = std::abs(r - 3) <= 1 && std::abs(c - 3) <= 1;
            CHECK(pooled(r, c) == doctest::Approx(in_block ? 1.0 : 0.0));
        }
}

TEST_CASE("max_pool_same matches the sliding max oracle") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid2D input = random_grid(rng, 9, 9);
        const auto [pooled, route] = max_pool_same(input, 5);
        const Grid2D want = pool_oracle(input, 5);
        for (size_t i = 0; i < pooled.size(); ++i)
            CHECK(pooled[i] == doctest::Approx(want[i]).epsilon(1e-15));
        // every winner lies inside its window and output >= input elementwise
        for (int r = 0; r < 9; ++r)
            for (int c = 0; c < 9; ++c) {
                CHECK(pooled(r, c) >= input(r, c));
                const int32_t win = route.at(r, c);
                const int wr = win / 9, wc = win % 9;
                CHECK(std::abs(wr - r) <= 2);
                CHECK(std::abs(wc - c) <= 2);
            }
    }
}

TEST_CASE("max_pool_same rejects oversized and even windows") {
    const Grid2D input(4, 4, 0.0);
    CHECK_THROWS_AS(max_pool_same(input, 9), std::invalid_argument);
    CHECK_THROWS_AS(max_pool_same(input, 2), std::invalid_argument);
}

TEST_CASE("max_pool_same ties break to the first row-major cell") {
    Grid2D input(5, 5, 1.0);  // all ties
    const auto [pooled, route] = max_pool_same(input, 3);
    // each window's winner must be its top-left in-bounds cell
    CHECK(route.at(0, 0) == 0);
    CHECK(route.at(2, 2) == 1 * 5 + 1);
    CHECK(route.at(4, 4) == 3 * 5 + 3);
}

TEST_CASE("route_gradient basics") {
    Rng rng(6);
    const Grid2D input = random_grid(rng, 8, 8);
    const auto [pooled, route] = max_pool_same(input, 3);

    SUBCASE("zero upstream stays zero") {
        const Grid2D zeros(8, 8, 0.0);
        const Grid2D g = route_gradient(zeros, route);
        for (size_t i = 0; i < g.size(); ++i)
            CHECK(g[i] == 0.0);
    }
    SUBCASE("single upstream lands on its winner") {
        Grid2D up(8, 8, 0.0);
        up(4, 4) = 1.0;
        const Grid2D g = route_gradient(up, route);
        double total = 0.0;
        for (size_t i = 0; i < g.size(); ++i)
            total += g[i];
        CHECK(total == doctest::Approx(1.0));
        CHECK(g[route.at(4, 4)] == doctest::Approx(1.0));
    }
    SUBCASE("dimension mismatch rejected") {
        CHECK_THROWS_AS(route_gradient(Grid2D(7, 8, 0.0), route), std::invalid_argument);
    }
}

TEST_CASE("route_gradient is the pooling adjoint") {
    Rng rng(7);
    const Grid2D x = random_grid(rng, 9, 9);
    const auto [pooled, route] = max_pool_same(x, 3);
    const Grid2D u = random_grid(rng, 9, 9);
    CHECK(dot(pooled, u) == doctest::Approx(dot(x, route_gradient(u, route))).epsilon(1e-12));
}

TEST_CASE("route_gradient matches finite differences of pooling") {
    Rng rng(8);
    const Grid2D x = random_grid(rng, 7, 7);  // continuous values: ties measure-zero
    const auto [pooled, route] = max_pool_same(x, 3);
    const Grid2D u = random_grid(rng, 7, 7);
    const Grid2D g = route_gradient(u, route);

    const double eps = 1e-6;
    for (int trial = 0; trial < 12; ++trial) {
        const int r = rng.uniform_int(0, 6), c = rng.uniform_int(0, 6);
        Grid2D plus = x, minus = x;
        plus(r, c) += eps;
        minus(r, c) -= eps;
        const double fd =
            (dot(max_pool_same(plus, 3).pooled, u) - dot(max_pool_same(minus, 3).pooled, u)) /
            (2.0 * eps);
        CHECK(fd == doctest::Approx(g(r, c)).epsilon(1e-6));
    }
}

TEST_CASE("gaussian_kernel peak, symmetry and closed-form value") {
    const Grid2D k = gaussian_kernel(2.0, 7);
    CHECK(k(3, 3) == doctest::Approx(1.0));
    CHECK(k(4, 3) == doctest::Approx(std::exp(-1.0 / 8.0)).epsilon(1e-12));
    CHECK(std::exp(-1.0 / 8.0) == doctest::Approx(0.8825).epsilon(1e-4));
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c) {
            CHECK(k(r, c) == doctest::Approx(k(6 - r, c)));
            CHECK(k(r, c) == doctest::Approx(k(r, 6 - c)));
            CHECK(k(r, c) == doctest::Approx(k(c, r)));
        }
}

TEST_CASE("gaussian_kernel delta limit and validation") {
    const Grid2D k = gaussian_kernel(0.1, 3);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (r != 1 || c != 1)
                CHECK(k(r, c) < 1e-10);
    CHECK_THROWS_AS(gaussian_kernel(-1.0, 7), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel(0.0, 7), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel(1.0, 4), std::invalid_argument);
}

TEST_CASE("operations are bit-deterministic") {
    Rng rng(9);
    const Grid2D x = random_grid(rng, 12, 12);
    const Grid2D k = random_grid(rng, 3, 3);
    const Grid2D a = conv2d_same(x, k), b = conv2d_same(x, k);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(a[i] == b[i]);
    const auto p1 = max_pool_same(x, 5), p2 = max_pool_same(x, 5);
    for (size_t i = 0; i < p1.pooled.size(); ++i) {
        CHECK(p1.pooled[i] == p2.pooled[i]);
        CHECK(p1.route.winner[i] == p2.route.winner[i]);
    }
}
