#include "nucdet/edges.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nucdet/numerics.hpp"

namespace nucdet {

void CannyConfig::validate() const {
    if (blur_sigma <= 0.0)
        throw std::invalid_argument("CannyConfig: blur_sigma must be positive");
    if (!(low_threshold > 0.0 && low_threshold < high_threshold && high_threshold <= 1.0))
        throw std::invalid_argument("CannyConfig: need 0 < low < high <= 1");
}

namespace {

// SAME convolution with clamp-to-edge padding. Zero padding would fabricate
// gradients along the image border, so the smoothing and Sobel stages
// replicate the border instead.
Grid2D conv_replicate(const Grid2D& in, const Grid2D& k) {
    const int h = in.height(), w = in.width();
    const int rh = k.height() / 2, rw = k.width() / 2;
    Grid2D out(h, w, 0.0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            for (int u = -rh; u <= rh; ++u)
                for (int v = -rw; v <= rw; ++v) {
                    const int rr = std::clamp(r - u, 0, h - 1);
                    const int cc = std::clamp(c - v, 0, w - 1);
                    acc += in(rr, cc) * k(u + rh, v + rw);
                }
            out(r, c) = acc;
        }
    return out;
}

Grid2D gaussian_blur(const Grid2D& image, double sigma) {
    int size = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    Grid2D k = gaussian_kernel(sigma, size);
    double sum = 0.0;
    for (size_t i = 0; i < k.size(); ++i)
        sum += k[i];
    for (size_t i = 0; i < k.size(); ++i)
        k[i] /= sum;  // unit-sum for smoothing
    return conv_replicate(image, k);
}

// Direction sectors for non-maximum suppression, mod 180 degrees.
// Returns the (dr,dc) step of the sector axis.
std::pair<int, int> sector_step(double gy, double gx) {
    double angle = std::atan2(gy, gx);
    if (angle < 0)
        angle += M_PI;
    const double deg = angle * 180.0 / M_PI;
    if (deg < 22.5 || deg >= 157.5)
        return {0, 1};   // horizontal gradient -> compare left/right
    if (deg < 67.5)
        return {1, 1};   // diagonal
    if (deg < 112.5)
        return {1, 0};   // vertical gradient -> compare up/down
    return {1, -1};      // anti-diagonal
}

}  // namespace

Grid2D canny(const Grid2D& image, const CannyConfig& config) {
    config.validate();
    const int h = image.height(), w = image.width();
    if (h < 5 || w < 5)
        throw std::invalid_argument("canny: image must be at least 5x5");

    const Grid2D smoothed = gaussian_blur(image, config.blur_sigma);

    Grid2D sobel_x(3, 3), sobel_y(3, 3);
    const double sx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    const double sy[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    for (int i = 0; i < 9; ++i) {
        sobel_x[i] = sx[i];
        sobel_y[i] = sy[i];
    }
    const Grid2D gx = conv_replicate(smoothed, sobel_x);
    const Grid2D gy = conv_replicate(smoothed, sobel_y);

    Grid2D mag(h, w);
    double max_mag = 0.0;
    for (size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::hypot(gx[i], gy[i]);
        max_mag = std::max(max_mag, mag[i]);
    }
    if (max_mag <= 1e-12)
        return Grid2D(h, w, 0.0);  // constant image (up to rounding)

    const double low = config.low_threshold * max_mag;
    const double high = config.high_threshold * max_mag;

    // Non-maximum suppression: survive only if strictly above the preceding
    // neighbor along the gradient axis and at least the following one, so a
    // two-wide plateau keeps exactly one pixel.
    Grid2D thin(h, w, 0.0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double m = mag(r, c);
            if (m < low)
                continue;
            const auto [dr, dc] = sector_step(gy(r, c), gx(r, c));
            const double before =
                mag.in_bounds(r - dr, c - dc) ? mag(r - dr, c - dc) : 0.0;
            const double after =
                mag.in_bounds(r + dr, c + dc) ? mag(r + dr, c + dc) : 0.0;
            if (m > before && m >= after)
                thin(r, c) = m;
        }
    }

    // Hysteresis: flood from strong pixels through weak ones, 8-connected.
    Grid2D edges(h, w, 0.0);
    std::vector<Pixel> stack;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (thin(r, c) >= high && edges(r, c) == 0.0) {
                edges(r, c) = 1.0;
                stack.push_back({r, c});
                while (!stack.empty()) {
                    const Pixel px = stack.back();
                    stack.pop_back();
                    for (int dr = -1; dr <= 1; ++dr)
                        for (int dc = -1; dc <= 1; ++dc) {
                            const int nr = px.row + dr, nc = px.col + dc;
                            if (!edges.in_bounds(nr, nc) || edges(nr, nc) != 0.0)
                                continue;
                            if (thin(nr, nc) >= low) {
                                edges(nr, nc) = 1.0;
                                stack.push_back({nr, nc});
                            }
                        }
                }
            }
    return edges;
}

}  // namespace nucdet
