#include "nucdet/steerable.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace nucdet {

void CwSsimConfig::validate() const {
    if (levels < 1)
        throw std::invalid_argument("CwSsimConfig: levels must be >= 1");
    if (orientations < 2)
        throw std::invalid_argument("CwSsimConfig: orientations must be >= 2");
    if (k <= 0.0)
        throw std::invalid_argument("CwSsimConfig: K must be positive");
    if (window < 1)
        throw std::invalid_argument("CwSsimConfig: window must be >= 1");
}

namespace {

using cd = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Direct row-column 2-D DFT. Shape grids are tiny (side <= ~30), so the
// O(n^3) transform is well under a millisecond and keeps the module free of
// an FFT dependency.
std::vector<cd> dft2d(const std::vector<cd>& in, int h, int w, bool inverse) {
    const double sign = inverse ? 1.0 : -1.0;

    std::vector<cd> row_tw(static_cast<size_t>(w) * w), col_tw(static_cast<size_t>(h) * h);
    for (int k = 0; k < w; ++k)
        for (int n = 0; n < w; ++n)
            row_tw[static_cast<size_t>(k) * w + n] =
                std::polar(1.0, sign * 2.0 * kPi * k * n / w);
    for (int k = 0; k < h; ++k)
        for (int n = 0; n < h; ++n)
            col_tw[static_cast<size_t>(k) * h + n] =
                std::polar(1.0, sign * 2.0 * kPi * k * n / h);

    std::vector<cd> tmp(in.size()), out(in.size());
    for (int r = 0; r < h; ++r)
        for (int k = 0; k < w; ++k) {
            cd acc = 0.0;
            for (int n = 0; n < w; ++n)
                acc += in[static_cast<size_t>(r) * w + n] * row_tw[static_cast<size_t>(k) * w + n];
            tmp[static_cast<size_t>(r) * w + k] = acc;
        }
    for (int c = 0; c < w; ++c)
        for (int k = 0; k < h; ++k) {
            cd acc = 0.0;
            for (int n = 0; n < h; ++n)
                acc += tmp[static_cast<size_t>(n) * w + c] * col_tw[static_cast<size_t>(k) * h + n];
            out[static_cast<size_t>(k) * w + c] = acc;
        }
    if (inverse) {
        const double norm = 1.0 / (static_cast<double>(h) * w);
        for (auto& v : out)
            v *= norm;
    }
    return out;
}

// Raised cosine in log2 frequency, peak 1 at center_freq, support one octave
// on either side.
double radial_window(double freq, double center_freq) {
    if (freq <= 0.0)
        return 0.0;
    const double x = std::log2(freq / center_freq);
    if (x <= -1.0 || x >= 1.0)
        return 0.0;
    return std::cos(kPi / 2.0 * x);
}

// cos^(K-1) lobe centered at `center`, zero outside |delta| < pi/2. The
// half-plane support is what turns the spatial coefficients complex.
double angular_window(double theta, double center, int orientations) {
    double delta = theta - center;
    while (delta > kPi)
        delta -= 2.0 * kPi;
    while (delta < -kPi)
        delta += 2.0 * kPi;
    if (std::abs(delta) >= kPi / 2.0)
        return 0.0;
    return std::pow(std::cos(delta), orientations - 1);
}

}  // namespace

std::vector<Subband> complex_wavelet_coeffs(const Grid2D& shape, const CwSsimConfig& config) {
    config.validate();
    const int h = shape.height(), w = shape.width();
    const int min_side = 1 << config.levels;
    if (h < min_side || w < min_side)
        throw std::invalid_argument("complex_wavelet_coeffs: shape side smaller than 2^levels");

    std::vector<cd> spatial(shape.size());
    for (size_t i = 0; i < shape.size(); ++i)
        spatial[i] = shape[i];
    const std::vector<cd> spectrum = dft2d(spatial, h, w, /*inverse=*/false);

    // Signed frequency per DFT bin, in (-pi, pi].
    std::vector<double> freq_y(h), freq_x(w);
    for (int ky = 0; ky < h; ++ky)
        freq_y[ky] = 2.0 * kPi * (ky <= h / 2 ? ky : ky - h) / h;
    for (int kx = 0; kx < w; ++kx)
        freq_x[kx] = 2.0 * kPi * (kx <= w / 2 ? kx : kx - w) / w;

    std::vector<Subband> bands;
    bands.reserve(static_cast<size_t>(config.levels) * config.orientations);
    std::vector<cd> masked(spectrum.size());
    for (int level = 1; level <= config.levels; ++level) {
        const double center_freq = kPi / (1 << level);
        for (int ori = 0; ori < config.orientations; ++ori) {
            const double center_angle = kPi * ori / config.orientations;
            for (int ky = 0; ky < h; ++ky)
                for (int kx = 0; kx < w; ++kx) {
                    const double fy = freq_y[ky], fx = freq_x[kx];
                    const double radius = std::hypot(fy, fx);
                    const double mask = radial_window(radius, center_freq) *
                                        angular_window(std::atan2(fy, fx), center_angle,
                                                       config.orientations);
                    masked[static_cast<size_t>(ky) * w + kx] =
                        spectrum[static_cast<size_t>(ky) * w + kx] * mask;
                }
            bands.push_back(Subband{h, w, dft2d(masked, h, w, /*inverse=*/true)});
        }
    }
    return bands;
}

}  // namespace nucdet
