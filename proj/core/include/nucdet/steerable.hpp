#ifndef NUCDET_STEERABLE_HPP
#define NUCDET_STEERABLE_HPP

#include <complex>
#include <vector>

#include "nucdet/grid.hpp"

namespace nucdet {

/// CW-SSIM parameters: pyramid depth, orientation count, the small
/// stabilizer K from the similarity index, and the sliding-window side used
/// when comparing coefficient grids.
struct CwSsimConfig {
    int levels = 2;
    int orientations = 6;
    double k = 0.01;
    int window = 7;

    void validate() const;
};

/// One oriented bandpass subband of complex coefficients, full input
/// resolution (the pyramid is undecimated).
struct Subband {
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> c;

    std::complex<double> at(int r, int col) const {
        return c[static_cast<size_t>(r) * width + col];
    }
};

/// Complex steerable decomposition: levels x orientations bandpass subbands
/// built in the frequency domain from raised-cosine log-radial windows and
/// one-sided cos^(orientations-1) angular windows. One-sided angular support
/// makes the spatial coefficients complex (phase-carrying), which is what the
/// similarity index needs. Linear in the input; DC is suppressed.
std::vector<Subband> complex_wavelet_coeffs(const Grid2D& shape, const CwSsimConfig& config);

}  // namespace nucdet

#endif
