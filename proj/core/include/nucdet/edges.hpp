#ifndef NUCDET_EDGES_HPP
#define NUCDET_EDGES_HPP

#include "nucdet/grid.hpp"

namespace nucdet {

/// Canny parameters. Thresholds are fractions of the maximum gradient
/// magnitude, which makes the detector invariant to global affine brightness
/// rescales of the input.
struct CannyConfig {
    double blur_sigma = 1.4;
    double low_threshold = 0.1;
    double high_threshold = 0.3;

    void validate() const;
};

/// Full Canny pipeline: Gaussian smoothing, Sobel gradients, non-maximum
/// suppression along the gradient direction, double-threshold hysteresis with
/// 8-connectivity. Input values are expected in [0,1]; the result is strictly
/// binary (edges 1, background 0) with the input's dimensions.
Grid2D canny(const Grid2D& image, const CannyConfig& config = {});

}  // namespace nucdet

#endif
