#ifndef NUCDET_NUMERICS_HPP
#define NUCDET_NUMERICS_HPP

#include <cstdint>
#include <vector>

#include "nucdet/grid.hpp"

namespace nucdet {

/// Winning-input coordinates recorded by max_pool_same, one flat index per
/// output cell. route_gradient scatters upstream derivatives back through it.
struct PoolRoute {
    int height = 0;
    int width = 0;
    std::vector<int32_t> winner;  // flat index into the pooled input

    int32_t at(int r, int c) const { return winner[static_cast<size_t>(r) * width + c]; }
};

struct PoolResult {
    Grid2D pooled;
    PoolRoute route;
};

/// True 2-D convolution (kernel flipped), SAME zero padding. Output has the
/// input's dimensions. The kernel must be odd-sized on both axes.
///
/// This flip convention is used for every convolution in the project; the
/// shape-prior loss and its gradients depend on all paths agreeing on it.
Grid2D conv2d_same(const Grid2D& input, const Grid2D& kernel);

/// Adjoint of conv2d_same in its first argument: given dL/d(output), returns
/// dL/d(input). Equivalent to cross-correlation with the same kernel.
Grid2D conv2d_same_adjoint(const Grid2D& upstream, const Grid2D& kernel);

/// Gradient of sum(upstream .* conv2d_same(input, kernel)) w.r.t. the kernel
/// entries. kh/kw give the kernel dimensions (odd).
Grid2D conv2d_same_kernel_grad(const Grid2D& upstream, const Grid2D& input,
                               int kh, int kw);

/// Stride-1 max pooling over a centered p x p window (p odd), SAME extent.
/// Padding never wins (treated as -inf). Ties go to the first window cell in
/// row-major scan order.
PoolResult max_pool_same(const Grid2D& input, int p);

/// Routes upstream derivatives to the recorded pooling winners, accumulating
/// where several output cells share one winner. Everything else gets zero.
Grid2D route_gradient(const Grid2D& upstream, const PoolRoute& route);

/// Centered isotropic Gaussian, peak-normalized so the center equals 1.
/// size must be odd, sigma > 0.
Grid2D gaussian_kernel(double sigma, int size);

/// Raw-buffer accumulate variants of the convolution kernels, shared by the
/// grid wrappers above and the multichannel layers. All add into out.
namespace kernels {
void conv_same_accum(const double* in, int h, int w, const double* k, int kh, int kw,
                     double* out);
void conv_same_adjoint_accum(const double* upstream, int h, int w, const double* k,
                             int kh, int kw, double* out);
void conv_same_kernel_grad_accum(const double* upstream, const double* in, int h, int w,
                                 int kh, int kw, double* kgrad);
}  // namespace kernels

}  // namespace nucdet

#endif
