#include "nucdet/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nucdet {

namespace {

void require_odd_kernel(int kh, int kw) {
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("conv2d_same: kernel dimensions must be odd, got " +
                                    std::to_string(kh) + "x" + std::to_string(kw));
}

}  // namespace

namespace kernels {

void conv_same_accum(const double* in, int h, int w, const double* k, int kh, int kw,
                     double* out) {
    const int rh = kh / 2, rw = kw / 2;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double acc = 0.0;
            // out[r,c] += sum_{u,v} in[r-u, c-v] * k[u+rh, v+rw]
            const int ulo = std::max(-rh, r - (h - 1));
            const int uhi = std::min(rh, r);
            for (int u = ulo; u <= uhi; ++u) {
                const int vlo = std::max(-rw, c - (w - 1));
                const int vhi = std::min(rw, c);
                const double* in_row = in + static_cast<size_t>(r - u) * w;
                const double* k_row = k + static_cast<size_t>(u + rh) * kw;
                for (int v = vlo; v <= vhi; ++v)
                    acc += in_row[c - v] * k_row[v + rw];
            }
            out[static_cast<size_t>(r) * w + c] += acc;
        }
    }
}

void conv_same_adjoint_accum(const double* upstream, int h, int w, const double* k,
                             int kh, int kw, double* out) {
    const int rh = kh / 2, rw = kw / 2;
    // d/d(in[a,b]) of <upstream, conv(in, k)> = sum_{u,v} upstream[a+u, b+v] * k[u+rh, v+rw]
    for (int a = 0; a < h; ++a) {
        for (int b = 0; b < w; ++b) {
            double acc = 0.0;
            const int ulo = std::max(-rh, -a);
            const int uhi = std::min(rh, h - 1 - a);
            for (int u = ulo; u <= uhi; ++u) {
                const int vlo = std::max(-rw, -b);
                const int vhi = std::min(rw, w - 1 - b);
                const double* up_row = upstream + static_cast<size_t>(a + u) * w;
                const double* k_row = k + static_cast<size_t>(u + rh) * kw;
                for (int v = vlo; v <= vhi; ++v)
                    acc += up_row[b + v] * k_row[v + rw];
            }
            out[static_cast<size_t>(a) * w + b] += acc;
        }
    }
}

void conv_same_kernel_grad_accum(const double* upstream, const double* in, int h, int w,
                                 int kh, int kw, double* kgrad) {
    const int rh = kh / 2, rw = kw / 2;
    // d/d(k[u+rh,v+rw]) of <upstream, conv(in, k)> = sum_{r,c} upstream[r,c] * in[r-u, c-v]
    for (int u = -rh; u <= rh; ++u) {
        for (int v = -rw; v <= rw; ++v) {
            double acc = 0.0;
            const int rlo = std::max(0, u);
            const int rhi = std::min(h - 1, h - 1 + u);
            for (int r = rlo; r <= rhi; ++r) {
                const int clo = std::max(0, v);
                const int chi = std::min(w - 1, w - 1 + v);
                const double* up_row = upstream + static_cast<size_t>(r) * w;
                const double* in_row = in + static_cast<size_t>(r - u) * w;
                for (int c = clo; c <= chi; ++c)
                    acc += up_row[c] * in_row[c - v];
            }
            kgrad[static_cast<size_t>(u + rh) * kw + (v + rw)] += acc;
        }
    }
}

}  // namespace kernels

Grid2D conv2d_same(const Grid2D& input, const Grid2D& kernel) {
    require_odd_kernel(kernel.height(), kernel.width());
    Grid2D out(input.height(), input.width(), 0.0);
    kernels::conv_same_accum(input.data(), input.height(), input.width(), kernel.data(),
                             kernel.height(), kernel.width(), out.data());
    return out;
}

Grid2D conv2d_same_adjoint(const Grid2D& upstream, const Grid2D& kernel) {
    require_odd_kernel(kernel.height(), kernel.width());
    Grid2D out(upstream.height(), upstream.width(), 0.0);
    kernels::conv_same_adjoint_accum(upstream.data(), upstream.height(), upstream.width(),
                                     kernel.data(), kernel.height(), kernel.width(),
                                     out.data());
    return out;
}

Grid2D conv2d_same_kernel_grad(const Grid2D& upstream, const Grid2D& input,
                               int kh, int kw) {
    if (!upstream.same_shape(input))
        throw std::invalid_argument("conv2d_same_kernel_grad: dimension mismatch");
    require_odd_kernel(kh, kw);
    Grid2D grad(kh, kw, 0.0);
    kernels::conv_same_kernel_grad_accum(upstream.data(), input.data(), input.height(),
                                         input.width(), kh, kw, grad.data());
    return grad;
}

PoolResult max_pool_same(const Grid2D& input, int p) {
    const int h = input.height(), w = input.width();
    if (p % 2 == 0 || p < 1)
        throw std::invalid_argument("max_pool_same: window size must be odd and positive");
    if (p > 2 * std::min(h, w))
        throw std::invalid_argument("max_pool_same: window size " + std::to_string(p) +
                                    " too large for " + std::to_string(h) + "x" +
                                    std::to_string(w) + " input");
    const int radius = p / 2;

    PoolResult result{Grid2D(h, w),
                      PoolRoute{h, w, std::vector<int32_t>(static_cast<size_t>(h) * w)}};
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            int32_t best_idx = -1;
            const int rlo = std::max(0, r - radius), rhi = std::min(h - 1, r + radius);
            const int clo = std::max(0, c - radius), chi = std::min(w - 1, c + radius);
            for (int rr = rlo; rr <= rhi; ++rr) {
                const double* row = input.data() + static_cast<size_t>(rr) * w;
                for (int cc = clo; cc <= chi; ++cc) {
                    if (row[cc] > best) {  // strict: first winner in row-major scan
                        best = row[cc];
                        best_idx = static_cast<int32_t>(rr * w + cc);
                    }
                }
            }
            result.pooled(r, c) = best;
            result.route.winner[static_cast<size_t>(r) * w + c] = best_idx;
        }
    }
    return result;
}

Grid2D route_gradient(const Grid2D& upstream, const PoolRoute& route) {
    if (upstream.height() != route.height || upstream.width() != route.width)
        throw std::invalid_argument("route_gradient: upstream/route dimension mismatch");

    Grid2D grad(route.height, route.width, 0.0);
    const size_t n = upstream.size();
    for (size_t i = 0; i < n; ++i)
        grad[route.winner[i]] += upstream[i];
    return grad;
}

Grid2D gaussian_kernel(double sigma, int size) {
    if (sigma <= 0.0)
        throw std::invalid_argument("gaussian_kernel: sigma must be positive");
    if (size % 2 == 0 || size < 1)
        throw std::invalid_argument("gaussian_kernel: size must be odd and positive");

    const int radius = size / 2;
    Grid2D k(size, size);
    for (int r = -radius; r <= radius; ++r)
        for (int c = -radius; c <= radius; ++c)
            k(r + radius, c + radius) =
                std::exp(-(static_cast<double>(r) * r + static_cast<double>(c) * c) /
                         (2.0 * sigma * sigma));
    // peak-normalized by construction: center exponent is 0
    return k;
}

}  // namespace nucdet
