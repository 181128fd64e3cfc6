#include "nucdet/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "nucdet/detect_eval.hpp"
#include "nucdet/image_io.hpp"
#include "nucdet/numerics.hpp"
#include "nucdet/rng.hpp"

namespace nucdet {

void NetworkConfig::validate() const {
    if (depth < 2)
        throw std::invalid_argument("NetworkConfig: depth must be >= 2");
    if (channels < 1)
        throw std::invalid_argument("NetworkConfig: channels must be >= 1");
}

void NetworkParams::validate() const {
    config.validate();
    if (static_cast<int>(layers.size()) != config.depth)
        throw std::invalid_argument("NetworkParams: layer count does not match depth");
    for (int l = 0; l < config.depth; ++l) {
        const ConvLayer& layer = layers[l];
        const int expect_in = l == 0 ? 1 : config.channels;
        const int expect_out = l == config.depth - 1 ? 1 : config.channels;
        const int expect_k = l == 0 ? NetworkConfig::first_kernel : NetworkConfig::mid_kernel;
        if (layer.in_channels != expect_in || layer.out_channels != expect_out ||
            layer.kh != expect_k || layer.kw != expect_k)
            throw std::invalid_argument("NetworkParams: layer " + std::to_string(l) +
                                        " dimensions inconsistent with config");
        if (layer.w.size() != static_cast<size_t>(layer.out_channels) * layer.in_channels *
                                  layer.kh * layer.kw ||
            layer.b.size() != static_cast<size_t>(layer.out_channels))
            throw std::invalid_argument("NetworkParams: layer " + std::to_string(l) +
                                        " buffer sizes inconsistent");
    }
}

void HyperParams::validate() const {
    if (lambda < 0.0 || gamma < 0.0)
        throw std::invalid_argument("HyperParams: lambda and gamma must be >= 0");
    if (tp < 0.0 || tp >= 1.0)
        throw std::invalid_argument("HyperParams: T_p must be in [0,1)");
    if (pool_window < 1 || pool_window % 2 == 0)
        throw std::invalid_argument("HyperParams: pool window must be odd and positive");
    if (eta < 0.0)
        throw std::invalid_argument("HyperParams: eta must be >= 0");
    if (weight_decay < 0.0)
        throw std::invalid_argument("HyperParams: weight_decay must be >= 0");
    if (lr_decay <= 0.0 || lr_decay > 1.0)
        throw std::invalid_argument("HyperParams: lr_decay must be in (0,1]");
    if (lr_decay_interval < 1)
        throw std::invalid_argument("HyperParams: lr_decay_interval must be >= 1");
    if (epochs < 1 || batch_size < 1)
        throw std::invalid_argument("HyperParams: epochs and batch_size must be >= 1");
    if (threads < 0)
        throw std::invalid_argument("HyperParams: threads must be >= 0");
    if (w_fp < 0.0 || w_fp > 1.0 || w_fn < 0.0 || w_fn > 1.0)
        throw std::invalid_argument("HyperParams: weighted-MSE weights must be in [0,1]");
    if (region_radius < 1)
        throw std::invalid_argument("HyperParams: region_radius must be >= 1");
    ssim.validate();
}

TrainMode parse_mode(const std::string& name) {
    if (name == "np") return TrainMode::np;
    if (name == "wnp") return TrainMode::wnp;
    if (name == "sp") return TrainMode::sp;
    if (name == "tsp") return TrainMode::tsp;
    throw std::invalid_argument("unknown training mode '" + name + "'");
}

std::string mode_name(TrainMode mode) {
    switch (mode) {
        case TrainMode::np: return "np";
        case TrainMode::wnp: return "wnp";
        case TrainMode::sp: return "sp";
        case TrainMode::tsp: return "tsp";
    }
    return "?";
}

namespace {

struct FeatureMap {
    int channels = 0, height = 0, width = 0;
    std::vector<double> v;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w)
        : channels(c), height(h), width(w),
          v(static_cast<size_t>(c) * h * w, 0.0) {}

    double* plane(int c) { return v.data() + static_cast<size_t>(c) * height * width; }
    const double* plane(int c) const {
        return v.data() + static_cast<size_t>(c) * height * width;
    }
    size_t plane_size() const { return static_cast<size_t>(height) * width; }
};

// Pre-activation of one layer: z[o] = b[o] + sum_i conv(in[i], k[o,i]).
FeatureMap layer_forward(const FeatureMap& in, const ConvLayer& layer) {
    FeatureMap z(layer.out_channels, in.height, in.width);
    for (int o = 0; o < layer.out_channels; ++o) {
        double* zo = z.plane(o);
        std::fill(zo, zo + z.plane_size(), layer.b[o]);
        for (int i = 0; i < layer.in_channels; ++i)
            kernels::conv_same_accum(in.plane(i), in.height, in.width,
                                     &layer.w[((static_cast<size_t>(o) * layer.in_channels + i) *
                                               layer.kh) * layer.kw],
                                     layer.kh, layer.kw, zo);
    }
    return z;
}

FeatureMap relu(const FeatureMap& z) {
    FeatureMap a = z;
    for (double& x : a.v)
        x = x > 0.0 ? x : 0.0;
    return a;
}

struct ForwardTrace {
    FeatureMap input;                // single-channel x
    std::vector<FeatureMap> pre;     // z_1 .. z_D
    std::vector<FeatureMap> act;     // a_1 .. a_{D-1} (ReLU outputs), a_D unused
};

ForwardTrace forward_trace(const Grid2D& x, const NetworkParams& params) {
    params.validate();
    const int h = x.height(), w = x.width();

    ForwardTrace trace;
    trace.input = FeatureMap(1, h, w);
    std::copy(x.data(), x.data() + x.size(), trace.input.v.begin());

    const FeatureMap* current = &trace.input;
    const int depth = params.config.depth;
    trace.pre.reserve(depth);
    trace.act.reserve(depth);
    for (int l = 0; l < depth; ++l) {
        FeatureMap z = layer_forward(*current, params.layers[l]);
        for (double v : z.v)
            if (!std::isfinite(v))
                throw std::runtime_error("forward: non-finite activation in layer " +
                                         std::to_string(l + 1));
        trace.pre.push_back(std::move(z));
        trace.act.push_back(l < depth - 1 ? relu(trace.pre.back()) : FeatureMap());
        current = l < depth - 1 ? &trace.act.back() : nullptr;
    }
    return trace;
}

Grid2D output_of(const ForwardTrace& trace) {
    const FeatureMap& z = trace.pre.back();
    Grid2D y(z.height, z.width);
    std::copy(z.v.begin(), z.v.end(), y.data());
    return y;
}

// Odd-padded copy of a shape: conv2d_same requires odd kernels while dataset
// shapes may have even sides, so a zero row/column is appended. The padding
// contributes nothing to the convolution and its gradient entries are
// dropped on the way back.
Grid2D pad_to_odd(const Grid2D& shape) {
    const int h = shape.height() + (shape.height() % 2 == 0 ? 1 : 0);
    const int w = shape.width() + (shape.width() % 2 == 0 ? 1 : 0);
    if (h == shape.height() && w == shape.width())
        return shape;
    Grid2D padded(h, w, 0.0);
    for (int r = 0; r < shape.height(); ++r)
        for (int c = 0; c < shape.width(); ++c)
            padded(r, c) = shape(r, c);
    return padded;
}

// Shape-prior pipeline state shared by the loss and its backward pass.
struct SpState {
    Grid2D thresholded;
    PoolResult pool;
    Grid2D masked;
    std::vector<Grid2D> padded_shapes;
    std::vector<Grid2D> responses;  // conv(masked, shape_i)
    double loss = 0.0;
};

SpState shape_prior_forward(const Grid2D& yhat, const Grid2D& edge, const ShapeSet& shapes,
                            double lambda, int pool_window, double tp) {
    if (!yhat.same_shape(edge))
        throw std::invalid_argument("shape_prior_loss: output/edge dimension mismatch");
    if (shapes.shapes.empty())
        throw std::invalid_argument("shape_prior_loss: shape set is empty");

    SpState state;
    state.thresholded = yhat;
    for (size_t i = 0; i < state.thresholded.size(); ++i)
        if (state.thresholded[i] < tp)
            state.thresholded[i] = 0.0;

    state.pool = max_pool_same(state.thresholded, pool_window);
    state.masked = state.pool.pooled;
    for (size_t i = 0; i < state.masked.size(); ++i)
        state.masked[i] *= edge[i];

    state.padded_shapes.reserve(shapes.shapes.size());
    state.responses.reserve(shapes.shapes.size());
    double norm_sum = 0.0;
    for (const Grid2D& s : shapes.shapes) {
        state.padded_shapes.push_back(pad_to_odd(s));
        Grid2D z = conv2d_same(state.masked, state.padded_shapes.back());
        for (size_t i = 0; i < z.size(); ++i)
            norm_sum += z[i] * z[i];
        state.responses.push_back(std::move(z));
    }
    state.loss = -lambda * norm_sum;
    return state;
}

// Backward of the shape-prior term. Adds d(loss)/d(yhat) into d_yhat and,
// when shape_grads is non-null, d(loss)/d(shape_i) into it (cropped to the
// unpadded side).
void shape_prior_backward(const SpState& state, const Grid2D& yhat, const Grid2D& edge,
                          double lambda, double tp, Grid2D& d_yhat,
                          std::vector<Grid2D>* shape_grads) {
    const int h = yhat.height(), w = yhat.width();
    Grid2D d_masked(h, w, 0.0);
    for (size_t s = 0; s < state.responses.size(); ++s) {
        Grid2D d_response = state.responses[s];
        for (size_t i = 0; i < d_response.size(); ++i)
            d_response[i] *= -2.0 * lambda;

        kernels::conv_same_adjoint_accum(d_response.data(), h, w,
                                         state.padded_shapes[s].data(),
                                         state.padded_shapes[s].height(),
                                         state.padded_shapes[s].width(), d_masked.data());
        if (shape_grads) {
            const Grid2D padded_grad =
                conv2d_same_kernel_grad(d_response, state.masked,
                                        state.padded_shapes[s].height(),
                                        state.padded_shapes[s].width());
            Grid2D& target = (*shape_grads)[s];
            for (int r = 0; r < target.height(); ++r)
                for (int c = 0; c < target.width(); ++c)
                    target(r, c) += padded_grad(r, c);
        }
    }

    Grid2D d_window = d_masked;
    for (size_t i = 0; i < d_window.size(); ++i)
        d_window[i] *= edge[i];
    const Grid2D d_thresholded = route_gradient(d_window, state.pool.route);
    // T_p acts as a fixed mask: gradient passes where the entry survived.
    for (size_t i = 0; i < d_yhat.size(); ++i)
        if (yhat[i] >= tp)
            d_yhat[i] += d_thresholded[i];
}

// Disk-or masks around false-positive detections and missed centers.
struct WeightedRegions {
    std::vector<uint8_t> fp_mask, fn_mask;
};

WeightedRegions weighted_regions(int h, int w, const std::vector<Pixel>& detections,
                                 const std::vector<Pixel>& gt_centers, int radius) {
    EvalConfig eval{radius};
    const MatchCounts counts = match_golden(detections, gt_centers, eval);
    (void)counts;

    // Re-run the greedy matching to identify which detections/centers were
    // left unmatched.
    struct Cand {
        long dist2;
        Pixel det, gt;
        size_t di, gi;
    };
    std::vector<Cand> cands;
    const long r2 = static_cast<long>(radius) * radius;
    for (size_t d = 0; d < detections.size(); ++d)
        for (size_t g = 0; g < gt_centers.size(); ++g) {
            const long dr = detections[d].row - gt_centers[g].row;
            const long dc = detections[d].col - gt_centers[g].col;
            if (dr * dr + dc * dc <= r2)
                cands.push_back({dr * dr + dc * dc, detections[d], gt_centers[g], d, g});
        }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
        if (a.det != b.det) return a.det < b.det;
        return a.gt < b.gt;
    });
    std::vector<bool> det_used(detections.size(), false), gt_used(gt_centers.size(), false);
    for (const Cand& c : cands)
        if (!det_used[c.di] && !gt_used[c.gi]) {
            det_used[c.di] = true;
            gt_used[c.gi] = true;
        }

    WeightedRegions regions;
    regions.fp_mask.assign(static_cast<size_t>(h) * w, 0);
    regions.fn_mask.assign(static_cast<size_t>(h) * w, 0);
    auto stamp = [&](std::vector<uint8_t>& mask, const Pixel& p) {
        for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
                if (dr * dr + dc * dc > r2)
                    continue;
                const int r = p.row + dr, c = p.col + dc;
                if (r >= 0 && r < h && c >= 0 && c < w)
                    mask[static_cast<size_t>(r) * w + c] = 1;
            }
    };
    for (size_t d = 0; d < detections.size(); ++d)
        if (!det_used[d])
            stamp(regions.fp_mask, detections[d]);
    for (size_t g = 0; g < gt_centers.size(); ++g)
        if (!gt_used[g])
            stamp(regions.fn_mask, gt_centers[g]);
    return regions;
}

std::vector<Pixel> centers_from_labels(const Grid2D& y) {
    std::vector<Pixel> centers;
    for (int r = 0; r < y.height(); ++r)
        for (int c = 0; c < y.width(); ++c)
            if (y(r, c) >= 1.0 - 1e-9)
                centers.push_back({r, c});
    return centers;
}

Gradients make_zero_grads(const NetworkParams& params) {
    Gradients g;
    g.layers.reserve(params.layers.size());
    for (const ConvLayer& layer : params.layers) {
        ConvLayer zero = layer;
        std::fill(zero.w.begin(), zero.w.end(), 0.0);
        std::fill(zero.b.begin(), zero.b.end(), 0.0);
        g.layers.push_back(std::move(zero));
    }
    for (const Grid2D& s : params.learnable_shapes.shapes)
        g.shapes.emplace_back(s.height(), s.width(), 0.0);
    return g;
}

void accumulate_grads(Gradients& into, const Gradients& from, double scale) {
    for (size_t l = 0; l < into.layers.size(); ++l) {
        for (size_t i = 0; i < into.layers[l].w.size(); ++i)
            into.layers[l].w[i] += scale * from.layers[l].w[i];
        for (size_t i = 0; i < into.layers[l].b.size(); ++i)
            into.layers[l].b[i] += scale * from.layers[l].b[i];
    }
    for (size_t s = 0; s < into.shapes.size(); ++s)
        for (size_t i = 0; i < into.shapes[s].size(); ++i)
            into.shapes[s][i] += scale * from.shapes[s][i];
}

// Selects the shape set driving the prior term: learnable when present
// (full objective), otherwise the fixed prior/reference set.
const ShapeSet* prior_set(const NetworkParams& params, const ShapeSet* reference,
                          const HyperParams& hp) {
    if (hp.gamma > 0.0 && !params.has_learnable_shapes())
        throw std::invalid_argument("total_loss: gamma > 0 requires learnable shapes");
    if (params.has_learnable_shapes())
        return &params.learnable_shapes;
    return reference;
}

void run_parallel(int count, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0)
        threads = static_cast<int>(std::thread::hardware_concurrency());
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            int i;
            while ((i = next.fetch_add(1)) < count) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (error)
        std::rethrow_exception(error);
}

}  // namespace

NetworkParams init_params(const NetworkConfig& config, uint64_t seed) {
    config.validate();
    Rng rng(seed);

    NetworkParams params;
    params.config = config;
    for (int l = 0; l < config.depth; ++l) {
        ConvLayer layer;
        layer.in_channels = l == 0 ? 1 : config.channels;
        layer.out_channels = l == config.depth - 1 ? 1 : config.channels;
        layer.kh = layer.kw =
            l == 0 ? NetworkConfig::first_kernel : NetworkConfig::mid_kernel;
        const size_t wcount = static_cast<size_t>(layer.out_channels) * layer.in_channels *
                              layer.kh * layer.kw;
        layer.w.resize(wcount);
        layer.b.assign(layer.out_channels, 0.0);
        const double scale =
            1.0 / std::sqrt(static_cast<double>(layer.in_channels) * layer.kh * layer.kw);
        for (double& w : layer.w)
            w = scale * rng.normal();
        params.layers.push_back(std::move(layer));
    }
    return params;
}

Grid2D forward(const Grid2D& x, const NetworkParams& params) {
    return output_of(forward_trace(x, params));
}

double mse_loss(const Grid2D& yhat, const Grid2D& y) {
    if (!yhat.same_shape(y))
        throw std::invalid_argument("mse_loss: dimension mismatch");
    double total = 0.0;
    for (size_t i = 0; i < yhat.size(); ++i) {
        const double e = yhat[i] - y[i];
        total += e * e;
    }
    return total;
}

double weighted_mse_loss(const Grid2D& yhat, const Grid2D& y,
                         const std::vector<Pixel>& detections,
                         const std::vector<Pixel>& gt_centers, double w_fp, double w_fn,
                         int region_radius) {
    if (!yhat.same_shape(y))
        throw std::invalid_argument("weighted_mse_loss: dimension mismatch");
    if (w_fp < 0.0 || w_fp > 1.0 || w_fn < 0.0 || w_fn > 1.0)
        throw std::invalid_argument("weighted_mse_loss: weights must be in [0,1]");
    if (std::abs(w_fp + w_fn - 1.0) > 1e-9)
        throw std::invalid_argument("weighted_mse_loss: weights must sum to 1");

    const WeightedRegions regions =
        weighted_regions(yhat.height(), yhat.width(), detections, gt_centers, region_radius);
    double fp_err = 0.0, fn_err = 0.0;
    for (size_t i = 0; i < yhat.size(); ++i) {
        const double e = yhat[i] - y[i];
        if (regions.fp_mask[i])
            fp_err += e * e;
        if (regions.fn_mask[i])
            fn_err += e * e;
    }
    return w_fp * fp_err + w_fn * fn_err;
}

double shape_prior_loss(const Grid2D& yhat, const Grid2D& edge, const ShapeSet& shapes,
                        double lambda, int pool_window, double tp) {
    return shape_prior_forward(yhat, edge, shapes, lambda, pool_window, tp).loss;
}

LossParts total_loss(const Grid2D& x, const Grid2D& y, const Grid2D& edge,
                     const NetworkParams& params, const ShapeSet* reference,
                     const HyperParams& hp) {
    hp.validate();
    const Grid2D yhat = forward(x, params);

    LossParts parts;
    parts.mse = mse_loss(yhat, y);
    if (hp.lambda != 0.0) {
        const ShapeSet* sp_shapes = prior_set(params, reference, hp);
        if (!sp_shapes)
            throw std::invalid_argument("total_loss: lambda > 0 requires a shape set");
        parts.sp = shape_prior_loss(yhat, edge, *sp_shapes, hp.lambda, hp.pool_window, hp.tp);
    } else if (hp.gamma > 0.0 && !params.has_learnable_shapes()) {
        throw std::invalid_argument("total_loss: gamma > 0 requires learnable shapes");
    }
    if (hp.gamma != 0.0) {
        if (!reference)
            throw std::invalid_argument("total_loss: gamma > 0 requires a reference set");
        parts.ssim =
            shape_learning_loss(params.learnable_shapes, *reference, hp.gamma, hp.ssim);
    }
    return parts;
}

BackwardResult backward(const Grid2D& x, const Grid2D& y, const Grid2D& edge,
                        const NetworkParams& params, const ShapeSet* reference,
                        const HyperParams& hp, TrainMode mode) {
    hp.validate();
    const ForwardTrace trace = forward_trace(x, params);
    const Grid2D yhat = output_of(trace);
    const int h = yhat.height(), w = yhat.width();

    BackwardResult result;
    result.grads = make_zero_grads(params);

    // d(loss)/d(yhat) for the data term
    Grid2D d_yhat(h, w, 0.0);
    if (mode == TrainMode::wnp) {
        DetectionConfig det_cfg{hp.match_threshold, hp.region_radius};
        const std::vector<Pixel> detections = detect(yhat, det_cfg);
        const std::vector<Pixel> centers = centers_from_labels(y);
        const WeightedRegions regions =
            weighted_regions(h, w, detections, centers, hp.region_radius);
        double loss = 0.0;
        for (size_t i = 0; i < yhat.size(); ++i) {
            const double e = yhat[i] - y[i];
            const double weight = hp.w_fp * regions.fp_mask[i] + hp.w_fn * regions.fn_mask[i];
            loss += weight * e * e;
            d_yhat[i] = 2.0 * weight * e;
        }
        result.loss.mse = loss;
    } else {
        double loss = 0.0;
        for (size_t i = 0; i < yhat.size(); ++i) {
            const double e = yhat[i] - y[i];
            loss += e * e;
            d_yhat[i] = 2.0 * e;
        }
        result.loss.mse = loss;
    }

    // Shape-prior term
    if (hp.lambda != 0.0) {
        const ShapeSet* sp_shapes = prior_set(params, reference, hp);
        if (!sp_shapes)
            throw std::invalid_argument("backward: lambda > 0 requires a shape set");
        const SpState sp =
            shape_prior_forward(yhat, edge, *sp_shapes, hp.lambda, hp.pool_window, hp.tp);
        result.loss.sp = sp.loss;
        shape_prior_backward(sp, yhat, edge, hp.lambda, hp.tp, d_yhat,
                             params.has_learnable_shapes() ? &result.grads.shapes : nullptr);
    }

    // Shape-learning term (touches only the learnable shapes)
    if (hp.gamma != 0.0) {
        if (!params.has_learnable_shapes())
            throw std::invalid_argument("backward: gamma > 0 requires learnable shapes");
        if (!reference)
            throw std::invalid_argument("backward: gamma > 0 requires a reference set");
        result.loss.ssim =
            shape_learning_loss(params.learnable_shapes, *reference, hp.gamma, hp.ssim);
        const std::vector<Grid2D> sgrads =
            shape_learning_gradient(params.learnable_shapes, *reference, hp.gamma, hp.ssim);
        for (size_t s = 0; s < sgrads.size(); ++s)
            for (size_t i = 0; i < sgrads[s].size(); ++i)
                result.grads.shapes[s][i] += sgrads[s][i];
    }

    // Standard reverse pass through the conv stack.
    const int depth = params.config.depth;
    FeatureMap delta(1, h, w);  // d(loss)/d(z_l), starting at the linear output
    std::copy(d_yhat.data(), d_yhat.data() + d_yhat.size(), delta.v.begin());

    for (int l = depth - 1; l >= 0; --l) {
        const ConvLayer& layer = params.layers[l];
        ConvLayer& grad = result.grads.layers[l];
        const FeatureMap& input = l == 0 ? trace.input : trace.act[l - 1];

        for (int o = 0; o < layer.out_channels; ++o) {
            const double* d_out = delta.plane(o);
            grad.b[o] += std::accumulate(d_out, d_out + delta.plane_size(), 0.0);
            for (int i = 0; i < layer.in_channels; ++i)
                kernels::conv_same_kernel_grad_accum(
                    d_out, input.plane(i), h, w, layer.kh, layer.kw,
                    &grad.w[((static_cast<size_t>(o) * layer.in_channels + i) * layer.kh) *
                            layer.kw]);
        }
        if (l == 0)
            break;

        FeatureMap d_input(layer.in_channels, h, w);
        for (int o = 0; o < layer.out_channels; ++o)
            for (int i = 0; i < layer.in_channels; ++i)
                kernels::conv_same_adjoint_accum(
                    delta.plane(o), h, w,
                    &layer.w[((static_cast<size_t>(o) * layer.in_channels + i) * layer.kh) *
                             layer.kw],
                    layer.kh, layer.kw, d_input.plane(i));
        // through the ReLU of layer l-1
        const FeatureMap& pre = trace.pre[l - 1];
        for (size_t i = 0; i < d_input.v.size(); ++i)
            if (pre.v[i] <= 0.0)
                d_input.v[i] = 0.0;
        delta = std::move(d_input);
    }
    return result;
}

void sgd_step(NetworkParams& params, const Gradients& grads, double eta,
              double weight_decay) {
    if (grads.layers.size() != params.layers.size() ||
        grads.shapes.size() != params.learnable_shapes.shapes.size())
        throw std::invalid_argument("sgd_step: gradient/parameter structure mismatch");

    for (size_t l = 0; l < params.layers.size(); ++l) {
        ConvLayer& layer = params.layers[l];
        const ConvLayer& g = grads.layers[l];
        if (g.w.size() != layer.w.size() || g.b.size() != layer.b.size())
            throw std::invalid_argument("sgd_step: layer " + std::to_string(l) +
                                        " shape mismatch");
        for (size_t i = 0; i < layer.w.size(); ++i)
            layer.w[i] -= eta * (g.w[i] + weight_decay * layer.w[i]);
        for (size_t i = 0; i < layer.b.size(); ++i)
            layer.b[i] -= eta * (g.b[i] + weight_decay * layer.b[i]);
    }
    for (size_t s = 0; s < grads.shapes.size(); ++s) {
        Grid2D& shape = params.learnable_shapes.shapes[s];
        if (!shape.same_shape(grads.shapes[s]))
            throw std::invalid_argument("sgd_step: shape gradient dimension mismatch");
        for (size_t i = 0; i < shape.size(); ++i)
            shape[i] -= eta * grads.shapes[s][i];
    }
}

TrainResult train(const std::vector<TrainingTuple>& dataset, const NetworkConfig& config,
                  const HyperParams& hyper, TrainMode mode, const ShapeSet* prior_shapes) {
    if (dataset.empty())
        throw std::invalid_argument("train: empty dataset");

    HyperParams hp = hyper;
    if (mode == TrainMode::np || mode == TrainMode::wnp) {
        hp.lambda = 0.0;
        hp.gamma = 0.0;
    } else if (mode == TrainMode::sp) {
        hp.gamma = 0.0;
        if (!prior_shapes || prior_shapes->shapes.empty())
            throw std::invalid_argument("train: sp mode requires a prior shape set");
    } else if (mode == TrainMode::tsp) {
        if (!prior_shapes || prior_shapes->shapes.empty())
            throw std::invalid_argument("train: tsp mode requires a reference shape set");
    }
    hp.validate();

    TrainResult result;
    result.params = init_params(config, hp.seed);
    if (mode == TrainMode::tsp) {
        result.params.learnable_shapes = *prior_shapes;
        result.params.learnable_shapes.kind = ShapeKind::learnable;
    }

    const int n = static_cast<int>(dataset.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);

    double eta = hp.eta;
    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double epoch_mse = 0.0, epoch_sp = 0.0, epoch_ssim = 0.0;
        int steps = 0;
        for (int start = 0; start < n; start += hp.batch_size) {
            const int count = std::min(hp.batch_size, n - start);
            std::vector<BackwardResult> per_sample(count);
            try {
                run_parallel(count, hp.threads, [&](int k) {
                    const TrainingTuple& t = dataset[order[start + k]];
                    per_sample[k] = backward(t.x, t.y, t.x_edge, result.params,
                                             prior_shapes, hp, mode);
                });
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("train: diverged at epoch " +
                                         std::to_string(epoch) + " (" + e.what() + ")");
            }

            // fixed-order reduction keeps training bitwise deterministic
            Gradients batch = make_zero_grads(result.params);
            const double inv = 1.0 / count;
            double batch_mse = 0.0, batch_sp = 0.0;
            for (int k = 0; k < count; ++k) {
                // per-sample grads carry the shape-learning term too; average
                // keeps it applied exactly once per step
                accumulate_grads(batch, per_sample[k].grads, inv);
                batch_mse += per_sample[k].loss.mse;
                batch_sp += per_sample[k].loss.sp;
            }
            const double step_ssim = count > 0 ? per_sample[0].loss.ssim : 0.0;
            if (!std::isfinite(batch_mse) || !std::isfinite(batch_sp) ||
                !std::isfinite(step_ssim))
                throw std::runtime_error("train: loss diverged at epoch " +
                                         std::to_string(epoch));

            sgd_step(result.params, batch, eta, hp.weight_decay);
            epoch_mse += batch_mse;
            epoch_sp += batch_sp;
            epoch_ssim += step_ssim;
            ++steps;
        }

        EpochLoss entry;
        entry.epoch = epoch;
        entry.mse = epoch_mse / n;
        entry.sp = epoch_sp / n;
        entry.ssim = steps > 0 ? epoch_ssim / steps : 0.0;
        entry.total = entry.mse + entry.sp + entry.ssim;
        result.history.push_back(entry);

        if (epoch % hp.lr_decay_interval == 0)
            eta *= hp.lr_decay;
    }
    return result;
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params) {
    params.validate();
    audit::record(path);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(17);

    out << "nucdet-checkpoint 1\n";
    out << "depth " << params.config.depth << " channels " << params.config.channels << "\n";
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const ConvLayer& layer = params.layers[l];
        out << "layer " << l << " " << layer.out_channels << " " << layer.in_channels << " "
            << layer.kh << " " << layer.kw << "\n";
        for (size_t i = 0; i < layer.w.size(); ++i)
            out << layer.w[i] << (i + 1 == layer.w.size() ? "\n" : " ");
        for (size_t i = 0; i < layer.b.size(); ++i)
            out << layer.b[i] << (i + 1 == layer.b.size() ? "\n" : " ");
    }
    const ShapeSet& shapes = params.learnable_shapes;
    out << "shapes " << shapes.count() << " " << shapes.side() << "\n";
    for (const Grid2D& s : shapes.shapes)
        for (size_t i = 0; i < s.size(); ++i)
            out << s[i] << (i + 1 == s.size() ? "\n" : " ");
    out << "end\n";
    if (!out)
        throw std::runtime_error(path.string() + ": write failed");
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
    audit::record(path);
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path.string() + ": cannot open");

    std::string magic;
    int version;
    in >> magic >> version;
    if (magic != "nucdet-checkpoint" || version != 1)
        throw std::runtime_error(path.string() + ": not a checkpoint file");

    NetworkParams params;
    std::string token;
    in >> token;
    if (token != "depth")
        throw std::runtime_error(path.string() + ": malformed checkpoint");
    in >> params.config.depth >> token >> params.config.channels;
    params.config.validate();

    for (int l = 0; l < params.config.depth; ++l) {
        int idx;
        ConvLayer layer;
        in >> token >> idx >> layer.out_channels >> layer.in_channels >> layer.kh >> layer.kw;
        if (token != "layer" || idx != l)
            throw std::runtime_error(path.string() + ": malformed layer header");
        layer.w.resize(static_cast<size_t>(layer.out_channels) * layer.in_channels *
                       layer.kh * layer.kw);
        layer.b.resize(layer.out_channels);
        for (double& v : layer.w)
            in >> v;
        for (double& v : layer.b)
            in >> v;
        params.layers.push_back(std::move(layer));
    }
    int shape_count, side;
    in >> token >> shape_count >> side;
    if (token != "shapes")
        throw std::runtime_error(path.string() + ": malformed shape header");
    params.learnable_shapes.kind = ShapeKind::learnable;
    for (int s = 0; s < shape_count; ++s) {
        Grid2D g(side, side);
        for (size_t i = 0; i < g.size(); ++i)
            in >> g[i];
        params.learnable_shapes.shapes.push_back(std::move(g));
    }
    in >> token;
    if (!in || token != "end")
        throw std::runtime_error(path.string() + ": truncated checkpoint");
    params.validate();
    return params;
}

void write_loss_history(const std::filesystem::path& path,
                        const std::vector<EpochLoss>& history) {
    audit::record(path);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(17);
    out << "epoch,loss_mse,loss_sp,loss_ssim,total\n";
    for (const EpochLoss& e : history)
        out << e.epoch << "," << e.mse << "," << e.sp << "," << e.ssim << "," << e.total
            << "\n";
}

}  // namespace nucdet
