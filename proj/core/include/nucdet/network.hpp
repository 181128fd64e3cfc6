#ifndef NUCDET_NETWORK_HPP
#define NUCDET_NETWORK_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nucdet/data.hpp"
#include "nucdet/grid.hpp"
#include "nucdet/shapes.hpp"

namespace nucdet {

/// Layer stack: a 5x5 input layer, depth-2 3x3 hidden layers and a linear
/// 3x3 single-channel output layer, all SAME padding, ReLU between.
struct NetworkConfig {
    int depth = 7;
    int channels = 64;

    static constexpr int first_kernel = 5;
    static constexpr int mid_kernel = 3;

    void validate() const;
};

struct ConvLayer {
    int out_channels = 0, in_channels = 0, kh = 0, kw = 0;
    std::vector<double> w;  // [out][in][kh][kw]
    std::vector<double> b;  // [out]

    double& wat(int o, int i, int r, int c) {
        return w[((static_cast<size_t>(o) * in_channels + i) * kh + r) * kw + c];
    }
    double wat(int o, int i, int r, int c) const {
        return w[((static_cast<size_t>(o) * in_channels + i) * kh + r) * kw + c];
    }
};

/// All trainable state: the conv stack plus, when shapes are being learned,
/// the learnable shape set.
struct NetworkParams {
    NetworkConfig config;
    std::vector<ConvLayer> layers;
    ShapeSet learnable_shapes;  // empty unless shape learning is active

    bool has_learnable_shapes() const { return !learnable_shapes.shapes.empty(); }
    void validate() const;
};

/// Zero-mean Gaussian weights scaled by 1/sqrt(fan-in), zero biases,
/// reproducible for a given seed.
NetworkParams init_params(const NetworkConfig& config, uint64_t seed);

struct HyperParams {
    double lambda = 0.0;       // shape-prior weight
    double gamma = 0.0;        // shape-learning weight
    int pool_window = 11;      // p
    double tp = 0.2;           // pre-pool threshold T_p
    double eta = 1e-3;
    double weight_decay = 1e-5;
    double lr_decay = 0.75;
    int lr_decay_interval = 10;  // epochs between decays
    int epochs = 200;
    int batch_size = 16;
    uint64_t seed = 0;
    int threads = 0;  // per-batch worker threads; 0 = hardware concurrency

    // weighted-MSE settings (wnp mode)
    double w_fp = 0.7;
    double w_fn = 0.3;
    int region_radius = 6;         // dilation radius of the FP/FN error masks
    double match_threshold = 0.5;  // detection threshold for in-training matching

    SsimConfig ssim;  // used by the shape-learning term

    void validate() const;
};

/// The ablation ladder: plain MSE, weighted MSE, fixed shape prior, and
/// tunable shape prior with shape learning.
enum class TrainMode { np, wnp, sp, tsp };

TrainMode parse_mode(const std::string& name);
std::string mode_name(TrainMode mode);

/// Inference: the conv stack alone. Consumes only the image and the
/// parameters; edge maps and shape sets have no path into this function.
Grid2D forward(const Grid2D& x, const NetworkParams& params);

/// Sum of squared differences (un-normalized).
double mse_loss(const Grid2D& yhat, const Grid2D& y);

/// Squared error split by matching outcome: w_fp weighs error inside disks
/// of region_radius around false-positive detections, w_fn around missed
/// centers. Weights must lie in [0,1] and sum to 1.
double weighted_mse_loss(const Grid2D& yhat, const Grid2D& y,
                         const std::vector<Pixel>& detections,
                         const std::vector<Pixel>& gt_centers, double w_fp, double w_fn,
                         int region_radius);

/// Shape-prior regularizer: threshold the output at tp, max-pool the result
/// (stride 1, window p), mask the edge map with the window map, convolve the
/// masked edges with every shape, return -lambda times the summed squared
/// norms. More detection mass inside nucleus boundaries drives it more
/// negative.
double shape_prior_loss(const Grid2D& yhat, const Grid2D& edge, const ShapeSet& shapes,
                        double lambda, int pool_window, double tp);

struct LossParts {
    double mse = 0.0, sp = 0.0, ssim = 0.0;
    double total() const { return mse + sp + ssim; }
};

/// Full objective on one instance: MSE + shape prior + shape learning.
/// gamma = 0 drops the learning term; lambda = gamma = 0 reduces to plain
/// MSE. With gamma > 0 the prior term convolves the learnable shapes and the
/// learning term anchors them to the reference set.
LossParts total_loss(const Grid2D& x, const Grid2D& y, const Grid2D& edge,
                     const NetworkParams& params, const ShapeSet* reference,
                     const HyperParams& hp);

struct Gradients {
    std::vector<ConvLayer> layers;  // same dimensions, values are dL/dW, dL/db
    std::vector<Grid2D> shapes;     // per learnable shape; empty when not learning
};

struct BackwardResult {
    Gradients grads;
    LossParts loss;
};

/// Reverse-mode gradients of the mode's objective on one instance, for every
/// weight, bias and (when learning) shape entry.
BackwardResult backward(const Grid2D& x, const Grid2D& y, const Grid2D& edge,
                        const NetworkParams& params, const ShapeSet* reference,
                        const HyperParams& hp, TrainMode mode = TrainMode::sp);

/// Vanilla SGD: p -= eta * (g + weight_decay * p) for weights and biases;
/// learnable shapes update without decay (they are anchored by the
/// shape-learning term instead).
void sgd_step(NetworkParams& params, const Gradients& grads, double eta,
              double weight_decay);

struct EpochLoss {
    int epoch;
    double mse, sp, ssim, total;
};

struct TrainResult {
    NetworkParams params;
    std::vector<EpochLoss> history;
};

/// Seeded minibatch SGD. Per-sample gradients within a batch may be computed
/// on worker threads but are accumulated in sample order, so a fixed seed
/// gives bitwise-identical parameters. prior_shapes carries the fixed prior
/// set (sp) or the reference set (tsp, also the learnable initializer).
TrainResult train(const std::vector<TrainingTuple>& dataset, const NetworkConfig& config,
                  const HyperParams& hp, TrainMode mode, const ShapeSet* prior_shapes);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(const std::filesystem::path& path);

/// CSV: epoch, mse, shape-prior, shape-learning, total.
void write_loss_history(const std::filesystem::path& path,
                        const std::vector<EpochLoss>& history);

}  // namespace nucdet

#endif
