#ifndef NUCDET_SHAPES_HPP
#define NUCDET_SHAPES_HPP

#include <filesystem>
#include <vector>

#include "nucdet/grid.hpp"
#include "nucdet/steerable.hpp"

namespace nucdet {

/// SSIM parameters for shape-to-shape comparison: sliding window side (odd)
/// and the usual positive stabilizers, defaulted for dynamic range 1.
struct SsimConfig {
    int window_size = 7;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;

    void validate() const;
};

enum class ShapeKind { expert, reference, learnable };

/// Ordered set of square, equal-sided shape grids. Expert and reference sets
/// are binary boundary masks; learnable shapes are unconstrained reals.
struct ShapeSet {
    std::vector<Grid2D> shapes;
    ShapeKind kind = ShapeKind::expert;

    int count() const { return static_cast<int>(shapes.size()); }
    int side() const { return shapes.empty() ? 0 : shapes.front().height(); }

    /// Checks square members of one common side length.
    void validate() const;
};

/// Mean local SSIM between two equal-sized grids: per-window luminance and
/// structure terms with population statistics, averaged over all stride-1
/// window positions. Symmetric, 1 at identity.
double ssim(const Grid2D& a, const Grid2D& b, const SsimConfig& config = {});

/// Gradient of ssim(sl, sr) w.r.t. every entry of sl.
Grid2D ssim_gradient(const Grid2D& sl, const Grid2D& sr, const SsimConfig& config = {});

/// Mean local CW-SSIM between two equal-sized grids: the complex-coefficient
/// similarity index evaluated per window of each steerable subband, averaged
/// over windows and subbands. Symmetric, 1 at identity, insensitive to small
/// shifts.
double cw_ssim(const Grid2D& a, const Grid2D& b, const CwSsimConfig& config = {});

/// Same, from precomputed subband coefficients (both from an identically
/// configured transform).
double cw_ssim_from_coeffs(const std::vector<Subband>& ca, const std::vector<Subband>& cb,
                           const CwSsimConfig& config);

/// Full pairwise CW-SSIM matrix of one set (symmetric, unit diagonal).
std::vector<std::vector<double>> cw_ssim_matrix(const ShapeSet& set,
                                                const CwSsimConfig& config = {});

/// Greedy redundancy elimination: repeatedly take the first remaining shape,
/// group every remaining shape whose CW-SSIM against it exceeds the
/// threshold, keep the group's first shape as representative, drop the rest.
/// Output is the reference set (cardinality Q <= N).
ShapeSet eliminate_shapes(const ShapeSet& expert, double threshold = 0.8,
                          const CwSsimConfig& config = {});

/// Shape-learning regularizer: -gamma * sum over all learnable x reference
/// pairs of their SSIM. Both sets must have equal cardinality.
double shape_learning_loss(const ShapeSet& learnable, const ShapeSet& reference,
                           double gamma, const SsimConfig& config = {});

/// Per-learnable-shape gradients of shape_learning_loss.
std::vector<Grid2D> shape_learning_gradient(const ShapeSet& learnable,
                                            const ShapeSet& reference, double gamma,
                                            const SsimConfig& config = {});

/// Loads every image file in a directory (sorted by filename) as one shape.
/// Expert/reference sets are binarized at 0.5; learnable sets keep raw values.
ShapeSet load_shape_dir(const std::filesystem::path& dir, ShapeKind kind);

/// Writes one PGM per shape: shape_000.pgm, shape_001.pgm, ...
void save_shape_dir(const std::filesystem::path& dir, const ShapeSet& set);

}  // namespace nucdet

#endif
