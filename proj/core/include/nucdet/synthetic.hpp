#ifndef NUCDET_SYNTHETIC_HPP
#define NUCDET_SYNTHETIC_HPP

#include <filesystem>

#include "nucdet/grid.hpp"
#include "nucdet/rng.hpp"
#include "nucdet/shapes.hpp"

namespace nucdet {

/// Generator for the desk-scale synthetic dataset: bright noisy elliptical
/// nuclei on a textured background, plus dot/bar clutter that produces edges
/// and local maxima without enclosing boundaries.
struct SyntheticConfig {
    int images = 60;
    int size = 128;  // square images
    int min_nuclei = 10;
    int max_nuclei = 25;
    double min_radius = 3.5;
    double max_radius = 6.0;
    double noise_sigma = 0.05;
    int clutter = 16;  // distractors per image
    uint64_t seed = 7;
    int train_count = 40;  // manifest split; the rest are test images
    int shape_side = 19;   // expert shape canvas

    void validate() const;
};

struct SyntheticImage {
    Grid2D image;
    std::vector<Pixel> centers;
};

SyntheticImage synth_image(Rng& rng, const SyntheticConfig& config);

/// Hand-drawn-style expert prior: elliptical boundary rings spanning the
/// generator's radius range, with deliberate near-duplicates so pruning has
/// redundancy to remove.
ShapeSet synthetic_expert_shapes(const SyntheticConfig& config);

/// Writes images/, annotations/, shapes/ and manifest.txt under out_dir.
void write_synthetic_dataset(const std::filesystem::path& out_dir,
                             const SyntheticConfig& config);

}  // namespace nucdet

#endif
