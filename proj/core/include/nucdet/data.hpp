#ifndef NUCDET_DATA_HPP
#define NUCDET_DATA_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "nucdet/edges.hpp"
#include "nucdet/grid.hpp"

namespace nucdet {

/// Aligned training triple: image patch, its edge patch, its label patch.
struct TrainingTuple {
    Grid2D x;
    Grid2D x_edge;
    Grid2D y;
};

/// Soft-label synthesis parameters: the peak-normalized Gaussian stamped at
/// each annotated center.
struct LabelConfig {
    double sigma = 2.0;
    int ksize = 7;
};

/// Full test image kept unpatched, with its ground-truth centers.
struct TestImage {
    std::string name;
    Grid2D image;
    std::vector<Pixel> centers;
};

struct Dataset {
    std::vector<TrainingTuple> train;
    std::vector<TestImage> test;
    std::vector<std::string> train_names;
};

/// "trainN-testN" partition sizes; the directory must contain exactly
/// train_count + test_count images.
struct SplitSpec {
    int train_count = 0;
    int test_count = 0;
};

/// Reads "row,col" center lines (optional "row,col" header tolerated).
/// Coordinates are validated against bounds when stamped into a label map,
/// not here. Exact duplicates are rejected.
std::vector<Pixel> read_centers(const std::filesystem::path& path);

/// Writes centers as "row,col" lines under a "row,col" header.
void write_centers(const std::filesystem::path& path, const std::vector<Pixel>& centers);

/// Stamps the peak-normalized Gaussian at every center; overlaps combine by
/// elementwise max so labels stay in [0,1] with exact 1 at each center.
Grid2D synth_labels(const std::vector<Pixel>& centers, int height, int width,
                    const LabelConfig& config = {});

/// Aligned patch triples on a regular grid of the given stride.
std::vector<TrainingTuple> extract_patches(const Grid2D& x, const Grid2D& x_edge,
                                           const Grid2D& y, int patch = 40, int stride = 20);

/// Drops tuples whose label patch contains no annotated center (peak below
/// 0.5 under peak-normalized synthesis), preserving order.
std::vector<TrainingTuple> filter_void(const std::vector<TrainingTuple>& tuples);

/// Loads images + annotations, shuffles sorted filenames with the seed,
/// splits into train/test, synthesizes labels and edge maps for the training
/// partition and cuts it into void-filtered patches. The test partition
/// keeps full images.
Dataset load_dataset(const std::filesystem::path& image_dir,
                     const std::filesystem::path& annotation_dir,
                     const CannyConfig& canny_config, const SplitSpec& split,
                     uint64_t seed, const LabelConfig& labels = {}, int patch = 40,
                     int stride = 20);

/// Loads only the test partition (same shuffle and split as load_dataset),
/// skipping edge maps and patching entirely.
std::vector<TestImage> load_test_partition(const std::filesystem::path& image_dir,
                                           const std::filesystem::path& annotation_dir,
                                           const SplitSpec& split, uint64_t seed);

}  // namespace nucdet

#endif
