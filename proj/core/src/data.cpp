#include "nucdet/data.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "nucdet/image_io.hpp"
#include "nucdet/numerics.hpp"
#include "nucdet/rng.hpp"

namespace nucdet {

std::vector<Pixel> read_centers(const std::filesystem::path& path) {
    audit::record(path);
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path.string() + ": cannot open");

    std::vector<Pixel> centers;
    std::set<std::pair<int, int>> seen;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (first && line == "row,col") {
            first = false;
            continue;
        }
        first = false;
        std::istringstream ls(line);
        int row, col;
        char comma;
        if (!(ls >> row >> comma >> col) || comma != ',')
            throw std::runtime_error(path.string() + ": malformed center line '" + line + "'");
        if (!seen.insert({row, col}).second)
            throw std::runtime_error(path.string() + ": duplicate center " +
                                     std::to_string(row) + "," + std::to_string(col));
        centers.push_back({row, col});
    }
    return centers;
}

void write_centers(const std::filesystem::path& path, const std::vector<Pixel>& centers) {
    audit::record(path);
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error(path.string() + ": cannot open for writing");
    out << "row,col\n";
    for (const Pixel& p : centers)
        out << p.row << "," << p.col << "\n";
}

Grid2D synth_labels(const std::vector<Pixel>& centers, int height, int width,
                    const LabelConfig& config) {
    const Grid2D kernel = gaussian_kernel(config.sigma, config.ksize);
    const int radius = config.ksize / 2;

    Grid2D y(height, width, 0.0);
    for (const Pixel& p : centers) {
        if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width)
            throw std::invalid_argument("synth_labels: center (" + std::to_string(p.row) +
                                        "," + std::to_string(p.col) + ") out of bounds");
        for (int dr = -radius; dr <= radius; ++dr)
            for (int dc = -radius; dc <= radius; ++dc) {
                const int r = p.row + dr, c = p.col + dc;
                if (y.in_bounds(r, c))
                    y(r, c) = std::max(y(r, c), kernel(dr + radius, dc + radius));
            }
    }
    return y;
}

std::vector<TrainingTuple> extract_patches(const Grid2D& x, const Grid2D& x_edge,
                                           const Grid2D& y, int patch, int stride) {
    if (!x.same_shape(x_edge) || !x.same_shape(y))
        throw std::invalid_argument("extract_patches: misaligned inputs");
    if (patch < 1 || stride < 1)
        throw std::invalid_argument("extract_patches: patch and stride must be positive");
    if (x.height() < patch || x.width() < patch)
        throw std::invalid_argument("extract_patches: image smaller than patch");

    std::vector<TrainingTuple> tuples;
    for (int r0 = 0; r0 + patch <= x.height(); r0 += stride)
        for (int c0 = 0; c0 + patch <= x.width(); c0 += stride) {
            TrainingTuple t{Grid2D(patch, patch), Grid2D(patch, patch), Grid2D(patch, patch)};
            for (int r = 0; r < patch; ++r)
                for (int c = 0; c < patch; ++c) {
                    t.x(r, c) = x(r0 + r, c0 + c);
                    t.x_edge(r, c) = x_edge(r0 + r, c0 + c);
                    t.y(r, c) = y(r0 + r, c0 + c);
                }
            tuples.push_back(std::move(t));
        }
    return tuples;
}

std::vector<TrainingTuple> filter_void(const std::vector<TrainingTuple>& tuples) {
    std::vector<TrainingTuple> kept;
    kept.reserve(tuples.size());
    for (const TrainingTuple& t : tuples) {
        double peak = 0.0;
        for (size_t i = 0; i < t.y.size(); ++i)
            peak = std::max(peak, t.y[i]);
        if (peak >= 0.5)
            kept.push_back(t);
    }
    return kept;
}

namespace {

// Sorted filenames, seeded shuffle, exact-count check against the split.
std::vector<std::filesystem::path> split_order(const std::filesystem::path& image_dir,
                                               const std::filesystem::path& annotation_dir,
                                               const SplitSpec& split, uint64_t seed) {
    if (!std::filesystem::is_directory(image_dir))
        throw std::runtime_error(image_dir.string() + ": not a directory");
    if (split.train_count < 1 || split.test_count < 0)
        throw std::invalid_argument("load_dataset: invalid split");

    std::vector<std::filesystem::path> images;
    for (const auto& entry : std::filesystem::directory_iterator(image_dir))
        if (entry.is_regular_file())
            images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    if (images.empty())
        throw std::runtime_error(image_dir.string() + ": no images");

    const int expected = split.train_count + split.test_count;
    if (static_cast<int>(images.size()) != expected)
        throw std::runtime_error(image_dir.string() + ": found " +
                                 std::to_string(images.size()) + " images, split needs " +
                                 std::to_string(expected));

    for (const auto& img : images) {
        const auto ann = annotation_dir / (img.stem().string() + ".csv");
        if (!std::filesystem::exists(ann))
            throw std::runtime_error("missing annotation for " + img.filename().string());
    }

    Rng rng(seed);
    rng.shuffle(images);
    return images;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& image_dir,
                     const std::filesystem::path& annotation_dir,
                     const CannyConfig& canny_config, const SplitSpec& split,
                     uint64_t seed, const LabelConfig& labels, int patch, int stride) {
    const auto images = split_order(image_dir, annotation_dir, split, seed);
    const int expected = split.train_count + split.test_count;

    Dataset ds;
    for (int i = 0; i < expected; ++i) {
        const auto& img_path = images[i];
        const auto ann_path = annotation_dir / (img_path.stem().string() + ".csv");
        const Grid2D image = read_image(img_path);
        const std::vector<Pixel> centers = read_centers(ann_path);

        if (i < split.train_count) {
            const Grid2D y = synth_labels(centers, image.height(), image.width(), labels);
            const Grid2D edge = canny(image, canny_config);
            const auto tuples = filter_void(extract_patches(image, edge, y, patch, stride));
            ds.train.insert(ds.train.end(), tuples.begin(), tuples.end());
            ds.train_names.push_back(img_path.filename().string());
        } else {
            ds.test.push_back({img_path.filename().string(), image, centers});
        }
    }
    return ds;
}

std::vector<TestImage> load_test_partition(const std::filesystem::path& image_dir,
                                           const std::filesystem::path& annotation_dir,
                                           const SplitSpec& split, uint64_t seed) {
    const auto images = split_order(image_dir, annotation_dir, split, seed);

    std::vector<TestImage> test;
    for (size_t i = split.train_count; i < images.size(); ++i) {
        const auto ann_path = annotation_dir / (images[i].stem().string() + ".csv");
        test.push_back({images[i].filename().string(), read_image(images[i]),
                        read_centers(ann_path)});
    }
    return test;
}

}  // namespace nucdet
