// nucdet: train and evaluate shape-prior-regularized nucleus detectors.
//
// Subcommands: synth, edges, prune-shapes, train, detect, eval, pr-curve.
// Exit codes: 0 success, 1 runtime failure, 2 usage/input error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "nucdet/config.hpp"
#include "nucdet/data.hpp"
#include "nucdet/detect_eval.hpp"
#include "nucdet/edges.hpp"
#include "nucdet/image_io.hpp"
#include "nucdet/network.hpp"
#include "nucdet/shapes.hpp"
#include "nucdet/synthetic.hpp"

namespace fs = std::filesystem;
using namespace nucdet;

namespace {

// Input/usage problems exit with 2; anything thrown during the run exits 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p))
        throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p))
        throw UsageError(std::string(what) + " not found: " + p.string());
}

RunConfig config_or_default(const std::string& path) {
    if (path.empty())
        return RunConfig{};
    require_file(path, "config file");
    try {
        return load_run_config(path);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

std::vector<double> threshold_grid(double step) {
    std::vector<double> ts;
    for (double t = 0.0; t < 1.0 + 1e-12; t += step)
        ts.push_back(std::min(t, 1.0));
    if (ts.back() < 1.0)
        ts.push_back(1.0);
    return ts;
}

int cmd_edges(const std::string& image_path, const std::string& config_path,
              std::string out_path) {
    require_file(image_path, "image");
    const RunConfig cfg = config_or_default(config_path);
    const Grid2D image = read_image(image_path);
    const Grid2D edge = canny(image, cfg.canny);
    if (out_path.empty())
        out_path = (fs::path(image_path).parent_path() /
                    (fs::path(image_path).stem().string() + "_edges.pgm"))
                       .string();
    write_image_pgm(out_path, edge);
    std::cout << "edges: " << out_path << "\n";
    return 0;
}

int cmd_prune_shapes(const std::string& shape_dir, const std::string& config_path,
                     std::string out_dir, std::string matrix_path, double threshold_flag) {
    require_dir(shape_dir, "shape directory");
    const RunConfig cfg = config_or_default(config_path);
    const double threshold = threshold_flag >= 0.0 ? threshold_flag : cfg.prune_threshold;

    const ShapeSet expert = load_shape_dir(shape_dir, ShapeKind::expert);
    const auto matrix = cw_ssim_matrix(expert, cfg.cwssim);
    const ShapeSet reference = eliminate_shapes(expert, threshold, cfg.cwssim);

    if (out_dir.empty())
        out_dir = shape_dir + "_reference";
    save_shape_dir(out_dir, reference);

    if (matrix_path.empty())
        matrix_path = (fs::path(out_dir) / "cwssim_matrix.csv").string();
    audit::record(matrix_path);
    std::ofstream mcsv(matrix_path);
    if (!mcsv)
        throw std::runtime_error(matrix_path + ": cannot open for writing");
    mcsv << std::setprecision(17);
    for (const auto& row : matrix) {
        for (size_t j = 0; j < row.size(); ++j)
            mcsv << row[j] << (j + 1 == row.size() ? "\n" : ",");
    }

    std::cout << "pruned " << expert.count() << " shapes to " << reference.count()
              << " representatives: " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& mode_name_arg,
              const std::string& config_path, const std::string& shape_dir,
              std::string checkpoint_path, std::string loss_csv,
              std::string learned_dir) {
    require_file(manifest_path, "manifest");
    TrainMode mode;
    try {
        mode = parse_mode(mode_name_arg);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const RunConfig cfg = config_or_default(config_path);

    ShapeSet prior;
    const bool needs_shapes = mode == TrainMode::sp || mode == TrainMode::tsp;
    if (needs_shapes) {
        if (shape_dir.empty())
            throw UsageError("mode '" + mode_name_arg + "' requires --shapes");
        require_dir(shape_dir, "shape directory");
        prior = load_shape_dir(shape_dir, mode == TrainMode::tsp ? ShapeKind::reference
                                                                 : ShapeKind::expert);
    } else if (!shape_dir.empty()) {
        throw UsageError("mode '" + mode_name_arg + "' does not take --shapes");
    }

    const Manifest manifest = load_manifest(manifest_path);
    require_dir(manifest.images_dir, "images directory");
    require_dir(manifest.annotations_dir, "annotations directory");
    const Dataset ds = load_dataset(manifest.images_dir, manifest.annotations_dir, cfg.canny,
                                    manifest.split, manifest.seed, cfg.label, cfg.patch_size,
                                    cfg.patch_stride);
    std::cout << "training tuples: " << ds.train.size() << " (void-filtered), mode "
              << mode_name_arg << "\n";

    const TrainResult result =
        train(ds.train, cfg.net, cfg.train, mode, needs_shapes ? &prior : nullptr);

    if (checkpoint_path.empty())
        checkpoint_path = "model_" + mode_name_arg + ".ckpt";
    save_checkpoint(checkpoint_path, result.params);
    if (loss_csv.empty())
        loss_csv = fs::path(checkpoint_path).replace_extension(".loss.csv").string();
    write_loss_history(loss_csv, result.history);

    if (mode == TrainMode::tsp) {
        if (learned_dir.empty())
            learned_dir = fs::path(checkpoint_path).replace_extension("").string() + "_shapes";
        save_shape_dir(learned_dir, result.params.learnable_shapes);
        std::cout << "learned shapes: " << learned_dir << "\n";
    }
    std::cout << "checkpoint: " << checkpoint_path << "\nloss history: " << loss_csv << "\n";
    return 0;
}

int cmd_detect(const std::string& checkpoint_path, const std::string& image_path,
               const std::string& config_path, std::string out_path) {
    require_file(checkpoint_path, "checkpoint");
    require_file(image_path, "image");
    const RunConfig cfg = config_or_default(config_path);

    const NetworkParams params = load_checkpoint(checkpoint_path);
    if (!config_path.empty() &&
        (cfg.net.depth != params.config.depth || cfg.net.channels != params.config.channels))
        throw UsageError("config net " + std::to_string(cfg.net.depth) + "x" +
                         std::to_string(cfg.net.channels) + " does not match checkpoint " +
                         std::to_string(params.config.depth) + "x" +
                         std::to_string(params.config.channels));

    const Grid2D image = read_image(image_path);
    const Grid2D yhat = forward(image, params);
    const std::vector<Pixel> centers = detect(yhat, cfg.detect);

    if (out_path.empty())
        out_path = (fs::path(image_path).parent_path() /
                    (fs::path(image_path).stem().string() + "_detections.csv"))
                       .string();
    write_centers(out_path, centers);
    std::cout << "detections: " << centers.size() << " -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& detections_dir, const std::string& gt_dir,
             const std::string& config_path, std::string out_path) {
    require_dir(detections_dir, "detections directory");
    require_dir(gt_dir, "ground-truth directory");
    const RunConfig cfg = config_or_default(config_path);

    auto list_csvs = [](const fs::path& dir) {
        std::set<std::string> names;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".csv")
                names.insert(entry.path().filename().string());
        return names;
    };
    const auto det_names = list_csvs(detections_dir);
    const auto gt_names = list_csvs(gt_dir);
    if (det_names != gt_names) {
        std::string offenders;
        for (const auto& n : det_names)
            if (!gt_names.count(n))
                offenders += " " + n + "(no ground truth)";
        for (const auto& n : gt_names)
            if (!det_names.count(n))
                offenders += " " + n + "(no detections)";
        throw UsageError("detections/ground-truth filename mismatch:" + offenders);
    }
    if (det_names.empty())
        throw UsageError("no detection CSVs in " + detections_dir);

    if (out_path.empty())
        out_path = "eval.csv";
    audit::record(out_path);
    std::ofstream out(out_path);
    if (!out)
        throw std::runtime_error(out_path + ": cannot open for writing");
    out << std::setprecision(17);
    out << "image,tp,fp,fn,precision,recall,f1\n";

    MatchCounts pooled;
    for (const auto& name : det_names) {
        const auto detections = read_centers(fs::path(detections_dir) / name);
        const auto gt = read_centers(fs::path(gt_dir) / name);
        const MatchCounts counts = match_golden(detections, gt, cfg.eval);
        const MatchReport rep = prf1(counts);
        out << name << "," << rep.tp << "," << rep.fp << "," << rep.fn << "," << rep.precision
            << "," << rep.recall << "," << rep.f1 << "\n";
        pooled.tp += counts.tp;
        pooled.fp += counts.fp;
        pooled.fn += counts.fn;
    }
    const MatchReport agg = prf1(pooled);
    out << "aggregate," << agg.tp << "," << agg.fp << "," << agg.fn << "," << agg.precision
        << "," << agg.recall << "," << agg.f1 << "\n";
    std::cout << "aggregate precision=" << agg.precision << " recall=" << agg.recall
              << " f1=" << agg.f1 << " -> " << out_path << "\n";
    return 0;
}

int cmd_pr_curve(const std::string& checkpoint_path, const std::string& manifest_path,
                 const std::string& config_path, std::string out_path) {
    require_file(checkpoint_path, "checkpoint");
    require_file(manifest_path, "manifest");
    const RunConfig cfg = config_or_default(config_path);

    const NetworkParams params = load_checkpoint(checkpoint_path);
    const Manifest manifest = load_manifest(manifest_path);
    require_dir(manifest.images_dir, "images directory");
    require_dir(manifest.annotations_dir, "annotations directory");
    const std::vector<TestImage> test = load_test_partition(
        manifest.images_dir, manifest.annotations_dir, manifest.split, manifest.seed);
    if (test.empty())
        throw UsageError("manifest split leaves no test images");

    std::vector<Grid2D> yhats;
    std::vector<std::vector<Pixel>> gts;
    for (const TestImage& t : test) {
        yhats.push_back(forward(t.image, params));
        gts.push_back(t.centers);
    }
    const auto curve =
        pr_curve(yhats, gts, cfg.eval, threshold_grid(cfg.pr_step), cfg.detect.nms_radius);

    if (out_path.empty())
        out_path = "pr_curve.csv";
    audit::record(out_path);
    std::ofstream out(out_path);
    if (!out)
        throw std::runtime_error(out_path + ": cannot open for writing");
    out << std::setprecision(17);
    out << "threshold,precision,recall,f1\n";
    for (const PrPoint& p : curve)
        out << p.threshold << "," << p.precision << "," << p.recall << "," << p.f1 << "\n";

    const PrPoint best = best_f1(curve);
    std::cout << "best_threshold=" << best.threshold << " precision=" << best.precision
              << " recall=" << best.recall << " f1=" << best.f1 << " -> " << out_path << "\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int images, int size, int train_count,
              uint64_t seed, int min_nuclei, int max_nuclei, int clutter) {
    SyntheticConfig cfg;
    cfg.images = images;
    cfg.size = size;
    cfg.train_count = train_count > 0 ? train_count : std::max(1, images * 2 / 3);
    cfg.seed = seed;
    cfg.min_nuclei = min_nuclei;
    cfg.max_nuclei = max_nuclei;
    cfg.clutter = clutter;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    write_synthetic_dataset(out_dir, cfg);
    std::cout << "synthetic dataset: " << out_dir << " (" << cfg.images << " images, "
              << cfg.train_count << " train)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shape-prior-regularized cell nucleus detection"};
    app.require_subcommand(1);

    std::string image_path, config_path, out_path;
    auto* edges_cmd = app.add_subcommand("edges", "compute a binary edge map for an image");
    edges_cmd->add_option("image", image_path, "grayscale image (PGM/PPM)")->required();
    edges_cmd->add_option("--config", config_path, "run configuration file");
    edges_cmd->add_option("--out", out_path, "output edge image path");

    std::string shape_dir, matrix_path;
    double prune_threshold = -1.0;
    auto* prune_cmd =
        app.add_subcommand("prune-shapes", "eliminate redundant shapes via CW-SSIM");
    prune_cmd->add_option("shapes", shape_dir, "directory of shape images")->required();
    prune_cmd->add_option("--config", config_path, "run configuration file");
    prune_cmd->add_option("--out", out_path, "output directory for representatives");
    prune_cmd->add_option("--matrix", matrix_path, "pairwise CW-SSIM matrix CSV path");
    prune_cmd->add_option("--threshold", prune_threshold, "grouping threshold (default 0.8)");

    std::string manifest_path, mode_arg, train_shapes, loss_csv, learned_dir;
    auto* train_cmd = app.add_subcommand("train", "train a detector (np|wnp|sp|tsp)");
    train_cmd->add_option("manifest", manifest_path, "dataset manifest")->required();
    train_cmd->add_option("--mode", mode_arg, "np, wnp, sp or tsp")->required();
    train_cmd->add_option("--config", config_path, "run configuration file");
    train_cmd->add_option("--shapes", train_shapes,
                          "shape directory (prior for sp, reference for tsp)");
    train_cmd->add_option("--out", out_path, "checkpoint output path");
    train_cmd->add_option("--loss-csv", loss_csv, "per-epoch loss CSV path");
    train_cmd->add_option("--learned-shapes", learned_dir,
                          "output directory for learned shapes (tsp)");

    std::string checkpoint_path;
    auto* detect_cmd = app.add_subcommand("detect", "detect nucleus centers in an image");
    detect_cmd->add_option("checkpoint", checkpoint_path, "trained checkpoint")->required();
    detect_cmd->add_option("image", image_path, "input image")->required();
    detect_cmd->add_option("--config", config_path, "run configuration file");
    detect_cmd->add_option("--out", out_path, "detections CSV path");

    std::string detections_dir, gt_dir;
    auto* eval_cmd = app.add_subcommand("eval", "score detection CSVs against ground truth");
    eval_cmd->add_option("detections", detections_dir, "directory of detection CSVs")
        ->required();
    eval_cmd->add_option("ground-truth", gt_dir, "directory of annotation CSVs")->required();
    eval_cmd->add_option("--config", config_path, "run configuration file");
    eval_cmd->add_option("--out", out_path, "metrics CSV path");

    auto* pr_cmd = app.add_subcommand("pr-curve", "threshold sweep on the test partition");
    pr_cmd->add_option("checkpoint", checkpoint_path, "trained checkpoint")->required();
    pr_cmd->add_option("manifest", manifest_path, "dataset manifest")->required();
    pr_cmd->add_option("--config", config_path, "run configuration file");
    pr_cmd->add_option("--out", out_path, "curve CSV path");

    int synth_images = 60, synth_size = 128, synth_train = 0;
    int synth_min = 10, synth_max = 25, synth_clutter = 16;
    uint64_t synth_seed = 7;
    auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic desk-scale dataset");
    synth_cmd->add_option("out", out_path, "output dataset directory")->required();
    synth_cmd->add_option("--images", synth_images, "image count");
    synth_cmd->add_option("--size", synth_size, "image side length");
    synth_cmd->add_option("--train", synth_train, "training image count (default 2/3)");
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    synth_cmd->add_option("--min-nuclei", synth_min, "minimum nuclei per image");
    synth_cmd->add_option("--max-nuclei", synth_max, "maximum nuclei per image");
    synth_cmd->add_option("--clutter", synth_clutter, "distractors per image");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (edges_cmd->parsed())
            return cmd_edges(image_path, config_path, out_path);
        if (prune_cmd->parsed())
            return cmd_prune_shapes(shape_dir, config_path, out_path, matrix_path,
                                    prune_threshold);
        if (train_cmd->parsed())
            return cmd_train(manifest_path, mode_arg, config_path, train_shapes, out_path,
                             loss_csv, learned_dir);
        if (detect_cmd->parsed())
            return cmd_detect(checkpoint_path, image_path, config_path, out_path);
        if (eval_cmd->parsed())
            return cmd_eval(detections_dir, gt_dir, config_path, out_path);
        if (pr_cmd->parsed())
            return cmd_pr_curve(checkpoint_path, manifest_path, config_path, out_path);
        if (synth_cmd->parsed())
            return cmd_synth(out_path, synth_images, synth_size, synth_train, synth_seed,
                             synth_min, synth_max, synth_clutter);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
