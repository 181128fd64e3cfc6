#include "nucdet/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "nucdet/image_io.hpp"

namespace nucdet {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos)
        return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int to_int(const std::string& key, const std::string& value) {
    size_t pos = 0;
    int v;
    try {
        v = std::stoi(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + value);
    }
    if (pos != value.size())
        throw std::invalid_argument("config: bad integer for '" + key + "': " + value);
    return v;
}

double to_double(const std::string& key, const std::string& value) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad number for '" + key + "': " + value);
    }
    if (pos != value.size())
        throw std::invalid_argument("config: bad number for '" + key + "': " + value);
    return v;
}

uint64_t to_u64(const std::string& key, const std::string& value) {
    size_t pos = 0;
    uint64_t v;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: bad seed for '" + key + "': " + value);
    }
    if (pos != value.size())
        throw std::invalid_argument("config: bad seed for '" + key + "': " + value);
    return v;
}

// "key = value" lines, '#' starts a comment.
void parse_kv(std::istream& in, const std::string& origin,
              const std::function<void(const std::string&, const std::string&)>& apply) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": empty key or value");
        apply(key, value);
    }
}

}  // namespace

void RunConfig::validate() const {
    canny.validate();
    if (label.sigma <= 0.0 || label.ksize < 1 || label.ksize % 2 == 0)
        throw std::invalid_argument("config: label.sigma must be > 0, label.ksize odd");
    if (patch_size < 1 || patch_stride < 1)
        throw std::invalid_argument("config: patch size and stride must be positive");
    net.validate();
    train.validate();
    detect.validate();
    eval.validate();
    cwssim.validate();
    ssim.validate();
    if (prune_threshold <= 0.0 || prune_threshold >= 1.0)
        throw std::invalid_argument("config: shapes.prune_threshold must be in (0,1)");
    if (pr_step <= 0.0 || pr_step > 1.0)
        throw std::invalid_argument("config: pr.step must be in (0,1]");
}

RunConfig parse_run_config(std::istream& in, const std::string& origin) {
    RunConfig cfg;
    parse_kv(in, origin, [&](const std::string& key, const std::string& value) {
        if (key == "canny.blur_sigma") cfg.canny.blur_sigma = to_double(key, value);
        else if (key == "canny.low_threshold") cfg.canny.low_threshold = to_double(key, value);
        else if (key == "canny.high_threshold") cfg.canny.high_threshold = to_double(key, value);
        else if (key == "label.sigma") cfg.label.sigma = to_double(key, value);
        else if (key == "label.ksize") cfg.label.ksize = to_int(key, value);
        else if (key == "patch.size") cfg.patch_size = to_int(key, value);
        else if (key == "patch.stride") cfg.patch_stride = to_int(key, value);
        else if (key == "net.depth") cfg.net.depth = to_int(key, value);
        else if (key == "net.channels") cfg.net.channels = to_int(key, value);
        else if (key == "train.lambda") cfg.train.lambda = to_double(key, value);
        else if (key == "train.gamma") cfg.train.gamma = to_double(key, value);
        else if (key == "train.pool_window") cfg.train.pool_window = to_int(key, value);
        else if (key == "train.tp") cfg.train.tp = to_double(key, value);
        else if (key == "train.eta") cfg.train.eta = to_double(key, value);
        else if (key == "train.weight_decay") cfg.train.weight_decay = to_double(key, value);
        else if (key == "train.lr_decay") cfg.train.lr_decay = to_double(key, value);
        else if (key == "train.lr_decay_interval") cfg.train.lr_decay_interval = to_int(key, value);
        else if (key == "train.epochs") cfg.train.epochs = to_int(key, value);
        else if (key == "train.batch_size") cfg.train.batch_size = to_int(key, value);
        else if (key == "train.seed") cfg.train.seed = to_u64(key, value);
        else if (key == "train.threads") cfg.train.threads = to_int(key, value);
        else if (key == "train.w_fp") cfg.train.w_fp = to_double(key, value);
        else if (key == "train.w_fn") cfg.train.w_fn = to_double(key, value);
        else if (key == "train.region_radius") cfg.train.region_radius = to_int(key, value);
        else if (key == "train.match_threshold") cfg.train.match_threshold = to_double(key, value);
        else if (key == "detect.threshold") cfg.detect.threshold = to_double(key, value);
        else if (key == "detect.nms_radius") cfg.detect.nms_radius = to_int(key, value);
        else if (key == "eval.golden_radius") cfg.eval.golden_radius = to_int(key, value);
        else if (key == "shapes.prune_threshold") cfg.prune_threshold = to_double(key, value);
        else if (key == "cwssim.levels") cfg.cwssim.levels = to_int(key, value);
        else if (key == "cwssim.orientations") cfg.cwssim.orientations = to_int(key, value);
        else if (key == "cwssim.k") cfg.cwssim.k = to_double(key, value);
        else if (key == "cwssim.window") cfg.cwssim.window = to_int(key, value);
        else if (key == "ssim.window_size") cfg.ssim.window_size = to_int(key, value);
        else if (key == "ssim.c1") cfg.ssim.c1 = to_double(key, value);
        else if (key == "ssim.c2") cfg.ssim.c2 = to_double(key, value);
        else if (key == "pr.step") cfg.pr_step = to_double(key, value);
        else
            throw std::invalid_argument(origin + ": unknown key '" + key + "'");
    });
    cfg.train.ssim = cfg.ssim;
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    audit::record(path);
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path.string() + ": cannot open");
    return parse_run_config(in, path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
    audit::record(path);
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(path.string() + ": cannot open");

    Manifest m;
    bool have_images = false, have_annotations = false, have_split = false;
    parse_kv(in, path.string(), [&](const std::string& key, const std::string& value) {
        if (key == "images_dir") {
            m.images_dir = value;
            have_images = true;
        } else if (key == "annotations_dir") {
            m.annotations_dir = value;
            have_annotations = true;
        } else if (key == "split") {
            const auto dash = value.find('-');
            if (dash == std::string::npos)
                throw std::invalid_argument(path.string() +
                                            ": split must look like '40-20'");
            m.split.train_count = to_int(key, value.substr(0, dash));
            m.split.test_count = to_int(key, value.substr(dash + 1));
            have_split = true;
        } else if (key == "seed") {
            m.seed = to_u64(key, value);
        } else {
            throw std::invalid_argument(path.string() + ": unknown key '" + key + "'");
        }
    });
    if (!have_images || !have_annotations || !have_split)
        throw std::invalid_argument(path.string() +
                                    ": manifest needs images_dir, annotations_dir, split");
    const auto base = path.parent_path();
    if (m.images_dir.is_relative())
        m.images_dir = base / m.images_dir;
    if (m.annotations_dir.is_relative())
        m.annotations_dir = base / m.annotations_dir;
    return m;
}

}  // namespace nucdet
