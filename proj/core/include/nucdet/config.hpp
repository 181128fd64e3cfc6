#ifndef NUCDET_CONFIG_HPP
#define NUCDET_CONFIG_HPP

#include <filesystem>
#include <istream>
#include <string>

#include "nucdet/data.hpp"
#include "nucdet/detect_eval.hpp"
#include "nucdet/edges.hpp"
#include "nucdet/network.hpp"
#include "nucdet/shapes.hpp"
#include "nucdet/steerable.hpp"

namespace nucdet {

/// Every tunable in one place, populated from a "key = value" file. Unknown
/// keys are rejected; all values are validated against the owning module's
/// invariants before a run starts.
struct RunConfig {
    CannyConfig canny;
    LabelConfig label;
    int patch_size = 40;
    int patch_stride = 20;
    NetworkConfig net;
    HyperParams train;
    DetectionConfig detect;
    EvalConfig eval;
    CwSsimConfig cwssim;
    SsimConfig ssim;
    double prune_threshold = 0.8;
    double pr_step = 0.05;

    void validate() const;
};

RunConfig parse_run_config(std::istream& in, const std::string& origin);
RunConfig load_run_config(const std::filesystem::path& path);

/// Dataset manifest: directories, "trainN-testN" split and the shuffle seed.
/// Relative directories resolve against the manifest's location.
struct Manifest {
    std::filesystem::path images_dir;
    std::filesystem::path annotations_dir;
    SplitSpec split;
    uint64_t seed = 0;
};

Manifest load_manifest(const std::filesystem::path& path);

}  // namespace nucdet

#endif
