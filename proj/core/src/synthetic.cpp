#include "nucdet/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "nucdet/data.hpp"
#include "nucdet/image_io.hpp"

namespace nucdet {

void SyntheticConfig::validate() const {
    if (images < 2 || size < 48)
        throw std::invalid_argument("SyntheticConfig: need >= 2 images of side >= 48");
    if (min_nuclei < 1 || max_nuclei < min_nuclei)
        throw std::invalid_argument("SyntheticConfig: bad nucleus count range");
    if (min_radius < 2.0 || max_radius < min_radius)
        throw std::invalid_argument("SyntheticConfig: bad radius range");
    if (train_count < 1 || train_count >= images)
        throw std::invalid_argument("SyntheticConfig: train_count must leave test images");
    if (shape_side < static_cast<int>(2 * max_radius) + 4)
        throw std::invalid_argument("SyntheticConfig: shape_side too small for max_radius");
}

namespace {

struct Ellipse {
    double cy, cx, a, b, angle;

    // Normalized radial coordinate: 1 on the boundary.
    double radial(double r, double c) const {
        const double y = r - cy, x = c - cx;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = (x * ca + y * sa) / a;
        const double v = (-x * sa + y * ca) / b;
        return std::sqrt(u * u + v * v);
    }
};

void stamp_ellipse(Grid2D& img, const Ellipse& e, double brightness) {
    const double reach = std::max(e.a, e.b) + 2.0;
    const int rlo = std::max(0, static_cast<int>(e.cy - reach));
    const int rhi = std::min(img.height() - 1, static_cast<int>(e.cy + reach));
    const int clo = std::max(0, static_cast<int>(e.cx - reach));
    const int chi = std::min(img.width() - 1, static_cast<int>(e.cx + reach));
    const double edge = std::min(e.a, e.b);  // ~1 px transition in image units
    for (int r = rlo; r <= rhi; ++r)
        for (int c = clo; c <= chi; ++c) {
            const double s = e.radial(r, c);
            const double coverage = std::clamp((1.0 - s) * edge + 0.5, 0.0, 1.0);
            if (coverage > 0.0)
                img(r, c) = std::max(img(r, c), brightness * coverage + img(r, c) * (1.0 - coverage));
        }
}

void stamp_bar(Grid2D& img, Rng& rng, double brightness) {
    const int h = img.height(), w = img.width();
    const double len = 5.0 + rng.uniform() * 8.0;
    const double angle = rng.uniform() * M_PI;
    const double cy = 4 + rng.uniform() * (h - 8);
    const double cx = 4 + rng.uniform() * (w - 8);
    const double dy = std::sin(angle), dx = std::cos(angle);
    for (double t = -len / 2; t <= len / 2; t += 0.5) {
        const int r = static_cast<int>(std::lround(cy + t * dy));
        const int c = static_cast<int>(std::lround(cx + t * dx));
        if (r >= 0 && r < h && c >= 0 && c < w)
            img(r, c) = std::max(img(r, c), brightness);
    }
}

}  // namespace

SyntheticImage synth_image(Rng& rng, const SyntheticConfig& config) {
    const int n = config.size;
    SyntheticImage out;
    out.image = Grid2D(n, n);

    // slowly varying background
    const double phase_r = rng.uniform() * 2.0 * M_PI;
    const double phase_c = rng.uniform() * 2.0 * M_PI;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            out.image(r, c) = 0.12 + 0.03 * std::sin(2.0 * M_PI * r / n + phase_r) *
                                          std::cos(2.0 * M_PI * c / n + phase_c);

    // nuclei with enforced separation
    const int target = rng.uniform_int(config.min_nuclei, config.max_nuclei);
    const double min_sep = 2.0 * config.max_radius + 1.0;
    const double margin = config.max_radius + 2.0;
    std::vector<Ellipse> nuclei;
    for (int attempts = 0; static_cast<int>(nuclei.size()) < target && attempts < 4000;
         ++attempts) {
        const double cy = margin + rng.uniform() * (n - 2 * margin);
        const double cx = margin + rng.uniform() * (n - 2 * margin);
        bool clear = true;
        for (const Ellipse& e : nuclei)
            if (std::hypot(cy - e.cy, cx - e.cx) < min_sep) {
                clear = false;
                break;
            }
        if (!clear)
            continue;
        Ellipse e;
        e.cy = cy;
        e.cx = cx;
        e.a = config.min_radius + rng.uniform() * (config.max_radius - config.min_radius);
        e.b = std::max(config.min_radius, e.a * (0.7 + rng.uniform() * 0.3));
        e.angle = rng.uniform() * M_PI;
        nuclei.push_back(e);
    }

    for (const Ellipse& e : nuclei) {
        stamp_ellipse(out.image, e, 0.55 + rng.uniform() * 0.25);
        out.centers.push_back({static_cast<int>(std::lround(e.cy)),
                               static_cast<int>(std::lround(e.cx))});
    }

    // clutter: bright dots and bars away from the nuclei
    for (int i = 0; i < config.clutter; ++i) {
        const double pick = rng.uniform();
        if (pick < 0.5) {
            double cy, cx;
            bool clear = false;
            for (int tries = 0; tries < 50 && !clear; ++tries) {
                cy = 3 + rng.uniform() * (n - 6);
                cx = 3 + rng.uniform() * (n - 6);
                clear = true;
                for (const Ellipse& e : nuclei)
                    if (std::hypot(cy - e.cy, cx - e.cx) < config.max_radius + 4.0)
                        clear = false;
            }
            if (clear) {
                Ellipse dot{cy, cx, 1.0 + rng.uniform() * 0.8, 1.0 + rng.uniform() * 0.8, 0.0};
                stamp_ellipse(out.image, dot, 0.55 + rng.uniform() * 0.25);
            }
        } else {
            stamp_bar(out.image, rng, 0.5 + rng.uniform() * 0.25);
        }
    }

    for (size_t i = 0; i < out.image.size(); ++i)
        out.image[i] = std::clamp(out.image[i] + config.noise_sigma * rng.normal(), 0.0, 1.0);
    return out;
}

ShapeSet synthetic_expert_shapes(const SyntheticConfig& config) {
    const int side = config.shape_side;
    const double center = (side - 1) / 2.0;

    auto ring = [&](double a, double b, double angle) {
        Grid2D g(side, side, 0.0);
        Ellipse e{center, center, a, b, angle};
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                const double s = e.radial(r, c);
                if (std::abs(s - 1.0) * std::min(a, b) <= 0.9)
                    g(r, c) = 1.0;
            }
        return g;
    };

    const double lo = config.min_radius, hi = config.max_radius;
    const double mid = 0.5 * (lo + hi);

    ShapeSet set;
    set.kind = ShapeKind::expert;
    // deliberate near-duplicates: circles in three tight size clusters
    set.shapes.push_back(ring(lo + 0.5, lo + 0.5, 0.0));
    set.shapes.push_back(ring(lo + 0.6, lo + 0.6, 0.0));
    set.shapes.push_back(ring(mid, mid, 0.0));
    set.shapes.push_back(ring(mid + 0.15, mid + 0.15, 0.0));
    set.shapes.push_back(ring(hi, hi, 0.0));
    set.shapes.push_back(ring(hi - 0.1, hi - 0.1, 0.0));
    // ellipses across aspect and orientation
    set.shapes.push_back(ring(mid + 0.5, mid - 1.0, 0.0));
    set.shapes.push_back(ring(mid + 0.5, mid - 1.0, M_PI / 2));
    set.shapes.push_back(ring(mid + 0.3, mid - 1.2, M_PI / 4));
    set.shapes.push_back(ring(mid + 0.3, mid - 1.2, 3 * M_PI / 4));
    set.shapes.push_back(ring(hi, mid - 0.5, 0.0));
    set.shapes.push_back(ring(lo + 1.0, lo + 0.2, M_PI / 2));
    set.validate();
    return set;
}

void write_synthetic_dataset(const std::filesystem::path& out_dir,
                             const SyntheticConfig& config) {
    config.validate();
    const auto images_dir = out_dir / "images";
    const auto annotations_dir = out_dir / "annotations";
    const auto shapes_dir = out_dir / "shapes";
    std::filesystem::create_directories(images_dir);
    std::filesystem::create_directories(annotations_dir);

    Rng rng(config.seed);
    for (int i = 0; i < config.images; ++i) {
        const SyntheticImage sample = synth_image(rng, config);
        char name[32];
        std::snprintf(name, sizeof(name), "img_%03d", i);
        write_image_pgm(images_dir / (std::string(name) + ".pgm"), sample.image);
        write_centers(annotations_dir / (std::string(name) + ".csv"), sample.centers);
    }

    save_shape_dir(shapes_dir, synthetic_expert_shapes(config));

    const auto manifest_path = out_dir / "manifest.txt";
    audit::record(manifest_path);
    std::ofstream manifest(manifest_path);
    if (!manifest)
        throw std::runtime_error(manifest_path.string() + ": cannot open for writing");
    manifest << "images_dir = images\n";
    manifest << "annotations_dir = annotations\n";
    manifest << "split = " << config.train_count << "-" << (config.images - config.train_count)
             << "\n";
    manifest << "seed = " << config.seed << "\n";
}

}  // namespace nucdet
