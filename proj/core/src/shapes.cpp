#include "nucdet/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nucdet/image_io.hpp"

namespace nucdet {

void SsimConfig::validate() const {
    if (window_size < 1 || window_size % 2 == 0)
        throw std::invalid_argument("SsimConfig: window_size must be odd and positive");
    if (c1 <= 0.0 || c2 <= 0.0)
        throw std::invalid_argument("SsimConfig: C1 and C2 must be positive");
}

void ShapeSet::validate() const {
    for (const Grid2D& s : shapes) {
        if (s.height() != s.width())
            throw std::invalid_argument("ShapeSet: shapes must be square");
        if (s.height() != side())
            throw std::invalid_argument("ShapeSet: all shapes must share one side length");
    }
}

namespace {

void require_same_shape(const Grid2D& a, const Grid2D& b, const char* who) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

struct WindowGeometry {
    int wh, ww;       // effective window (clamped to the grid)
    int rows, cols;   // window positions per axis
    int n;            // pixels per window
    int total() const { return rows * cols; }
};

WindowGeometry window_geometry(const Grid2D& g, int window) {
    WindowGeometry geo;
    geo.wh = std::min(window, g.height());
    geo.ww = std::min(window, g.width());
    geo.rows = g.height() - geo.wh + 1;
    geo.cols = g.width() - geo.ww + 1;
    geo.n = geo.wh * geo.ww;
    return geo;
}

struct WindowStats {
    double mu_a, mu_b, var_a, var_b, cov;
};

WindowStats window_stats(const Grid2D& a, const Grid2D& b, int r0, int c0,
                         const WindowGeometry& geo) {
    double sa = 0, sb = 0;
    for (int r = r0; r < r0 + geo.wh; ++r)
        for (int c = c0; c < c0 + geo.ww; ++c) {
            sa += a(r, c);
            sb += b(r, c);
        }
    WindowStats s{};
    s.mu_a = sa / geo.n;
    s.mu_b = sb / geo.n;
    double va = 0, vb = 0, cov = 0;
    for (int r = r0; r < r0 + geo.wh; ++r)
        for (int c = c0; c < c0 + geo.ww; ++c) {
            const double da = a(r, c) - s.mu_a;
            const double db = b(r, c) - s.mu_b;
            va += da * da;
            vb += db * db;
            cov += da * db;
        }
    s.var_a = va / geo.n;
    s.var_b = vb / geo.n;
    s.cov = cov / geo.n;
    return s;
}

}  // namespace

double ssim(const Grid2D& a, const Grid2D& b, const SsimConfig& config) {
    config.validate();
    require_same_shape(a, b, "ssim");
    const WindowGeometry geo = window_geometry(a, config.window_size);

    double total = 0.0;
    for (int r0 = 0; r0 < geo.rows; ++r0)
        for (int c0 = 0; c0 < geo.cols; ++c0) {
            const WindowStats s = window_stats(a, b, r0, c0, geo);
            const double lum = (2.0 * s.mu_a * s.mu_b + config.c1) /
                               (s.mu_a * s.mu_a + s.mu_b * s.mu_b + config.c1);
            const double str = (2.0 * s.cov + config.c2) /
                               (s.var_a + s.var_b + config.c2);
            total += lum * str;
        }
    return total / geo.total();
}

Grid2D ssim_gradient(const Grid2D& sl, const Grid2D& sr, const SsimConfig& config) {
    config.validate();
    require_same_shape(sl, sr, "ssim_gradient");
    const WindowGeometry geo = window_geometry(sl, config.window_size);
    const double inv_windows = 1.0 / geo.total();
    const double inv_n = 1.0 / geo.n;

    Grid2D grad(sl.height(), sl.width(), 0.0);
    for (int r0 = 0; r0 < geo.rows; ++r0)
        for (int c0 = 0; c0 < geo.cols; ++c0) {
            const WindowStats s = window_stats(sl, sr, r0, c0, geo);
            const double denom_l = s.mu_a * s.mu_a + s.mu_b * s.mu_b + config.c1;
            const double num_l = 2.0 * s.mu_a * s.mu_b + config.c1;
            const double denom_s = s.var_a + s.var_b + config.c2;
            const double num_s = 2.0 * s.cov + config.c2;
            const double lum = num_l / denom_l;
            const double str = num_s / denom_s;

            // d(lum)/d(mu_a), shared by every pixel of the window
            const double dlum_dmu = (2.0 * s.mu_b * denom_l - num_l * 2.0 * s.mu_a) /
                                    (denom_l * denom_l);
            for (int r = r0; r < r0 + geo.wh; ++r)
                for (int c = c0; c < c0 + geo.ww; ++c) {
                    const double da = sl(r, c) - s.mu_a;
                    const double db = sr(r, c) - s.mu_b;
                    // d(var_a)/dx = 2*da/n, d(cov)/dx = db/n
                    const double dstr =
                        (2.0 * db * denom_s - num_s * 2.0 * da) * inv_n /
                        (denom_s * denom_s);
                    grad(r, c) += (dlum_dmu * inv_n * str + lum * dstr) * inv_windows;
                }
        }
    return grad;
}

double cw_ssim_from_coeffs(const std::vector<Subband>& ca, const std::vector<Subband>& cb,
                           const CwSsimConfig& config) {
    if (ca.size() != cb.size() || ca.empty())
        throw std::invalid_argument("cw_ssim: mismatched subband sets");

    double band_total = 0.0;
    for (size_t band = 0; band < ca.size(); ++band) {
        const Subband& x = ca[band];
        const Subband& y = cb[band];
        if (x.height != y.height || x.width != y.width)
            throw std::invalid_argument("cw_ssim: subband dimension mismatch");

        const int wh = std::min(config.window, x.height);
        const int ww = std::min(config.window, x.width);
        const int rows = x.height - wh + 1;
        const int cols = x.width - ww + 1;

        double window_total = 0.0;
        for (int r0 = 0; r0 < rows; ++r0)
            for (int c0 = 0; c0 < cols; ++c0) {
                std::complex<double> cross = 0.0;
                double ex = 0.0, ey = 0.0;
                for (int r = r0; r < r0 + wh; ++r)
                    for (int c = c0; c < c0 + ww; ++c) {
                        const auto cx = x.at(r, c);
                        const auto cy = y.at(r, c);
                        cross += cx * std::conj(cy);
                        ex += std::norm(cx);
                        ey += std::norm(cy);
                    }
                window_total += (2.0 * std::abs(cross) + config.k) / (ex + ey + config.k);
            }
        band_total += window_total / (rows * cols);
    }
    return band_total / static_cast<double>(ca.size());
}

double cw_ssim(const Grid2D& a, const Grid2D& b, const CwSsimConfig& config) {
    config.validate();
    require_same_shape(a, b, "cw_ssim");
    return cw_ssim_from_coeffs(complex_wavelet_coeffs(a, config),
                               complex_wavelet_coeffs(b, config), config);
}

std::vector<std::vector<double>> cw_ssim_matrix(const ShapeSet& set,
                                                const CwSsimConfig& config) {
    config.validate();
    set.validate();
    const int n = set.count();
    std::vector<std::vector<Subband>> coeffs(n);
    for (int i = 0; i < n; ++i)
        coeffs[i] = complex_wavelet_coeffs(set.shapes[i], config);

    std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            m[i][j] = cw_ssim_from_coeffs(coeffs[i], coeffs[j], config);
            m[j][i] = m[i][j];
        }
    return m;
}

ShapeSet eliminate_shapes(const ShapeSet& expert, double threshold,
                          const CwSsimConfig& config) {
    if (expert.shapes.empty())
        throw std::invalid_argument("eliminate_shapes: expert set is empty");
    expert.validate();

    const auto matrix = cw_ssim_matrix(expert, config);
    std::vector<int> remaining(expert.shapes.size());
    std::iota(remaining.begin(), remaining.end(), 0);

    ShapeSet reference;
    reference.kind = ShapeKind::reference;
    while (!remaining.empty()) {
        const int seed = remaining.front();
        // Group the seed with every remaining shape similar enough to it; the
        // seed itself (first of the group in insertion order) is the
        // representative.
        std::vector<int> next;
        for (size_t i = 1; i < remaining.size(); ++i)
            if (!(matrix[seed][remaining[i]] > threshold))
                next.push_back(remaining[i]);
        reference.shapes.push_back(expert.shapes[seed]);
        remaining = std::move(next);
    }
    return reference;
}

double shape_learning_loss(const ShapeSet& learnable, const ShapeSet& reference,
                           double gamma, const SsimConfig& config) {
    if (learnable.count() != reference.count())
        throw std::invalid_argument("shape_learning_loss: cardinality mismatch");
    if (gamma == 0.0)
        return 0.0;

    double total = 0.0;
    for (const Grid2D& sl : learnable.shapes)
        for (const Grid2D& sr : reference.shapes)
            total += ssim(sl, sr, config);
    return -gamma * total;
}

std::vector<Grid2D> shape_learning_gradient(const ShapeSet& learnable,
                                            const ShapeSet& reference, double gamma,
                                            const SsimConfig& config) {
    if (learnable.count() != reference.count())
        throw std::invalid_argument("shape_learning_gradient: cardinality mismatch");

    std::vector<Grid2D> grads;
    grads.reserve(learnable.shapes.size());
    for (const Grid2D& sl : learnable.shapes) {
        Grid2D g(sl.height(), sl.width(), 0.0);
        if (gamma != 0.0)
            for (const Grid2D& sr : reference.shapes) {
                const Grid2D d = ssim_gradient(sl, sr, config);
                for (size_t i = 0; i < g.size(); ++i)
                    g[i] -= gamma * d[i];
            }
        grads.push_back(std::move(g));
    }
    return grads;
}

ShapeSet load_shape_dir(const std::filesystem::path& dir, ShapeKind kind) {
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error(dir.string() + ": not a directory");

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file())
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw std::runtime_error(dir.string() + ": no shape files");

    ShapeSet set;
    set.kind = kind;
    for (const auto& f : files) {
        Grid2D g = read_image(f);
        if (kind != ShapeKind::learnable)
            for (size_t i = 0; i < g.size(); ++i)
                g[i] = g[i] >= 0.5 ? 1.0 : 0.0;
        set.shapes.push_back(std::move(g));
    }
    set.validate();
    return set;
}

void save_shape_dir(const std::filesystem::path& dir, const ShapeSet& set) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < set.count(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "shape_%03d.pgm", i);
        write_image_pgm(dir / name, set.shapes[i]);
    }
}

}  // namespace nucdet
