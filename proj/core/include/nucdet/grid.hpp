#ifndef NUCDET_GRID_HPP
#define NUCDET_GRID_HPP

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nucdet {

/// Dense row-major 2-D array of doubles. The shared carrier for images,
/// label maps, edge maps, shapes and every intermediate map.
class Grid2D {
public:
    Grid2D() = default;

    Grid2D(int height, int width, double fill = 0.0)
        : height_(height), width_(width),
          v_(static_cast<size_t>(check_dims(height, width)) * width, fill) {}

    int height() const { return height_; }
    int width() const { return width_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& operator()(int r, int c) {
        assert(in_bounds(r, c));
        return v_[static_cast<size_t>(r) * width_ + c];
    }
    double operator()(int r, int c) const {
        assert(in_bounds(r, c));
        return v_[static_cast<size_t>(r) * width_ + c];
    }

    double& operator[](size_t i) { return v_[i]; }
    double operator[](size_t i) const { return v_[i]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }

    bool in_bounds(int r, int c) const {
        return r >= 0 && r < height_ && c >= 0 && c < width_;
    }
    bool same_shape(const Grid2D& o) const {
        return height_ == o.height_ && width_ == o.width_;
    }

    void fill(double value) { v_.assign(v_.size(), value); }

private:
    static int check_dims(int h, int w) {
        if (h < 1 || w < 1)
            throw std::invalid_argument("Grid2D: dimensions must be >= 1");
        return h;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<double> v_;
};

/// Integer pixel coordinate (row, col).
struct Pixel {
    int row = 0;
    int col = 0;

    friend bool operator==(const Pixel&, const Pixel&) = default;
    friend auto operator<=>(const Pixel&, const Pixel&) = default;  // row-major order
};

}  // namespace nucdet

#endif
