#include "nucdet/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace nucdet {

namespace audit {

void record(const std::filesystem::path& path) {
    const char* log = std::getenv("NUCDET_IO_AUDIT");
    if (!log || !*log)
        return;
    std::ofstream out(log, std::ios::app);
    out << path.string() << '\n';
}

}  // namespace audit

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error(path.string() + ": " + what);
}

// Skips whitespace and '#' comment lines between PNM header tokens.
int next_header_int(std::istream& in, const std::filesystem::path& path) {
    int ch;
    while ((ch = in.peek()) != EOF) {
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int value;
    if (!(in >> value))
        fail(path, "malformed PNM header");
    return value;
}

}  // namespace

Grid2D read_image(const std::filesystem::path& path) {
    audit::record(path);
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(path, "cannot open");

    char p, kind;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '2' && kind != '3' && kind != '5' && kind != '6'))
        fail(path, "unsupported image format (expected PGM/PPM)");
    const bool color = (kind == '3' || kind == '6');
    const bool binary = (kind == '5' || kind == '6');

    const int w = next_header_int(in, path);
    const int h = next_header_int(in, path);
    const int maxval = next_header_int(in, path);
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        fail(path, "unsupported PNM dimensions or maxval");

    const int channels = color ? 3 : 1;
    const size_t count = static_cast<size_t>(w) * h * channels;
    std::vector<double> raw(count);
    if (binary) {
        in.get();  // single whitespace after maxval
        std::vector<unsigned char> buf(count);
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count));
        if (static_cast<size_t>(in.gcount()) != count)
            fail(path, "truncated pixel data");
        for (size_t i = 0; i < count; ++i)
            raw[i] = buf[i];
    } else {
        for (size_t i = 0; i < count; ++i) {
            int v;
            if (!(in >> v))
                fail(path, "truncated pixel data");
            raw[i] = v;
        }
    }

    Grid2D g(h, w);
    const double scale = 1.0 / maxval;
    if (color) {
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const size_t i = (static_cast<size_t>(r) * w + c) * 3;
                g(r, c) = scale * (0.299 * raw[i] + 0.587 * raw[i + 1] + 0.114 * raw[i + 2]);
            }
    } else {
        for (size_t i = 0; i < count; ++i)
            g[i] = raw[i] * scale;
    }
    return g;
}

void write_image_pgm(const std::filesystem::path& path, const Grid2D& g) {
    audit::record(path);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error(path.string() + ": cannot open for writing");

    out << "P5\n" << g.width() << " " << g.height() << "\n255\n";
    std::vector<unsigned char> buf(g.size());
    for (size_t i = 0; i < g.size(); ++i) {
        const double v = std::clamp(g[i], 0.0, 1.0);
        buf[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw std::runtime_error(path.string() + ": write failed");
}

}  // namespace nucdet
