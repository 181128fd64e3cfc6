#ifndef NUCDET_IMAGE_IO_HPP
#define NUCDET_IMAGE_IO_HPP

#include <filesystem>
#include <string>

#include "nucdet/grid.hpp"

namespace nucdet {

/// File-access audit. Every reader/writer in the library reports the paths it
/// opens here; when NUCDET_IO_AUDIT names a log file, each path is appended to
/// it (one per line). Lets integration tests verify which files a command
/// actually touched.
namespace audit {
void record(const std::filesystem::path& path);
}

/// Reads an 8-bit PGM (P2/P5) or PPM (P3/P6) file into a [0,1] grid.
/// Color inputs are converted to luminance (Rec. 601 weights).
Grid2D read_image(const std::filesystem::path& path);

/// Writes a grid as binary 8-bit PGM; values are clamped to [0,1] and scaled
/// to 0..255.
void write_image_pgm(const std::filesystem::path& path, const Grid2D& g);

}  // namespace nucdet

#endif
