#pragma once

#include "conpatch/image.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace conpatch {

/// Unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads binary PGM (P5, maxval <= 255) or 8-bit PNG. Colour PNGs are
/// converted to luminance with BT.601 weights. Format is sniffed from the
/// file's magic bytes, not its extension.
Image load_image(const std::filesystem::path& path);

/// Writes PGM (P5) or, for a ".png" extension, 8-bit grayscale PNG.
/// Values are rounded to the nearest integer and clamped to [0, 255].
void save_image(const Image& img, const std::filesystem::path& path);

/// The values save_image writes: rounded and clamped to [0, 255].
Image quantize_8bit(const Image& img);

/// Frames of a video directory in lexicographic filename order (*.pgm, *.png).
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

std::vector<Image> load_frames(const std::filesystem::path& dir);

/// frame_%06d.pgm
std::string frame_filename(std::size_t index);

void save_frames(const std::vector<Image>& frames, const std::filesystem::path& dir);

}  // namespace conpatch
