#include "conpatch/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace conpatch {
namespace fs = std::filesystem;

namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Skips whitespace and '#' comments in a PNM header.
int read_header_int(std::istream& in, const fs::path& path) {
  int c = in.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
    c = in.peek();
  }
  if (c == EOF || !std::isdigit(c)) throw IoError(path.string() + ": malformed PGM header");
  long value = 0;
  while (std::isdigit(in.peek())) {
    value = value * 10 + (in.get() - '0');
    if (value > (1L << 24)) throw IoError(path.string() + ": PGM header value out of range");
  }
  return static_cast<int>(value);
}

Image read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || magic[1] != '5')
    throw IoError(path.string() + ": not a binary PGM (P5) file");
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (width < 1 || height < 1) throw IoError(path.string() + ": PGM has empty dimensions");
  if (maxval < 1 || maxval > 255)
    throw IoError(path.string() + ": only 8-bit PGM is supported (maxval " + std::to_string(maxval) + ")");
  if (!std::isspace(in.get())) throw IoError(path.string() + ": malformed PGM header");
  std::vector<unsigned char> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError(path.string() + ": truncated PGM pixel data");
  Image img(width, height);
  const double scale = maxval == 255 ? 1.0 : 255.0 / maxval;
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels().data()[i] = raw[i] * scale;
  return img;
}

void write_pgm(const Image& img, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(img.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(img.data()[i]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Image read_png(const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str()))
    throw IoError(path.string() + ": " + png.message);
  const bool colour = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = colour ? 3 : 1;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buf.data(), 0, nullptr)) {
    std::string msg = png.message;
    png_image_free(&png);
    throw IoError(path.string() + ": " + msg);
  }
  Image img(static_cast<int>(png.width), static_cast<int>(png.height));
  double* dst = img.pixels().data();
  for (Eigen::Index i = 0; i < img.size(); ++i) {
    const png_byte* p = buf.data() + i * channels;
    // BT.601 luma, rounded back to 8 bits like any luminance-only decoder.
    dst[i] = colour ? std::round(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) : p[0];
  }
  return img;
}

void write_png(const Image& img, const fs::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width());
  png.height = static_cast<png_uint_32>(img.height());
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> raw(static_cast<std::size_t>(img.size()));
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize(img.data()[i]);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, raw.data(), 0, nullptr))
    throw IoError(path.string() + ": " + png.message);
}

}  // namespace

Image load_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path.string());
  std::array<unsigned char, 8> magic{};
  probe.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto got = probe.gcount();
  probe.close();
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  static constexpr std::array<unsigned char, 8> kPngMagic{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (got == 8 && magic == kPngMagic) return read_png(path);
  throw IoError(path.string() + ": unsupported image format (expected binary PGM or PNG)");
}

Image quantize_8bit(const Image& img) {
  Image out(img.width(), img.height());
  for (Eigen::Index i = 0; i < img.size(); ++i) out.pixels().data()[i] = quantize(img.pixels().data()[i]);
  return out;
}

void save_image(const Image& img, const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png")
    write_png(img, path);
  else
    write_pgm(img, path);
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> frames;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".png") frames.push_back(entry.path());
  }
  std::sort(frames.begin(), frames.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return frames;
}

std::vector<Image> load_frames(const fs::path& dir) {
  std::vector<Image> frames;
  for (const auto& p : list_frames(dir)) frames.push_back(load_image(p));
  return frames;
}

std::string frame_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.pgm", index);
  return buf;
}

void save_frames(const std::vector<Image>& frames, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) save_image(frames[i], dir / frame_filename(i));
}

}  // namespace conpatch
