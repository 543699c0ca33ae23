#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace conpatch {

template <typename Scalar>
using PixelMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Single-channel luminance raster, nominal range [0, 255], row-major.
/// Always at least 1x1 and free of NaN/Inf.
template <typename Scalar>
class BasicImage {
 public:
  using Matrix = PixelMatrix<Scalar>;

  BasicImage() : pixels_(Matrix::Zero(1, 1)) {}

  BasicImage(int width, int height, Scalar fill = Scalar(0)) {
    if (width < 1 || height < 1)
      throw std::invalid_argument("image dimensions must be at least 1x1");
    pixels_ = Matrix::Constant(height, width, fill);
  }

  explicit BasicImage(Matrix pixels) : pixels_(std::move(pixels)) {
    if (pixels_.rows() < 1 || pixels_.cols() < 1)
      throw std::invalid_argument("image dimensions must be at least 1x1");
    if (!pixels_.allFinite())
      throw std::invalid_argument("image values must be finite");
  }

  int width() const { return static_cast<int>(pixels_.cols()); }
  int height() const { return static_cast<int>(pixels_.rows()); }
  Eigen::Index size() const { return pixels_.size(); }

  Scalar operator()(int x, int y) const { return pixels_(y, x); }
  Scalar& operator()(int x, int y) { return pixels_(y, x); }

  /// Pixel with edge replication for out-of-range coordinates.
  Scalar clamped(int x, int y) const {
    x = x < 0 ? 0 : (x >= width() ? width() - 1 : x);
    y = y < 0 ? 0 : (y >= height() ? height() - 1 : y);
    return pixels_(y, x);
  }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width() && y < height(); }

  const Matrix& pixels() const { return pixels_; }
  Matrix& pixels() { return pixels_; }
  const Scalar* data() const { return pixels_.data(); }

  template <typename Other>
  BasicImage<Other> cast() const {
    return BasicImage<Other>(pixels_.template cast<Other>());
  }

  friend bool operator==(const BasicImage& a, const BasicImage& b) {
    return a.width() == b.width() && a.height() == b.height() && a.pixels_ == b.pixels_;
  }

 private:
  Matrix pixels_;
};

using Image = BasicImage<double>;

template <typename Scalar>
inline bool same_shape(const BasicImage<Scalar>& a, const BasicImage<Scalar>& b) {
  return a.width() == b.width() && a.height() == b.height();
}

/// side x side window centred at (cx, cy) in raster order, edges replicated.
template <typename Scalar>
VectorX<Scalar> extract_patch(const BasicImage<Scalar>& img, int cx, int cy, int side) {
  if (side < 1 || side % 2 == 0)
    throw std::invalid_argument("patch side must be odd and positive, got " + std::to_string(side));
  if (!img.contains(cx, cy))
    throw std::invalid_argument("patch centre (" + std::to_string(cx) + ", " + std::to_string(cy) +
                                ") lies outside the image");
  const int r = side / 2;
  VectorX<Scalar> out(side * side);
  // Interior fast path: straight block copy.
  if (cx - r >= 0 && cy - r >= 0 && cx + r < img.width() && cy + r < img.height()) {
    Eigen::Map<PixelMatrix<Scalar>>(out.data(), side, side) =
        img.pixels().block(cy - r, cx - r, side, side);
    return out;
  }
  Eigen::Index k = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) out[k++] = img.clamped(cx + dx, cy + dy);
  return out;
}

/// Bilinear interpolation; integer coordinates return the stored value exactly.
template <typename Scalar>
Scalar bilinear_sample(const BasicImage<Scalar>& img, double x, double y) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1))
    throw std::invalid_argument("bilinear sample outside the image rectangle");
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  if (fx == 0.0 && fy == 0.0) return img(x0, y0);
  const double top = (1.0 - fx) * img(x0, y0) + fx * img(x1, y0);
  const double bottom = (1.0 - fx) * img(x0, y1) + fx * img(x1, y1);
  return static_cast<Scalar>((1.0 - fy) * top + fy * bottom);
}

inline constexpr double kPeakLuminance = 255.0;

/// 10 log10(255^2 / MSE). Identical images give +infinity.
template <typename Scalar>
double psnr(const BasicImage<Scalar>& reference, const BasicImage<Scalar>& test) {
  if (!same_shape(reference, test))
    throw std::invalid_argument("psnr: image dimensions differ");
  const double mse =
      (reference.pixels().template cast<double>() - test.pixels().template cast<double>())
          .squaredNorm() /
      static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeakLuminance * kPeakLuminance / mse);
}

struct NoiseSpec {
  double sigma_v = 0.0;
  std::uint64_t seed = 0;
};

Image add_gaussian_noise(const Image& img, const NoiseSpec& spec);

}  // namespace conpatch
