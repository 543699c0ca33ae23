#pragma once

#include "conpatch/image.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace conpatch {

/// How the squared patch difference enters the similarity kernel
/// exp(-d / (2 sigma^2)).
enum class SimilarityScale : std::uint32_t {
  kSum = 0,       ///< d = ||x_i - x_j||^2 over all c^2 pixels
  kPerPixel = 1,  ///< d = ||x_i - x_j||^2 / c^2
};

std::string to_string(SimilarityScale s);
SimilarityScale similarity_scale_from_string(const std::string& s);

/// Parameters of the self-similarity context feature.
struct ContextParams {
  double sigma = 5.0;  ///< illumination tolerance, luminance units
  int window = 21;     ///< h, side of the surrounding window
  int bins = 8;        ///< b, histogram length
  int stride = 4;      ///< m, sampling step inside the window
  double alpha = 0.0;  ///< context gain, luminance^2 units
  int patch = 7;       ///< c, side of the central patch
  SimilarityScale scale = SimilarityScale::kPerPixel;

  /// Throws std::invalid_argument unless h, c odd, c <= h, m, b >= 1,
  /// sigma > 0 and alpha >= 0.
  void validate() const;

  double sqrt_alpha() const { return std::sqrt(alpha); }
  int content_dim() const { return patch * patch; }
  int dim() const { return patch * patch + bins; }

  /// Samples per axis of the stride grid, ceil(h / m).
  int samples_per_axis() const { return (window - 1) / stride + 1; }
  /// Grid offsets -h/2, -h/2 + m, ... <= h/2.
  std::vector<int> offsets() const;
  /// Number of weights in a correlation surface (zero offset excluded).
  std::size_t weight_count() const;

  bool same_layout(const ContextParams& o) const {
    return patch == o.patch && bins == o.bins && alpha == o.alpha;
  }
};

/// Gain in luminance^2 units for a square-root gain quoted on unit-range
/// intensities: (sqrt_alpha * 255)^2.
inline double alpha_from_unit_gain(double unit_sqrt_alpha) {
  const double s = unit_sqrt_alpha * kPeakLuminance;
  return s * s;
}

/// b-bin histogram of similarity weights, normalised to unit sum.
struct ContextHistogram {
  VectorX<double> bins;
};

/// Concatenation [content | sqrt(alpha) * H] of a small patch and its context.
class ConPatch {
 public:
  ConPatch(VectorX<double> content, const ContextHistogram& hist, double alpha, int origin_x = 0,
           int origin_y = 0);

  int side() const { return side_; }
  int bins() const { return bins_; }
  double alpha() const { return alpha_; }
  int origin_x() const { return origin_x_; }
  int origin_y() const { return origin_y_; }

  Eigen::Index dim() const { return values_.size(); }
  const VectorX<double>& values() const { return values_; }
  auto content() const { return values_.head(static_cast<Eigen::Index>(side_) * side_); }
  auto feature() const { return values_.tail(bins_); }

  /// 16-byte header (c, b, alpha, version) followed by float32 values, all
  /// little-endian.
  std::vector<std::uint8_t> serialize() const;
  static ConPatch deserialize(std::span<const std::uint8_t> bytes);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  ConPatch() = default;
  VectorX<double> values_;
  int side_ = 0;
  int bins_ = 0;
  double alpha_ = 0.0;
  int origin_x_ = 0;
  int origin_y_ = 0;
};

/// Similarity kernel of one squared patch difference.
inline double similarity_weight(double squared_distance, const ContextParams& params) {
  double d = squared_distance;
  if (params.scale == SimilarityScale::kPerPixel) d /= static_cast<double>(params.content_dim());
  return std::exp(-d / (2.0 * params.sigma * params.sigma));
}

/// Weights between the c x c patch at (cx, cy) and the patches at every
/// stride-grid offset of the h x h window, zero offset excluded, in raster
/// order of the offsets. Borders are edge-replicated.
template <typename Scalar>
std::vector<double> correlation_surface(const BasicImage<Scalar>& img, int cx, int cy,
                                        const ContextParams& params) {
  params.validate();
  const VectorX<double> centre = extract_patch(img, cx, cy, params.patch).template cast<double>();
  const std::vector<int> off = params.offsets();
  std::vector<double> weights;
  weights.reserve(params.weight_count());
  const int r = params.patch / 2;
  VectorX<double> other(params.content_dim());
  for (int dy : off) {
    for (int dx : off) {
      if (dx == 0 && dy == 0) continue;
      Eigen::Index k = 0;
      for (int py = -r; py <= r; ++py)
        for (int px = -r; px <= r; ++px) other[k++] = img.clamped(cx + dx + px, cy + dy + py);
      weights.push_back(similarity_weight((centre - other).squaredNorm(), params));
    }
  }
  return weights;
}

/// Bin k (1-based) collects weights in ((k-1)/b, k/b]; zero goes to bin 1.
ContextHistogram weights_to_histogram(std::span<const double> weights, int bins);

template <typename Scalar>
ContextHistogram context_histogram(const BasicImage<Scalar>& img, int cx, int cy,
                                   const ContextParams& params) {
  const auto w = correlation_surface(img, cx, cy, params);
  return weights_to_histogram(w, params.bins);
}

template <typename Scalar>
ConPatch build_con_patch(const BasicImage<Scalar>& img, int cx, int cy, const ContextParams& params) {
  params.validate();
  return ConPatch(extract_patch(img, cx, cy, params.patch).template cast<double>(),
                  context_histogram(img, cx, cy, params), params.alpha, cx, cy);
}

/// ||content_a - content_b||^2 + ||feature_a - feature_b||^2.
double con_distance(const ConPatch& a, const ConPatch& b);

/// Context histogram of every pixel, one row per pixel in raster order.
/// Used where many overlapping positions of one frame are queried.
class ContextMap {
 public:
  template <typename Scalar>
  ContextMap(const BasicImage<Scalar>& img, const ContextParams& params)
      : width_(img.width()), height_(img.height()), bins_(params.bins) {
    hist_.resize(static_cast<Eigen::Index>(width_) * height_, bins_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        hist_.row(static_cast<Eigen::Index>(y) * width_ + x) =
            context_histogram(img, x, y, params).bins.transpose();
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int bins() const { return bins_; }

  /// Histogram at (x, y), coordinates clamped into the frame.
  auto at(int x, int y) const {
    x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
    y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
    return hist_.row(static_cast<Eigen::Index>(y) * width_ + x);
  }

 private:
  int width_;
  int height_;
  int bins_;
  PixelMatrix<double> hist_;
};

}  // namespace conpatch
