#pragma once

#include "conpatch/context.hpp"
#include "conpatch/image.hpp"

#include <vector>

namespace conpatch {

enum class BlockMetric { kSsd, kSad };

struct FrucParams {
  int block = 16;
  int radius = 10;  ///< search radius, full pixels
  bool halfpel = true;
  /// Context of the context-blocks; alpha is ignored, the gain comes from
  /// sqrt_alpha.
  ContextParams context{10.0, 21, 8, 4, 0.0, 7};
  double sqrt_alpha = 1.3;  ///< on unit-range intensities, see alpha_from_unit_gain
  BlockMetric metric = BlockMetric::kSsd;
  int threads = 0;

  void validate() const;
  double alpha() const { return alpha_from_unit_gain(sqrt_alpha); }
};

/// Symmetric displacement in half-pixel units: the block at p of the
/// middle frame is matched between p - v/2 in the previous frame and
/// p + v/2 in the next one.
struct MotionVector {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

class MotionField {
 public:
  MotionField(int cols, int rows) : cols_(cols), rows_(rows), v_(static_cast<std::size_t>(cols) * rows) {}
  /// Grid for a frame: ceil(width / block) x ceil(height / block).
  static MotionField for_frame(int width, int height, int block) {
    return MotionField((width + block - 1) / block, (height + block - 1) / block);
  }
  int cols() const { return cols_; }
  int rows() const { return rows_; }
  MotionVector& at(int bx, int by) { return v_[static_cast<std::size_t>(by) * cols_ + bx]; }
  const MotionVector& at(int bx, int by) const { return v_[static_cast<std::size_t>(by) * cols_ + bx]; }

 private:
  int cols_;
  int rows_;
  std::vector<MotionVector> v_;
};

Image frame_average(const Image& prev, const Image& next);

/// Precomputed state for searching one frame pair: half-pel upsampled
/// frames and, when the context gain is non-zero, per-pixel context maps.
class BidirectionalMatcher {
 public:
  BidirectionalMatcher(const Image& prev, const Image& next, const FrucParams& params);

  /// Matching cost D(v) of block (bx, by) for vector v.
  double cost(int bx, int by, MotionVector v) const;
  /// Block SSD/SAD part of D(v) only.
  double block_cost(int bx, int by, MotionVector v) const;
  /// Context part alpha * ||H_prev - H_next||^2 only.
  double context_cost(int bx, int by, MotionVector v) const;

  /// Full-pel search in order of |v|_1 then raster, followed by half-pel
  /// refinement around the winner. Ties: smaller |v|_1, then raster order.
  MotionVector search(int bx, int by) const;
  MotionField estimate() const;

  /// Sample of the previous (sign -1) or next (+1) frame displaced by
  /// sign * v / 2 from (x, y), coordinates clamped into the frame.
  double sample(int sign, int x, int y, MotionVector v) const;

  int width() const { return width_; }
  int height() const { return height_; }
  const FrucParams& params() const { return params_; }

 private:
  FrucParams params_;
  int width_;
  int height_;
  PixelMatrix<double> prev2_;  // (2H-1) x (2W-1) bilinear upsampling
  PixelMatrix<double> next2_;
  std::vector<ContextMap> maps_;  // empty when the context is off
};

MotionVector bidirectional_search(const Image& prev, const Image& next, int block_x, int block_y,
                                  const FrucParams& params);

/// Each block = 0.5 prev(p - v/2) + 0.5 next(p + v/2); edge blocks cropped.
Image interpolate_frame(const Image& prev, const Image& next, const MotionField& field, const FrucParams& params);

/// Frames with an interpolated frame inserted between every consecutive pair.
std::vector<Image> upconvert(const std::vector<Image>& frames, const FrucParams& params);

struct FrameScore {
  std::size_t index = 0;  ///< index of the reconstructed frame in the input
  double psnr_mc = 0.0;
  double psnr_average = 0.0;
};

/// Drops the odd frames of a full-rate sequence, rebuilds each odd frame t
/// (with t + 1 present) from t - 1 and t + 1, and scores both the
/// motion-compensated and the averaged reconstruction.
std::vector<FrameScore> evaluate_upconversion(const std::vector<Image>& frames, const FrucParams& params,
                                              std::vector<Image>* reconstructed = nullptr);

}  // namespace conpatch
