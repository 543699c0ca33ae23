#include "conpatch/fruc.hpp"

#include "conpatch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <tuple>

namespace conpatch {

void FrucParams::validate() const {
  if (block < 1) throw std::invalid_argument("FRUC block side must be >= 1");
  if (radius < 0) throw std::invalid_argument("FRUC search radius must be >= 0");
  if (!(sqrt_alpha >= 0.0)) throw std::invalid_argument("FRUC sqrt_alpha must be >= 0");
  ContextParams c = context;
  c.alpha = 0.0;
  c.validate();
}

Image frame_average(const Image& prev, const Image& next) {
  if (!same_shape(prev, next)) throw std::invalid_argument("frame_average: frame dimensions differ");
  return Image((0.5 * prev.pixels().array() + 0.5 * next.pixels().array()).matrix());
}

namespace {

PixelMatrix<double> upsample2(const Image& img) {
  PixelMatrix<double> out(2 * img.height() - 1, 2 * img.width() - 1);
  for (Eigen::Index Y = 0; Y < out.rows(); ++Y)
    for (Eigen::Index X = 0; X < out.cols(); ++X) out(Y, X) = bilinear_sample(img, X / 2.0, Y / 2.0);
  return out;
}

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Candidate order key: cost, then |v|_1, then raster.
auto order_key(double cost, MotionVector v) { return std::make_tuple(cost, std::abs(v.dx) + std::abs(v.dy), v.dy, v.dx); }

}  // namespace

BidirectionalMatcher::BidirectionalMatcher(const Image& prev, const Image& next, const FrucParams& params)
    : params_(params), width_(prev.width()), height_(prev.height()) {
  params.validate();
  if (!same_shape(prev, next)) throw std::invalid_argument("FRUC frames differ in size");
  prev2_ = upsample2(prev);
  next2_ = upsample2(next);
  if (params.sqrt_alpha > 0.0) {
    ContextParams c = params.context;
    c.alpha = 0.0;
    maps_.emplace_back(prev, c);
    maps_.emplace_back(next, c);
  }
}

double BidirectionalMatcher::sample(int sign, int x, int y, MotionVector v) const {
  const auto& up = sign < 0 ? prev2_ : next2_;
  const int X = clampi(2 * x + sign * v.dx, 0, static_cast<int>(up.cols()) - 1);
  const int Y = clampi(2 * y + sign * v.dy, 0, static_cast<int>(up.rows()) - 1);
  return up(Y, X);
}

double BidirectionalMatcher::block_cost(int bx, int by, MotionVector v) const {
  const int B = params_.block;
  const int x0 = bx * B, y0 = by * B;
  const int x1 = std::min(x0 + B, width_), y1 = std::min(y0 + B, height_);
  double acc = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const double d = sample(-1, x, y, v) - sample(+1, x, y, v);
      acc += params_.metric == BlockMetric::kSsd ? d * d : std::abs(d);
    }
  return acc;
}

double BidirectionalMatcher::context_cost(int bx, int by, MotionVector v) const {
  if (maps_.empty()) return 0.0;
  const int B = params_.block;
  const int x0 = bx * B, y0 = by * B;
  const double cx = x0 + (std::min(x0 + B, width_) - x0 - 1) / 2.0;
  const double cy = y0 + (std::min(y0 + B, height_) - y0 - 1) / 2.0;
  auto at = [](double c) { return static_cast<int>(std::floor(c + 0.5)); };
  const auto hp = maps_[0].at(at(cx - v.dx / 2.0), at(cy - v.dy / 2.0));
  const auto hn = maps_[1].at(at(cx + v.dx / 2.0), at(cy + v.dy / 2.0));
  return params_.alpha() * (hp - hn).squaredNorm();
}

double BidirectionalMatcher::cost(int bx, int by, MotionVector v) const {
  return block_cost(bx, by, v) + context_cost(bx, by, v);
}

MotionVector BidirectionalMatcher::search(int bx, int by) const {
  const int R = params_.radius;
  std::vector<MotionVector> cands;
  for (int dy = -R; dy <= R; ++dy)
    for (int dx = -R; dx <= R; ++dx) cands.push_back({2 * dx, 2 * dy});
  // Spiral-like order: small motion first so equal costs keep the smaller vector.
  std::stable_sort(cands.begin(), cands.end(), [](MotionVector a, MotionVector b) {
    return std::abs(a.dx) + std::abs(a.dy) < std::abs(b.dx) + std::abs(b.dy);
  });
  MotionVector best = cands.front();
  auto best_key = order_key(cost(bx, by, best), best);
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const auto key = order_key(cost(bx, by, cands[i]), cands[i]);
    if (key < best_key) {
      best_key = key;
      best = cands[i];
    }
  }
  if (!params_.halfpel) return best;
  const MotionVector centre = best;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const MotionVector v{centre.dx + dx, centre.dy + dy};
      if (std::abs(v.dx) > 2 * R || std::abs(v.dy) > 2 * R) continue;
      const auto key = order_key(cost(bx, by, v), v);
      if (key < best_key) {
        best_key = key;
        best = v;
      }
    }
  return best;
}

MotionField BidirectionalMatcher::estimate() const {
  MotionField field = MotionField::for_frame(width_, height_, params_.block);
  const auto n = static_cast<std::size_t>(field.cols()) * field.rows();
  parallel_for(n, params_.threads, [&](std::size_t i) {
    const int bx = static_cast<int>(i % static_cast<std::size_t>(field.cols()));
    const int by = static_cast<int>(i / static_cast<std::size_t>(field.cols()));
    field.at(bx, by) = search(bx, by);
  });
  return field;
}

MotionVector bidirectional_search(const Image& prev, const Image& next, int block_x, int block_y,
                                  const FrucParams& params) {
  const BidirectionalMatcher m(prev, next, params);
  const MotionField grid = MotionField::for_frame(prev.width(), prev.height(), params.block);
  if (block_x < 0 || block_y < 0 || block_x >= grid.cols() || block_y >= grid.rows())
    throw std::invalid_argument("block index outside the frame");
  return m.search(block_x, block_y);
}

Image interpolate_frame(const Image& prev, const Image& next, const MotionField& field, const FrucParams& params) {
  if (!same_shape(prev, next)) throw std::invalid_argument("interpolate_frame: frame dimensions differ");
  const MotionField expect = MotionField::for_frame(prev.width(), prev.height(), params.block);
  if (field.cols() != expect.cols() || field.rows() != expect.rows())
    throw std::invalid_argument("motion field does not match the frame/block geometry");
  FrucParams sampling = params;
  sampling.sqrt_alpha = 0.0;  // sampling only, no context maps
  const BidirectionalMatcher m(prev, next, sampling);
  Image out(prev.width(), prev.height());
  const int B = params.block;
  for (int by = 0; by < field.rows(); ++by)
    for (int bx = 0; bx < field.cols(); ++bx) {
      const MotionVector v = field.at(bx, by);
      for (int y = by * B; y < std::min((by + 1) * B, out.height()); ++y)
        for (int x = bx * B; x < std::min((bx + 1) * B, out.width()); ++x)
          out(x, y) = 0.5 * m.sample(-1, x, y, v) + 0.5 * m.sample(+1, x, y, v);
    }
  return out;
}

std::vector<Image> upconvert(const std::vector<Image>& frames, const FrucParams& params) {
  if (frames.size() < 2) throw std::invalid_argument("up-conversion needs at least two frames");
  for (const auto& f : frames)
    if (!same_shape(f, frames.front())) throw std::invalid_argument("frames differ in size");
  std::vector<Image> out;
  out.reserve(2 * frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    const BidirectionalMatcher m(frames[i], frames[i + 1], params);
    out.push_back(frames[i]);
    out.push_back(interpolate_frame(frames[i], frames[i + 1], m.estimate(), params));
  }
  out.push_back(frames.back());
  return out;
}

std::vector<FrameScore> evaluate_upconversion(const std::vector<Image>& frames, const FrucParams& params,
                                              std::vector<Image>* reconstructed) {
  if (frames.size() < 3) throw std::invalid_argument("evaluation needs at least three frames");
  for (const auto& f : frames)
    if (!same_shape(f, frames.front())) throw std::invalid_argument("frames differ in size");
  std::vector<FrameScore> scores;
  for (std::size_t t = 1; t + 1 < frames.size(); t += 2) {
    const BidirectionalMatcher m(frames[t - 1], frames[t + 1], params);
    const Image mc = interpolate_frame(frames[t - 1], frames[t + 1], m.estimate(), params);
    const Image avg = frame_average(frames[t - 1], frames[t + 1]);
    scores.push_back({t, psnr(frames[t], mc), psnr(frames[t], avg)});
    if (reconstructed) reconstructed->push_back(mc);
  }
  return scores;
}

}  // namespace conpatch
