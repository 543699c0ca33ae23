#include "conpatch/context.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace conpatch {

std::string to_string(SimilarityScale s) {
  return s == SimilarityScale::kSum ? "sum" : "per-pixel";
}

SimilarityScale similarity_scale_from_string(const std::string& s) {
  if (s == "sum") return SimilarityScale::kSum;
  if (s == "per-pixel" || s == "mean") return SimilarityScale::kPerPixel;
  throw std::invalid_argument("unknown similarity scale '" + s + "' (expected sum or per-pixel)");
}

void ContextParams::validate() const {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("context window h must be odd");
  if (patch < 1 || patch % 2 == 0) throw std::invalid_argument("patch side c must be odd");
  if (patch > window) throw std::invalid_argument("patch side c must not exceed window h");
  if (stride < 1) throw std::invalid_argument("context stride m must be >= 1");
  if (bins < 1) throw std::invalid_argument("histogram bin count b must be >= 1");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("context sigma must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("context alpha must be >= 0");
}

std::vector<int> ContextParams::offsets() const {
  std::vector<int> out;
  const int r = window / 2;
  for (int d = -r; d <= r; d += stride) out.push_back(d);
  return out;
}

std::size_t ContextParams::weight_count() const {
  const auto off = offsets();
  bool has_zero = false;
  for (int d : off) has_zero = has_zero || d == 0;
  return off.size() * off.size() - (has_zero ? 1 : 0);
}

ContextHistogram weights_to_histogram(std::span<const double> weights, int bins) {
  if (bins < 1) throw std::invalid_argument("histogram bin count must be >= 1");
  if (weights.empty()) throw std::invalid_argument("cannot build a histogram from an empty weight list");
  ContextHistogram h{VectorX<double>::Zero(bins)};
  const double b = bins;
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("similarity weight outside [0, 1]");
    // ceil(w b) - 1, then nudged so that the edge test w <= k/b is exact.
    int k = static_cast<int>(std::ceil(w * b)) - 1;
    k = k < 0 ? 0 : (k >= bins ? bins - 1 : k);
    while (k > 0 && w <= k / b) --k;
    while (k < bins - 1 && w > (k + 1) / b) ++k;
    h.bins[k] += 1.0;
  }
  h.bins /= static_cast<double>(weights.size());
  return h;
}

ConPatch::ConPatch(VectorX<double> content, const ContextHistogram& hist, double alpha, int origin_x,
                   int origin_y)
    : bins_(static_cast<int>(hist.bins.size())), alpha_(alpha), origin_x_(origin_x), origin_y_(origin_y) {
  const auto n = content.size();
  side_ = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (static_cast<Eigen::Index>(side_) * side_ != n || n == 0)
    throw std::invalid_argument("con-patch content must be a non-empty square patch");
  if (!(alpha >= 0.0)) throw std::invalid_argument("con-patch alpha must be >= 0");
  values_.resize(n + bins_);
  values_.head(n) = content;
  values_.tail(bins_) = std::sqrt(alpha) * hist.bins;
}

double con_distance(const ConPatch& a, const ConPatch& b) {
  if (a.side() != b.side() || a.bins() != b.bins() || a.alpha() != b.alpha())
    throw std::invalid_argument("con_distance: con-patches have different (c, b, alpha) configurations");
  return (a.content() - b.content()).squaredNorm() + (a.feature() - b.feature()).squaredNorm();
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> ConPatch::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * static_cast<std::size_t>(dim()));
  put_u32(out, static_cast<std::uint32_t>(side_));
  put_u32(out, static_cast<std::uint32_t>(bins_));
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(alpha_)));
  put_u32(out, kFormatVersion);
  for (Eigen::Index i = 0; i < dim(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(values_[i])));
  return out;
}

ConPatch ConPatch::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) throw std::invalid_argument("con-patch record shorter than its header");
  ConPatch p;
  p.side_ = static_cast<int>(get_u32(bytes, 0));
  p.bins_ = static_cast<int>(get_u32(bytes, 4));
  p.alpha_ = std::bit_cast<float>(get_u32(bytes, 8));
  if (get_u32(bytes, 12) != kFormatVersion) throw std::invalid_argument("unsupported con-patch version");
  const std::size_t dim = static_cast<std::size_t>(p.side_) * p.side_ + p.bins_;
  if (p.side_ < 1 || bytes.size() != 16 + 4 * dim)
    throw std::invalid_argument("con-patch record length does not match its header");
  p.values_.resize(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) p.values_[static_cast<Eigen::Index>(i)] = std::bit_cast<float>(get_u32(bytes, 16 + 4 * i));
  return p;
}

}  // namespace conpatch
