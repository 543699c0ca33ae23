#include "conpatch/context.hpp"
#include "conpatch/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace conpatch;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels().data()[i] = 255.0 * counter_uniform(seed, 1, i);
  return img;
}

double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

ContextHistogram random_histogram(int bins, CounterRng& rng) {
  ContextHistogram h{VectorX<double>(bins)};
  for (int i = 0; i < bins; ++i) h.bins[i] = rng.uniform();
  h.bins /= h.bins.sum();
  return h;
}

}  // namespace

TEST_CASE("stride grid geometry") {
  ContextParams p;
  CHECK(p.offsets() == std::vector<int>{-10, -6, -2, 2, 6, 10});
  CHECK(p.weight_count() == 36);
  p.window = 17;
  CHECK(p.offsets() == std::vector<int>{-8, -4, 0, 4, 8});
  CHECK(p.weight_count() == 24);
  p.stride = 1;
  p.window = 5;
  CHECK(p.weight_count() == 24);
  CHECK(p.dim() == 57);
  p.patch = 7;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("constant image gives unit weights") {
  const Image img(30, 30, 42.0);
  ContextParams p;
  const auto w = correlation_surface(img, 15, 15, p);
  CHECK(w.size() == p.weight_count());
  for (double v : w) CHECK(v == 1.0);
}

TEST_CASE("weight at squared distance 2 sigma^2 is 1/e") {
  ContextParams p;
  p.sigma = 5.0;
  p.scale = SimilarityScale::kSum;
  CHECK(similarity_weight(2.0 * 25.0, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(similarity_weight(2.0 * 25.0, p) == doctest::Approx(0.367879).epsilon(1e-6));
  p.scale = SimilarityScale::kPerPixel;
  CHECK(similarity_weight(2.0 * 25.0 * 49.0, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  // One pixel of the shifted patch differs so that ||x_i - x_j||^2 = 2 sigma^2.
  p.scale = SimilarityScale::kSum;
  p.window = 3;
  p.stride = 2;
  p.patch = 1;
  Image img(3, 3, 0.0);
  img(0, 0) = std::sqrt(50.0);
  const auto w = correlation_surface(img, 1, 1, p);
  REQUIRE(w.size() == 4);
  CHECK(w[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(w[1] == 1.0);
}

TEST_CASE("correlation surface matches a brute force oracle") {
  const Image img = random_image(64, 64, 17);
  for (auto scale : {SimilarityScale::kSum, SimilarityScale::kPerPixel}) {
    ContextParams p;
    p.scale = scale;
    p.sigma = scale == SimilarityScale::kSum ? 300.0 : 40.0;
    for (auto [cx, cy] : {std::pair{0, 0}, std::pair{31, 17}, std::pair{63, 5}, std::pair{10, 63}}) {
      const auto w = correlation_surface(img, cx, cy, p);
      std::vector<double> oracle;
      for (int oy = -10; oy <= 10; oy += 4)
        for (int ox = -10; ox <= 10; ox += 4) {
          if (ox == 0 && oy == 0) continue;
          double d = 0.0;
          for (int py = -3; py <= 3; ++py)
            for (int px = -3; px <= 3; ++px) {
              auto at = [&](int x, int y) {
                return img(std::clamp(x, 0, 63), std::clamp(y, 0, 63));
              };
              const double diff = at(cx + px, cy + py) - at(cx + ox + px, cy + oy + py);
              d += diff * diff;
            }
          if (scale == SimilarityScale::kPerPixel) d /= 49.0;
          oracle.push_back(std::exp(-d / (2.0 * p.sigma * p.sigma)));
        }
      REQUIRE(w.size() == oracle.size());
      for (std::size_t i = 0; i < w.size(); ++i) CHECK(std::abs(w[i] - oracle[i]) <= 1e-12);
    }
  }
}

TEST_CASE("weights lie in (0, 1] and equal 1 only for identical patches") {
  const Image img = random_image(40, 40, 3);
  ContextParams p;
  p.sigma = 60.0;
  const auto w = correlation_surface(img, 20, 20, p);
  for (double v : w) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("weights decrease strictly with distance") {
  ContextParams p;
  double prev = similarity_weight(0.0, p);
  CHECK(prev == 1.0);
  for (double d = 1.0; d < 1e4; d *= 1.7) {
    const double w = similarity_weight(d, p);
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("histogram examples") {
  const double ones[] = {1.0, 1.0, 1.0};
  const auto h = weights_to_histogram(ones, 10);
  CHECK(h.bins[9] == 1.0);
  CHECK(h.bins.head(9).isZero());

  const double mixed[] = {0.05, 0.95, 0.95, 0.95};
  const auto m = weights_to_histogram(mixed, 10);
  CHECK(m.bins[0] == 0.25);
  CHECK(m.bins[9] == 0.75);
  CHECK(m.bins.sum() == 1.0);

  const double edges[] = {0.0, 0.25, 0.5, 0.75, 1.0, 0.2500000001};
  const auto e = weights_to_histogram(edges, 4);
  CHECK(e.bins[0] * 6 == doctest::Approx(2.0));
  CHECK(e.bins[1] * 6 == doctest::Approx(2.0));
  CHECK(e.bins[2] * 6 == doctest::Approx(1.0));
  CHECK(e.bins[3] * 6 == doctest::Approx(1.0));

  CHECK_THROWS_AS(weights_to_histogram(std::span<const double>{}, 8), std::invalid_argument);
  const double bad[] = {1.5};
  CHECK_THROWS_AS(weights_to_histogram(bad, 8), std::invalid_argument);
}

TEST_CASE("histogram equals a naive counting oracle") {
  std::vector<double> w(1000);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = counter_uniform(77, 3, i);
  for (int b : {1, 3, 8, 10}) {
    const auto h = weights_to_histogram(w, b);
    std::vector<int> counts(b, 0);
    for (double v : w) {
      int k = 0;
      while (!(v <= static_cast<double>(k + 1) / b)) ++k;
      ++counts[k];
    }
    for (int k = 0; k < b; ++k) CHECK(h.bins[k] == counts[k] / 1000.0);
    CHECK(std::abs(h.bins.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("histogram is invariant to weight order") {
  std::vector<double> w(200);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = counter_uniform(5, 0, i);
  const auto ref = weights_to_histogram(w, 8);
  for (int round = 0; round < 5; ++round) {
    for (std::size_t i = w.size() - 1; i > 0; --i)
      std::swap(w[i], w[counter_below(round, 9, i, i + 1)]);
    CHECK(weights_to_histogram(w, 8).bins == ref.bins);
  }
}

TEST_CASE("con-patch of a constant image") {
  ContextParams p;
  p.alpha = 1.0;
  const auto cp = build_con_patch(Image(25, 25, 9.0), 12, 12, p);
  CHECK(cp.dim() == 57);
  CHECK(cp.feature()[7] == 1.0);
  CHECK(cp.feature().head(7).isZero());
  CHECK((cp.content().array() == 9.0).all());
}

TEST_CASE("alpha zero reduces to plain patches") {
  const Image img = random_image(32, 32, 8);
  ContextParams p;
  const auto a = build_con_patch(img, 5, 9, p);
  const auto b = build_con_patch(img, 20, 14, p);
  CHECK(a.feature().isZero());
  CHECK(con_distance(a, b) == (a.content() - b.content()).squaredNorm());
}

TEST_CASE("hand built con distance") {
  VectorX<double> ca = VectorX<double>::Zero(9);
  VectorX<double> cb = VectorX<double>::Zero(9);
  cb[4] = 3.0;
  ContextHistogram ha{VectorX<double>::Zero(4)};
  ContextHistogram hb{VectorX<double>::Zero(4)};
  ha.bins << 0.5, 0.5, 0.0, 0.0;
  hb.bins << 0.0, 1.0, 0.0, 0.0;
  const ConPatch a(ca, ha, 4.0);
  const ConPatch b(cb, hb, 4.0);
  CHECK(con_distance(a, a) == 0.0);
  CHECK(con_distance(a, b) == doctest::Approx(11.0).epsilon(1e-15));
  const ConPatch other(cb, hb, 1.0);
  CHECK_THROWS_AS(con_distance(a, other), std::invalid_argument);
}

TEST_CASE("con distance algebra on random pairs") {
  CounterRng rng(123, 0);
  for (int t = 0; t < 1000; ++t) {
    const double alpha = 1e4 * rng.uniform();
    VectorX<double> ca(49), cb(49);
    for (int i = 0; i < 49; ++i) {
      ca[i] = 255.0 * rng.uniform();
      cb[i] = 255.0 * rng.uniform();
    }
    const auto ha = random_histogram(8, rng);
    const auto hb = random_histogram(8, rng);
    const ConPatch a(ca, ha, alpha);
    const ConPatch b(cb, hb, alpha);
    VectorX<double> va(57), vb(57);
    va << ca, std::sqrt(alpha) * ha.bins;
    vb << cb, std::sqrt(alpha) * hb.bins;
    const double d = con_distance(a, b);
    CHECK(relative_error(d, (va - vb).squaredNorm()) <= 1e-12);
    CHECK(relative_error(d, (ca - cb).squaredNorm() + alpha * (ha.bins - hb.bins).squaredNorm()) <= 1e-9);
  }
}

TEST_CASE("scaling alpha scales the feature term") {
  CounterRng rng(5, 1);
  VectorX<double> c = VectorX<double>::Zero(49);
  const auto ha = random_histogram(8, rng);
  const auto hb = random_histogram(8, rng);
  const double base = con_distance(ConPatch(c, ha, 2.0), ConPatch(c, hb, 2.0));
  for (double s : {0.5, 3.0, 10.0}) {
    const double scaled = con_distance(ConPatch(c, ha, 2.0 * s * s), ConPatch(c, hb, 2.0 * s * s));
    CHECK(relative_error(scaled, s * s * base) <= 1e-12);
  }
}

TEST_CASE("flat regions concentrate in the top bin, noise in the first") {
  Image img(80, 40, 128.0);
  for (int y = 0; y < 40; ++y)
    for (int x = 40; x < 80; ++x) img(x, y) = 255.0 * counter_uniform(4, 2, y * 80 + x);
  ContextParams p;
  const auto flat = context_histogram(img, 15, 20, p);
  const auto noisy = context_histogram(img, 62, 20, p);
  CHECK(flat.bins[7] > 0.9);
  CHECK(noisy.bins[0] > 0.9);
}

TEST_CASE("context map agrees with pointwise histograms") {
  const Image img = random_image(20, 15, 21);
  ContextParams p;
  p.sigma = 40.0;
  const ContextMap map(img, p);
  for (int y = 0; y < 15; y += 3)
    for (int x = 0; x < 20; x += 4)
      CHECK(map.at(x, y).transpose() == context_histogram(img, x, y, p).bins);
  CHECK(map.at(-5, 100).transpose() == context_histogram(img, 0, 14, p).bins);
}

TEST_CASE("con-patch serialization") {
  const Image img = random_image(30, 30, 2);
  ContextParams p;
  p.alpha = alpha_from_unit_gain(0.9);
  const auto cp = build_con_patch(img, 10, 11, p);
  const auto bytes = cp.serialize();
  CHECK(bytes.size() == 16 + 4 * 57);
  CHECK(bytes[0] == 7);
  CHECK(bytes[4] == 8);
  CHECK(bytes[12] == 1);
  const auto back = ConPatch::deserialize(bytes);
  CHECK(back.side() == 7);
  CHECK(back.bins() == 8);
  CHECK(back.alpha() == static_cast<float>(p.alpha));
  CHECK(back.values() == cp.values().cast<float>().cast<double>());
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(ConPatch::deserialize(truncated), std::invalid_argument);
  auto wrong_version = bytes;
  wrong_version[12] = 9;
  CHECK_THROWS_AS(ConPatch::deserialize(wrong_version), std::invalid_argument);
}

TEST_CASE("unit gain conversion") {
  CHECK(alpha_from_unit_gain(1.0) == 65025.0);
  CHECK(alpha_from_unit_gain(0.0) == 0.0);
  CHECK(std::sqrt(alpha_from_unit_gain(0.9)) == doctest::Approx(229.5));
}

TEST_CASE("similarity scale names") {
  CHECK(similarity_scale_from_string(to_string(SimilarityScale::kSum)) == SimilarityScale::kSum);
  CHECK(similarity_scale_from_string("per-pixel") == SimilarityScale::kPerPixel);
  CHECK_THROWS_AS(similarity_scale_from_string("median"), std::invalid_argument);
}
