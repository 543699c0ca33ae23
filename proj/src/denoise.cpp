#include "conpatch/denoise.hpp"

#include "conpatch/parallel.hpp"
#include "conpatch/random.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace conpatch {

VectorX<double> denoise_patch(const VectorX<double>& noisy, const PixelMatrix<double>& neighbors, double sigma_v,
                              VectorX<double>* weights_out) {
  if (neighbors.rows() < 1) throw std::invalid_argument("denoise_patch needs at least one neighbour");
  if (neighbors.cols() != noisy.size()) throw std::invalid_argument("neighbour patches differ in size from the query");
  if (!(sigma_v > 0.0)) throw std::invalid_argument("sigma_v must be > 0");
  const VectorX<double> d = (neighbors.rowwise() - noisy.transpose()).rowwise().squaredNorm();
  VectorX<double> w = (-d / (2.0 * sigma_v * sigma_v)).array().exp().matrix();
  const double total = w.sum();
  if (!(total > 0.0)) {
    Eigen::Index nearest = 0;
    d.minCoeff(&nearest);  // first minimum on ties
    w.setZero();
    w[nearest] = 1.0;
  } else {
    w /= total;
  }
  if (weights_out) *weights_out = w;
  return neighbors.transpose() * w;
}

double default_unit_sqrt_alpha(double sigma_v) {
  if (sigma_v < 50.0) return 0.9;
  if (sigma_v < 100.0) return 1.1;
  return 1.3;
}

void DenoiseParams::validate() const {
  if (!(sigma_v > 0.0)) throw std::invalid_argument("sigma_v must be > 0");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (stride > context.patch) throw std::invalid_argument("stride larger than the patch leaves pixels uncovered");
  if (max_visits < 1) throw std::invalid_argument("max_visits must be >= 1");
  context.validate();
}

std::vector<int> stride_grid(int length, int stride) {
  std::vector<int> g;
  for (int v = 0; v < length; v += stride) g.push_back(v);
  if (g.back() != length - 1) g.push_back(length - 1);
  return g;
}

namespace {

struct GridPatch {
  int x;
  int y;
};

std::vector<GridPatch> grid_patches(const Image& img, int stride) {
  std::vector<GridPatch> out;
  const auto xs = stride_grid(img.width(), stride);
  for (int y : stride_grid(img.height(), stride))
    for (int x : xs) out.push_back({x, y});
  return out;
}

/// Scatters patch estimates (one row each, grid order) and divides by
/// coverage. Sequential so the sum order is fixed.
Image aggregate(const Image& like, const std::vector<GridPatch>& grid, const PixelMatrix<double>& estimates, int side) {
  PixelMatrix<double> acc = PixelMatrix<double>::Zero(like.height(), like.width());
  PixelMatrix<double> cover = PixelMatrix<double>::Zero(like.height(), like.width());
  const int r = side / 2;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto est = estimates.row(static_cast<Eigen::Index>(i));
    Eigen::Index k = 0;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx, ++k) {
        const int x = grid[i].x + dx;
        const int y = grid[i].y + dy;
        if (!like.contains(x, y)) continue;
        acc(y, x) += est[k];
        cover(y, x) += 1.0;
      }
  }
  return Image(acc.cwiseQuotient(cover));
}

}  // namespace

Image denoise_image(const Image& noisy, const KnnIndex& index, const DenoiseParams& params,
                    const PatchObserver& observer) {
  params.validate();
  const PatchDatabase& db = index.database();
  const auto& dbp = db.meta().params;
  if (dbp.patch != params.context.patch) throw std::invalid_argument("database patch size differs from the request");
  if (params.k > db.count()) throw std::invalid_argument("k exceeds database size");
  const bool db_context = db.meta().with_context;
  if (params.use_context) {
    if (!db_context) throw std::invalid_argument("context search requested on a content-only database");
    if (!dbp.same_layout(params.context))
      throw std::invalid_argument("database context configuration (c, b, alpha) differs from the request");
  } else if (db_context && dbp.alpha != 0.0) {
    throw std::invalid_argument("content-only search needs a database with alpha = 0 or without context");
  }

  ContextParams query_ctx = params.context;
  query_ctx.sigma = params.effective_query_sigma();
  const int c2 = params.context.content_dim();
  const auto grid = grid_patches(noisy, params.stride);
  PixelMatrix<double> estimates(static_cast<Eigen::Index>(grid.size()), c2);
  std::vector<PatchTrace> traces(observer ? grid.size() : 0);

  parallel_for(grid.size(), params.threads, [&](std::size_t i) {
    const auto [x, y] = grid[i];
    VectorX<double> query(db.dim());
    if (params.use_context) {
      query = build_con_patch(noisy, x, y, query_ctx).values();
    } else {
      query.setZero();
      query.head(c2) = extract_patch(noisy, x, y, params.context.patch);
    }
    QueryResult nn = index.query(std::span<const double>(query.data(), static_cast<std::size_t>(query.size())),
                                 params.k, params.max_visits);
    PixelMatrix<double> neighbors(static_cast<Eigen::Index>(nn.indices.size()), c2);
    for (std::size_t j = 0; j < nn.indices.size(); ++j)
      neighbors.row(static_cast<Eigen::Index>(j)) = db.row(nn.indices[j]).head(c2).cast<double>();
    VectorX<double> w;
    estimates.row(static_cast<Eigen::Index>(i)) =
        denoise_patch(query.head(c2), neighbors, params.sigma_v, observer ? &w : nullptr).transpose();
    if (observer) traces[i] = PatchTrace{x, y, std::move(nn), std::move(w)};
  });

  if (observer)
    for (const auto& t : traces) observer(t);
  return aggregate(noisy, grid, estimates, params.context.patch);
}

Image internal_nlm(const Image& noisy, const NlmParams& p) {
  if (p.patch < 1 || p.patch % 2 == 0) throw std::invalid_argument("NLM patch side must be odd");
  if (p.window < p.patch || p.window % 2 == 0) throw std::invalid_argument("NLM window must be odd and >= patch");
  if (!(p.sigma_v > 0.0) || !(p.filter > 0.0)) throw std::invalid_argument("NLM sigma and filter must be > 0");
  if (p.k < 0) throw std::invalid_argument("NLM k must be >= 0");
  if (p.stride < 1 || p.stride > p.patch) throw std::invalid_argument("NLM stride must be in [1, patch]");

  const int r = p.window / 2;
  const double h = p.filter * p.sigma_v;
  const double inv = 1.0 / (2.0 * h * h);
  const auto grid = grid_patches(noisy, p.stride);
  const int c2 = p.patch * p.patch;
  PixelMatrix<double> estimates(static_cast<Eigen::Index>(grid.size()), c2);

  parallel_for(grid.size(), 0, [&](std::size_t i) {
    const auto [x, y] = grid[i];
    const VectorX<double> centre = extract_patch(noisy, x, y, p.patch);
    struct Cand {
      double d;
      int x, y;
    };
    std::vector<Cand> cands;
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) {
        const int cx = x + dx, cy = y + dy;
        if ((dx == 0 && dy == 0) || !noisy.contains(cx, cy)) continue;
        cands.push_back({(extract_patch(noisy, cx, cy, p.patch) - centre).squaredNorm(), cx, cy});
      }
    if (cands.empty()) {
      estimates.row(static_cast<Eigen::Index>(i)) = centre.transpose();
      return;
    }
    std::size_t keep = cands.size();
    if (p.k > 0 && static_cast<std::size_t>(p.k) < keep) {
      keep = static_cast<std::size_t>(p.k);
      std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                        [](const Cand& a, const Cand& b) {
                          return a.d < b.d || (a.d == b.d && (a.y < b.y || (a.y == b.y && a.x < b.x)));
                        });
    }
    VectorX<double> acc = VectorX<double>::Zero(c2);
    double total = 0.0;
    double self_weight = 0.0;
    for (std::size_t j = 0; j < keep; ++j) {
      const double w = std::exp(-cands[j].d * inv);
      self_weight = std::max(self_weight, w);
      acc += w * extract_patch(noisy, cands[j].x, cands[j].y, p.patch);
      total += w;
    }
    if (!(self_weight > 0.0)) self_weight = 1.0;  // every candidate underflowed
    acc += self_weight * centre;
    total += self_weight;
    estimates.row(static_cast<Eigen::Index>(i)) = (acc / total).transpose();
  });
  return aggregate(noisy, grid, estimates, p.patch);
}

// ---------------------------------------------------------------------------

void MatchingConfig::validate() const {
  if (patch < 1 || patch % 2 == 0) throw std::invalid_argument("central patch side must be odd");
  if (large % 2 == 0 || large <= patch) throw std::invalid_argument("large patch side must be odd and exceed c");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (!(sigma_v >= 0.0)) throw std::invalid_argument("sigma_v must be >= 0");
  context.validate();
  if (context.patch != patch) throw std::invalid_argument("context patch side must equal c");
  if (context.window > large) throw std::invalid_argument("context window must fit in the large patch");
}

MatchingRecord MatchingReport::mean() const {
  MatchingRecord m;
  if (records.empty()) return m;
  for (const auto& r : records) {
    m.e_gt += r.e_gt;
    m.e_small += r.e_small;
    m.e_large += r.e_large;
    m.e_con += r.e_con;
  }
  const double n = static_cast<double>(records.size());
  m.e_gt /= n;
  m.e_small /= n;
  m.e_large /= n;
  m.e_con /= n;
  return m;
}

PixelMatrix<double> sample_large_patches(std::span<const Image> images, std::size_t n, int side, std::uint64_t seed) {
  if (images.empty()) throw std::invalid_argument("no images to sample from");
  if (side < 1 || side % 2 == 0) throw std::invalid_argument("large patch side must be odd");
  const int r = side / 2;
  std::vector<std::uint64_t> first;
  std::uint64_t total = 0;
  for (const auto& img : images) {
    if (img.width() < side || img.height() < side)
      throw std::invalid_argument("image smaller than a large patch");
    first.push_back(total);
    total += static_cast<std::uint64_t>(img.width() - 2 * r) * static_cast<std::uint64_t>(img.height() - 2 * r);
  }
  PixelMatrix<double> out(static_cast<Eigen::Index>(n), side * side);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t pick = counter_below(seed, 0x4C41524745ull, i, total);
    const auto img_idx = static_cast<std::size_t>(std::upper_bound(first.begin(), first.end(), pick) - first.begin()) - 1;
    const auto& img = images[img_idx];
    const auto local = pick - first[img_idx];
    const auto span_x = static_cast<std::uint64_t>(img.width() - 2 * r);
    out.row(static_cast<Eigen::Index>(i)) =
        extract_patch(img, r + static_cast<int>(local % span_x), r + static_cast<int>(local / span_x), side).transpose();
  }
  return out;
}

PixelMatrix<double> add_noise_rows(const PixelMatrix<double>& rows, double sigma_v, std::uint64_t seed) {
  PixelMatrix<double> out = rows;
  if (sigma_v == 0.0) return out;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out.data()[i] += sigma_v * counter_normal(seed, 0x524F574E4F495345ull, static_cast<std::uint64_t>(i));
  return out;
}

ConPatch con_patch_of_large(std::span<const double> large, int side, const ContextParams& params) {
  if (large.size() != static_cast<std::size_t>(side) * side) throw std::invalid_argument("large patch length mismatch");
  const Image img(Eigen::Map<const PixelMatrix<double>>(large.data(), side, side));
  return build_con_patch(img, side / 2, side / 2, params);
}

namespace {

PixelMatrix<double> centres_of(const PixelMatrix<double>& large, int side, int c) {
  const int off = (side - c) / 2;
  PixelMatrix<double> out(large.rows(), c * c);
  for (Eigen::Index i = 0; i < large.rows(); ++i)
    out.row(i) = Eigen::Map<const PixelMatrix<double>>(large.row(i).data(), side, side)
                     .block(off, off, c, c)
                     .reshaped<Eigen::RowMajor>()
                     .transpose();
  return out;
}

PixelMatrix<double> con_rows(const PixelMatrix<double>& large, int side, const ContextParams& params) {
  PixelMatrix<double> out(large.rows(), params.dim());
  for (Eigen::Index i = 0; i < large.rows(); ++i)
    out.row(i) = con_patch_of_large(std::span<const double>(large.row(i).data(), static_cast<std::size_t>(large.cols())),
                                    side, params)
                     .values()
                     .transpose();
  return out;
}

PatchDatabase as_database(const PixelMatrix<double>& rows, const ContextParams& params, bool with_context) {
  DatabaseMeta meta;
  meta.params = params;
  meta.with_context = with_context;
  return PatchDatabase(rows.cast<float>(), meta);
}

}  // namespace

MatchingReport eval_matching(const PixelMatrix<double>& clean_queries, const PixelMatrix<double>& noisy_queries,
                             const PixelMatrix<double>& examples, const MatchingConfig& config) {
  config.validate();
  const int side = config.large;
  const auto L2 = static_cast<Eigen::Index>(side) * side;
  if (clean_queries.cols() != L2 || noisy_queries.cols() != L2 || examples.cols() != L2)
    throw std::invalid_argument("query and example patches must all be large x large");
  if (clean_queries.rows() != noisy_queries.rows())
    throw std::invalid_argument("clean and noisy query sets differ in size");
  if (examples.rows() < config.k) throw std::invalid_argument("fewer examples than k");

  const int c = config.patch;
  const PixelMatrix<double> ex_centre = centres_of(examples, side, c);
  const PixelMatrix<double> clean_centre = centres_of(clean_queries, side, c);
  const PixelMatrix<double> noisy_centre = centres_of(noisy_queries, side, c);

  const PatchDatabase db_centre = as_database(ex_centre, config.context, false);

  ContextParams large_params = config.context;
  large_params.patch = side;
  large_params.window = side;
  const PatchDatabase db_large = as_database(examples, large_params, false);

  const PatchDatabase db_con = as_database(con_rows(examples, side, config.context), config.context, true);
  ContextParams query_ctx = config.context;
  query_ctx.sigma = config.effective_query_sigma();
  const PixelMatrix<double> noisy_con = con_rows(noisy_queries, side, query_ctx);

  const auto gt = knn_exact_batch(db_centre, clean_centre, config.k);
  const auto small = knn_exact_batch(db_centre, noisy_centre, config.k);
  const auto large = knn_exact_batch(db_large, noisy_queries, config.k);
  const auto con = knn_exact_batch(db_con, noisy_con, config.k);

  auto rms = [&](Eigen::Index q, const QueryResult& r) {
    double s = 0.0;
    for (auto j : r.indices) s += (clean_centre.row(q) - ex_centre.row(j)).squaredNorm();
    return std::sqrt(s / static_cast<double>(r.indices.size()));
  };

  MatchingReport report;
  report.config = config;
  report.records.resize(static_cast<std::size_t>(clean_queries.rows()));
  for (Eigen::Index q = 0; q < clean_queries.rows(); ++q) {
    const auto i = static_cast<std::size_t>(q);
    report.records[i] = {rms(q, gt[i]), rms(q, small[i]), rms(q, large[i]), rms(q, con[i])};
  }
  return report;
}

}  // namespace conpatch
