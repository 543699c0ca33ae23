#pragma once

#include "conpatch/context.hpp"
#include "conpatch/image.hpp"
#include "conpatch/knn_index.hpp"
#include "conpatch/patchdb.hpp"

#include <functional>
#include <span>
#include <vector>

namespace conpatch {

/// Weighted average of clean neighbours (one per row):
///   w_j = exp(-||y - x_j||^2 / (2 sigma_v^2)), normalised to unit sum.
/// Distances use pixel content only. If every weight underflows the
/// nearest neighbour (lowest row on ties) is returned.
VectorX<double> denoise_patch(const VectorX<double>& noisy, const PixelMatrix<double>& neighbors, double sigma_v,
                              VectorX<double>* weights_out = nullptr);

/// sqrt(alpha) on unit-range intensities by noise level: 0.9 below 50,
/// 1.1 below 100, 1.3 above.
double default_unit_sqrt_alpha(double sigma_v);

struct DenoiseParams {
  double sigma_v = 25.0;
  int k = 500;
  int stride = 1;
  /// Layout and gain must match the database; sigma here is ignored for
  /// queries, which use query_sigma (sigma_v when <= 0).
  ContextParams context;
  bool use_context = true;
  double query_sigma = 0.0;
  std::size_t max_visits = KnnIndex::kDefaultMaxVisits;
  int threads = 0;  ///< 0: hardware concurrency

  void validate() const;
  double effective_query_sigma() const { return query_sigma > 0.0 ? query_sigma : sigma_v; }
};

/// Per-patch hook, called in grid order after the whole image is done.
struct PatchTrace {
  int x = 0;
  int y = 0;
  QueryResult neighbors;
  VectorX<double> weights;
};
using PatchObserver = std::function<void(const PatchTrace&)>;

/// Patch-centre grid along one axis: 0, s, 2s, ... plus the last pixel.
std::vector<int> stride_grid(int length, int stride);

/// External denoising: every grid patch of `noisy` is matched against the
/// database (con-patch distance when use_context), cleaned by
/// denoise_patch on its k neighbours, and the patches are averaged over
/// their overlaps.
Image denoise_image(const Image& noisy, const KnnIndex& index, const DenoiseParams& params,
                    const PatchObserver& observer = {});

struct NlmParams {
  int window = 21;      ///< search window side
  int patch = 7;        ///< patch side
  double sigma_v = 15.0;
  int k = 0;            ///< best candidates kept, 0 = all
  double filter = 1.0;  ///< kernel width in units of sigma_v
  int stride = 1;
};

/// Internal non-local means: each grid patch is averaged with its k best
/// candidates inside the search window using the same exponential kernel
/// (width filter * sigma_v); the patch itself gets the largest weight of
/// the others. Patches are aggregated over overlaps.
Image internal_nlm(const Image& noisy, const NlmParams& params);

// ---------------------------------------------------------------------------
// Matching-quality benchmark.

struct MatchingConfig {
  int patch = 7;        ///< c, central part
  int large = 17;       ///< h_large
  int k = 20;
  double sigma_v = 35.0;
  /// Context of the con-patch variant; window <= large, sigma is the
  /// clean-example setting. Queries use query_sigma (sigma_v when <= 0).
  ContextParams context;
  double query_sigma = 0.0;

  void validate() const;
  /// Noise-free queries fall back to the clean-example sigma.
  double effective_query_sigma() const {
    if (query_sigma > 0.0) return query_sigma;
    return sigma_v > 0.0 ? sigma_v : context.sigma;
  }
};

struct MatchingRecord {
  double e_gt = 0.0;
  double e_small = 0.0;
  double e_large = 0.0;
  double e_con = 0.0;
};

struct MatchingReport {
  MatchingConfig config;
  std::vector<MatchingRecord> records;

  MatchingRecord mean() const;
};

/// Large patches (side x side, one per row) at uniformly drawn centres
/// whose whole window lies inside an image.
PixelMatrix<double> sample_large_patches(std::span<const Image> images, std::size_t n, int side, std::uint64_t seed);

/// Rows plus i.i.d. Gaussian noise.
PixelMatrix<double> add_noise_rows(const PixelMatrix<double>& rows, double sigma_v, std::uint64_t seed);

/// Con-patch of a large patch: the patch is treated as a small image and
/// the context is computed around its centre.
ConPatch con_patch_of_large(std::span<const double> large, int side, const ContextParams& params);

/// Ground-truth, small-, large- and con-patch k-NN for every query. Each E
/// is the root mean squared distance between the clean query centre and
/// the clean centres of its k matches.
MatchingReport eval_matching(const PixelMatrix<double>& clean_queries, const PixelMatrix<double>& noisy_queries,
                             const PixelMatrix<double>& examples, const MatchingConfig& config);

}  // namespace conpatch
