#pragma once

#include "conpatch/context.hpp"
#include "conpatch/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace conpatch {

/// Where a database row was sampled: corpus image index and patch centre.
struct PatchOrigin {
  std::uint32_t image = 0;
  std::int32_t x = 0;
  std::int32_t y = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

struct DatabaseMeta {
  ContextParams params;            ///< context configuration (sigma is the clean-image setting)
  bool with_context = true;        ///< rows are [content | feature] rather than content only
  bool sampled_with_replacement = false;
  std::uint64_t seed = 0;
  std::uint64_t corpus_digest = 0;
  std::string manifest;            ///< "path<TAB>digest" lines
};

/// Flat store of patch or con-patch vectors, one float32 row per entry.
/// Immutable once built.
class PatchDatabase {
 public:
  using Rows = PixelMatrix<float>;

  PatchDatabase(Rows rows, DatabaseMeta meta, std::vector<PatchOrigin> origins = {});

  Eigen::Index count() const { return rows_.rows(); }
  int dim() const { return static_cast<int>(rows_.cols()); }
  const Rows& rows() const { return rows_; }
  const float* row_data(Eigen::Index i) const { return rows_.data() + i * rows_.cols(); }
  auto row(Eigen::Index i) const { return rows_.row(i); }
  const DatabaseMeta& meta() const { return meta_; }
  const std::vector<PatchOrigin>& origins() const { return origins_; }

  /// Digest of the row payload, identical for identical databases.
  std::uint64_t content_digest() const;

 private:
  Rows rows_;
  DatabaseMeta meta_;
  std::vector<PatchOrigin> origins_;
};

/// Draws n con-patches uniformly over (image, centre) pairs whose c x c
/// patch lies inside the image. Draws are without replacement unless n
/// exceeds the number of distinct centres.
PatchDatabase sample_database(std::span<const Image> images, std::size_t n, const ContextParams& params,
                              std::uint64_t seed);

/// Loads the corpus first; I/O failures name the offending path.
PatchDatabase sample_database(std::span<const std::filesystem::path> corpus, std::size_t n,
                              const ContextParams& params, std::uint64_t seed);

/// Every pixel's patch of one image in raster order (centres with the full
/// c x c patch inside). Used for self-database checks.
PatchDatabase all_patches(const Image& img, const ContextParams& params);

/// The first c^2 columns only.
PatchDatabase content_only(const PatchDatabase& db);

/// Same database with the feature block re-scaled to gain `alpha`.
/// alpha = 0 zeroes the block exactly.
PatchDatabase with_alpha(const PatchDatabase& db, double alpha);

void save_database(const PatchDatabase& db, const std::filesystem::path& path);
PatchDatabase load_database(const std::filesystem::path& path);

/// Corpus listing for `dir`: image files in lexicographic order.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir);

/// "path<TAB>digest" per corpus entry.
std::string corpus_manifest(std::span<const std::filesystem::path> corpus);

/// k nearest rows by squared Euclidean distance, ascending; ties go to the
/// lower row index.
struct QueryResult {
  std::vector<std::int64_t> indices;
  std::vector<double> distances;
};

QueryResult knn_exact(const PatchDatabase& db, std::span<const double> query, int k);

/// Exact k-NN for a batch of queries (one per row). Candidate distances
/// come from a GEMM expansion and every candidate within its rounding
/// bound is rescored with the scalar kernel, so the result is identical
/// to knn_exact.
std::vector<QueryResult> knn_exact_batch(const PatchDatabase& db, const PixelMatrix<double>& queries, int k);

}  // namespace conpatch
