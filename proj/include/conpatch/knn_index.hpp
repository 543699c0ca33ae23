#pragma once

#include "conpatch/patchdb.hpp"

#include <cstddef>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace conpatch {

/// kd-tree over the rows of a PatchDatabase.
///
/// Internal nodes split at the median of the dimension with the largest
/// spread; every node keeps the tight bounding box of its points, which
/// gives the lower bounds for a best-first (priority-queue) search. The
/// database must outlive the index.
class KnnIndex {
 public:
  static constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();
  static constexpr int kDefaultLeafSize = 32;
  static constexpr std::size_t kDefaultMaxVisits = 4096;

  struct Node {
    std::int32_t split_dim = -1;  ///< -1 for leaves
    float split_value = 0.0f;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t begin = 0;  ///< range into leaf order
    std::int32_t end = 0;
    bool is_leaf() const { return split_dim < 0; }
  };

  explicit KnnIndex(const PatchDatabase& db, int leaf_size = kDefaultLeafSize);

  /// Best-first descent; max_visits bounds the node expansions (internal
  /// and leaf), extended until k hits are held. With kUnbounded the result
  /// equals knn_exact.
  QueryResult query(std::span<const double> q, int k, std::size_t max_visits = kDefaultMaxVisits) const;

  const PatchDatabase& database() const { return *db_; }
  int leaf_size() const { return leaf_size_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  /// Database row ids in leaf order.
  const std::vector<std::int64_t>& order() const { return order_; }
  int depth() const;
  std::size_t leaf_count() const;

  /// .cpidx: tree structure only; rows are re-read from the database.
  void save(const std::filesystem::path& path) const;
  static KnnIndex load(const std::filesystem::path& path, const PatchDatabase& db);

 private:
  KnnIndex(const PatchDatabase& db, int leaf_size, bool build);
  std::int32_t build_node(std::int32_t begin, std::int32_t end);
  void finalize();

  const PatchDatabase* db_;
  int leaf_size_;
  std::vector<Node> nodes_;
  std::vector<std::int64_t> order_;
  PixelMatrix<float> points_;  // rows in leaf order
  PixelMatrix<float> lo_;      // per-node bounding boxes
  PixelMatrix<float> hi_;
};

inline QueryResult knn_approx(const KnnIndex& index, std::span<const double> query, int k,
                              std::size_t max_visits = KnnIndex::kDefaultMaxVisits) {
  return index.query(query, k, max_visits);
}

}  // namespace conpatch
