#include "conpatch/knn_index.hpp"

#include "conpatch/distance.hpp"
#include "conpatch/image_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace conpatch {

KnnIndex::KnnIndex(const PatchDatabase& db, int leaf_size) : KnnIndex(db, leaf_size, true) {}

KnnIndex::KnnIndex(const PatchDatabase& db, int leaf_size, bool build) : db_(&db), leaf_size_(leaf_size) {
  if (leaf_size < 1) throw std::invalid_argument("kd-tree leaf size must be >= 1");
  if (db.count() > std::numeric_limits<std::int32_t>::max())
    throw std::invalid_argument("database too large for a 32-bit kd-tree");
  if (!build) return;
  order_.resize(static_cast<std::size_t>(db.count()));
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(static_cast<std::size_t>(2 * (db.count() / leaf_size + 1)));
  build_node(0, static_cast<std::int32_t>(db.count()));
  finalize();
}

std::int32_t KnnIndex::build_node(std::int32_t begin, std::int32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{-1, 0.0f, -1, -1, begin, end});
  if (end - begin <= leaf_size_) return id;

  const int dim = db_->dim();
  int best_dim = -1;
  float best_spread = 0.0f;
  for (int d = 0; d < dim; ++d) {
    float lo = std::numeric_limits<float>::infinity();
    float hi = -lo;
    for (std::int32_t i = begin; i < end; ++i) {
      const float v = db_->row_data(order_[static_cast<std::size_t>(i)])[d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_dim < 0) return id;  // all points identical: one oversized leaf

  const std::int32_t mid = begin + (end - begin) / 2;
  auto first = order_.begin() + begin;
  auto nth = order_.begin() + mid;
  auto last = order_.begin() + end;
  std::nth_element(first, nth, last, [&](std::int64_t a, std::int64_t b) {
    const float va = db_->row_data(a)[best_dim];
    const float vb = db_->row_data(b)[best_dim];
    return va < vb || (va == vb && a < b);
  });
  const float split = db_->row_data(*nth)[best_dim];
  const std::int32_t left = build_node(begin, mid);
  const std::int32_t right = build_node(mid, end);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.split_dim = best_dim;
  n.split_value = split;
  n.left = left;
  n.right = right;
  return id;
}

void KnnIndex::finalize() {
  const int dim = db_->dim();
  points_.resize(db_->count(), dim);
  for (std::size_t i = 0; i < order_.size(); ++i)
    points_.row(static_cast<Eigen::Index>(i)) = db_->row(order_[i]);
  const auto nn = static_cast<Eigen::Index>(nodes_.size());
  lo_.resize(nn, dim);
  hi_.resize(nn, dim);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    lo_.row(i) = points_.middleRows(n.begin, n.end - n.begin).colwise().minCoeff();
    hi_.row(i) = points_.middleRows(n.begin, n.end - n.begin).colwise().maxCoeff();
  }
}

int KnnIndex::depth() const {
  // iterative max depth
  int best = 0;
  std::vector<std::pair<std::int32_t, int>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

std::size_t KnnIndex::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

namespace {

struct Hit {
  double distance;
  std::int64_t index;
};

// Max-heap on (distance, index): the top is the current worst hit.
bool worse_first(const Hit& a, const Hit& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
}

}  // namespace

QueryResult KnnIndex::query(std::span<const double> q, int k, std::size_t max_visits) const {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > db_->count())
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds database size " + std::to_string(db_->count()));
  if (q.size() != static_cast<std::size_t>(db_->dim()))
    throw std::invalid_argument("query length does not match database dim");
  const int dim = db_->dim();
  const auto kk = static_cast<std::size_t>(k);

  std::vector<Hit> heap;
  heap.reserve(kk + 1);
  auto worst = [&] { return heap.size() < kk ? std::numeric_limits<double>::infinity() : heap.front().distance; };

  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> frontier;
  frontier.push({box_distance(q.data(), lo_.row(0).data(), hi_.row(0).data(), dim), 0});
  std::size_t visits = 0;
  while (!frontier.empty() && (visits < max_visits || heap.size() < kk)) {
    const auto [bound, id] = frontier.top();
    frontier.pop();
    ++visits;
    // A bound equal to the worst hit may still hide a lower-index tie.
    if (bound > worst()) break;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.is_leaf()) {
      for (std::int32_t child : {n.left, n.right}) {
        const double b = box_distance(q.data(), lo_.row(child).data(), hi_.row(child).data(), dim);
        if (b <= worst()) frontier.push({b, child});
      }
      continue;
    }
    for (std::int32_t i = n.begin; i < n.end; ++i) {
      const double limit = worst();
      const double d = squared_distance_bounded(q.data(), points_.row(i).data(), dim, limit);
      if (d > limit) continue;
      const Hit h{d, order_[static_cast<std::size_t>(i)]};
      if (heap.size() == kk) {
        if (!worse_first(h, heap.front())) continue;
        std::pop_heap(heap.begin(), heap.end(), worse_first);
        heap.back() = h;
      } else {
        heap.push_back(h);
      }
      std::push_heap(heap.begin(), heap.end(), worse_first);
    }
  }

  std::sort_heap(heap.begin(), heap.end(), worse_first);
  QueryResult r;
  for (const Hit& h : heap) {
    r.indices.push_back(h.index);
    r.distances.push_back(h.distance);
  }
  return r;
}

// .cpidx: "CPIX" u32 version u32 leaf_size u64 count u32 dim u64 node_count,
// nodes (i32 split_dim, f32 split, i32 left, i32 right, i32 begin, i32 end),
// count x i64 order. Little-endian host layout.
namespace {
constexpr std::uint32_t kIndexVersion = 1;
}

void KnnIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  auto put = [&](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
  out.write("CPIX", 4);
  put(kIndexVersion);
  put(static_cast<std::uint32_t>(leaf_size_));
  put(static_cast<std::uint64_t>(db_->count()));
  put(static_cast<std::uint32_t>(db_->dim()));
  put(static_cast<std::uint64_t>(nodes_.size()));
  for (const Node& n : nodes_) {
    put(n.split_dim);
    put(n.split_value);
    put(n.left);
    put(n.right);
    put(n.begin);
    put(n.end);
  }
  out.write(reinterpret_cast<const char*>(order_.data()), static_cast<std::streamsize>(order_.size() * sizeof(std::int64_t)));
  if (!out) throw IoError("write failed for " + path.string());
}

KnnIndex KnnIndex::load(const std::filesystem::path& path, const PatchDatabase& db) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto get = [&](auto& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw IoError(path.string() + ": truncated index file");
  };
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "CPIX") throw IoError(path.string() + ": not a kd-tree index file");
  std::uint32_t version = 0, leaf = 0, dim = 0;
  std::uint64_t count = 0, node_count = 0;
  get(version);
  get(leaf);
  get(count);
  get(dim);
  get(node_count);
  if (version != kIndexVersion) throw IoError(path.string() + ": unsupported index version");
  if (count != static_cast<std::uint64_t>(db.count()) || dim != static_cast<std::uint32_t>(db.dim()))
    throw IoError(path.string() + ": index was built for a different database");
  if (node_count < 1 || node_count > 2 * count + 1) throw IoError(path.string() + ": corrupt node count");
  KnnIndex idx(db, static_cast<int>(leaf), false);
  idx.nodes_.resize(node_count);
  for (Node& n : idx.nodes_) {
    get(n.split_dim);
    get(n.split_value);
    get(n.left);
    get(n.right);
    get(n.begin);
    get(n.end);
    const auto nn = static_cast<std::int32_t>(node_count);
    if (n.begin < 0 || n.end > static_cast<std::int32_t>(count) || n.begin >= n.end ||
        (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= nn || n.right >= nn)))
      throw IoError(path.string() + ": corrupt node");
  }
  idx.order_.resize(count);
  in.read(reinterpret_cast<char*>(idx.order_.data()), static_cast<std::streamsize>(count * sizeof(std::int64_t)));
  if (!in) throw IoError(path.string() + ": truncated index file");
  std::vector<char> seen(count, 0);
  for (auto o : idx.order_) {
    if (o < 0 || static_cast<std::uint64_t>(o) >= count || seen[static_cast<std::size_t>(o)]++)
      throw IoError(path.string() + ": index order is not a permutation");
  }
  idx.finalize();
  return idx;
}

}  // namespace conpatch
