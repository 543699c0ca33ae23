#include "conpatch/patchdb.hpp"

#include "conpatch/digest.hpp"
#include "conpatch/distance.hpp"
#include "conpatch/image_io.hpp"
#include "conpatch/random.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace conpatch {
namespace fs = std::filesystem;

std::uint64_t file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = in.gcount();
    h.update(std::span(reinterpret_cast<const std::uint8_t*>(buf.data()), static_cast<std::size_t>(got)));
  }
  return h.value();
}

std::string hex_digest(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

PatchDatabase::PatchDatabase(Rows rows, DatabaseMeta meta, std::vector<PatchOrigin> origins)
    : rows_(std::move(rows)), meta_(std::move(meta)), origins_(std::move(origins)) {
  if (rows_.rows() < 1) throw std::invalid_argument("patch database must hold at least one entry");
  const int expect = meta_.with_context ? meta_.params.dim() : meta_.params.content_dim();
  if (rows_.cols() != expect)
    throw std::invalid_argument("database row length " + std::to_string(rows_.cols()) +
                                " does not match its configuration (" + std::to_string(expect) + ")");
  if (!origins_.empty() && static_cast<Eigen::Index>(origins_.size()) != rows_.rows())
    throw std::invalid_argument("database origin list length differs from row count");
}

std::uint64_t PatchDatabase::content_digest() const {
  Fnv1a h;
  h.update(std::span(reinterpret_cast<const std::uint8_t*>(rows_.data()),
                     static_cast<std::size_t>(rows_.size()) * sizeof(float)));
  return h.value();
}

namespace {

void fill_row(PatchDatabase::Rows& rows, Eigen::Index r, const ConPatch& p) {
  rows.row(r) = p.values().transpose().cast<float>();
}

struct CentreSpace {
  std::vector<std::uint64_t> first;  // cumulative centre count per image
  std::uint64_t total = 0;
};

}  // namespace

PatchDatabase sample_database(std::span<const Image> images, std::size_t n, const ContextParams& params,
                              std::uint64_t seed) {
  params.validate();
  if (n < 1) throw std::invalid_argument("database size must be >= 1");
  if (images.empty()) throw std::invalid_argument("corpus is empty");
  const int r = params.patch / 2;
  CentreSpace space;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.width() < params.patch || img.height() < params.patch)
      throw std::invalid_argument("corpus image " + std::to_string(i) + " is smaller than one " +
                                  std::to_string(params.patch) + "x" + std::to_string(params.patch) + " patch");
    space.first.push_back(space.total);
    space.total += static_cast<std::uint64_t>(img.width() - 2 * r) * static_cast<std::uint64_t>(img.height() - 2 * r);
  }

  std::vector<std::uint64_t> picks;
  picks.reserve(n);
  const bool replacement = n > space.total;
  constexpr std::uint64_t kStream = 0x53414D504C45ull;
  if (replacement) {
    for (std::size_t i = 0; i < n; ++i) picks.push_back(counter_below(seed, kStream, i, space.total));
  } else if (2 * static_cast<std::uint64_t>(n) > space.total) {
    // Dense draw: partial Fisher-Yates over all centres.
    std::vector<std::uint64_t> all(space.total);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t j = i + counter_below(seed, kStream, i, space.total - i);
      std::swap(all[i], all[j]);
      picks.push_back(all[i]);
    }
  } else {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(n * 2);
    for (std::uint64_t c = 0; picks.size() < n; ++c) {
      const std::uint64_t v = counter_below(seed, kStream, c, space.total);
      if (seen.insert(v).second) picks.push_back(v);
    }
  }

  PatchDatabase::Rows rows(static_cast<Eigen::Index>(n), params.dim());
  std::vector<PatchOrigin> origins(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::upper_bound(space.first.begin(), space.first.end(), picks[i]);
    const auto img_idx = static_cast<std::size_t>(it - space.first.begin()) - 1;
    const auto local = picks[i] - space.first[img_idx];
    const auto& img = images[img_idx];
    const auto span_x = static_cast<std::uint64_t>(img.width() - 2 * r);
    const int x = r + static_cast<int>(local % span_x);
    const int y = r + static_cast<int>(local / span_x);
    fill_row(rows, static_cast<Eigen::Index>(i), build_con_patch(img, x, y, params));
    origins[i] = {static_cast<std::uint32_t>(img_idx), x, y};
  }

  DatabaseMeta meta;
  meta.params = params;
  meta.seed = seed;
  meta.sampled_with_replacement = replacement;
  return PatchDatabase(std::move(rows), std::move(meta), std::move(origins));
}

PatchDatabase sample_database(std::span<const fs::path> corpus, std::size_t n, const ContextParams& params,
                              std::uint64_t seed) {
  std::vector<Image> images;
  images.reserve(corpus.size());
  for (const auto& p : corpus) {
    try {
      images.push_back(load_image(p));
    } catch (const IoError& e) {
      throw IoError("corpus entry " + p.string() + " unreadable: " + e.what());
    }
  }
  PatchDatabase sampled = sample_database(std::span<const Image>(images), n, params, seed);
  DatabaseMeta meta = sampled.meta();
  meta.manifest = corpus_manifest(corpus);
  meta.corpus_digest = fnv1a(meta.manifest);
  return PatchDatabase(sampled.rows(), std::move(meta), sampled.origins());
}

PatchDatabase all_patches(const Image& img, const ContextParams& params) {
  params.validate();
  const int r = params.patch / 2;
  if (img.width() < params.patch || img.height() < params.patch)
    throw std::invalid_argument("image is smaller than one patch");
  const Eigen::Index n = static_cast<Eigen::Index>(img.width() - 2 * r) * (img.height() - 2 * r);
  PatchDatabase::Rows rows(n, params.dim());
  std::vector<PatchOrigin> origins;
  origins.reserve(static_cast<std::size_t>(n));
  Eigen::Index i = 0;
  for (int y = r; y < img.height() - r; ++y)
    for (int x = r; x < img.width() - r; ++x) {
      fill_row(rows, i++, build_con_patch(img, x, y, params));
      origins.push_back({0, x, y});
    }
  DatabaseMeta meta;
  meta.params = params;
  return PatchDatabase(std::move(rows), std::move(meta), std::move(origins));
}

PatchDatabase content_only(const PatchDatabase& db) {
  DatabaseMeta meta = db.meta();
  meta.with_context = false;
  const int c2 = meta.params.content_dim();
  return PatchDatabase(db.rows().leftCols(c2), std::move(meta), db.origins());
}

PatchDatabase with_alpha(const PatchDatabase& db, double alpha) {
  if (!db.meta().with_context) throw std::invalid_argument("database carries no context feature");
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  DatabaseMeta meta = db.meta();
  const double old_alpha = meta.params.alpha;
  if (alpha > 0.0 && old_alpha == 0.0)
    throw std::invalid_argument("cannot recover a context feature stored with alpha = 0");
  meta.params.alpha = alpha;
  PatchDatabase::Rows rows = db.rows();
  auto feature = rows.rightCols(meta.params.bins);
  if (alpha == 0.0)
    feature.setZero();
  else
    feature = (feature.cast<double>() * (std::sqrt(alpha) / std::sqrt(old_alpha))).cast<float>();
  return PatchDatabase(std::move(rows), std::move(meta), db.origins());
}

// ---------------------------------------------------------------------------
// .cpdb file format (all little-endian):
//   "CPDB" u32 version u32 dim u32 flags u64 count
//   u32 c, h, b, m, scale, reserved; f64 sigma, alpha
//   u64 seed, u64 corpus digest, u64 manifest length, manifest bytes
//   count x dim float32 rows
//   count x (u32 image, i32 x, i32 y) origins, present when flags bit 2 set

namespace {

constexpr std::uint32_t kDbVersion = 1;
constexpr std::uint32_t kFlagContext = 1u;
constexpr std::uint32_t kFlagReplacement = 2u;
constexpr std::uint32_t kFlagOrigins = 4u;

class Writer {
 public:
  explicit Writer(const fs::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot write " + path.string());
  }
  template <typename T>
  void put(T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    const U bits = std::bit_cast<U>(v);
    char b[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>(bits >> (8 * i));
    out_.write(b, sizeof(U));
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for " + path_.string());
  }

 private:
  std::ofstream out_;
  fs::path path_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    unsigned char b[sizeof(U)];
    in_.read(reinterpret_cast<char*>(b), sizeof(U));
    if (!in_) throw IoError(path_.string() + ": truncated database file");
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(b[i]) << (8 * i);
    return std::bit_cast<T>(bits);
  }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw IoError(path_.string() + ": truncated database file");
  }
  void expect_end() {
    if (in_.peek() != std::ifstream::traits_type::eof())
      throw IoError(path_.string() + ": trailing bytes after database payload");
  }

 private:
  std::ifstream in_;
  fs::path path_;
};

}  // namespace

void save_database(const PatchDatabase& db, const fs::path& path) {
  static_assert(std::endian::native == std::endian::little, "row payload is written in host order");
  const auto& m = db.meta();
  Writer w(path);
  w.bytes("CPDB", 4);
  w.put(kDbVersion);
  w.put(static_cast<std::uint32_t>(db.dim()));
  std::uint32_t flags = 0;
  if (m.with_context) flags |= kFlagContext;
  if (m.sampled_with_replacement) flags |= kFlagReplacement;
  if (!db.origins().empty()) flags |= kFlagOrigins;
  w.put(flags);
  w.put(static_cast<std::uint64_t>(db.count()));
  w.put(static_cast<std::uint32_t>(m.params.patch));
  w.put(static_cast<std::uint32_t>(m.params.window));
  w.put(static_cast<std::uint32_t>(m.params.bins));
  w.put(static_cast<std::uint32_t>(m.params.stride));
  w.put(static_cast<std::uint32_t>(m.params.scale));
  w.put(std::uint32_t{0});
  w.put(m.params.sigma);
  w.put(m.params.alpha);
  w.put(m.seed);
  w.put(m.corpus_digest);
  w.put(static_cast<std::uint64_t>(m.manifest.size()));
  w.bytes(m.manifest.data(), m.manifest.size());
  w.bytes(reinterpret_cast<const char*>(db.rows().data()), static_cast<std::size_t>(db.rows().size()) * sizeof(float));
  for (const auto& o : db.origins()) {
    w.put(o.image);
    w.put(o.x);
    w.put(o.y);
  }
  w.finish();
}

PatchDatabase load_database(const fs::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != "CPDB") throw IoError(path.string() + ": not a con-patch database (bad magic)");
  if (const auto v = r.get<std::uint32_t>(); v != kDbVersion)
    throw IoError(path.string() + ": unsupported database version " + std::to_string(v));
  const auto dim = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  DatabaseMeta m;
  m.with_context = (flags & kFlagContext) != 0;
  m.sampled_with_replacement = (flags & kFlagReplacement) != 0;
  m.params.patch = static_cast<int>(r.get<std::uint32_t>());
  m.params.window = static_cast<int>(r.get<std::uint32_t>());
  m.params.bins = static_cast<int>(r.get<std::uint32_t>());
  m.params.stride = static_cast<int>(r.get<std::uint32_t>());
  m.params.scale = static_cast<SimilarityScale>(r.get<std::uint32_t>());
  r.get<std::uint32_t>();
  m.params.sigma = r.get<double>();
  m.params.alpha = r.get<double>();
  m.seed = r.get<std::uint64_t>();
  m.corpus_digest = r.get<std::uint64_t>();
  const auto manifest_len = r.get<std::uint64_t>();
  if (manifest_len > (1ull << 30)) throw IoError(path.string() + ": corrupt manifest length");
  m.manifest.resize(manifest_len);
  r.bytes(m.manifest.data(), manifest_len);
  try {
    m.params.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": invalid stored configuration: " + e.what());
  }
  if (count < 1 || count > (1ull << 40) || dim < 1 || dim > (1u << 20))
    throw IoError(path.string() + ": corrupt database dimensions");
  PatchDatabase::Rows rows(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  r.bytes(reinterpret_cast<char*>(rows.data()), static_cast<std::size_t>(rows.size()) * sizeof(float));
  std::vector<PatchOrigin> origins;
  if (flags & kFlagOrigins) {
    origins.resize(count);
    for (auto& o : origins) {
      o.image = r.get<std::uint32_t>();
      o.x = r.get<std::int32_t>();
      o.y = r.get<std::int32_t>();
    }
  }
  r.expect_end();
  try {
    return PatchDatabase(std::move(rows), std::move(m), std::move(origins));
  } catch (const std::invalid_argument& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<fs::path> list_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": corpus is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".pgm" || ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError(dir.string() + ": corpus contains no .pgm/.png images");
  return out;
}

std::string corpus_manifest(std::span<const fs::path> corpus) {
  std::string out;
  for (const auto& p : corpus) out += p.filename().string() + "\t" + hex_digest(file_digest(p)) + "\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
  double distance;
  std::int64_t index;
  bool operator<(const Candidate& o) const {
    return distance < o.distance || (distance == o.distance && index < o.index);
  }
};

QueryResult to_result(std::vector<Candidate>& c, int k) {
  std::partial_sort(c.begin(), c.begin() + k, c.end());
  QueryResult r;
  r.indices.reserve(static_cast<std::size_t>(k));
  r.distances.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    r.indices.push_back(c[static_cast<std::size_t>(i)].index);
    r.distances.push_back(c[static_cast<std::size_t>(i)].distance);
  }
  return r;
}

void check_query(const PatchDatabase& db, std::size_t dim, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k > db.count())
    throw std::invalid_argument("k = " + std::to_string(k) + " exceeds database size " + std::to_string(db.count()));
  if (dim != static_cast<std::size_t>(db.dim()))
    throw std::invalid_argument("query length " + std::to_string(dim) + " does not match database dim " +
                                std::to_string(db.dim()));
}

}  // namespace

QueryResult knn_exact(const PatchDatabase& db, std::span<const double> query, int k) {
  check_query(db, query.size(), k);
  std::vector<Candidate> all(static_cast<std::size_t>(db.count()));
  for (Eigen::Index i = 0; i < db.count(); ++i)
    all[static_cast<std::size_t>(i)] = {squared_distance(query.data(), db.row_data(i), db.dim()), i};
  return to_result(all, k);
}

std::vector<QueryResult> knn_exact_batch(const PatchDatabase& db, const PixelMatrix<double>& queries, int k) {
  check_query(db, static_cast<std::size_t>(queries.cols()), k);
  const Eigen::Index n = db.count();
  const int dim = db.dim();
  const PixelMatrix<double> rows = db.rows().cast<double>();
  const VectorX<double> row_norms = rows.rowwise().squaredNorm();
  const double max_row_norm = row_norms.maxCoeff();
  // Rounding bound of the expanded form |q|^2 + |p|^2 - 2 q.p.
  const double rel = 8.0 * (dim + 4) * 0x1.0p-53;

  std::vector<QueryResult> out;
  out.reserve(static_cast<std::size_t>(queries.rows()));
  constexpr Eigen::Index kBlock = 64;
  PixelMatrix<double> approx;
  std::vector<Candidate> cand;
  std::vector<double> scratch(static_cast<std::size_t>(n));
  for (Eigen::Index q0 = 0; q0 < queries.rows(); q0 += kBlock) {
    const Eigen::Index nb = std::min(kBlock, queries.rows() - q0);
    approx.noalias() = -2.0 * queries.middleRows(q0, nb) * rows.transpose();
    for (Eigen::Index qi = 0; qi < nb; ++qi) {
      const auto q = queries.row(q0 + qi);
      const double qn = q.squaredNorm();
      auto a = approx.row(qi);
      for (Eigen::Index j = 0; j < n; ++j) {
        a[j] += qn + row_norms[j];
        scratch[static_cast<std::size_t>(j)] = a[j];
      }
      std::nth_element(scratch.begin(), scratch.begin() + (k - 1), scratch.end());
      const double cut = scratch[static_cast<std::size_t>(k - 1)] + 2.0 * rel * (qn + max_row_norm);
      const VectorX<double> qv = q.transpose();
      cand.clear();
      for (Eigen::Index j = 0; j < n; ++j)
        if (a[j] <= cut) cand.push_back({squared_distance(qv.data(), db.row_data(j), dim), j});
      out.push_back(to_result(cand, k));
    }
  }
  return out;
}

}  // namespace conpatch
