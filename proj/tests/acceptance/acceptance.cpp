// Acceptance runs: one PASS/FAIL line per criterion. Criteria 4 to 6 and 8
// go through the command-line tool.
#include "conpatch/context.hpp"
#include "conpatch/denoise.hpp"
#include "conpatch/fruc.hpp"
#include "conpatch/image_io.hpp"
#include "conpatch/knn_index.hpp"
#include "conpatch/patchdb.hpp"
#include "conpatch/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace conpatch;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const fs::path kData = CONPATCH_DATA_DIR;
const std::string kCli = CONPATCH_CLI;
const fs::path kWork = fs::temp_directory_path() / "conpatch_acceptance";

int failures = 0;

class Criterion {
 public:
  Criterion(int id, double budget_s) : id_(id), budget_(budget_s), t0_(Clock::now()) {}

  void check(bool ok, const std::string& what) {
    if (!ok) {
      ok_ = false;
      notes_.push_back("failed: " + what);
    }
  }
  void note(const std::string& s) { notes_.push_back(s); }

  void finish() {
    const double s = std::chrono::duration<double>(Clock::now() - t0_).count();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f s (budget %.0f s)", s, budget_);
    check(s < budget_, "runtime");
    std::cout << "criterion " << id_ << ": " << (ok_ ? "PASS" : "FAIL") << "  " << buf;
    for (const auto& n : notes_) std::cout << "; " << n;
    std::cout << std::endl;
    if (!ok_) ++failures;
  }

 private:
  int id_;
  double budget_;
  Clock::time_point t0_;
  bool ok_ = true;
  std::vector<std::string> notes_;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << std::fixed << v;
  return o.str();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double relative_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

Image random_image(int w, int h, std::uint64_t seed) {
  Image img(w, h);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.pixels().data()[i] = 255.0 * counter_uniform(seed, 1, i);
  return img;
}

// ---------------------------------------------------------------------------
// CLI plumbing

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Csv read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  Csv csv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (csv.header.empty())
      csv.header = split(line);
    else
      csv.rows.push_back(split(line));
  }
  return csv;
}

/// Rows without the wall-time column.
std::vector<std::vector<std::string>> body_without_time(const fs::path& p) {
  Csv csv = read_csv(p);
  const auto it = std::find(csv.header.begin(), csv.header.end(), "wall_time_s");
  if (it != csv.header.end()) {
    const auto c = static_cast<std::size_t>(it - csv.header.begin());
    for (auto& r : csv.rows) r.erase(r.begin() + static_cast<std::ptrdiff_t>(c));
  }
  return csv.rows;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Regular files under a directory, relative path to contents.
std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = file_bytes(e.path());
  return out;
}

/// One CLI acceptance run, kept for the determinism check.
struct Run {
  std::string name;
  std::string args;      ///< with {dir} standing for the run directory
  std::string report;    ///< CSV name inside the run directory
  std::vector<std::string> outputs;  ///< files or directories inside the run directory
};

std::vector<Run> cli_runs;

std::string expand(const std::string& args, const fs::path& dir) {
  std::string out = args;
  for (std::size_t p = out.find("{dir}"); p != std::string::npos; p = out.find("{dir}"))
    out.replace(p, 5, dir.string());
  return out;
}

/// Runs into kWork / name; returns the exit code.
int cli_run(const Run& run) {
  const fs::path dir = kWork / run.name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  const int rc = run_cli(expand(run.args, dir), dir / "log.txt");
  if (rc == 0) cli_runs.push_back(run);
  return rc;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  Criterion c(1, 1.0);
  CounterRng rng(2024, 1);
  double worst_concat = 0.0, worst_split = 0.0;
  const Image a_img = random_image(64, 64, 11), b_img = random_image(64, 64, 12);
  for (int t = 0; t < 1000; ++t) {
    ContextParams p;
    p.alpha = alpha_from_unit_gain(2.0 * rng.uniform());
    p.sigma = 20.0 + 60.0 * rng.uniform();
    const auto at = [&] { return static_cast<int>(rng.below(64)); };
    const int ax = at(), ay = at(), bx = at(), by = at();
    const ConPatch a = build_con_patch(a_img, ax, ay, p);
    const ConPatch b = build_con_patch(b_img, bx, by, p);
    const double d = con_distance(a, b);
    const VectorX<double> ca = extract_patch(a_img, ax, ay, 7), cb = extract_patch(b_img, bx, by, 7);
    const VectorX<double> ha = context_histogram(a_img, ax, ay, p).bins, hb = context_histogram(b_img, bx, by, p).bins;
    VectorX<double> va(57), vb(57);
    va << ca, std::sqrt(p.alpha) * ha;
    vb << cb, std::sqrt(p.alpha) * hb;
    worst_concat = std::max(worst_concat, relative_error(d, (va - vb).squaredNorm()));
    worst_split = std::max(worst_split, relative_error(d, (ca - cb).squaredNorm() + p.alpha * (ha - hb).squaredNorm()));
  }
  c.check(worst_concat <= 1e-12, "concatenated distance");
  c.check(worst_split <= 1e-9, "content + alpha * feature decomposition");
  c.note("max rel err concat " + sci(worst_concat) + ", split " + sci(worst_split));
  c.finish();
}

void criterion_2() {
  Criterion c(2, 10.0);
  double worst_sum = 0.0, worst_surface = 0.0;
  bool perm = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image img = random_image(64, 64, 100 + seed);
    for (auto scale : {SimilarityScale::kPerPixel, SimilarityScale::kSum}) {
      ContextParams p;
      p.scale = scale;
      p.sigma = scale == SimilarityScale::kSum ? 300.0 : 40.0;
      for (int t = 0; t < 8; ++t) {
        const int cx = static_cast<int>(counter_below(seed, 2, t, 64));
        const int cy = static_cast<int>(counter_below(seed, 3, t, 64));
        const auto w = correlation_surface(img, cx, cy, p);
        std::size_t i = 0;
        for (int oy : p.offsets())
          for (int ox : p.offsets()) {
            if (ox == 0 && oy == 0) continue;
            double d = 0.0;
            for (int py = -3; py <= 3; ++py)
              for (int px = -3; px <= 3; ++px) {
                auto at = [&](int x, int y) { return img(std::clamp(x, 0, 63), std::clamp(y, 0, 63)); };
                const double diff = at(cx + px, cy + py) - at(cx + ox + px, cy + oy + py);
                d += diff * diff;
              }
            if (scale == SimilarityScale::kPerPixel) d /= 49.0;
            const double oracle = std::exp(-d / (2.0 * p.sigma * p.sigma));
            worst_surface = std::max(worst_surface, std::abs(w[i++] - oracle));
          }
        const auto h = weights_to_histogram(w, p.bins);
        worst_sum = std::max(worst_sum, std::abs(h.bins.sum() - 1.0));
        std::vector<double> shuffled = w;
        for (std::size_t k = shuffled.size() - 1; k > 0; --k)
          std::swap(shuffled[k], shuffled[counter_below(seed, 4, t * 100 + k, k + 1)]);
        perm = perm && weights_to_histogram(shuffled, p.bins).bins == h.bins;
      }
    }
  }
  c.check(worst_sum <= 1e-9, "histogram sums to 1");
  c.check(perm, "permutation invariance");
  c.check(worst_surface <= 1e-12, "correlation surface vs brute force");

  ContextParams p;
  const auto flat = context_histogram(Image(40, 40, 77.0), 20, 20, p);
  c.check(flat.bins[p.bins - 1] == 1.0 && flat.bins.head(p.bins - 1).isZero(), "constant image delta at last bin");

  p.sigma = 5.0;
  p.scale = SimilarityScale::kSum;
  const bool e_sum = relative_error(similarity_weight(2.0 * 25.0, p), std::exp(-1.0)) <= 1e-15;
  p.scale = SimilarityScale::kPerPixel;
  const bool e_pix = relative_error(similarity_weight(2.0 * 25.0 * p.content_dim(), p), std::exp(-1.0)) <= 1e-15;
  c.check(e_sum && e_pix, "w = 1/e at squared distance 2 sigma^2");
  c.note("max surface err " + sci(worst_surface));
  c.finish();
}

PatchDatabase random_database(Eigen::Index n, std::uint64_t seed) {
  PatchDatabase::Rows rows(n, 57);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < 57; ++j) rows(i, j) = static_cast<float>(255.0 * counter_uniform(seed, i, j));
  return PatchDatabase(std::move(rows), DatabaseMeta{});
}

void criterion_3() {
  Criterion c(3, 60.0);
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto n = static_cast<Eigen::Index>(1 + counter_below(seed, 99, 0, 5000));
    const auto db = random_database(n, 1000 + seed);
    const KnnIndex idx(db);
    for (int k : {1, 20, 500}) {
      const int kk = static_cast<int>(std::min<Eigen::Index>(k, n));
      std::vector<double> q(57);
      for (int j = 0; j < 57; ++j) q[j] = 255.0 * counter_uniform(seed, 5000 + k, j);
      const auto a = idx.query(q, kk, KnnIndex::kUnbounded);
      const auto b = knn_exact(db, q, kk);
      if (a.indices != b.indices || a.distances != b.distances) ++mismatches;
    }
  }
  c.check(mismatches == 0, "unbounded kd-tree equals exact search");

  // Recall on natural con-patches: 5e4 clean training rows, noisy test queries.
  std::vector<Image> train, test;
  for (const auto& p : list_corpus(kData / "corpus/train")) train.push_back(load_image(p));
  for (const auto& p : list_corpus(kData / "corpus/test")) test.push_back(load_image(p));
  ContextParams cp;
  cp.alpha = alpha_from_unit_gain(0.9);
  const PatchDatabase db = sample_database(std::span<const Image>(train), 50000, cp, 3);
  const KnnIndex idx(db);
  const PatchDatabase centres = sample_database(std::span<const Image>(test), 200, cp, 4);
  std::vector<Image> noisy;
  for (std::size_t i = 0; i < test.size(); ++i) noisy.push_back(add_gaussian_noise(test[i], {25.0, 30 + i}));
  ContextParams qp = cp;
  qp.sigma = 25.0;
  PixelMatrix<double> queries(200, 57);
  for (int t = 0; t < 200; ++t) {
    const PatchOrigin o = centres.origins()[static_cast<std::size_t>(t)];
    queries.row(t) = build_con_patch(noisy[o.image], o.x, o.y, qp).values().transpose();
  }
  const auto truth = knn_exact_batch(db, queries, 20);
  double hits = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::vector<double> q(queries.row(t).data(), queries.row(t).data() + 57);
    const auto r = idx.query(q, 20, 2048);
    const std::set<std::int64_t> want(truth[static_cast<std::size_t>(t)].indices.begin(),
                                      truth[static_cast<std::size_t>(t)].indices.end());
    for (auto i : r.indices) hits += want.count(i) ? 1.0 : 0.0;
  }
  const double recall = hits / (200.0 * 20.0);
  c.check(recall >= 0.95, "recall at 2048 visits");
  c.note("mismatching databases " + std::to_string(mismatches) + "/100, recall@2048 " + fmt(recall));
  c.finish();
}

void criterion_4() {
  Criterion c(4, 600.0);
  const Run run{"c4", "--seed 4 --report {dir}/matching.csv eval-matching --corpus \"" + (kData / "corpus/train").string() +
                    "\" --query-corpus \"" + (kData / "corpus/test").string() +
                    "\" --queries 2000 --examples 100000 --patch 7 --large 17 --bins 8 --sigma-v 35 --k 20"
                    " --summary {dir}/summary.csv",
                "matching.csv", {"summary.csv"}};
  const int rc = cli_run(run);
  c.check(rc == 0, "eval-matching exit code " + std::to_string(rc));
  if (rc == 0) {
    const Csv csv = read_csv(kWork / "c4/matching.csv");
    double gt = 0, small = 0, large = 0, con = 0;
    for (const auto& r : csv.rows) {
      gt += std::stod(r[csv.col("e_gt")]);
      small += std::stod(r[csv.col("e_small")]);
      large += std::stod(r[csv.col("e_large")]);
      con += std::stod(r[csv.col("e_con")]);
    }
    const double n = static_cast<double>(csv.rows.size());
    c.check(csv.rows.size() == 2000, "2000 query rows");
    c.check(con < small, "mean E_con < mean E_small");
    c.check(con <= 1.05 * large, "mean E_con <= 1.05 mean E_large");
    c.note("E_GT " + fmt(gt / n, 2) + ", E_small " + fmt(small / n, 2) + ", E_large " + fmt(large / n, 2) +
           ", E_con " + fmt(con / n, 2));
  }
  c.finish();
}

void criterion_5() {
  Criterion c(5, 900.0);
  const fs::path db = kWork / "c5db/desk.cpdb";
  const Run build{"c5db", "--preset desk --seed 5 --report {dir}/build.csv build-db --corpus \"" +
                      (kData / "corpus/train").string() + "\" --out {dir}/desk.cpdb",
                  "build.csv", {"desk.cpdb"}};
  int rc = cli_run(build);
  c.check(rc == 0, "build-db exit code " + std::to_string(rc));
  const Run den{"c5", "--preset desk --seed 5 --report {dir}/denoise.csv denoise --db \"" + db.string() +
                    "\" --clean \"" + (kData / "corpus/test").string() +
                    "\" --sigma-v 25 --sqrt-alpha 0.9 --compare --output {dir}/out",
                "denoise.csv", {"out"}};
  if (rc == 0) rc = cli_run(den);
  c.check(rc == 0, "denoise exit code " + std::to_string(rc));
  if (rc == 0) {
    const Csv csv = read_csv(kWork / "c5/denoise.csv");
    double noisy = 0, ctx = 0, plain = 0;
    int n_ctx = 0, n_plain = 0;
    for (const auto& r : csv.rows) {
      const double v = std::stod(r[csv.col("psnr")]);
      if (r[csv.col("method")] == "context") {
        ctx += v;
        noisy += std::stod(r[csv.col("noisy_psnr")]);
        ++n_ctx;
      } else if (r[csv.col("method")] == "alpha0") {
        plain += v;
        ++n_plain;
      }
    }
    c.check(n_ctx == 5 && n_plain == 5, "five test images per variant");
    ctx /= n_ctx;
    plain /= n_plain;
    noisy /= n_ctx;
    c.check(ctx - plain >= 0.2, "context - alpha0 >= +0.2 dB");
    c.check(ctx >= noisy + 3.0 && plain >= noisy + 3.0, "both variants beat the noisy input by 3 dB");
    c.note("noisy " + fmt(noisy, 3) + " dB, context " + fmt(ctx, 3) + " dB, alpha0 " + fmt(plain, 3) +
           " dB, gap " + fmt(ctx - plain, 3) + " dB");
  }
  c.finish();
}

/// 32 frames of a natural texture translating by 2 px per frame.
fs::path write_clip() {
  const fs::path dir = kWork / "clip";
  fs::remove_all(dir);
  const Image tex = load_image(kData / "corpus/train/gravel.pgm");
  std::vector<Image> frames;
  for (int t = 0; t < 32; ++t) {
    Image f(128, 96);
    for (int y = 0; y < 96; ++y)
      for (int x = 0; x < 128; ++x) f(x, y) = tex(110 - 2 * t + x, 20 + y);
    frames.push_back(f);
  }
  save_frames(frames, dir);
  return dir;
}

void criterion_6(const fs::path& clip) {
  Criterion c(6, 300.0);
  const Run run{"c6", "--seed 6 --report {dir}/fruc.csv fruc --frames \"" + clip.string() +
                    "\" --eval --sqrt-alpha 1.3 --output {dir}/frames",
                "fruc.csv", {"frames"}};
  const int rc = cli_run(run);
  c.check(rc == 0, "fruc exit code " + std::to_string(rc));
  if (rc == 0) {
    const Csv csv = read_csv(kWork / "c6/fruc.csv");
    std::map<std::string, double> mean;
    int frames = 0;
    for (const auto& r : csv.rows) {
      if (r[csv.col("frame")] == "mean")
        mean[r[csv.col("method")]] = std::stod(r[csv.col("psnr")]);
      else if (r[csv.col("method")] == "average")
        ++frames;
    }
    c.check(frames == 15, "15 reconstructed frames");
    c.check(mean.count("average") && mean.count("regular") && mean.count("context"), "mean rows present");
    c.check(mean["context"] >= mean["average"] + 3.0, "context >= average + 3 dB");
    c.check(mean["regular"] >= mean["average"] + 3.0, "regular >= average + 3 dB");
    c.check(mean["context"] >= mean["regular"] - 0.05, "context >= regular - 0.05 dB");
    c.note("average " + fmt(mean["average"], 3) + " dB, regular " + fmt(mean["regular"], 3) + " dB, context " +
           fmt(mean["context"], 3) + " dB");
  }
  c.finish();
}

void criterion_7(const fs::path& clip) {
  Criterion c(7, 30.0);
  std::vector<Image> train;
  for (const auto& p : list_corpus(kData / "corpus/train")) train.push_back(load_image(p));
  ContextParams cp;
  cp.alpha = alpha_from_unit_gain(0.9);
  const PatchDatabase db = sample_database(std::span<const Image>(train), 20000, cp, 7);
  const PatchDatabase zeroed = with_alpha(db, 0.0);
  const PatchDatabase plain = content_only(db);
  const KnnIndex idx_zero(zeroed), idx_plain(plain);

  const Image clean = load_image(kData / "corpus/test/camera.pgm");
  const Image noisy = add_gaussian_noise(clean, {25.0, 77});
  DenoiseParams dp;
  dp.sigma_v = 25.0;
  dp.k = 100;
  dp.stride = 3;
  dp.context = cp;
  dp.context.alpha = 0.0;
  const Image via_context = denoise_image(noisy, idx_zero, dp);
  dp.use_context = false;
  const Image via_zeroed = denoise_image(noisy, idx_zero, dp);
  const Image via_plain = denoise_image(noisy, idx_plain, dp);
  c.check(via_context.pixels() == via_plain.pixels(), "alpha = 0 con-patch path equals content-only");
  c.check(via_zeroed.pixels() == via_plain.pixels(), "zeroed feature block equals content-only");

  const auto frames = load_frames(clip);
  FrucParams fp;
  fp.radius = 0;
  fp.sqrt_alpha = 0.0;
  fp.halfpel = false;
  const auto up = upconvert(frames, fp);
  bool same = up.size() == 2 * frames.size() - 1;
  for (std::size_t i = 0; same && i + 1 < frames.size(); ++i) {
    same = up[2 * i].pixels() == frames[i].pixels() &&
           up[2 * i + 1].pixels() == frame_average(frames[i], frames[i + 1]).pixels();
  }
  c.check(same, "radius 0, sqrt-alpha 0 FRUC equals frame averaging");
  c.finish();
}

void criterion_8() {
  Criterion c(8, 1800.0);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < cli_runs.size(); ++i) {
    const Run& run = cli_runs[i];
    const fs::path a = kWork / run.name;
    const fs::path b = kWork / (run.name + "_repeat");
    fs::remove_all(b);
    fs::create_directories(b);
    const bool ok = run_cli(expand(run.args, b), b / "log.txt") == 0;
    c.check(ok, "repeat of " + run.name + " exit code");
    if (!ok) continue;
    c.check(body_without_time(a / run.report) == body_without_time(b / run.report),
            "identical CSV body for " + run.name);
    for (const auto& o : run.outputs) {
      const bool same = fs::is_directory(a / o) ? tree_bytes(a / o) == tree_bytes(b / o)
                                                : file_bytes(a / o) == file_bytes(b / o);
      c.check(same && fs::exists(a / o), "identical " + o + " for " + run.name);
    }
    ++compared;
  }
  c.note(std::to_string(compared) + " CLI runs repeated");
  c.finish();
}

}  // namespace

int main() {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    const fs::path clip = write_clip();
    criterion_6(clip);
    criterion_7(clip);
    criterion_8();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
