#include "options.hpp"

#include "conpatch/denoise.hpp"
#include "conpatch/digest.hpp"
#include "conpatch/fruc.hpp"
#include "conpatch/image_io.hpp"
#include "conpatch/knn_index.hpp"
#include "conpatch/patchdb.hpp"
#include "conpatch/random.hpp"
#include "conpatch/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

using namespace conpatch;
using namespace conpatch::cli;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<ParamSpec> common_specs() {
  return {
      {"seed", Kind::kInt, "1", "master seed"},
      {"threads", Kind::kInt, "0", "worker threads, 0 = all cores", true},
      {"report", Kind::kString, "", "CSV report path (stdout when empty)", true},
  };
}

std::vector<ParamSpec> context_specs(const std::string& sigma, const std::string& window, const std::string& sqrt_alpha) {
  return {
      {"patch", Kind::kInt, "7", "central patch side c"},
      {"window", Kind::kInt, window, "context window side h"},
      {"bins", Kind::kInt, "8", "histogram bins b"},
      {"context_stride", Kind::kInt, "4", "sampling step m inside the window"},
      {"context_sigma", Kind::kReal, sigma, "similarity kernel sigma (clean images)"},
      {"similarity_scale", Kind::kString, "per-pixel", "per-pixel or sum"},
      {"sqrt_alpha", Kind::kString, sqrt_alpha, "context gain on unit-range intensities (auto: by noise level)"},
      {"alpha", Kind::kString, "", "context gain in luminance^2 units, overrides sqrt-alpha"},
  };
}

std::vector<ParamSpec> with_common(std::vector<ParamSpec> s) {
  auto c = common_specs();
  s.insert(s.begin(), c.begin(), c.end());
  return s;
}

ContextParams context_from(const ParamSet& p, double alpha) {
  ContextParams c;
  c.patch = static_cast<int>(p.integer("patch"));
  c.window = static_cast<int>(p.integer("window"));
  c.bins = static_cast<int>(p.integer("bins"));
  c.stride = static_cast<int>(p.integer("context_stride"));
  c.sigma = p.real("context_sigma");
  try {
    c.scale = similarity_scale_from_string(p.str("similarity_scale"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("similarity-scale: ") + e.what());
  }
  c.alpha = alpha;
  return c;
}

/// alpha wins over sqrt_alpha; "auto" follows the noise-level schedule.
double resolve_alpha(const ParamSet& p, double sigma_v) {
  if (!p.empty("alpha")) {
    const double a = parse_real("alpha", p.str("alpha"));
    if (a < 0.0) throw UsageError("alpha must be >= 0");
    return a;
  }
  const std::string& s = p.str("sqrt_alpha");
  const double unit = s == "auto" ? default_unit_sqrt_alpha(sigma_v) : parse_real("sqrt_alpha", s);
  if (unit < 0.0) throw UsageError("sqrt-alpha must be >= 0");
  return alpha_from_unit_gain(unit);
}

std::vector<fs::path> inputs_of(const fs::path& p) {
  if (fs::is_directory(p)) {
    auto list = list_corpus(p);
    if (list.empty()) throw IoError("no images in " + p.string());
    return list;
  }
  if (!fs::exists(p)) throw IoError("cannot read " + p.string());
  return {p};
}

bool is_image_path(const fs::path& p) {
  const auto e = p.extension().string();
  return e == ".pgm" || e == ".png";
}

/// CSV destination plus the echoed configuration.
class Report {
 public:
  Report(const ParamSet& p, const std::string& command, std::vector<std::string> header) {
    const RunConfig full = p.resolved(command);
    const RunConfig key = p.digest_config(command);
    digest_ = key.digest();
    run_id_ = command + "-" + digest_.substr(0, 8);
    std::cerr << full.to_text() << "digest=" << digest_ << "\n";
    if (!p.empty("report")) {
      file_ = std::make_unique<std::ofstream>(p.str("report"), std::ios::binary);
      if (!*file_) throw IoError("cannot write " + p.str("report"));
    }
    std::ostream& out = stream();
    std::string text = full.to_text();
    std::size_t start = 0;
    while (start < text.size()) {
      const auto nl = text.find('\n', start);
      out << "# " << text.substr(start, nl - start) << "\n";
      start = nl + 1;
    }
    out << "# digest=" << digest_ << "\n";
    header.insert(header.begin(), {"run_id", "digest"});
    writer_ = std::make_unique<CsvWriter>(out, std::move(header));
  }

  void row(std::vector<std::string> fields) {
    fields.insert(fields.begin(), {run_id_, digest_});
    writer_->row(fields);
    stream().flush();
  }

  void finish() {
    if (file_) {
      file_->close();
      if (!*file_) throw IoError("write failed for the report");
    }
  }

 private:
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

  std::string digest_;
  std::string run_id_;
  std::unique_ptr<std::ofstream> file_;
  std::unique_ptr<CsvWriter> writer_;
};

std::string num(double v) { return format_number(v); }

// ---------------------------------------------------------------------------

std::vector<ParamSpec> build_db_specs() {
  auto s = with_common({
      {"corpus", Kind::kString, "", "directory of training images", true},
      {"out", Kind::kString, "", "database file (.cpdb)", true},
      {"count", Kind::kInt, "4500000", "number of sampled con-patches"},
  });
  auto c = context_specs("5", "21", "0.9");
  s.insert(s.end(), c.begin(), c.end());
  return s;
}

int cmd_build_db(const ParamSet& p) {
  if (p.empty("corpus") || p.empty("out")) throw UsageError("build-db needs --corpus and --out");
  const long long n = p.integer("count");
  if (n < 1) throw UsageError("count must be >= 1");
  const ContextParams ctx = context_from(p, resolve_alpha(p, 25.0));
  if (ctx.alpha == 0.0) throw UsageError("the database stores the context feature; build it with a non-zero gain");
  ctx.validate();
  Report report(p, "build-db", {"count", "dim", "db_digest", "with_replacement", "wall_time_s"});
  const auto t0 = Clock::now();
  const auto corpus = list_corpus(p.str("corpus"));
  if (corpus.empty()) throw IoError("no images in " + p.str("corpus"));
  const auto db = sample_database(std::span<const fs::path>(corpus), static_cast<std::size_t>(n), ctx,
                                  static_cast<std::uint64_t>(p.integer("seed")));
  save_database(db, p.str("out"));
  if (db.meta().sampled_with_replacement)
    std::cerr << "warning: " << n << " patches exceed the distinct centres of the corpus; sampled with replacement\n";
  const std::string d = hex_digest(db.content_digest());
  std::cout << "count " << db.count() << "\ndim " << db.dim() << "\ndigest " << d << "\n";
  report.row({std::to_string(db.count()), std::to_string(db.dim()), d,
              db.meta().sampled_with_replacement ? "true" : "false", num(seconds_since(t0))});
  report.finish();
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<ParamSpec> denoise_specs() {
  auto s = with_common({
      {"db", Kind::kString, "", "database file from build-db", true},
      {"clean", Kind::kString, "", "clean image or directory; noise is synthesized", true},
      {"noisy", Kind::kString, "", "noisy image or directory", true},
      {"output", Kind::kString, "", "output image (single result) or directory", true},
      {"noisy_output", Kind::kString, "", "directory for the synthesized noisy images", true},
      {"sigma_v", Kind::kReal, "25", "noise standard deviation"},
      {"k", Kind::kInt, "500", "neighbours per patch"},
      {"stride", Kind::kInt, "1", "patch-centre step"},
      {"query_sigma", Kind::kReal, "0", "context sigma for noisy queries, 0 = sigma-v"},
      {"max_visits", Kind::kInt, std::to_string(KnnIndex::kDefaultMaxVisits), "kd-tree leaf budget, 0 = exact"},
      {"compare", Kind::kBool, "false", "also run the alpha = 0 baseline"},
      {"internal", Kind::kBool, "false", "internal non-local means instead of the database"},
      {"nlm_window", Kind::kInt, "21", "NLM search window side"},
      {"nlm_k", Kind::kInt, "0", "NLM candidates kept, 0 = all"},
      {"nlm_filter", Kind::kReal, "1", "NLM kernel width in units of sigma-v"},
  });
  auto c = context_specs("5", "21", "auto");
  s.insert(s.end(), c.begin(), c.end());
  return s;
}

struct Method {
  std::string name;
  std::function<Image(const Image&)> run;
};

int cmd_denoise(const ParamSet& p) {
  const bool have_clean = !p.empty("clean");
  if (have_clean == !p.empty("noisy")) throw UsageError("denoise needs exactly one of --clean and --noisy");
  const double sigma_v = p.real("sigma_v");
  if (!(sigma_v > 0.0)) throw UsageError("sigma-v must be > 0");
  const int threads = static_cast<int>(p.integer("threads"));
  const auto seed = static_cast<std::uint64_t>(p.integer("seed"));
  const bool internal = p.flag("internal");

  std::vector<Method> methods;
  std::unique_ptr<PatchDatabase> db_ctx, db_plain;
  std::unique_ptr<KnnIndex> idx_ctx, idx_plain;
  DenoiseParams dp;
  if (internal) {
    NlmParams np;
    np.window = static_cast<int>(p.integer("nlm_window"));
    np.patch = static_cast<int>(p.integer("patch"));
    np.sigma_v = sigma_v;
    np.k = static_cast<int>(p.integer("nlm_k"));
    np.filter = p.real("nlm_filter");
    np.stride = static_cast<int>(p.integer("stride"));
    methods.push_back({"internal", [np](const Image& y) { return internal_nlm(y, np); }});
  } else {
    if (p.empty("db")) throw UsageError("denoise needs --db (or --internal)");
    const double alpha = resolve_alpha(p, sigma_v);
    dp.sigma_v = sigma_v;
    dp.k = static_cast<int>(p.integer("k"));
    dp.stride = static_cast<int>(p.integer("stride"));
    dp.query_sigma = p.real("query_sigma");
    const long long visits = p.integer("max_visits");
    if (visits < 0) throw UsageError("max-visits must be >= 0");
    dp.max_visits = visits == 0 ? KnnIndex::kUnbounded : static_cast<std::size_t>(visits);
    dp.threads = threads;
    dp.context = context_from(p, alpha);
    try {
      dp.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const PatchDatabase stored = load_database(p.str("db"));
    const auto& sp = stored.meta().params;
    if (sp.patch != dp.context.patch || sp.bins != dp.context.bins || sp.window != dp.context.window ||
        sp.stride != dp.context.stride || sp.scale != dp.context.scale || sp.sigma != dp.context.sigma)
      throw UsageError("context layout differs from the database; pass the build-db settings");
    if (alpha > 0.0) {
      db_ctx = std::make_unique<PatchDatabase>(with_alpha(stored, alpha));
      idx_ctx = std::make_unique<KnnIndex>(*db_ctx);
      methods.push_back({"context", [&, dp](const Image& y) { return denoise_image(y, *idx_ctx, dp); }});
    }
    if (alpha == 0.0 || p.flag("compare")) {
      db_plain = std::make_unique<PatchDatabase>(content_only(stored));
      idx_plain = std::make_unique<KnnIndex>(*db_plain);
      DenoiseParams plain = dp;
      plain.use_context = false;
      plain.context.alpha = 0.0;
      methods.push_back({"alpha0", [&, plain](const Image& y) { return denoise_image(y, *idx_plain, plain); }});
    }
  }

  const auto inputs = inputs_of(have_clean ? p.str("clean") : p.str("noisy"));
  std::optional<fs::path> out_file, out_dir;
  if (!p.empty("output")) {
    const fs::path o = p.str("output");
    if (is_image_path(o) && inputs.size() == 1 && methods.size() == 1)
      out_file = o;
    else
      out_dir = o;
  }
  if (out_dir) fs::create_directories(*out_dir);
  if (!p.empty("noisy_output")) fs::create_directories(p.str("noisy_output"));

  Report report(p, "denoise", {"image", "method", "sigma_v", "noisy_psnr", "psnr", "wall_time_s"});
  std::vector<double> sums(methods.size(), 0.0);
  double noisy_sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Image input = load_image(inputs[i]);
    const std::string stem = inputs[i].stem().string();
    Image noisy = input;
    std::string noisy_psnr;
    if (have_clean) {
      noisy = add_gaussian_noise(input, {sigma_v, counter_hash(seed, 0x6e6f697365, i)});
      noisy_psnr = num(psnr(input, noisy));
      noisy_sum += psnr(input, noisy);
      if (!p.empty("noisy_output")) save_image(noisy, fs::path(p.str("noisy_output")) / (stem + ".pgm"));
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
      const auto t0 = Clock::now();
      const Image out = quantize_8bit(methods[m].run(noisy));
      const double wall = seconds_since(t0);
      std::string out_psnr;
      if (have_clean) {
        const double v = psnr(input, out);
        sums[m] += v;
        out_psnr = num(v);
      }
      if (out_file) save_image(out, *out_file);
      if (out_dir) save_image(out, *out_dir / (stem + "." + methods[m].name + ".pgm"));
      report.row({inputs[i].filename().string(), methods[m].name, num(sigma_v), noisy_psnr, out_psnr, num(wall)});
      std::cerr << stem << " " << methods[m].name << (have_clean ? " psnr " + out_psnr : std::string()) << "\n";
    }
  }
  if (have_clean) {
    const double n = static_cast<double>(inputs.size());
    std::cerr << "mean noisy " << num(noisy_sum / n);
    for (std::size_t m = 0; m < methods.size(); ++m) std::cerr << "  " << methods[m].name << " " << num(sums[m] / n);
    std::cerr << "\n";
  }
  report.finish();
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<ParamSpec> eval_matching_specs() {
  auto s = with_common({
      {"corpus", Kind::kString, "", "directory the examples are drawn from", true},
      {"query_corpus", Kind::kString, "", "directory the queries are drawn from (default: corpus)", true},
      {"queries", Kind::kInt, "2000", "number of queries N_T"},
      {"examples", Kind::kInt, "100000", "number of examples N_D"},
      {"large", Kind::kInt, "17", "large patch side"},
      {"k", Kind::kInt, "20", "neighbours per query"},
      {"sigma_v", Kind::kReal, "35", "query noise standard deviation"},
      {"query_sigma", Kind::kReal, "0", "context sigma for noisy queries, 0 = sigma-v"},
      {"summary", Kind::kString, "", "CSV of means binned by E_GT", true},
      {"summary_bins", Kind::kInt, "10", "equal-count E_GT bins in the summary"},
  });
  auto c = context_specs("5", "17", "0.9");
  s.insert(s.end(), c.begin(), c.end());
  return s;
}

int cmd_eval_matching(const ParamSet& p) {
  if (p.empty("corpus")) throw UsageError("eval-matching needs --corpus");
  const double sigma_v = p.real("sigma_v");
  if (sigma_v < 0.0) throw UsageError("sigma-v must be >= 0");
  MatchingConfig cfg;
  cfg.patch = static_cast<int>(p.integer("patch"));
  cfg.large = static_cast<int>(p.integer("large"));
  cfg.k = static_cast<int>(p.integer("k"));
  cfg.sigma_v = sigma_v;
  cfg.query_sigma = p.real("query_sigma");
  cfg.context = context_from(p, resolve_alpha(p, sigma_v));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const long long nq = p.integer("queries"), nd = p.integer("examples"), nbins = p.integer("summary_bins");
  if (nq < 1 || nd < cfg.k) throw UsageError("need queries >= 1 and examples >= k");
  if (nbins < 1) throw UsageError("summary-bins must be >= 1");

  auto load_all = [](const fs::path& dir) {
    std::vector<Image> out;
    for (const auto& f : inputs_of(dir)) out.push_back(load_image(f));
    return out;
  };
  const auto examples_img = load_all(p.str("corpus"));
  const auto queries_img = p.empty("query_corpus") ? examples_img : load_all(p.str("query_corpus"));
  Report report(p, "eval-matching", {"query", "e_gt", "e_small", "e_large", "e_con"});
  const auto seed = static_cast<std::uint64_t>(p.integer("seed"));
  const auto t0 = Clock::now();
  const auto examples = sample_large_patches(examples_img, static_cast<std::size_t>(nd), cfg.large, counter_hash(seed, 1, 0));
  const auto clean = sample_large_patches(queries_img, static_cast<std::size_t>(nq), cfg.large, counter_hash(seed, 2, 0));
  const auto noisy = add_noise_rows(clean, sigma_v, counter_hash(seed, 3, 0));
  const MatchingReport r = eval_matching(clean, noisy, examples, cfg);
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& e = r.records[i];
    report.row({std::to_string(i), num(e.e_gt), num(e.e_small), num(e.e_large), num(e.e_con)});
  }
  report.finish();

  const auto mean = r.mean();
  std::cerr << "mean E_GT " << num(mean.e_gt) << "  E_small " << num(mean.e_small) << "  E_large "
            << num(mean.e_large) << "  E_con " << num(mean.e_con) << "  (" << num(seconds_since(t0)) << " s)\n";

  if (!p.empty("summary")) {
    std::ofstream out(p.str("summary"), std::ios::binary);
    if (!out) throw IoError("cannot write " + p.str("summary"));
    std::vector<std::size_t> order(r.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.records[a].e_gt < r.records[b].e_gt; });
    CsvWriter w(out, {"bin", "count", "e_gt", "e_small", "e_large", "e_con"});
    const std::size_t bins = std::min<std::size_t>(static_cast<std::size_t>(nbins), order.size());
    for (std::size_t b = 0; b < bins; ++b) {
      const std::size_t lo = b * order.size() / bins, hi = (b + 1) * order.size() / bins;
      MatchingRecord s;
      for (std::size_t j = lo; j < hi; ++j) {
        const auto& e = r.records[order[j]];
        s.e_gt += e.e_gt;
        s.e_small += e.e_small;
        s.e_large += e.e_large;
        s.e_con += e.e_con;
      }
      const double n = static_cast<double>(hi - lo);
      w.row({std::to_string(b), std::to_string(hi - lo), num(s.e_gt / n), num(s.e_small / n), num(s.e_large / n),
             num(s.e_con / n)});
    }
    w.row({"all", std::to_string(order.size()), num(mean.e_gt), num(mean.e_small), num(mean.e_large),
           num(mean.e_con)});
    if (!out) throw IoError("write failed for " + p.str("summary"));
  }
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<ParamSpec> fruc_specs() {
  auto s = with_common({
      {"frames", Kind::kString, "", "directory of input frames", true},
      {"output", Kind::kString, "", "directory for the output frames", true},
      {"eval", Kind::kBool, "false", "drop odd frames, rebuild and score them"},
      {"block", Kind::kInt, "16", "block side"},
      {"radius", Kind::kInt, "10", "search radius in pixels"},
      {"halfpel", Kind::kBool, "true", "half-pel refinement"},
      {"metric", Kind::kString, "ssd", "block metric: ssd or sad"},
  });
  auto c = context_specs("10", "21", "1.3");
  s.insert(s.end(), c.begin(), c.end());
  return s;
}

int cmd_fruc(const ParamSet& p) {
  if (p.empty("frames")) throw UsageError("fruc needs --frames");
  FrucParams fp;
  fp.block = static_cast<int>(p.integer("block"));
  fp.radius = static_cast<int>(p.integer("radius"));
  fp.halfpel = p.flag("halfpel");
  fp.threads = static_cast<int>(p.integer("threads"));
  const std::string metric = p.str("metric");
  if (metric == "ssd")
    fp.metric = BlockMetric::kSsd;
  else if (metric == "sad")
    fp.metric = BlockMetric::kSad;
  else
    throw UsageError("metric must be ssd or sad");
  fp.context = context_from(p, 0.0);
  const double alpha = resolve_alpha(p, 0.0);
  fp.sqrt_alpha = std::sqrt(alpha) / kPeakLuminance;
  try {
    fp.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto frames = load_frames(p.str("frames"));
  if (frames.size() < 2) throw IoError("need at least two frames in " + p.str("frames"));

  if (!p.flag("eval")) {
    Report report(p, "fruc", {"frames_in", "frames_out", "wall_time_s"});
    const auto t0 = Clock::now();
    const auto out = upconvert(frames, fp);
    if (!p.empty("output")) save_frames(out, p.str("output"));
    report.row({std::to_string(frames.size()), std::to_string(out.size()), num(seconds_since(t0))});
    report.finish();
    return 0;
  }

  Report report(p, "fruc", {"frame", "method", "sqrt_alpha", "psnr", "wall_time_s"});
  std::vector<double> gains{0.0};
  if (fp.sqrt_alpha != 0.0) gains.push_back(fp.sqrt_alpha);
  std::vector<std::vector<FrameScore>> scores;
  std::vector<double> walls;
  for (double g : gains) {
    FrucParams q = fp;
    q.sqrt_alpha = g;
    const auto t0 = Clock::now();
    std::vector<Image> rebuilt;
    scores.push_back(evaluate_upconversion(frames, q, &rebuilt));
    walls.push_back(seconds_since(t0));
    if (!p.empty("output") && g == gains.back()) save_frames(rebuilt, p.str("output"));
  }
  const std::size_t n = scores[0].size();
  std::vector<double> mean(gains.size() + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string frame = std::to_string(scores[0][i].index);
    report.row({frame, "average", "", num(scores[0][i].psnr_average), ""});
    mean[0] += scores[0][i].psnr_average;
    for (std::size_t g = 0; g < gains.size(); ++g) {
      report.row({frame, gains[g] == 0.0 ? "regular" : "context", num(gains[g]), num(scores[g][i].psnr_mc),
                  num(walls[g] / static_cast<double>(n))});
      mean[g + 1] += scores[g][i].psnr_mc;
    }
  }
  report.row({"mean", "average", "", num(mean[0] / static_cast<double>(n)), ""});
  for (std::size_t g = 0; g < gains.size(); ++g)
    report.row({"mean", gains[g] == 0.0 ? "regular" : "context", num(gains[g]),
                num(mean[g + 1] / static_cast<double>(n)), num(walls[g])});
  report.finish();
  std::cerr << n << " frames: average " << num(mean[0] / static_cast<double>(n));
  for (std::size_t g = 0; g < gains.size(); ++g)
    std::cerr << "  sqrt-alpha " << num(gains[g]) << " " << num(mean[g + 1] / static_cast<double>(n));
  std::cerr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<ParamSpec> psnr_specs() {
  return with_common({
      {"reference", Kind::kString, "", "reference image", true},
      {"test", Kind::kString, "", "test image", true},
  });
}

int cmd_psnr(const ParamSet& p) {
  if (p.empty("reference") || p.empty("test")) throw UsageError("psnr needs a reference and a test image");
  const Image a = load_image(p.str("reference"));
  const Image b = load_image(p.str("test"));
  if (!same_shape(a, b)) throw UsageError("images differ in size");
  const double v = psnr(a, b);
  std::cout << num(v) << "\n";
  if (!p.empty("report")) {
    Report report(p, "psnr", {"reference", "test", "psnr"});
    report.row({p.str("reference"), p.str("test"), num(v)});
    report.finish();
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct Command {
  std::string name;
  std::string help;
  std::string footer;
  std::function<std::vector<ParamSpec>()> specs;
  std::function<int(const ParamSet&)> run;
  std::vector<std::string> positional;
};

std::vector<Command> commands() {
  return {
      {"build-db", "Sample a con-patch database from a corpus",
       "Report columns: run_id, digest, count, dim, db_digest, with_replacement, wall_time_s", build_db_specs,
       cmd_build_db, {}},
      {"denoise", "External (or internal NLM) denoising",
       "Report columns: run_id, digest, image, method, sigma_v, noisy_psnr, psnr, wall_time_s\n"
       "methods: context, alpha0 (--alpha 0 or --compare), internal",
       denoise_specs, cmd_denoise, {}},
      {"eval-matching", "Matching error of small, large and con-patch search",
       "Report columns: run_id, digest, query, e_gt, e_small, e_large, e_con\n"
       "Summary columns: bin, count, e_gt, e_small, e_large, e_con (bins by E_GT, last row 'all')",
       eval_matching_specs, cmd_eval_matching, {}},
      {"fruc", "Frame-rate up-conversion by two",
       "Eval report columns: run_id, digest, frame, method, sqrt_alpha, psnr, wall_time_s\n"
       "methods: average, regular (sqrt-alpha 0), context; 'mean' rows close the report",
       fruc_specs, cmd_fruc, {}},
      {"psnr", "PSNR between two images", "Prints the value; 'inf' for identical images", psnr_specs, cmd_psnr,
       {"reference", "test"}},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"con-patch denoising, matching and frame-rate up-conversion"};
  app.require_subcommand(1);
  std::string g_seed, g_preset = "full", g_report, g_config, g_threads;
  auto* o_seed = app.add_option("--seed", g_seed, "master seed (default 1)");
  app.add_option("--preset", g_preset, "full (default) or desk: count 2e5, k 100, stride 3");
  auto* o_report = app.add_option("--report", g_report, "CSV report path");
  app.add_option("--config", g_config, "key = value file, applied over the preset");
  auto* o_threads = app.add_option("--threads", g_threads, "worker threads, 0 = all cores");

  struct Bound {
    Command cmd;
    CLI::App* sub;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> opts;
    std::map<std::string, CLI::Option*> negated;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (auto& c : commands()) {
    auto b = std::make_unique<Bound>();
    b->cmd = c;
    b->sub = app.add_subcommand(c.name, c.help);
    b->sub->footer(c.footer);
    b->sub->fallthrough();
    for (const auto& s : c.specs()) {
      if (s.key == "seed" || s.key == "threads" || s.key == "report") continue;
      const std::string help = s.help + (s.fallback.empty() ? "" : " (default " + s.fallback + ")");
      const bool positional = std::find(c.positional.begin(), c.positional.end(), s.key) != c.positional.end();
      if (s.kind == Kind::kBool) {
        b->opts[s.key] = b->sub->add_flag("--" + kebab(s.key), help);
        const std::string off = "disable " + kebab(s.key);
        b->negated[s.key] = b->sub->add_flag("--no-" + kebab(s.key), off);
      } else {
        const std::string name = positional ? s.key + ",--" + kebab(s.key) : "--" + kebab(s.key);
        b->opts[s.key] = b->sub->add_option(name, b->values[s.key], help);
      }
    }
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  for (auto& b : bound) {
    if (!b->sub->parsed()) continue;
    try {
      ParamSet params(b->cmd.specs());
      params.apply_preset(g_preset);
      if (!g_config.empty()) params.apply_file(g_config);
      if (o_seed->count()) params.assign("seed", g_seed);
      if (o_threads->count()) params.assign("threads", g_threads);
      if (o_report->count()) params.assign("report", g_report);
      for (const auto& [key, opt] : b->opts) {
        if (b->negated.count(key)) {
          if (opt->count() && b->negated[key]->count()) throw UsageError("both --" + kebab(key) + " and --no-" + kebab(key));
          if (opt->count()) params.assign(key, "true");
          if (b->negated[key]->count()) params.assign(key, "false");
        } else if (opt->count()) {
          params.assign(key, b->values[key]);
        }
      }
      if (params.integer("threads") < 0) throw UsageError("threads must be >= 0");
      return b->cmd.run(params);
    } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const IoError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitIo;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return kExitUsage;
}
