// Acceptance runner: one line per criterion, nonzero exit if any criterion fails.

#include "oracles.hpp"
#include "test_util.hpp"

#include "sfuda/class_align.hpp"
#include "sfuda/cli.hpp"
#include "sfuda/feature_io.hpp"
#include "sfuda/harness.hpp"
#include "sfuda/probing.hpp"
#include "sfuda/shot_lite.hpp"
#include "sfuda/stats_lab.hpp"

#include <chrono>
#include <cstdio>
#include <numbers>
#include <sstream>

using namespace sfuda;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* name, double limit_s, const std::function<Verdict()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    v.pass = false;
    v.detail += "; over the " + std::to_string(int(limit_s)) + " s budget";
  }
  if (!v.pass) ++failures;
  std::printf("[%s] %s %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// --- AC1 -------------------------------------------------------------------------------------

Verdict probing_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int cp_mismatch = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int c = uniform_int(rng, 2, 4);
    const int d = uniform_int(rng, 1, 8);
    const int n = uniform_int(rng, c, 60);
    const double lambda = std::pow(10.0, std::uniform_real_distribution<double>(-2.0, 0.0)(rng));
    const auto train = testutil::random_domain(rng, n, d, c, 1.5);

    FitConfig cfg;
    cfg.lambda = lambda;
    cfg.grad_tol = 1e-9;
    cfg.max_iters = 1000000;
    const auto clf = fit_multinomial(train, cfg);
    const auto rows = testutil::to_rows(train.features);
    const auto w = oracle::multinomial_gd(rows, train.labels, c, lambda);
    const double gap = std::abs(multinomial_objective(clf, train) -
                                oracle::multinomial_objective(w, rows, train.labels, lambda));
    worst = std::max(worst, gap);

    const Matrix queries = testutil::gaussian(rng, 30, d);
    const auto got = cp_classify(class_prototypes(train), queries);
    const auto want = oracle::nearest_prototype(oracle::class_means(rows, train.labels, c),
                                                testutil::to_rows(queries));
    cp_mismatch += got != want;
  }
  return {worst < 1e-8 && cp_mismatch == 0,
          "max objective gap " + fmt("%.3g", worst) + " (< 1e-8), cp mismatches " +
              std::to_string(cp_mismatch) + "/100"};
}

// --- AC2 -------------------------------------------------------------------------------------

Verdict kmeans_checks() {
  std::mt19937_64 rng(202);
  int rises = 0;
  int differ = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int c = uniform_int(rng, 2, 5);
    const int d = uniform_int(rng, 2, 8);
    const int n = uniform_int(rng, c, 60);
    const Matrix z = testutil::gaussian(rng, n, d);
    const Matrix init = testutil::gaussian(rng, c, d);
    const auto r = spherical_kmeans(Prototypes::from_matrix(init), z);
    for (size_t i = 1; i < r.objective_trace.size(); ++i) {
      if (r.objective_trace[i] > r.objective_trace[i - 1] + 1e-10) ++rises;
    }
    if (inst < 100) {
      const auto o = oracle::spherical_kmeans(testutil::to_rows(init), testutil::to_rows(z), 100);
      differ += (o.assignments != r.assignments) || (o.passes != r.iterations_used);
    }
  }
  return {rises == 0 && differ == 0, "objective rises " + std::to_string(rises) +
                                         " over 1000 runs, oracle disagreements " +
                                         std::to_string(differ) + "/100"};
}

// --- AC3 -------------------------------------------------------------------------------------

Verdict shot_gradients() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int c = uniform_int(rng, 2, 3);
    const int d = uniform_int(rng, 1, 4);
    const int n = uniform_int(rng, 1, 10);
    const double beta = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const Matrix x = testutil::gaussian(rng, n, d);
    LinearClassifier clf;
    clf.weights = testutil::gaussian(rng, c, d);
    std::vector<int> pseudo(static_cast<size_t>(n));
    for (auto& y : pseudo) y = uniform_int(rng, 0, c - 1);
    const FeatureAdapter adapter{Matrix::Identity(d, d) + 0.3 * testutil::gaussian(rng, d, d),
                                 testutil::gaussian(rng, d, 1, 0.3)};

    auto pack = [d](const Matrix& m, const Vector& b) {
      std::vector<double> v(m.data(), m.data() + d * d);
      v.insert(v.end(), b.data(), b.data() + d);
      return v;
    };
    auto loss_at = [&](const std::vector<double>& v) {
      FeatureAdapter a{Eigen::Map<const Matrix>(v.data(), d, d), Eigen::Map<const Vector>(v.data() + d * d, d)};
      return adapter_loss(a, clf, x, pseudo, beta).value;
    };
    const auto analytic = adapter_loss(adapter, clf, x, pseudo, beta);
    const auto fd = oracle::finite_diff(loss_at, pack(adapter.transform, adapter.offset));
    worst = std::max(worst, oracle::relative_error(pack(analytic.grad_transform, analytic.grad_offset), fd));
  }
  return {worst < 1e-4, "max relative error " + fmt("%.3g", worst) + " (< 1e-4)"};
}

// --- AC4 -------------------------------------------------------------------------------------

Verdict stats_roundtrip() {
  const double m = 0.95, dm = 0.62, dq = -0.45, q = -0.26;
  std::vector<stats::BackboneRecord> records;
  for (int i = 0; i < 40; ++i) {
    const int g = i % 2;
    const double top1 = 0.55 + 0.01 * i;
    records.push_back({top1, g, (m + dm * g) * top1 + q + dq * g});
  }
  const auto fit = stats::fit_interaction(records);
  const double err = std::max({std::abs(*fit.coefficient(stats::Term::Slope) - m),
                               std::abs(*fit.coefficient(stats::Term::PretrainSlope) - dm),
                               std::abs(*fit.coefficient(stats::Term::PretrainIntercept) - dq),
                               std::abs(*fit.coefficient(stats::Term::Intercept) - q)});

  std::mt19937_64 rng(404);
  double adj_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double r2 = std::uniform_real_distribution<double>(-0.5, 1.0)(rng);
    const int df = uniform_int(rng, 1, 6);
    const int n = uniform_int(rng, df + 1, 500);
    const double direct = 1.0 - (1.0 - r2) * (double(n) - 1.0) / (double(n) - double(df));
    adj_err = std::max(adj_err, std::abs(stats::adjusted_r2(r2, n, df) - direct));
  }
  return {err < 1e-10 && fit.r2 == 1.0 && adj_err < 1e-12,
          "max coefficient error " + fmt("%.3g", err) + ", R2 = " + fmt("%.17g", fit.r2) +
              ", adjusted R2 max error " + fmt("%.3g", adj_err)};
}

// --- AC5 -------------------------------------------------------------------------------------

Verdict pruning() {
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> top1(0.6, 0.9);
  std::normal_distribution<double> noise(0.0, 0.02);
  int good = 0;
  for (int ds = 0; ds < 200; ++ds) {
    std::vector<stats::BackboneRecord> r;
    for (int i = 0; i < 100; ++i) {
      const int g = i % 2;
      const double x = top1(rng);
      r.push_back({x, g, 0.9 * x + 0.05 + 1.0 * g + noise(rng)});
    }
    const auto p = stats::prune_insignificant(r, 0.01);
    const bool dm_gone = !p.fit.coefficient(stats::Term::PretrainSlope).has_value();
    const bool dq_kept = p.fit.coefficient(stats::Term::PretrainIntercept).has_value();
    good += dm_gone && dq_kept;
  }
  return {good >= 190, std::to_string(good) + "/200 runs drop dm and keep dq (need >= 190)"};
}

// --- AC6 -------------------------------------------------------------------------------------

Verdict double_transfer() {
  double sca_sum = 0.0, shot_sum = 0.0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    harness::ShiftSpec s;
    s.num_classes = 5;
    s.dim = 16;
    s.seed = std::uint64_t(seed);
    s.rotation_angle = 25.0 * std::numbers::pi / 180.0;
    std::mt19937_64 dir_rng(9000 + std::uint64_t(seed));
    Vector t = testutil::gaussian(dir_rng, 16, 1);
    s.translation = 1.5 * s.class_separation * t.normalized();
    const auto pair = harness::gen_domain_pair(s);
    const harness::MethodParams params;
    sca_sum += harness::run_pair(pair.source, pair.target, io::Method::Sca, params, s.seed).delta;
    shot_sum += harness::run_pair(pair.source, pair.target, io::Method::ShotLite, params, s.seed).delta;
  }
  const double sca = 100.0 * sca_sum / seeds;
  const double shot = 100.0 * shot_sum / seeds;
  return {sca >= 5.0 && shot >= sca - 2.0,
          "mean delta SCA " + fmt("%+.2f", sca) + " pts (need >= +5), SHOT-lite " + fmt("%+.2f", shot) +
              " pts (need >= SCA - 2)"};
}

// --- AC7 -------------------------------------------------------------------------------------

Verdict adabn_recovery() {
  int wins = 0;
  for (int seed = 0; seed < 20; ++seed) {
    harness::ShiftSpec s;
    s.num_classes = 5;
    s.dim = 16;
    s.seed = std::uint64_t(seed);
    // Four distinct dimensions, chosen per seed, get a tenfold scale.
    std::mt19937_64 pick(7000 + std::uint64_t(seed));
    std::vector<int> dims(16);
    std::iota(dims.begin(), dims.end(), 0);
    std::shuffle(dims.begin(), dims.end(), pick);
    s.per_dim_scale = Vector::Ones(16);
    for (int k = 0; k < 4; ++k) s.per_dim_scale(dims[size_t(k)]) = 10.0;
    const auto pair = harness::gen_domain_pair(s);

    const double raw = cp_accuracy(pair.source, pair.target);
    LabeledDomain src = pair.source;
    src.features = standardize(src.features, estimate_stats(src.features));
    LabeledDomain tgt = pair.target;
    tgt.features = standardize(tgt.features, estimate_stats(tgt.features));
    wins += cp_accuracy(src, tgt) > raw;
  }
  return {wins >= 18, std::to_string(wins) + "/20 seeds improve cp accuracy (need >= 18)"};
}

// --- AC8 -------------------------------------------------------------------------------------

Verdict failure_machinery() {
  std::mt19937_64 rng(808);
  int bad = 0;
  double std_gap = 0.0;
  for (int set = 0; set < 500; ++set) {
    const int n = uniform_int(rng, 1, 60);
    std::vector<harness::ExperimentOutcome> outs;
    for (int i = 0; i < n; ++i) {
      // Accuracies on a 1/64 grid: exact ties are common and differences are exact.
      outs.push_back(harness::make_outcome(uniform_int(rng, 0, 64) / 64.0, uniform_int(rng, 0, 64) / 64.0));
    }
    std::vector<double> all, ok, fail;
    for (const auto& o : outs) {
      all.push_back(o.adapted_target_acc - o.baseline_target_acc);
      (o.adapted_target_acc < o.baseline_target_acc ? fail : ok).push_back(all.back());
      bad += o.failed != (o.adapted_target_acc < o.baseline_target_acc);
    }
    const auto fr = harness::failure_rate(outs);
    const auto cd = harness::conditional_degradation(outs);
    bad += fr.failure_rate != 100.0 * double(fail.size()) / double(n);
    auto check = [&](const std::optional<stats::MeanStd>& got, const std::vector<double>& v) {
      if (got.has_value() != !v.empty()) return ++bad, void();
      if (v.empty()) return;
      const auto [m, s] = oracle::mean_std(v);
      bad += got->mean != m;
      std_gap = std::max(std_gap, std::abs(got->std - s));
    };
    check(fr.delta, all);
    check(cd.success, ok);
    check(cd.failure, fail);
  }
  // Tie rule: equal accuracies are never failures.
  const auto tie = harness::make_outcome(0.5, 0.5);
  const auto below = harness::make_outcome(0.5, std::nextafter(0.5, 0.0));
  bad += tie.failed || !below.failed;
  return {bad == 0 && std_gap < 1e-15,
          std::to_string(bad) + " mismatches over 500 sets plus tie cases, max std rounding gap " +
              fmt("%.2g", std_gap)};
}

// --- AC9 -------------------------------------------------------------------------------------

Verdict batch_determinism() {
  testutil::TempDir dir("accept_run");
  for (int p = 0; p < 4; ++p) {
    harness::ShiftSpec s;
    s.num_classes = 4;
    s.dim = 8;
    s.samples_per_class = 40;
    s.seed = std::uint64_t(p);
    s.rotation_angle = 0.2 * p;
    const auto pair = harness::gen_domain_pair(s);
    io::write_sfdk(pair.source, dir / ("s" + std::to_string(p) + ".sfdk"));
    io::write_sfdk(pair.target, dir / ("t" + std::to_string(p) + ".sfdk"));
  }
  const char* methods[] = {"lp", "cp", "sca", "shot_lite", "ft_stats"};
  std::vector<io::ExperimentRecord> records;
  for (int i = 0; i < 16; ++i) {
    io::ExperimentRecord r;
    r.id = "exp" + std::to_string(i);
    r.source_path = "s" + std::to_string(i % 4) + ".sfdk";
    r.target_path = "t" + std::to_string(i % 4) + ".sfdk";
    r.method = io::parse_method(methods[i % 5]);
    r.method_params = nlohmann::json::object();
    if (r.method == io::Method::Sca) r.method_params["init"] = i % 2 ? "soft" : "mr_weights";
    if (r.method == io::Method::ShotLite) r.method_params["epochs"] = 5;
    r.seed = std::uint64_t(1000 + i);
    records.push_back(r);
  }
  io::write_atomic(dir / "manifest.jsonl", io::format_manifest(records));
  std::ostringstream sink;
  const auto manifest = (dir / "manifest.jsonl").string();
  const int a = cli::run({"run", "--manifest", manifest, "--out", (dir / "j1.csv").string(), "--jobs", "1"}, sink, sink);
  const int b = cli::run({"run", "--manifest", manifest, "--out", (dir / "j8.csv").string(), "--jobs", "8"}, sink, sink);
  const bool same = a == 0 && b == 0 && io::read_bytes(dir / "j1.csv") == io::read_bytes(dir / "j8.csv");
  return {same, same ? "--jobs 1 and --jobs 8 outputs are byte-identical (16 experiments)"
                     : "outputs differ or a run failed (exit " + std::to_string(a) + "/" + std::to_string(b) + ")"};
}

// --- AC10 ------------------------------------------------------------------------------------

Verdict sfdk_format() {
  std::mt19937_64 rng(1010);
  int roundtrip_bad = 0;
  int accepted_truncations = 0;
  long truncations = 0;
  for (int inst = 0; inst < 1000; ++inst) {
    const int c = uniform_int(rng, 1, 5);
    const int n = uniform_int(rng, c, 40);
    const int d = uniform_int(rng, 1, 12);
    const double spread = std::pow(10.0, std::uniform_real_distribution<double>(-6.0, 6.0)(rng));
    auto dom = testutil::random_domain(rng, n, d, c, spread);
    const int mode = inst % 3;  // fully labeled, partially labeled, unlabeled
    for (auto& y : dom.labels) {
      if (mode == 2 || (mode == 1 && uniform_int(rng, 0, 3) == 0)) y = kUnlabeled;
    }
    const auto bytes = io::encode_sfdk(dom);
    const auto back = io::decode_sfdk(bytes);
    roundtrip_bad += back.labels != dom.labels;
    roundtrip_bad += back.features != dom.features.cast<float>().cast<double>();
    roundtrip_bad += io::encode_sfdk(back) != bytes;

    // Every strict prefix and a one-byte extension must be rejected.
    auto reject = [&](std::vector<std::uint8_t> b) {
      ++truncations;
      try {
        (void)io::decode_sfdk(b);
        ++accepted_truncations;
      } catch (const Error&) {
      }
    };
    for (size_t len = 0; len < bytes.size(); ++len) {
      reject(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + std::ptrdiff_t(len)));
    }
    auto longer = bytes;
    longer.push_back(0);
    reject(longer);
  }
  return {roundtrip_bad == 0 && accepted_truncations == 0,
          std::to_string(roundtrip_bad) + " round-trip defects over 1000 domains; " +
              std::to_string(accepted_truncations) + " of " + std::to_string(truncations) +
              " truncated or extended files accepted"};
}

}  // namespace

int main() {
  report("AC1", "probing oracle equivalence", 30, probing_oracle);
  report("AC2", "spherical k-means monotonicity and oracle", 60, kmeans_checks);
  report("AC3", "SHOT-lite adapter gradients", 10, shot_gradients);
  report("AC4", "stats round trip and adjusted R2", 0, stats_roundtrip);
  report("AC5", "significance pruning", 0, pruning);
  report("AC6", "double-transfer reproduction", 180, double_transfer);
  report("AC7", "ADABN-analog recovery", 0, adabn_recovery);
  report("AC8", "failure machinery", 0, failure_machinery);
  report("AC9", "batch determinism", 0, batch_determinism);
  report("AC10", "SFDK round trip and truncation fuzzing", 0, sfdk_format);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
