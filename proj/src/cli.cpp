#include "sfuda/cli.hpp"

#include "sfuda/feature_io.hpp"
#include "sfuda/stats_lab.hpp"

#include <CLI11.hpp>

#include <array>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace sfuda::cli {
namespace {

namespace fs = std::filesystem;

std::string pair_name(const std::string& source, const std::string& target) {
  return fs::path(source).stem().string() + ":" + fs::path(target).stem().string();
}

harness::ExperimentOutcome run_files(const std::string& source_path, const std::string& target_path,
                                     io::Method method, const harness::MethodParams& params,
                                     std::uint64_t seed) {
  const auto source = io::read_domain(source_path);
  const auto target = io::read_domain(target_path);
  return harness::run_pair(source, target, method, params, seed);
}

void print_summary(std::ostream& out, const std::vector<harness::ExperimentOutcome>& outcomes) {
  std::map<std::string, std::vector<harness::ExperimentOutcome>> by_method;
  for (const auto& o : outcomes) by_method[std::string(io::to_string(o.method))].push_back(o);
  auto opt = [](const std::optional<stats::MeanStd>& ms, bool mean) {
    return ms ? format_number(mean ? ms->mean : ms->std) : std::string();
  };
  out << "# summary\n";
  out << "method,experiments,failure_rate,delta_mean,delta_std,success_delta_mean,"
         "success_delta_std,failure_delta_mean,failure_delta_std\n";
  for (const auto& [name, group] : by_method) {
    const auto fr = harness::failure_rate(group);
    const auto cd = harness::conditional_degradation(group);
    out << name << ',' << group.size() << ',' << format_number(fr.failure_rate) << ','
        << format_number(fr.delta.mean) << ',' << format_number(fr.delta.std) << ','
        << opt(cd.success, true) << ',' << opt(cd.success, false) << ',' << opt(cd.failure, true)
        << ',' << opt(cd.failure, false) << '\n';
  }
}

unsigned default_jobs() {
  if (const char* env = std::getenv("SFUDA_THREADS")) {
    unsigned v = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) return v;
  }
  return 1;
}

int cmd_run(const std::string& manifest_path, const std::string& out_path, unsigned jobs,
            std::ostream& out) {
  const auto records = io::parse_manifest(io::read_text(manifest_path));
  if (records.empty()) throw Error(ErrorCode::ManifestInvalid, "manifest has no experiments");
  std::vector<harness::MethodParams> params;
  for (const auto& r : records) {
    try {
      params.push_back(harness::MethodParams::from_json(r.method_params));
    } catch (const Error& e) {
      throw Error(ErrorCode::ManifestInvalid, "experiment '" + r.id + "': " + e.what());
    }
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path.string() : (base / path).string();
  };

  std::vector<std::optional<harness::ExperimentOutcome>> results(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        const auto& r = records[i];
        results[i] = run_files(resolve(r.source_path), resolve(r.target_path), r.method, params[i], r.seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(records.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::ostringstream csv;
  csv << kResultHeader << '\n';
  std::vector<harness::ExperimentOutcome> outcomes;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto o = std::move(*results[i]);
    o.pair_id = records[i].id;
    csv << format_result_row(o, records[i].source_path, records[i].target_path) << '\n';
    outcomes.push_back(std::move(o));
  }
  csv << '\n';
  print_summary(csv, outcomes);
  io::write_atomic(out_path, csv.str());
  out << "wrote " << records.size() << " results to " << out_path << '\n';
  return kOk;
}

int cmd_stats(const std::string& input, const std::string& model, bool prune, std::ostream& out) {
  const auto table = parse_records_csv(io::read_text(input));
  stats::RegressionFit fit;
  std::vector<stats::Term> removed;
  if (model == "linear") {
    fit = stats::fit_linear(table.records);
  } else {
    if (!table.has_pretrain) throw Error(ErrorCode::MissingKey, "input has no 'pretrain' column");
    if (prune) {
      auto pruned = stats::prune_insignificant(table.records, 0.01);
      fit = std::move(pruned.fit);
      removed = std::move(pruned.removed);
    } else {
      fit = stats::fit_interaction(table.records);
    }
  }
  out << "model," << model << '\n';
  out << "term,estimate,std_error,t_stat,p_value\n";
  for (std::size_t j = 0; j < fit.terms.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(j);
    out << stats::to_string(fit.terms[j]) << ',' << format_number(fit.coefficients(k)) << ','
        << format_number(fit.std_errors(k)) << ',' << format_number(fit.t_stats(k)) << ','
        << format_number(fit.p_values(k)) << '\n';
  }
  out << "r2," << format_number(fit.r2) << '\n';
  out << "adj_r2," << format_number(fit.adj_r2) << '\n';
  out << "n," << fit.n << '\n';
  if (prune) {
    out << "removed";
    for (auto t : removed) out << ',' << stats::to_string(t);
    out << '\n';
  }
  return kOk;
}

int cmd_gen(const std::string& spec_path, const std::string& out_source, const std::string& out_target) {
  const auto text = io::read_text(spec_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("spec is not valid JSON: ") + e.what());
  }
  const auto pair = harness::gen_domain_pair(harness::ShiftSpec::from_json(j));
  io::write_sfdk(pair.source, out_source);
  io::write_sfdk(pair.target, out_target);
  return kOk;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure: return kIoError;
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnknownMethod: return kBadArguments;
    case ErrorCode::AllCentroidsStale: return kDegenerate;
    default: return kValidation;
  }
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                       std::chars_format::general, 6);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

std::string format_result_row(const harness::ExperimentOutcome& o, const std::string& source,
                              const std::string& target) {
  std::ostringstream row;
  row << o.pair_id << ',' << source << ',' << target << ',' << io::to_string(o.method) << ','
      << o.seed << ',' << format_number(o.source_acc) << ',' << format_number(o.baseline_target_acc)
      << ',' << format_number(o.adapted_target_acc) << ',' << format_number(o.delta) << ','
      << (o.failed ? 1 : 0);
  return row.str();
}

RecordTable parse_records_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw Error(ErrorCode::HeaderMismatch, "empty records file");
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < rows.front().size(); ++j) col[rows.front()[j]] = j;
  for (const char* need : {"top1", "accuracy"}) {
    if (!col.count(need)) throw Error(ErrorCode::HeaderMismatch, std::string("missing column ") + need);
  }
  RecordTable table;
  table.has_pretrain = col.count("pretrain") != 0;
  auto number = [](const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
      throw Error(ErrorCode::UnparsableNumber, "'" + s + "' on line " + std::to_string(line));
    }
    return v;
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) {
      throw Error(ErrorCode::RaggedRow, "line " + std::to_string(i + 1));
    }
    stats::BackboneRecord r;
    r.top1 = number(rows[i][col["top1"]], i + 1);
    r.accuracy = number(rows[i][col["accuracy"]], i + 1);
    if (table.has_pretrain) {
      const double p = number(rows[i][col["pretrain"]], i + 1);
      if (p != 0.0 && p != 1.0) throw Error(ErrorCode::InvalidConfig, "pretrain must be 0 or 1");
      r.pretrain = static_cast<int>(p);
    }
    table.records.push_back(r);
  }
  return table;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Source-free domain adaptation toolkit on precomputed features", "sfuda"};
  app.require_subcommand(1);

  std::string source, target, method, init = "source_labels", manifest, out_path, input, model;
  std::string spec, out_source, out_target;
  double lambda = 0.01, beta = 0.3;
  int epochs = 15;
  unsigned jobs = default_jobs();
  bool prune = false;
  std::uint64_t seed = 0;

  auto* probe = app.add_subcommand("probe", "Linear or cluster probing of source features on a target");
  probe->add_option("--source", source, "Source feature file (.sfdk or .csv)")->required();
  probe->add_option("--target", target, "Target feature file (.sfdk or .csv)")->required();
  probe->add_option("--method", method, "lp or cp")->default_val("lp")->check(CLI::IsMember({"lp", "cp"}));
  probe->add_option("--lambda", lambda, "L2 regularization");
  probe->add_option("--seed", seed, "Experiment seed");

  auto* adapt = app.add_subcommand("adapt", "Adapt to an unlabeled target and score it");
  adapt->add_option("--source", source)->required();
  adapt->add_option("--target", target)->required();
  adapt->add_option("--method", method, "sca, shot_lite or ft_stats")
      ->required()
      ->check(CLI::IsMember({"sca", "shot_lite", "ft_stats"}));
  adapt->add_option("--init", init, "SCA initialization")
      ->check(CLI::IsMember({"source_labels", "mr_weights", "hard", "soft"}));
  adapt->add_option("--epochs", epochs, "SHOT-lite epochs");
  adapt->add_option("--beta", beta, "SHOT-lite pseudo-label weight");
  adapt->add_option("--lambda", lambda, "L2 regularization");
  adapt->add_option("--seed", seed);

  auto* batch = app.add_subcommand("run", "Run every experiment in a manifest");
  batch->add_option("--manifest", manifest)->required();
  batch->add_option("--out", out_path)->required();
  batch->add_option("--jobs", jobs, "Worker threads (default: $SFUDA_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  auto* st = app.add_subcommand("stats", "Fit accuracy against ImageNet top-1");
  st->add_option("--input", input, "CSV with top1, pretrain, accuracy columns")->required();
  st->add_option("--model", model)->required()->check(CLI::IsMember({"linear", "interaction"}));
  st->add_flag("--prune", prune, "Drop insignificant pretrain terms (alpha = 0.01)");

  auto* gen = app.add_subcommand("gen", "Generate a synthetic source/target pair");
  gen->add_option("--spec", spec, "JSON shift specification")->required();
  gen->add_option("--out-source", out_source)->required();
  gen->add_option("--out-target", out_target)->required();

  std::vector<std::string> argv_storage{"sfuda"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kBadArguments;
  }

  try {
    if (probe->parsed() || adapt->parsed()) {
      harness::MethodParams params;
      params.lambda = lambda;
      params.init = parse_sca_init(init);
      params.epochs = epochs;
      params.beta = beta;
      params.validate();
      const auto m = io::parse_method(method);
      auto o = run_files(source, target, m, params, seed);
      o.pair_id = pair_name(source, target);
      out << kResultHeader << '\n' << format_result_row(o, source, target) << '\n';
      return kOk;
    }
    if (batch->parsed()) return cmd_run(manifest, out_path, jobs, out);
    if (st->parsed()) return cmd_stats(input, model, prune, out);
    if (gen->parsed()) return cmd_gen(spec, out_source, out_target);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kBadArguments;
}

}  // namespace sfuda::cli
