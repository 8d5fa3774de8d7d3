#include "prelog/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "prelog/discretization.hpp"
#include "prelog/estimator.hpp"
#include "prelog/identifiability.hpp"
#include "prelog/info_metrics.hpp"
#include "prelog/io.hpp"
#include "prelog/parallel.hpp"

namespace prelog {

namespace {

struct Named {
  Experiment e;
  const char* name;
};

constexpr Named kExperiments[] = {
    {Experiment::Validate, "validate"},         {Experiment::Rank, "rank"},
    {Experiment::Spark, "spark"},               {Experiment::JacobianMC, "jacobian-mc"},
    {Experiment::Identify, "identify"},         {Experiment::MISweep, "mi-sweep"},
    {Experiment::PrelogReport, "prelog-report"}};

}  // namespace

const char* to_string(Experiment e) {
  for (const auto& n : kExperiments) {
    if (n.e == e) {
      return n.name;
    }
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (const auto& n : kExperiments) {
    if (name == n.name) {
      return n.e;
    }
  }
  throw ConfigError("experiment", "unknown experiment '" + name + "'");
}

nlohmann::json parse_config_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ConfigError(origin + ":" + std::to_string(line), "JSON syntax error");
  }
}

void apply_override(nlohmann::json& j, const std::string& dotted_path, const std::string& value) {
  if (dotted_path.empty()) {
    throw ConfigError("<override>", "empty option name");
  }
  nlohmann::json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot - start);
    if (key.empty()) {
      throw ConfigError(dotted_path, "malformed option name");
    }
    if (!node->is_object()) {
      if (!node->is_null()) {
        throw ConfigError(dotted_path, "cannot override a field inside a non-object");
      }
      *node = nlohmann::json::object();
    }
    node = &(*node)[key];
    if (dot == std::string::npos) {
      break;
    }
    start = dot + 1;
  }
  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::json(value) : parsed;
}

namespace {

template <typename T>
T get_field(const nlohmann::json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  const auto& v = obj.at(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) {
        throw ConfigError(path + "." + key, "expected true or false");
      }
    } else if constexpr (std::is_arithmetic_v<T>) {
      if (!v.is_number()) {
        throw ConfigError(path + "." + key, "expected a number");
      }
      if constexpr (std::is_integral_v<T>) {
        const double d = v.get<double>();
        if (d != std::floor(d) || d < 0) {
          throw ConfigError(path + "." + key, "expected a nonnegative integer");
        }
      }
    } else {
      if (!v.is_string()) {
        throw ConfigError(path + "." + key, "expected a string");
      }
    }
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError(join_path(path, key), "unknown field");
    }
  }
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& config, Experiment experiment, int workers) {
  if (!config.is_object()) {
    throw ConfigError("<root>", "scenario must be a JSON object");
  }
  reject_unknown(config,
                 {"spec", "rho_grid_db", "seed", "experiment", "estimator", "rho_db", "pilot_spec",
                  "n_blocks", "output", "inputs", "workers"},
                 "");
  Scenario s;
  s.experiment = experiment;
  s.config = config;
  if (config.contains("experiment")) {
    if (!config.at("experiment").is_string()) {
      throw ConfigError("experiment", "expected a string");
    }
    if (experiment_from_string(config.at("experiment").get<std::string>()) != experiment) {
      throw ConfigError("experiment", "scenario names '" +
                                          config.at("experiment").get<std::string>() +
                                          "' but the subcommand is '" + to_string(experiment) +
                                          "'");
    }
  }
  if (!config.contains("seed")) {
    throw ConfigError("seed", "missing required field (runs are never seeded from the clock)");
  }
  if (!config.at("seed").is_number_unsigned() && !config.at("seed").is_number_integer()) {
    throw ConfigError("seed", "expected a 64-bit integer");
  }
  s.seed = config.at("seed").get<std::uint64_t>();
  s.workers = workers > 0 ? workers : get_field<int>(config, "workers", "", default_workers());
  if (s.workers < 1) {
    throw ConfigError("workers", "must be at least 1");
  }
  s.output = get_field<std::string>(config, "output", "", s.output);

  if (experiment != Experiment::PrelogReport) {
    if (!config.contains("spec")) {
      throw ConfigError("spec", "missing required field");
    }
    s.spec = block_spec_from_json(config.at("spec"), "spec");
  }

  if (config.contains("estimator")) {
    const auto& e = config.at("estimator");
    if (!e.is_object()) {
      throw ConfigError("estimator", "expected an object");
    }
    reject_unknown(e,
                   {"kind", "frontend", "n_outer", "n_inner", "n_samples", "knn_k", "trials",
                    "n_starts", "noiseless", "draws", "coherent"},
                   "estimator");
    auto& o = s.estimator;
    o.kind = get_field<std::string>(e, "kind", "estimator", o.kind);
    o.frontend = get_field<std::string>(e, "frontend", "estimator", o.frontend);
    o.n_outer = get_field<int>(e, "n_outer", "estimator", o.n_outer);
    o.n_inner = get_field<int>(e, "n_inner", "estimator", o.n_inner);
    o.n_samples = get_field<std::uint64_t>(e, "n_samples", "estimator", o.n_samples);
    o.knn_k = get_field<int>(e, "knn_k", "estimator", o.knn_k);
    o.trials = get_field<std::uint64_t>(e, "trials", "estimator", o.trials);
    o.n_starts = get_field<int>(e, "n_starts", "estimator", o.n_starts);
    o.noiseless = get_field<bool>(e, "noiseless", "estimator", o.noiseless);
    o.draws = get_field<int>(e, "draws", "estimator", o.draws);
    o.coherent = get_field<bool>(e, "coherent", "estimator", o.coherent);
  }
  const auto& o = s.estimator;
  if (o.kind != "direct_mixture" && o.kind != "bound_chain") {
    throw ConfigError("estimator.kind", "expected direct_mixture or bound_chain");
  }
  if (o.frontend != "oversampled" && o.frontend != "symbol_rate" && o.frontend != "both") {
    throw ConfigError("estimator.frontend", "expected oversampled, symbol_rate or both");
  }

  if (config.contains("rho_grid_db")) {
    const auto& g = config.at("rho_grid_db");
    if (!g.is_array()) {
      throw ConfigError("rho_grid_db", "expected an array of dB values");
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!g[i].is_number()) {
        throw ConfigError("rho_grid_db[" + std::to_string(i) + "]", "expected a number");
      }
      s.rho_grid_db.push_back(g[i].get<double>());
    }
  }
  s.rho_db = get_field<double>(config, "rho_db", "", s.rho_db);
  s.n_blocks = get_field<int>(config, "n_blocks", "", s.n_blocks);

  if (config.contains("pilot_spec")) {
    const auto& p = config.at("pilot_spec");
    if (!p.is_object()) {
      throw ConfigError("pilot_spec", "expected an object");
    }
    reject_unknown(p, {"positions", "values"}, "pilot_spec");
    if (!p.contains("positions") || !p.at("positions").is_array()) {
      throw ConfigError("pilot_spec.positions", "expected an array of 1-based positions");
    }
    s.pilot_positions.clear();
    for (const auto& v : p.at("positions")) {
      if (!v.is_number_integer()) {
        throw ConfigError("pilot_spec.positions", "positions must be integers");
      }
      s.pilot_positions.push_back(v.get<int>());
    }
    if (p.contains("values")) {
      const CVector vals = complex_vector_from_json(p.at("values"), "pilot_spec.values");
      if (vals.size() != static_cast<Eigen::Index>(s.pilot_positions.size())) {
        throw ConfigError("pilot_spec.values", "needs one value per position");
      }
      for (Eigen::Index i = 0; i < vals.size(); ++i) {
        s.pilot_values.push_back(vals(i));
      }
    }
  }
  if (s.pilot_values.empty()) {
    s.pilot_values.assign(s.pilot_positions.size(), cplx(1.0, 0.0));
  }

  if (config.contains("inputs")) {
    const auto& in = config.at("inputs");
    if (!in.is_array()) {
      throw ConfigError("inputs", "expected an array of CSV paths");
    }
    for (const auto& v : in) {
      if (!v.is_string()) {
        throw ConfigError("inputs", "paths must be strings");
      }
      s.inputs.push_back(v.get<std::string>());
    }
  }

  switch (experiment) {
    case Experiment::MISweep:
      if (s.rho_grid_db.empty()) {
        throw ConfigError("rho_grid_db", "sweep experiments need a nonempty grid");
      }
      if (o.kind == "direct_mixture") {
        if (s.spec->symbols() > 8) {
          throw ConfigError("spec.n", "direct mixture estimator is limited to N <= 8");
        }
        for (double db : s.rho_grid_db) {
          if (db > 40.0) {
            throw ConfigError("rho_grid_db", "direct mixture estimator is limited to 40 dB");
          }
        }
        if (o.n_inner < 10000) {
          throw ConfigError("estimator.n_inner", "must be at least 10000");
        }
        if (o.n_outer < 2) {
          throw ConfigError("estimator.n_outer", "must be at least 2");
        }
      } else {
        for (double db : s.rho_grid_db) {
          if (!(db > 0.0)) {
            throw ConfigError("rho_grid_db", "bound chain needs rho > 0 dB");
          }
        }
        if (o.n_samples < 1000) {
          throw ConfigError("estimator.n_samples", "kNN entropy needs at least 1000 samples");
        }
      }
      break;
    case Experiment::Identify: {
      if (s.n_blocks < 1) {
        throw ConfigError("n_blocks", "must be at least 1");
      }
      const auto it = std::find(s.pilot_positions.begin(), s.pilot_positions.end(), 1);
      if (it == s.pilot_positions.end()) {
        throw ConfigError("pilot_spec.positions", "position 1 must carry a pilot");
      }
      if (std::abs(s.pilot_values[it - s.pilot_positions.begin()]) < 1e-9) {
        throw ConfigError("pilot_spec.values", "pilot at position 1 must be nonzero");
      }
      for (int pos : s.pilot_positions) {
        if (pos < 1 || pos > s.spec->symbols()) {
          throw ConfigError("pilot_spec.positions", "position outside 1..N");
        }
      }
      break;
    }
    case Experiment::JacobianMC:
      if (o.trials < 1) {
        throw ConfigError("estimator.trials", "must be at least 1");
      }
      break;
    case Experiment::Validate:
      if (o.draws < 1) {
        throw ConfigError("estimator.draws", "must be at least 1");
      }
      break;
    case Experiment::PrelogReport:
      if (s.inputs.empty()) {
        throw ConfigError("inputs", "prelog-report needs at least one CSV input");
      }
      break;
    default:
      break;
  }
  return s;
}

namespace {

class ArtifactSink {
 public:
  explicit ArtifactSink(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir_ / name, std::ios::binary);
    f << content;
    if (!f) {
      throw std::runtime_error("cannot write " + (dir_ / name).string());
    }
    entries_.push_back({{"path", name},
                        {"bytes", content.size()},
                        {"digest", git_blob_digest(content)}});
    names_.push_back(name);
  }

  const nlohmann::json& entries() const { return entries_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json entries_ = nlohmann::json::array();
  std::vector<std::string> names_;
};

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::vector<Frontend> frontends_of(const std::string& name) {
  if (name == "oversampled") {
    return {Frontend::Oversampled};
  }
  if (name == "symbol_rate") {
    return {Frontend::SymbolRate};
  }
  return {Frontend::Oversampled, Frontend::SymbolRate};
}

RunOutcome run_validate(const Scenario& sc, ArtifactSink& sink) {
  const BlockSpec& spec = *sc.spec;
  const int n = spec.symbols();
  struct Draw {
    double err_sym = 0.0;
    double err_os = 0.0;
  };
  const auto draws = run_chunks<Draw>(static_cast<std::uint64_t>(sc.estimator.draws), sc.workers,
                                      [&](std::uint64_t d) {
                                        Rng rng = make_rng(sc.seed, d);
                                        const FadingCoeffs c = sample_fading(spec, rng);
                                        const CVector x = complex_normal_vector(rng, n);
                                        const auto sym = simulate_symbol_rate(spec, c, x, 1.0);
                                        const auto os = simulate_oversampled(spec, c, x, 1.0);
                                        const CVector nat = os.interleaved();
                                        Draw out;
                                        for (int k = 1; k <= n; ++k) {
                                          out.err_sym = std::max(
                                              out.err_sym,
                                              std::abs(sym.y(k - 1) - oracle_symbol_rate_sample(
                                                                          spec, c, x, 1.0, k)));
                                        }
                                        for (int m = 1; m <= 2 * n; ++m) {
                                          out.err_os = std::max(
                                              out.err_os,
                                              std::abs(nat(m - 1) - oracle_oversampled_sample(
                                                                        spec, c, x, 1.0, m)));
                                        }
                                        return out;
                                      });
  std::ostringstream csv;
  CsvWriter w(csv, {"draw", "max_err_symbol_rate", "max_err_oversampled"});
  double max_sym = 0.0;
  double max_os = 0.0;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    w.cell(d).cell(draws[d].err_sym).cell(draws[d].err_os);
    w.end_row();
    max_sym = std::max(max_sym, draws[d].err_sym);
    max_os = std::max(max_os, draws[d].err_os);
  }
  sink.write("validate.csv", csv.str());

  const CMatrix stacked = build_frontend_matrices(spec).stacked_gain();
  Eigen::JacobiSVD<CMatrix> svd(stacked);
  const RVector sv = svd.singularValues();
  const bool full_rank = sv(sv.size() - 1) > 1e-10 * sv(0);
  const RankReport rank = symbol_rate_covariance_rank(spec);

  RunOutcome out;
  out.summary = {{"draws", sc.estimator.draws},
                 {"max_abs_err_symbol_rate", max_sym},
                 {"max_abs_err_oversampled", max_os},
                 {"tolerance", 1e-8},
                 {"stacked_full_column_rank", full_rank},
                 {"symbol_rate_covariance_rank", rank.numerical_rank}};
  sink.write("validate.json", dump(out.summary));
  std::vector<std::string> failed;
  if (!(max_sym <= 1e-8)) {
    failed.push_back("symbol-rate oracle equivalence (max error " + format_double(max_sym) + ")");
  }
  if (!(max_os <= 1e-8)) {
    failed.push_back("oversampled oracle equivalence (max error " + format_double(max_os) + ")");
  }
  if (!full_rank) {
    failed.push_back("[Qo; Qe] full column rank");
  }
  if (rank.numerical_rank != spec.q()) {
    failed.push_back("symbol-rate covariance rank = Q");
  }
  if (failed.empty()) {
    out.message = "validate: PASS, max oracle error " + format_double(std::max(max_sym, max_os));
  } else {
    out.exit_code = 1;
    out.message = "validate: FAIL, invariant failed: " + failed.front();
  }
  return out;
}

RunOutcome run_rank(const Scenario& sc, ArtifactSink& sink) {
  const BlockSpec& spec = *sc.spec;
  const RankReport r = symbol_rate_covariance_rank(spec);
  std::ostringstream csv;
  CsvWriter w(csv, {"index", "singular_value", "ratio_to_first"});
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i) {
    w.cell(static_cast<long long>(i + 1))
        .cell(r.singular_values(i))
        .cell(r.singular_values(i) / r.singular_values(0));
    w.end_row();
  }
  sink.write("rank.csv", csv.str());
  RunOutcome out;
  out.summary = {{"n", spec.symbols()},
                 {"q", spec.q()},
                 {"numerical_rank", r.numerical_rank},
                 {"ratio_q", r.ratio_q},
                 {"ratio_q_plus_1", r.ratio_q_plus_1},
                 {"prelog_symbol_rate", 1.0 - static_cast<double>(spec.q()) / spec.symbols()}};
  sink.write("rank.json", dump(out.summary));
  const bool ok = r.numerical_rank == spec.q() && r.ratio_q_plus_1 < 1e-9 && r.ratio_q > 1e-6;
  out.exit_code = ok ? 0 : 1;
  out.message = std::string("rank: ") + (ok ? "PASS" : "FAIL, invariant failed: rank = Q") +
                ", numerical rank " + std::to_string(r.numerical_rank) + " (Q = " +
                std::to_string(spec.q()) + "), sigma_{Q+1}/sigma_1 = " +
                format_double(r.ratio_q_plus_1);
  return out;
}

RunOutcome run_spark(const Scenario& sc, ArtifactSink& sink) {
  const SparkReport r = full_spark_check(*sc.spec, 10'000'000, 1'000'000, sc.seed);
  RunOutcome out;
  out.summary = to_json(r);
  sink.write("spark.json", dump(out.summary));
  out.exit_code = r.full_spark ? 0 : 1;
  out.message = std::string("spark: ") + (r.full_spark ? "PASS" : "FAIL, invariant failed: full spark") +
                ", full_spark=" + (r.full_spark ? "true" : "false") + ", " +
                std::to_string(r.n_subsets_checked) + " subsets, min scaled |det| " +
                format_double(r.min_abs_det);
  return out;
}

RunOutcome run_jacobian_mc(const Scenario& sc, ArtifactSink& sink) {
  const BlockSpec& spec = *sc.spec;
  JacobianMcOptions opts;
  opts.workers = sc.workers;
  const JacobianMcReport mc = jacobian_monte_carlo(spec, sc.estimator.trials, sc.seed, opts);
  const WitnessReport wit = explicit_witness(spec, CVector::Ones(spec.symbols()));
  RunOutcome out;
  out.summary = {{"monte_carlo", to_json(mc)}, {"witness_all_ones", to_json(wit)}};
  sink.write("jacobian_mc.json", dump(out.summary));
  std::vector<std::string> failed;
  if (mc.singular > 0) {
    failed.push_back("no singular Jacobians (" + std::to_string(mc.singular) + " found)");
  }
  if (!wit.ok()) {
    failed.push_back("witness factorization: " + wit.violations.front());
  }
  out.exit_code = failed.empty() ? 0 : 1;
  out.message = "jacobian-mc: " +
                (failed.empty() ? std::string("PASS") : "FAIL, invariant failed: " + failed.front()) +
                ", singular_fraction " + format_double(mc.singular_fraction) + ", min |det| " +
                format_double(mc.min_abs_det);
  return out;
}

RunOutcome run_identify(const Scenario& sc, ArtifactSink& sink) {
  const BlockSpec& spec = *sc.spec;
  const int n = spec.symbols();
  const int q = spec.q();
  const double rho = db_to_linear(sc.rho_db);
  struct Row {
    double residual = 0.0;
    double sym_err = 0.0;
    double s_err = 0.0;
    int n_starts = 0;
    int classes = 0;
    bool converged = false;
    int linear_rank = 0;
  };
  const auto rows = run_chunks<Row>(static_cast<std::uint64_t>(sc.n_blocks), sc.workers,
                                    [&](std::uint64_t b) {
    Rng rng = make_rng(sc.seed, b);
    const FadingCoeffs c = sample_fading(spec, rng);
    CVector x = complex_normal_vector(rng, n);
    PilotSet pilots;
    for (std::size_t i = 0; i < sc.pilot_positions.size(); ++i) {
      x(sc.pilot_positions[i] - 1) = sc.pilot_values[i];
      pilots.values[sc.pilot_positions[i]] = sc.pilot_values[i];
    }
    const BlockObservation obs =
        simulate_oversampled(spec, c, x, rho, sc.estimator.noiseless ? nullptr : &rng);
    RecoveryOptions opts;
    opts.n_starts = sc.estimator.n_starts;
    opts.seed = sc.seed ^ (0x9e3779b97f4a7c15ull * (b + 1));
    opts.noisy = !sc.estimator.noiseless;
    const RecoveryResult res = recover_joint_oversampled(spec, obs.y, pilots, rho, opts);
    const BlockObservation sym =
        simulate_symbol_rate(spec, c, x, rho, sc.estimator.noiseless ? nullptr : &rng);
    const LinearRecovery lin = recover_linear_symbol_rate(spec, sym.y, pilots, rho);
    Row r;
    r.residual = res.residual;
    r.sym_err = (res.x_est - x).norm() / x.norm();
    r.s_err = (res.s_hat_est - c.s_hat).norm() / c.s_hat.norm();
    r.n_starts = res.n_starts_used;
    r.classes = static_cast<int>(res.class_representatives.size());
    r.converged = res.converged;
    r.linear_rank = lin.rank;
    return r;
  });
  std::ostringstream csv;
  CsvWriter w(csv, {"block_id", "residual", "sym_err", "s_err", "n_starts", "classes"});
  std::vector<double> sym_errs;
  int converged = 0;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const Row& r = rows[b];
    w.cell(b).cell(r.residual).cell(r.sym_err).cell(r.s_err).cell(r.n_starts).cell(r.classes);
    w.end_row();
    sym_errs.push_back(r.sym_err);
    converged += r.converged ? 1 : 0;
  }
  sink.write("identify.csv", csv.str());
  std::sort(sym_errs.begin(), sym_errs.end());
  const double median = sym_errs[sym_errs.size() / 2];
  RunOutcome out;
  out.summary = {{"n_blocks", sc.n_blocks},
                 {"rho_db", sc.rho_db},
                 {"noiseless", sc.estimator.noiseless},
                 {"pilots", sc.pilot_positions.size()},
                 {"converged_blocks", converged},
                 {"median_sym_err", median},
                 {"symbol_rate_linear_rank", rows.front().linear_rank},
                 {"q", q}};
  sink.write("identify.json", dump(out.summary));
  out.message = "identify: " + std::to_string(converged) + "/" + std::to_string(sc.n_blocks) +
                " blocks converged, median sym_err " + format_double(median) +
                ", symbol-rate linear rank with " + std::to_string(sc.pilot_positions.size()) +
                " pilot(s): " + std::to_string(rows.front().linear_rank) + " of " +
                std::to_string(q);
  return out;
}

RunOutcome run_mi_sweep(const Scenario& sc, ArtifactSink& sink) {
  const BlockSpec& spec = *sc.spec;
  std::vector<MISweepPoint> points;
  if (sc.estimator.kind == "bound_chain") {
    const BoundTerms t = bound_chain_terms(spec, sc.estimator.n_samples, sc.seed,
                                           sc.estimator.knn_k, sc.workers);
    for (double db : sc.rho_grid_db) {
      MISweepPoint p;
      p.rho_db = db;
      p.mi_nats = bound_value(t, db_to_linear(db));
      p.std_error = t.jensen_se;
      p.estimator = MiEstimator::BoundChain;
      p.frontend = Frontend::Oversampled;
      p.n_samples = t.n_samples;
      p.n_outer = static_cast<int>(t.n_samples);
      p.seed = sc.seed;
      p.n = t.n;
      p.q = t.q;
      points.push_back(p);
    }
  } else {
    MixtureOptions mo;
    mo.n_outer = sc.estimator.n_outer;
    mo.n_inner = sc.estimator.n_inner;
    mo.coherent = sc.estimator.coherent;
    mo.workers = sc.workers;
    for (Frontend fe : frontends_of(sc.estimator.frontend)) {
      mo.frontend = fe;
      for (double db : sc.rho_grid_db) {
        points.push_back(mi_direct_mixture(spec, db, sc.seed, mo));
      }
    }
  }
  std::ostringstream csv;
  CsvWriter w(csv, {"rho_db", "mi_nats", "mi_bits", "stderr", "estimator", "frontend", "n_outer",
                    "n_inner", "seed", "n", "q"});
  for (const auto& p : points) {
    w.cell(p.rho_db)
        .cell(p.mi_nats)
        .cell(p.mi_bits())
        .cell(p.std_error)
        .cell(to_string(p.estimator))
        .cell(to_string(p.frontend))
        .cell(p.n_outer)
        .cell(p.n_inner)
        .cell(std::to_string(p.seed))
        .cell(p.n)
        .cell(p.q);
    w.end_row();
  }
  sink.write("mi_sweep.csv", csv.str());
  RunOutcome out;
  out.summary = nlohmann::json::object();
  nlohmann::json fits = nlohmann::json::object();
  int low_ess = 0;
  for (const auto& p : points) {
    low_ess += p.low_ess;
  }
  std::ostringstream msg;
  msg << "mi-sweep: " << points.size() << " points";
  for (Frontend fe : frontends_of(sc.estimator.frontend)) {
    std::vector<MISweepPoint> sub;
    for (const auto& p : points) {
      if (p.frontend == fe) {
        sub.push_back(p);
      }
    }
    std::set<double> distinct;
    for (const auto& p : sub) {
      distinct.insert(p.rho_db);
    }
    if (distinct.size() >= 3) {
      const PrelogFit f = prelog_fit(sub, spec.symbols());
      fits[to_string(fe)] = to_json(f);
      msg << ", " << to_string(fe) << " slope/use " << format_double(f.slope_per_channel_use);
    }
  }
  out.summary["fits"] = fits;
  out.summary["low_ess_samples"] = low_ess;
  sink.write("mi_fit.json", dump(out.summary));
  if (low_ess > 0) {
    msg << " (" << low_ess << " outer samples flagged ESS < 50)";
  }
  out.message = msg.str();
  return out;
}

RunOutcome run_prelog_report(const Scenario& sc, ArtifactSink& sink) {
  const PrelogReport rep = report_prelog(sc.inputs);
  std::ostringstream summary;
  CsvWriter w(summary, {"series", "input", "frontend", "estimator", "n", "q", "points",
                        "slope_per_channel_use", "slope_se_per_channel_use", "r_squared",
                        "rho_lo_db", "rho_hi_db", "ref_symbol_rate", "ref_oversampled", "gap",
                        "note"});
  for (std::size_t i = 0; i < rep.series.size(); ++i) {
    const SeriesFit& s = rep.series[i];
    w.cell(i)
        .cell(s.input)
        .cell(s.frontend)
        .cell(s.estimator)
        .cell(s.n)
        .cell(s.q)
        .cell(s.points)
        .cell(s.slope_per_channel_use)
        .cell(s.slope_se_per_channel_use)
        .cell(s.r_squared)
        .cell(s.rho_lo_db)
        .cell(s.rho_hi_db)
        .cell(rep.ref_symbol_rate)
        .cell(rep.ref_oversampled)
        .cell(rep.gap ? format_double(*rep.gap) : std::string())
        .cell(rep.note);
    w.end_row();
  }
  sink.write("prelog_summary.csv", summary.str());

  std::ostringstream lng;
  CsvWriter l(lng, {"series", "frontend", "estimator", "kind", "rho_db", "value"});
  for (std::size_t i = 0; i < rep.series.size(); ++i) {
    const SeriesFit& s = rep.series[i];
    for (const char* kind : {"fit", "ref_symbol_rate", "ref_oversampled"}) {
      for (double db : {s.rho_lo_db, s.rho_hi_db}) {
        const double per_use_slope = std::string(kind) == "fit" ? s.slope_per_channel_use
                                     : std::string(kind) == "ref_symbol_rate" ? rep.ref_symbol_rate
                                                                              : rep.ref_oversampled;
        l.cell(i).cell(s.frontend).cell(s.estimator).cell(kind).cell(db).cell(
            per_use_slope * std::log(db_to_linear(db)));
        l.end_row();
      }
    }
  }
  sink.write("prelog_long.csv", lng.str());

  RunOutcome out;
  out.summary = {{"ref_symbol_rate", rep.ref_symbol_rate},
                 {"ref_oversampled", rep.ref_oversampled},
                 {"gap", rep.gap ? nlohmann::json(*rep.gap) : nlohmann::json(nullptr)},
                 {"series", rep.series.size()},
                 {"note", rep.note}};
  std::ostringstream msg;
  msg << "prelog-report: references 1-Q/N = " << format_double(rep.ref_symbol_rate)
      << ", 1-1/N = " << format_double(rep.ref_oversampled);
  for (const auto& s : rep.series) {
    msg << ", " << s.frontend << " slope/use " << format_double(s.slope_per_channel_use);
  }
  if (rep.gap) {
    msg << ", gap " << format_double(*rep.gap);
  }
  if (!rep.note.empty()) {
    msg << " (" << rep.note << ")";
  }
  out.message = msg.str();
  return out;
}

}  // namespace

PrelogReport report_prelog(const std::vector<std::string>& inputs) {
  struct Series {
    SeriesFit fit;
    std::vector<MISweepPoint> points;
  };
  std::vector<Series> series;
  std::optional<std::pair<int, int>> nq;
  for (const auto& path : inputs) {
    std::ifstream f(path);
    if (!f) {
      throw ConfigError("inputs", "cannot open '" + path + "'");
    }
    const CsvTable t = read_csv(f);
    const std::size_t c_rho = t.column("rho_db");
    const std::size_t c_mi = t.column("mi_nats");
    const std::size_t c_est = t.column("estimator");
    const std::size_t c_fe = t.column("frontend");
    const std::size_t c_n = t.column("n");
    const std::size_t c_q = t.column("q");
    for (const auto& row : t.rows) {
      int n = 0;
      int q = 0;
      MISweepPoint p;
      try {
        n = std::stoi(row[c_n]);
        q = std::stoi(row[c_q]);
        p.rho_db = std::stod(row[c_rho]);
        p.mi_nats = std::stod(row[c_mi]);
      } catch (const std::exception&) {
        throw ConfigError(path, "unparsable numeric cell");
      }
      if (nq && (nq->first != n || nq->second != q)) {
        throw ConfigError(path, "mismatched specs across inputs: (N, Q) = (" + std::to_string(n) +
                                    ", " + std::to_string(q) + ") vs (" +
                                    std::to_string(nq->first) + ", " +
                                    std::to_string(nq->second) + ")");
      }
      nq = std::make_pair(n, q);
      auto it = std::find_if(series.begin(), series.end(), [&](const Series& s) {
        return s.fit.input == path && s.fit.frontend == row[c_fe] && s.fit.estimator == row[c_est];
      });
      if (it == series.end()) {
        Series s;
        s.fit.input = path;
        s.fit.frontend = row[c_fe];
        s.fit.estimator = row[c_est];
        s.fit.n = n;
        s.fit.q = q;
        series.push_back(s);
        it = series.end() - 1;
      }
      it->points.push_back(p);
    }
  }
  if (series.empty()) {
    throw ConfigError("inputs", "no sweep rows found");
  }
  PrelogReport rep;
  const int n = nq->first;
  const int q = nq->second;
  rep.ref_symbol_rate = 1.0 - static_cast<double>(q) / n;
  rep.ref_oversampled = 1.0 - 1.0 / n;
  for (auto& s : series) {
    if (s.points.size() < 3) {
      throw ConfigError(s.fit.input, "series " + s.fit.frontend + "/" + s.fit.estimator +
                                         " has fewer than 3 points");
    }
    PrelogFit f;
    try {
      f = prelog_fit(s.points, n);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(s.fit.input, e.what());
    }
    s.fit.points = f.points;
    s.fit.slope_per_channel_use = f.slope_per_channel_use;
    s.fit.slope_se_per_channel_use = f.slope_se_per_channel_use;
    s.fit.r_squared = f.r_squared;
    s.fit.rho_lo_db = f.rho_lo_db;
    s.fit.rho_hi_db = f.rho_hi_db;
    rep.series.push_back(s.fit);
  }
  const auto find_fe = [&](const std::string& fe) {
    return std::find_if(rep.series.begin(), rep.series.end(),
                        [&](const SeriesFit& s) { return s.frontend == fe; });
  };
  const auto os = find_fe("oversampled");
  const auto sr = find_fe("symbol_rate");
  if (rep.series.size() == 1) {
    rep.note = "single series; no gap";
  } else if (os != rep.series.end() && sr != rep.series.end()) {
    rep.gap = os->slope_per_channel_use - sr->slope_per_channel_use;
    rep.note = "gap = oversampled - symbol_rate";
  } else {
    rep.gap = rep.series.back().slope_per_channel_use - rep.series.front().slope_per_channel_use;
    rep.note = "gap = last series - first series";
  }
  return rep;
}

RunOutcome run(const Scenario& scenario, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  ArtifactSink sink(scenario.output);
  RunOutcome out;
  switch (scenario.experiment) {
    case Experiment::Validate:
      out = run_validate(scenario, sink);
      break;
    case Experiment::Rank:
      out = run_rank(scenario, sink);
      break;
    case Experiment::Spark:
      out = run_spark(scenario, sink);
      break;
    case Experiment::JacobianMC:
      out = run_jacobian_mc(scenario, sink);
      break;
    case Experiment::Identify:
      out = run_identify(scenario, sink);
      break;
    case Experiment::MISweep:
      out = run_mi_sweep(scenario, sink);
      break;
    case Experiment::PrelogReport:
      out = run_prelog_report(scenario, sink);
      break;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string all;
  for (const auto& a : sink.entries()) {
    all += a.at("digest").get<std::string>();
  }
  const nlohmann::json manifest = {{"experiment", to_string(scenario.experiment)},
                                   {"config", scenario.config},
                                   {"seed", scenario.seed},
                                   {"workers", scenario.workers},
                                   {"artifacts", sink.entries()},
                                   {"content_digest", git_blob_digest(all)},
                                   {"wall_time_s", wall},
                                   {"exit_code", out.exit_code},
                                   {"message", out.message},
                                   {"summary", out.summary}};
  {
    std::ofstream f(sink.dir() / "manifest.json");
    f << manifest.dump(2) << "\n";
  }
  out.artifacts = sink.names();
  out.artifacts.push_back("manifest.json");
  log << out.message << "\n";
  return out;
}

}  // namespace prelog
