#pragma once

// Config-driven experiment runner. Each experiment reproduces one of the
// numerical pipelines end to end and writes plot-ready CSVs plus a
// metadata sidecar (full config echo, version, seed, cache state,
// degeneracy report). Outputs are bitwise reproducible for identical
// config and seed.

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "corrflow/cache.hpp"
#include "corrflow/correlators.hpp"
#include "corrflow/gapstats.hpp"
#include "corrflow/io.hpp"
#include "corrflow/spectral.hpp"
#include "corrflow/spinchain.hpp"
#include "corrflow/version.hpp"
#include "corrflow/weak_eth.hpp"

namespace corrflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
  bound_check,
  ab_factorization,
  fluctuations,
  gapstats_sweep,
  lemma2_suite,
  histogram,
  mc_forward_error,
  integrable_contrast,
};

inline const char* to_string(ExperimentKind e) {
  switch (e) {
    case ExperimentKind::bound_check: return "bound_check";
    case ExperimentKind::ab_factorization: return "ab_factorization";
    case ExperimentKind::fluctuations: return "fluctuations";
    case ExperimentKind::gapstats_sweep: return "gapstats_sweep";
    case ExperimentKind::lemma2_suite: return "lemma2_suite";
    case ExperimentKind::histogram: return "histogram";
    case ExperimentKind::mc_forward_error: return "mc_forward_error";
    default: return "integrable_contrast";
  }
}

inline ExperimentKind experiment_from_string(const std::string& s) {
  for (ExperimentKind e :
       {ExperimentKind::bound_check, ExperimentKind::ab_factorization,
        ExperimentKind::fluctuations, ExperimentKind::gapstats_sweep,
        ExperimentKind::lemma2_suite, ExperimentKind::histogram,
        ExperimentKind::mc_forward_error, ExperimentKind::integrable_contrast})
    if (s == to_string(e)) return e;
  throw ConfigError("unknown experiment: " + s);
}

inline const char* to_string(GapKind k) {
  switch (k) {
    case GapKind::plain_v: return "plain_v";
    case GapKind::symmetric_v: return "symmetric_v";
    default: return "kubo_w";
  }
}

inline GapKind gap_kind_from_string(const std::string& s) {
  for (GapKind k : {GapKind::plain_v, GapKind::symmetric_v, GapKind::kubo_w})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown distribution kind: " + s);
}

inline CorrelationKind series_kind(GapKind k) {
  switch (k) {
    case GapKind::plain_v: return CorrelationKind::plain;
    case GapKind::symmetric_v: return CorrelationKind::symmetric;
    default: return CorrelationKind::kubo;
  }
}

/// Observable selector: the mid-chain default or an explicit Pauli string.
struct ObservableSelector {
  bool use_default = true;
  PauliString string;
};

struct RunConfig {
  ExperimentKind experiment = ExperimentKind::bound_check;
  SpinChainSpec spec{.length = 8, .gamma = 0.8, .lambda = 0.5, .j1 = 1.0,
                     .j2 = 1.0};
  double beta = 1.0;
  ObservableSelector observable;
  ObservableSelector observable_b;
  std::vector<GapKind> kinds{GapKind::plain_v};
  double dt = 1e-3;
  double t_max = 100.0;
  double eps_min_factor = 1e-4;
  double eps_max_factor = 10.0;
  int eps_points = 200;
  std::uint64_t mc_samples = 10000;
  std::uint64_t seed = 1;
  int lemma2_dists = 1000;
  int lemma2_max_gaps = 50;
  std::vector<double> lemma2_t_grid{0.1, 1.0, 10.0, 100.0};
  double fluct_dt = 5e-3;
  double fluct_horizon = 1e4;
  TimeAverageScheme fluct_scheme = TimeAverageScheme::running_mean;
  int bins = 80;
  double weight_cutoff = 0.0;
  std::vector<double> tail_deltas{0.05, 0.1, 0.2, 0.4};
  bool use_cache = true;
  std::filesystem::path output_dir = "corrflow_out";

  void validate() const {
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (!(beta >= 0) || !std::isfinite(beta))
      throw ConfigError("beta must be finite and >= 0");
    if (!(dt > 0)) throw ConfigError("grid.dt must be > 0");
    if (t_max < dt) throw ConfigError("grid.t_max must be >= grid.dt");
    if (mc_samples < 1) throw ConfigError("mc.samples must be >= 1");
    if (eps_points < 2 || !(eps_min_factor > 0) ||
        !(eps_max_factor > eps_min_factor))
      throw ConfigError("epsilon_grid is malformed");
    if (bins < 1) throw ConfigError("bins must be >= 1");
    if (lemma2_dists < 1 || lemma2_max_gaps < 1)
      throw ConfigError("lemma2 block is malformed");
    if (kinds.empty()) throw ConfigError("kinds must not be empty");
    if (weight_cutoff < 0) throw ConfigError("weight_cutoff must be >= 0");
  }
};

// ---------------------------------------------------------------------
// JSON parsing / echo
// ---------------------------------------------------------------------

namespace detail {

inline PauliAxis axis_from_string(const std::string& s) {
  if (s == "X" || s == "x") return PauliAxis::X;
  if (s == "Y" || s == "y") return PauliAxis::Y;
  if (s == "Z" || s == "z") return PauliAxis::Z;
  throw ConfigError("unknown Pauli axis: " + s);
}

inline ObservableSelector observable_from_json(const nlohmann::json& j) {
  ObservableSelector sel;
  if (j.is_string()) {
    if (j.get<std::string>() != "default")
      throw ConfigError("observable string must be \"default\"");
    return sel;
  }
  if (!j.is_array()) throw ConfigError("observable must be \"default\" or a list");
  sel.use_default = false;
  for (const auto& factor : j) {
    if (!factor.is_array() || factor.size() != 2)
      throw ConfigError("observable factors are [site, axis] pairs");
    sel.string.factors.push_back(
        {factor[0].get<int>(), axis_from_string(factor[1].get<std::string>())});
  }
  return sel;
}

inline nlohmann::json observable_to_json(const ObservableSelector& sel) {
  if (sel.use_default) return "default";
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [site, axis] : sel.string.factors)
    arr.push_back({site, to_string(axis)});
  return arr;
}

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline RunConfig parse_config(const nlohmann::json& j) {
  detail::reject_unknown_keys(
      j,
      {"experiment", "spec", "beta", "observable", "observable_b", "kinds",
       "grid", "epsilon_grid", "mc", "lemma2", "fluctuations", "bins",
       "weight_cutoff", "tail_deltas", "use_cache", "output_dir"},
      "config");
  RunConfig cfg;
  if (!j.contains("experiment"))
    throw ConfigError("config requires an 'experiment' field");
  cfg.experiment = experiment_from_string(j.at("experiment").get<std::string>());
  if (cfg.experiment == ExperimentKind::mc_forward_error) {
    // forward-error regime where the anchor sampler is reliable
    cfg.eps_min_factor = 1e-2;
    cfg.eps_points = 50;
  }

  if (j.contains("spec")) {
    const auto& s = j.at("spec");
    detail::reject_unknown_keys(
        s, {"length", "gamma", "lambda", "j1", "j2", "boundary"}, "spec");
    cfg.spec.length = s.value("length", cfg.spec.length);
    cfg.spec.gamma = s.value("gamma", cfg.spec.gamma);
    cfg.spec.lambda = s.value("lambda", cfg.spec.lambda);
    cfg.spec.j1 = s.value("j1", cfg.spec.j1);
    cfg.spec.j2 = s.value("j2", cfg.spec.j2);
    if (s.contains("boundary")) {
      std::string b = s.at("boundary").get<std::string>();
      if (b != "open" && b != "periodic")
        throw ConfigError("boundary must be open or periodic");
      cfg.spec.boundary = b == "open" ? Boundary::open : Boundary::periodic;
    }
  }
  cfg.beta = j.value("beta", cfg.beta);
  if (j.contains("observable"))
    cfg.observable = detail::observable_from_json(j.at("observable"));
  if (j.contains("observable_b"))
    cfg.observable_b = detail::observable_from_json(j.at("observable_b"));
  if (j.contains("kinds")) {
    cfg.kinds.clear();
    for (const auto& k : j.at("kinds"))
      cfg.kinds.push_back(gap_kind_from_string(k.get<std::string>()));
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::reject_unknown_keys(g, {"dt", "t_max"}, "grid");
    cfg.dt = g.value("dt", cfg.dt);
    cfg.t_max = g.value("t_max", cfg.t_max);
  }
  if (j.contains("epsilon_grid")) {
    const auto& g = j.at("epsilon_grid");
    detail::reject_unknown_keys(g, {"min_factor", "max_factor", "points"},
                                "epsilon_grid");
    cfg.eps_min_factor = g.value("min_factor", cfg.eps_min_factor);
    cfg.eps_max_factor = g.value("max_factor", cfg.eps_max_factor);
    cfg.eps_points = g.value("points", cfg.eps_points);
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    detail::reject_unknown_keys(m, {"samples", "seed"}, "mc");
    cfg.mc_samples = m.value("samples", cfg.mc_samples);
    cfg.seed = m.value("seed", cfg.seed);
  }
  if (j.contains("lemma2")) {
    const auto& l = j.at("lemma2");
    detail::reject_unknown_keys(l, {"num_dists", "max_gaps", "t_grid"},
                                "lemma2");
    cfg.lemma2_dists = l.value("num_dists", cfg.lemma2_dists);
    cfg.lemma2_max_gaps = l.value("max_gaps", cfg.lemma2_max_gaps);
    if (l.contains("t_grid"))
      cfg.lemma2_t_grid = l.at("t_grid").get<std::vector<double>>();
  }
  if (j.contains("fluctuations")) {
    const auto& f = j.at("fluctuations");
    detail::reject_unknown_keys(f, {"dt", "horizon", "scheme"}, "fluctuations");
    cfg.fluct_dt = f.value("dt", cfg.fluct_dt);
    cfg.fluct_horizon = f.value("horizon", cfg.fluct_horizon);
    if (f.contains("scheme")) {
      std::string s = f.at("scheme").get<std::string>();
      if (s == "running_mean")
        cfg.fluct_scheme = TimeAverageScheme::running_mean;
      else if (s == "trapezoid")
        cfg.fluct_scheme = TimeAverageScheme::trapezoid;
      else
        throw ConfigError("scheme must be running_mean or trapezoid");
    }
  }
  cfg.bins = j.value("bins", cfg.bins);
  cfg.weight_cutoff = j.value("weight_cutoff", cfg.weight_cutoff);
  if (j.contains("tail_deltas"))
    cfg.tail_deltas = j.at("tail_deltas").get<std::vector<double>>();
  cfg.use_cache = j.value("use_cache", cfg.use_cache);
  if (j.contains("output_dir"))
    cfg.output_dir = j.at("output_dir").get<std::string>();
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return parse_config(j);
}

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = to_string(cfg.experiment);
  j["spec"] = {{"length", cfg.spec.length},     {"gamma", cfg.spec.gamma},
               {"lambda", cfg.spec.lambda},     {"j1", cfg.spec.j1},
               {"j2", cfg.spec.j2},             {"boundary", to_string(cfg.spec.boundary)}};
  j["beta"] = cfg.beta;
  j["observable"] = detail::observable_to_json(cfg.observable);
  j["observable_b"] = detail::observable_to_json(cfg.observable_b);
  nlohmann::json kinds = nlohmann::json::array();
  for (GapKind k : cfg.kinds) kinds.push_back(to_string(k));
  j["kinds"] = kinds;
  j["grid"] = {{"dt", cfg.dt}, {"t_max", cfg.t_max}};
  j["epsilon_grid"] = {{"min_factor", cfg.eps_min_factor},
                       {"max_factor", cfg.eps_max_factor},
                       {"points", cfg.eps_points}};
  j["mc"] = {{"samples", cfg.mc_samples}, {"seed", cfg.seed}};
  j["lemma2"] = {{"num_dists", cfg.lemma2_dists},
                 {"max_gaps", cfg.lemma2_max_gaps},
                 {"t_grid", cfg.lemma2_t_grid}};
  j["fluctuations"] = {
      {"dt", cfg.fluct_dt},
      {"horizon", cfg.fluct_horizon},
      {"scheme", cfg.fluct_scheme == TimeAverageScheme::running_mean
                     ? "running_mean"
                     : "trapezoid"}};
  j["bins"] = cfg.bins;
  j["weight_cutoff"] = cfg.weight_cutoff;
  j["tail_deltas"] = cfg.tail_deltas;
  j["use_cache"] = cfg.use_cache;
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

// ---------------------------------------------------------------------
// Experiment execution
// ---------------------------------------------------------------------

struct ArtifactBundle {
  std::filesystem::path output_dir;
  nlohmann::json metadata;
  std::vector<std::string> files;
};

namespace detail {

struct SpectralContext {
  Spectrum spectrum;
  ThermalEnsemble ens;
  EigenbasisOperator aeig;
  EigenbasisOperator beig;  // AB runs only
  DegeneracyReport audit;
  bool cache_hit = false;
};

inline DenseOperator resolve_observable(const ObservableSelector& sel,
                                        const SpinChainSpec& spec,
                                        bool is_second) {
  if (!sel.use_default) return build_pauli_string(sel.string, spec.length);
  if (!is_second) return default_observable(spec);
  // default partner: the adjacent site toward the centre
  return build_pauli_string(
      single_site(mid_chain_site(spec) - 1, PauliAxis::X), spec.length);
}

inline SpectralContext prepare_context(const RunConfig& cfg, bool need_b,
                                       bool audit_gaps) {
  SpectralContext ctx;
  ctx.spectrum = load_or_diagonalize(cfg.spec, cfg.use_cache, &ctx.cache_hit);
  ctx.ens = thermal_ensemble(ctx.spectrum, cfg.beta);
  ctx.aeig = to_eigenbasis(resolve_observable(cfg.observable, cfg.spec, false),
                           ctx.spectrum);
  if (need_b)
    ctx.beig = to_eigenbasis(
        resolve_observable(cfg.observable_b, cfg.spec, true), ctx.spectrum);
  if (audit_gaps) {
    ctx.audit = audit_degeneracies(ctx.spectrum);
  } else {
    ctx.audit.tolerance = kDefaultDegeneracyTol;
    ctx.audit.min_energy_spacing = 0.0;
    for (Eigen::Index j = 0; j + 1 < ctx.spectrum.dim(); ++j) {
      double spacing = ctx.spectrum.energies[j + 1] - ctx.spectrum.energies[j];
      if (j == 0 || spacing < ctx.audit.min_energy_spacing)
        ctx.audit.min_energy_spacing = spacing;
      if (spacing < ctx.audit.tolerance) ++ctx.audit.energy_collisions;
    }
    ctx.audit.distinct_gap_values = 0;  // gap clustering skipped
    ctx.audit.max_gap_multiplicity = 1;
  }
  // eigenvectors are not needed past this point; drop the O(d^2) block
  ctx.spectrum.eigenvectors.resize(0, 0);
  return ctx;
}

inline nlohmann::json audit_to_json(const DegeneracyReport& rep,
                                    bool gaps_audited) {
  nlohmann::json j;
  j["tolerance"] = rep.tolerance;
  j["energy_collisions"] = rep.energy_collisions;
  j["min_energy_spacing"] = rep.min_energy_spacing;
  if (gaps_audited) {
    j["distinct_gap_values"] = rep.distinct_gap_values;
    j["max_gap_multiplicity"] = rep.max_gap_multiplicity;
    j["gaps_degenerate"] = rep.gaps_degenerate();
  }
  return j;
}

struct Emitter {
  std::filesystem::path dir;
  std::vector<std::string> files;

  CsvWriter open(const std::string& name) {
    files.push_back(name);
    return CsvWriter(dir / name);
  }
};

inline std::vector<double> halving_epsilon_grid(double anchor, int above,
                                                int below) {
  std::vector<double> eps;
  for (int k = above; k >= -below; --k)
    eps.push_back(anchor * std::pow(2.0, k));
  return eps;
}

}  // namespace detail

/// Runs one experiment and writes its artifact bundle under
/// cfg.output_dir. Throws InvariantViolation when a mid-run check fails
/// and ConfigError for unusable configs.
inline ArtifactBundle run_experiment(const RunConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output_dir);
  detail::Emitter emit{cfg.output_dir, {}};

  nlohmann::json meta;
  meta["experiment"] = to_string(cfg.experiment);
  meta["version"] = kVersion;
  meta["config"] = config_to_json(cfg);
  meta["seed"] = cfg.seed;

  const bool needs_spectrum = cfg.experiment != ExperimentKind::lemma2_suite;
  const bool needs_b = cfg.experiment == ExperimentKind::ab_factorization;
  const bool audit_gaps =
      cfg.experiment == ExperimentKind::fluctuations || cfg.spec.length <= 10;

  std::optional<detail::SpectralContext> ctx;
  if (needs_spectrum) {
    ctx.emplace(detail::prepare_context(cfg, needs_b, audit_gaps));
    meta["spectrum_cache"] = {
        {"hash", hex64(spec_hash(cfg.spec))},
        {"hit", ctx->cache_hit},
        {"enabled", cfg.use_cache},
    };
    meta["degeneracy_report"] = detail::audit_to_json(ctx->audit, audit_gaps);
  }

  switch (cfg.experiment) {
    case ExperimentKind::bound_check: {
      const GapKind kind = cfg.kinds.front();
      auto full =
          build_gap_distribution(ctx->ens, ctx->aeig, kind, cfg.weight_cutoff);
      auto dist = deviation_part(full);
      auto sweep = epsilon_sweep(dist, cfg.eps_min_factor, cfg.eps_max_factor,
                                 cfg.eps_points);
      {
        auto csv = emit.open("sweep.csv");
        csv.row({"epsilon", "xi", "a", "delta", "sigma_g"});
        for (const auto& p : sweep)
          csv.row({format_g17(p.epsilon), format_g17(p.xi), format_g17(p.a),
                   format_g17(p.delta), format_g17(p.sigma_g)});
      }
      const auto& best = pick_min_delta(sweep);
      auto ws = window_stats_checked(dist, best.epsilon, ctx->ens, ctx->aeig);

      auto steps = static_cast<std::size_t>(std::llround(cfg.t_max / cfg.dt));
      auto series = evaluate_series(ctx->ens, ctx->aeig, series_kind(kind),
                                    cfg.dt, steps);
      auto running = running_time_average(series);
      const double c0_sq = series.c_zero * series.c_zero;

      BoundReport report;
      report.epsilon = best.epsilon;
      double worst_margin = std::numeric_limits<double>::infinity();
      {
        auto series_csv = emit.open("series.csv");
        series_csv.row({"t", "re", "im", "running_avg"});
        auto bound_csv = emit.open("bound.csv");
        bound_csv.row({"t", "lhs", "rhs"});
        for (std::size_t k = 0; k < series.values.size(); ++k) {
          const double t = static_cast<double>(k) * cfg.dt;
          series_csv.row({format_g17(t), format_g17(series.values[k].real()),
                          format_g17(series.values[k].imag()),
                          format_g17(running[k])});
          if (k == 0) continue;  // rhs undefined at T = 0
          double lhs = running[k] / c0_sq;
          double rhs = bound_rhs(ws, t);
          report.times.push_back(t);
          report.lhs.push_back(lhs);
          report.rhs.push_back(rhs);
          worst_margin = std::min(worst_margin, rhs - lhs);
          bound_csv.row({format_g17(t), format_g17(lhs), format_g17(rhs)});
        }
      }
      report.tightness_ratio = report.rhs.back() / report.lhs.back();
      meta["bound_check"] = {
          {"kind", to_string(kind)},
          {"epsilon", ws.epsilon},
          {"a", ws.a},
          {"delta", ws.delta},
          {"sigma_g", ws.sigma_g},
          {"zero_gap_mass", zero_gap_mass(full)},
          {"c_zero", series.c_zero},
          {"c_infinity", series.c_infinity},
          {"worst_margin", worst_margin},
          {"tightness_ratio_at_t_max", report.tightness_ratio},
      };
      if (worst_margin < 0)
        throw InvariantViolation(
            "bound_check: running average exceeded the bound (margin " +
            std::to_string(worst_margin) + ")");
      break;
    }

    case ExperimentKind::ab_factorization: {
      auto err = factorization_error(ctx->ens, ctx->aeig, ctx->beig, 0.1);
      double ita = infinite_time_average(ctx->ens, ctx->aeig, ctx->beig);
      double product = ensemble_expectation(ctx->ens, ctx->aeig) *
                       ensemble_expectation(ctx->ens, ctx->beig);
      double identity_gap = std::abs(err.value - (ita - product));
      auto dev_a = diagonal_deviations(ctx->ens, ctx->aeig, cfg.tail_deltas);
      {
        auto csv = emit.open("tails.csv");
        csv.row({"L", "beta", "tail_delta", "tail_mass"});
        for (std::size_t i = 0; i < dev_a.tail_deltas.size(); ++i)
          csv.row({std::to_string(cfg.spec.length), format_g17(cfg.beta),
                   format_g17(dev_a.tail_deltas[i]),
                   format_g17(dev_a.tail_masses[i])});
        auto err_csv = emit.open("factorization_error.csv");
        err_csv.row({"L", "factorization_error"});
        err_csv.row({std::to_string(cfg.spec.length), format_g17(err.value)});
      }
      meta["ab_factorization"] = {
          {"factorization_error", err.value},
          {"in_set", err.in_set},
          {"out_of_set", err.out_of_set},
          {"split_threshold", err.threshold},
          {"infinite_time_average", ita},
          {"mean_product", product},
          {"identity_gap", identity_gap},
          {"weighted_variance_a", dev_a.weighted_variance},
      };
      if (identity_gap > 1e-10)
        throw InvariantViolation(
            "ab_factorization: diagonal-ensemble identity violated by " +
            std::to_string(identity_gap));
      break;
    }

    case ExperimentKind::fluctuations: {
      FluctuationOptions opts;
      opts.audit = &ctx->audit;
      opts.with_time_domain = true;
      opts.dt = cfg.fluct_dt;
      opts.horizon = cfg.fluct_horizon;
      opts.scheme = cfg.fluct_scheme;
      auto rep = fluctuation_variance(ctx->ens, ctx->aeig, ctx->aeig, opts);
      {
        auto csv = emit.open("fluctuations.csv");
        csv.row({"sigma_c_squared_exact", "theorem2_bound",
                 "time_domain_estimate", "horizon", "gap_degeneracy_flag"});
        csv.row({format_g17(rep.sigma_c_squared_exact),
                 format_g17(rep.theorem2_bound),
                 format_g17(rep.time_domain_estimate), format_g17(rep.horizon),
                 rep.gap_degeneracy_flag ? "1" : "0"});
      }
      meta["fluctuations"] = {
          {"sigma_c_squared_exact", rep.sigma_c_squared_exact},
          {"theorem2_bound", rep.theorem2_bound},
          {"time_domain_estimate", rep.time_domain_estimate},
          {"horizon", rep.horizon},
          {"gap_degeneracy_flag", rep.gap_degeneracy_flag},
          {"purity", ctx->ens.purity},
      };
      if (!rep.gap_degeneracy_flag &&
          rep.sigma_c_squared_exact > rep.theorem2_bound)
        throw InvariantViolation(
            "fluctuations: exact variance exceeded the purity bound");
      break;
    }

    case ExperimentKind::gapstats_sweep: {
      nlohmann::json per_kind = nlohmann::json::object();
      for (GapKind kind : cfg.kinds) {
        auto full = build_gap_distribution(ctx->ens, ctx->aeig, kind,
                                           cfg.weight_cutoff);
        // moment/commutator cross-check is part of the run
        double commutator = sigma_g_commutator(ctx->ens, ctx->aeig, kind);
        if (std::abs(commutator - full.sigma_gap) > 1e-8)
          throw InvariantViolation(
              std::string("gapstats_sweep: sigma_G cross-check failed for ") +
              to_string(kind));
        auto dist = deviation_part(full);
        auto sweep = epsilon_sweep(dist, cfg.eps_min_factor,
                                   cfg.eps_max_factor, cfg.eps_points);
        auto csv = emit.open(std::string("sweep_") + to_string(kind) + ".csv");
        csv.row({"epsilon", "xi", "a", "delta", "sigma_g"});
        for (const auto& p : sweep)
          csv.row({format_g17(p.epsilon), format_g17(p.xi), format_g17(p.a),
                   format_g17(p.delta), format_g17(p.sigma_g)});
        const auto& best = pick_min_delta(sweep);
        nlohmann::json entry = {
            {"sigma_g", full.sigma_gap},
            {"entries", full.size()},
            {"zero_gap_mass", zero_gap_mass(full)},
            {"discarded_weight", full.discarded_weight},
            {"min_delta",
             {{"epsilon", best.epsilon}, {"a", best.a}, {"delta", best.delta}}},
        };
        // witness for "delta small with a of order one": smallest delta
        // among points with a <= 1
        const SweepPoint* witness = nullptr;
        for (const auto& p : sweep)
          if (p.a <= 1.0 && (!witness || p.delta < witness->delta)) witness = &p;
        if (witness)
          entry["witness"] = {{"epsilon", witness->epsilon},
                              {"a", witness->a},
                              {"delta", witness->delta}};
        per_kind[to_string(kind)] = entry;
      }
      meta["gapstats_sweep"] = per_kind;
      break;
    }

    case ExperimentKind::lemma2_suite: {
      auto csv = emit.open("lemma2.csv");
      csv.row({"dist", "gaps", "T", "average", "refined_average", "bound",
               "violated"});
      int violations = 0;
      double max_refinement = 0.0;
      for (int i = 0; i < cfg.lemma2_dists; ++i) {
        auto dist = random_distribution(cfg.seed, static_cast<std::uint64_t>(i),
                                        cfg.lemma2_max_gaps);
        auto rep = lemma2_property_check(dist, cfg.lemma2_t_grid, true);
        for (const auto& p : rep.points) {
          csv.row({std::to_string(i), std::to_string(dist.size()),
                   format_g17(p.T), format_g17(p.average),
                   format_g17(p.refined_average), format_g17(p.bound),
                   p.violated ? "1" : "0"});
          violations += p.violated ? 1 : 0;
        }
        max_refinement = std::max(max_refinement, rep.max_refinement_change);
      }
      meta["lemma2_suite"] = {
          {"num_dists", cfg.lemma2_dists},
          {"violations", violations},
          {"max_refinement_change", max_refinement},
      };
      if (violations > 0)
        throw InvariantViolation("lemma2_suite: " + std::to_string(violations) +
                                 " bound violations");
      break;
    }

    case ExperimentKind::histogram: {
      const GapKind kind = cfg.kinds.front();
      auto full =
          build_gap_distribution(ctx->ens, ctx->aeig, kind, cfg.weight_cutoff);
      auto dist = deviation_part(full);
      auto hist = coarse_grain(dist, cfg.bins);
      {
        auto csv = emit.open("histogram.csv");
        csv.row({"bin_lo", "bin_hi", "weight"});
        for (int b = 0; b < cfg.bins; ++b) {
          double lo = hist.g_min + b * hist.bin_width;
          double hi = (b + 1 == cfg.bins) ? hist.g_max : lo + hist.bin_width;
          csv.row({format_g17(lo), format_g17(hi), format_g17(hist.weights[b])});
        }
      }
      long double total = 0.0L;
      for (double w : hist.weights) total += w;
      double conservation_gap =
          std::abs(static_cast<double>(total) - dist.total_weight);
      auto smoothed = smooth_histogram(hist.weights, 5);
      std::size_t peak =
          std::max_element(smoothed.begin(), smoothed.end()) - smoothed.begin();
      meta["histogram"] = {
          {"kind", to_string(kind)},
          {"bins", cfg.bins},
          {"g_min", hist.g_min},
          {"g_max", hist.g_max},
          {"zero_gap_mass", zero_gap_mass(full)},
          {"conservation_gap", conservation_gap},
          {"smoothed_unimodal", is_unimodal(smoothed)},
          {"peak_bin", peak},
          {"peak_gap", hist.g_min + (peak + 0.5) * hist.bin_width},
      };
      if (conservation_gap > 1e-12)
        throw InvariantViolation("histogram: bin weights lost " +
                                 std::to_string(conservation_gap));
      break;
    }

    case ExperimentKind::mc_forward_error: {
      const GapKind kind = cfg.kinds.front();
      auto dist = deviation_part(
          build_gap_distribution(ctx->ens, ctx->aeig, kind, cfg.weight_cutoff));
      auto csv = emit.open("mc_error.csv");
      csv.row({"epsilon", "xi_exact", "xi_mc", "abs_error"});
      double max_err = 0.0;
      bool mc_above = false;
      const double log_lo = std::log(cfg.eps_min_factor * dist.sigma_gap);
      const double log_hi = std::log(cfg.eps_max_factor * dist.sigma_gap);
      for (int i = 0; i < cfg.eps_points; ++i) {
        double eps =
            std::exp(log_lo + (log_hi - log_lo) * i / (cfg.eps_points - 1));
        double exact = xi_exact(dist, eps);
        double mc = xi_monte_carlo(dist, eps, cfg.mc_samples, cfg.seed);
        max_err = std::max(max_err, std::abs(exact - mc));
        mc_above = mc_above || mc > exact;
        csv.row({format_g17(eps), format_g17(exact), format_g17(mc),
                 format_g17(std::abs(exact - mc))});
      }
      meta["mc_forward_error"] = {
          {"kind", to_string(kind)},
          {"samples", cfg.mc_samples},
          {"max_abs_error", max_err},
          {"mc_exceeded_exact", mc_above},
      };
      if (mc_above)
        throw InvariantViolation(
            "mc_forward_error: sampled xi exceeded the exact maximum");
      break;
    }

    case ExperimentKind::integrable_contrast: {
      SpinChainSpec integrable{.length = cfg.spec.length, .gamma = -0.5,
                               .lambda = 0.0, .j1 = -0.5, .j2 = 0.0,
                               .boundary = cfg.spec.boundary};
      auto eth_dist = deviation_part(build_gap_distribution(
          ctx->ens, ctx->aeig, cfg.kinds.front(), cfg.weight_cutoff));
      bool int_hit = false;
      auto int_spectrum = load_or_diagonalize(integrable, cfg.use_cache, &int_hit);
      auto int_ens = thermal_ensemble(int_spectrum, cfg.beta);
      auto int_aeig = to_eigenbasis(
          detail::resolve_observable(cfg.observable, integrable, false),
          int_spectrum);
      int_spectrum.eigenvectors.resize(0, 0);
      auto int_dist = deviation_part(build_gap_distribution(
          int_ens, int_aeig, cfg.kinds.front(), cfg.weight_cutoff));

      auto eps_grid = detail::halving_epsilon_grid(1e-3, 14, 4);
      auto csv = emit.open("contrast.csv");
      csv.row({"epsilon", "delta_eth", "delta_integrable"});
      std::vector<double> delta_int;
      double d_eth_at_anchor = 0, d_int_at_anchor = 0;
      for (double eps : eps_grid) {
        double de = xi_exact(eth_dist, eps) + eth_dist.discarded_weight;
        double di = xi_exact(int_dist, eps) + int_dist.discarded_weight;
        delta_int.push_back(di);
        if (eps == 1e-3) {
          d_eth_at_anchor = de;
          d_int_at_anchor = di;
        }
        csv.row({format_g17(eps), format_g17(de), format_g17(di)});
      }
      bool plateau = false;
      for (std::size_t i = 1; i < delta_int.size(); ++i)
        plateau = plateau || delta_int[i] == delta_int[i - 1];
      meta["integrable_contrast"] = {
          {"integrable_spec",
           {{"gamma", integrable.gamma},
            {"lambda", integrable.lambda},
            {"j1", integrable.j1},
            {"j2", integrable.j2}}},
          {"epsilon_anchor", 1e-3},
          {"delta_eth", d_eth_at_anchor},
          {"delta_integrable", d_int_at_anchor},
          {"contrast_holds", d_int_at_anchor > d_eth_at_anchor},
          {"plateau_found", plateau},
          {"integrable_cache_hit", int_hit},
      };
      break;
    }
  }

  std::ofstream meta_out(cfg.output_dir / "metadata.json");
  meta_out << meta.dump(2) << '\n';
  emit.files.push_back("metadata.json");

  ArtifactBundle bundle;
  bundle.output_dir = cfg.output_dir;
  bundle.metadata = std::move(meta);
  bundle.files = std::move(emit.files);
  return bundle;
}

// ---------------------------------------------------------------------
// Invariant verification (corrflow verify)
// ---------------------------------------------------------------------

struct VerifyResult {
  std::vector<std::string> passed;
  std::vector<std::string> failed;

  bool ok() const { return failed.empty(); }
};

/// Runs the module invariant suites against the configured chain and
/// reports one named result per check.
inline VerifyResult verify_invariants(const RunConfig& cfg) {
  cfg.validate();
  VerifyResult result;
  auto check = [&](const std::string& name, bool ok) {
    (ok ? result.passed : result.failed).push_back(name);
  };

  auto h = build_hamiltonian(cfg.spec);
  check("hamiltonian_real_symmetric",
        h.matrix.imag().isZero(0.0) &&
            (h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() == 0.0);
  check("hamiltonian_traceless", std::abs(h.matrix.trace()) < 1e-9);

  auto s = diagonalize(h);
  {
    double scale = h.matrix.cwiseAbs().maxCoeff();
    Eigen::MatrixXcd residual =
        h.matrix * s.eigenvectors -
        s.eigenvectors * s.energies.cast<Complex>().asDiagonal();
    check("spectrum_reconstruction",
          residual.cwiseAbs().maxCoeff() <= 1e-9 * scale);
    Eigen::MatrixXcd gram = s.eigenvectors.adjoint() * s.eigenvectors -
                            Eigen::MatrixXcd::Identity(s.dim(), s.dim());
    check("eigenvectors_unitary", gram.cwiseAbs().maxCoeff() <= 1e-10);
  }

  auto ens = thermal_ensemble(s, cfg.beta);
  {
    long double total = 0.0L;
    for (Eigen::Index j = 0; j < ens.dim(); ++j) total += ens.weights[j];
    check("thermal_weights_normalized",
          std::abs(static_cast<double>(total) - 1.0) < 1e-12);
    check("purity_bounds", ens.purity <= 1.0 &&
                               ens.purity <= ens.weights.maxCoeff() + 1e-15 &&
                               ens.purity >= 1.0 / ens.dim() - 1e-15);
  }

  auto a = detail::resolve_observable(cfg.observable, cfg.spec, false);
  auto aeig = to_eigenbasis(a, s);
  check("eigenbasis_hermitian",
        (aeig.elements - aeig.elements.adjoint()).cwiseAbs().maxCoeff() <=
            1e-10);
  check("eigenbasis_frobenius",
        std::abs(aeig.elements.norm() - a.matrix.norm()) <= 1e-9);

  {
    Complex c0 = correlation_trace(ens, aeig, aeig, 0.0);
    Eigen::MatrixXcd rho_ab = ens.weights.cast<Complex>().asDiagonal() *
                              (aeig.elements * aeig.elements);
    check("correlator_t0_trace", std::abs(c0 - rho_ab.trace()) <= 1e-9);
    bool reversal = true;
    for (double t : {0.7, 3.1}) {
      Complex plus = correlation_trace(ens, aeig, aeig, t);
      Complex minus = correlation_trace(ens, aeig, aeig, -t);
      reversal = reversal && std::abs(minus - std::conj(plus)) <= 1e-10;
    }
    check("correlator_time_reversal", reversal);
    check("kubo_normalized_at_zero", kubo_correlation(ens, aeig, 0.0) == 1.0);
  }

  for (GapKind kind : cfg.kinds) {
    auto dist = build_gap_distribution(ens, aeig, kind, cfg.weight_cutoff);
    std::string prefix = std::string("dist_") + to_string(kind) + "_";
    check(prefix + "normalized",
          std::abs(dist.total_weight + dist.discarded_weight - 1.0) < 1e-10);
    double commutator = sigma_g_commutator(ens, aeig, kind);
    check(prefix + "sigma_g_crosscheck",
          std::abs(commutator - dist.sigma_gap) <= 1e-8);
    bool mc_ok = true, mono_ok = true;
    double prev = 0.0;
    for (double x : {1e-3, 0.1, 1.0}) {
      double exact = xi_exact(dist, x);
      mc_ok = mc_ok && xi_monte_carlo(dist, x, 500, cfg.seed) <= exact;
      mono_ok = mono_ok && exact >= prev && exact <= dist.total_weight;
      prev = exact;
    }
    check(prefix + "mc_below_exact", mc_ok);
    check(prefix + "xi_monotone", mono_ok);
    if (dist.sigma_gap > 0) {
      auto ws = window_stats(dist, 0.1 * dist.sigma_gap);
      check(prefix + "xi_envelope", xi_envelope_violation(dist, ws) <= 1e-12);
    }
  }

  {
    bool lemma_ok = true;
    for (std::uint64_t i = 0; i < 20; ++i) {
      auto dist = random_distribution(cfg.seed, i, cfg.lemma2_max_gaps);
      auto rep = lemma2_property_check(dist, {0.5, 5.0}, false);
      lemma_ok = lemma_ok && !rep.any_violation;
    }
    check("lemma2_mini_suite", lemma_ok);
  }

  {
    auto beig = to_eigenbasis(
        detail::resolve_observable(cfg.observable_b, cfg.spec, true), s);
    auto err = factorization_error(ens, aeig, beig);
    double ita = infinite_time_average(ens, aeig, beig);
    double product =
        ensemble_expectation(ens, aeig) * ensemble_expectation(ens, beig);
    check("factorization_identity", std::abs(err.value - (ita - product)) <= 1e-10);
  }

  return result;
}

}  // namespace corrflow
