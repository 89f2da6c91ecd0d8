#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "c2g/add_c2g.hpp"
#include "c2g/cde.hpp"
#include "c2g/error.hpp"
#include "c2g/np_c2g.hpp"
#include "c2g/rng.hpp"

namespace c2g::app {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kMethodStream = 31;

std::string num(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "" : (v > 0 ? "inf" : "-inf");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

// Short form for file names.
std::string tag(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (char& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_std(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw ValidationError("truth: ragged matrix");
    m.row(static_cast<Index>(i)) = to_eigen(rows[i]).transpose();
  }
  return m;
}

std::string kind_name(ComponentLaw::Kind k) {
  switch (k) {
    case ComponentLaw::Kind::normal: return "normal";
    case ComponentLaw::Kind::uniform: return "uniform";
    case ComponentLaw::Kind::unavailable: return "unavailable";
  }
  return "unavailable";
}

ComponentLaw::Kind parse_kind(const std::string& s) {
  if (s == "normal") return ComponentLaw::Kind::normal;
  if (s == "uniform") return ComponentLaw::Kind::uniform;
  if (s == "unavailable") return ComponentLaw::Kind::unavailable;
  throw ValidationError("truth: unknown law kind '" + s + "'");
}

json laws_json(const std::vector<ComponentLaw>& laws) {
  json out = json::array();
  for (const auto& l : laws) out.push_back({kind_name(l.kind), l.a, l.b});
  return out;
}

std::vector<ComponentLaw> laws_from_json(const json& j) {
  std::vector<ComponentLaw> out;
  for (const auto& e : j) {
    ComponentLaw l;
    l.kind = parse_kind(e.at(0).get<std::string>());
    l.a = e.at(1).get<double>();
    l.b = e.at(2).get<double>();
    out.push_back(l);
  }
  return out;
}

json indices_json(const IndexList& v) { return json(std::vector<long long>(v.begin(), v.end())); }

json report_json(const EstimandReport& r) {
  json samples = json::array();
  for (std::size_t k = 0; k < r.indices.size(); ++k) {
    const auto i = static_cast<Index>(k);
    samples.push_back({{"index", r.indices[k]},
                       {"care_lo", r.care_lo[i]},
                       {"care_hi", r.care_hi[i]},
                       {"pi", r.pi[i]},
                       {"unbounded", static_cast<bool>(r.unbounded[k])}});
  }
  const auto finite_or_null = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"are_lo", finite_or_null(r.are_lo)},
          {"are_hi", finite_or_null(r.are_hi)},
          {"erpf", r.erpf},
          {"unbounded_count", r.unbounded_count},
          {"samples", samples}};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("metrics: bad " + what + " value '" + s + "'");
  }
}

std::optional<double> parse_optional(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, what);
}

MetricRow metric_row(const std::string& method, const std::string& scenario, Index n, double tau,
                     double alpha, std::uint64_t seed) {
  MetricRow m;
  m.method = method;
  m.scenario = scenario;
  m.n = n;
  m.tau = tau;
  m.alpha = alpha;
  m.seed = seed;
  return m;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void write_comments(std::ostream& out, const std::vector<std::string>& lines) {
  for (const auto& l : lines) out << "# " << l << '\n';
}

}  // namespace

json truth_to_json(const GeneratorTruth& t) {
  return {{"scenario", to_string(t.scenario)},
          {"n", t.n},
          {"d", t.d},
          {"tau", t.tau},
          {"seed", t.seed},
          {"beta", to_std(t.beta)},
          {"gamma", to_std(t.gamma)},
          {"theta", to_std(t.theta)},
          {"c", t.c},
          {"interaction_mask", matrix_json(t.interaction_mask)},
          {"interaction_weights", matrix_json(t.interaction_weights)},
          {"pi", to_std(t.pi)},
          {"latent", to_std(t.latent)},
          {"null_law", laws_json(t.null_law)},
          {"nonresponder_law", laws_json(t.nonresponder_law)},
          {"responder_law", laws_json(t.responder_law)}};
}

GeneratorTruth truth_from_json(const json& j) {
  try {
    GeneratorTruth t;
    t.scenario = parse_scenario(j.at("scenario").get<std::string>());
    t.n = j.at("n").get<Index>();
    t.d = j.at("d").get<Index>();
    t.tau = j.at("tau").get<double>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.beta = to_eigen(j.at("beta").get<std::vector<double>>());
    t.gamma = to_eigen(j.at("gamma").get<std::vector<double>>());
    t.theta = to_eigen(j.at("theta").get<std::vector<double>>());
    t.c = j.at("c").get<double>();
    t.interaction_mask = matrix_from_json(j.at("interaction_mask"));
    t.interaction_weights = matrix_from_json(j.at("interaction_weights"));
    t.pi = to_eigen(j.at("pi").get<std::vector<double>>());
    t.latent = to_eigen(j.at("latent").get<std::vector<double>>());
    t.null_law = laws_from_json(j.at("null_law"));
    t.nonresponder_law = laws_from_json(j.at("nonresponder_law"));
    t.responder_law = laws_from_json(j.at("responder_law"));
    const auto n = static_cast<std::size_t>(t.n);
    if (t.null_law.size() != n || t.nonresponder_law.size() != n || t.responder_law.size() != n ||
        t.pi.size() != t.n) {
      throw ValidationError("truth: per-sample arrays must have n entries");
    }
    return t;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("truth: ") + e.what());
  }
}

GeneratorTruth load_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open truth file " + path.string());
  try {
    return truth_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ValidationError("truth " + path.string() + ": " + e.what());
  }
}

Dataset standardize_covariates(const Dataset& ds) {
  Dataset out = ds;
  const Index n = ds.n();
  for (Index j = 0; j < ds.d(); ++j) {
    auto col = out.x.col(j);
    col.array() -= col.mean();
    const double sd = n > 1 ? std::sqrt(col.squaredNorm() / static_cast<double>(n - 1)) : 0.0;
    if (sd > 0.0) col /= sd;
  }
  return out;
}

MethodRun run_method(const std::string& method, const Dataset& raw, const GeneratorTruth* truth,
                     const std::vector<double>& alphas, const Hyperparameters& hyper,
                     std::uint64_t seed, bool standardize) {
  validate(raw);
  const Dataset ds = standardize ? standardize_covariates(raw) : raw;
  const std::uint64_t fit_seed = derive_seed(seed, kMethodStream);
  MethodRun run;
  run.method = method;
  const auto select_each = [&](const auto& select) {
    for (double a : alphas) {
      if (!(a >= 0.0 && a < 1.0)) throw ValidationError("alpha must lie in [0, 1)");
      run.selections.push_back(a == 0.0 ? SelectionResult{} : select(a));
    }
  };

  if (method == "add-c2g") {
    const AddC2gFit fit = fit_add_c2g(ds, add_c2g_config(hyper, fit_seed));
    run.scores = fit.w;
    run.pi = fit.pi_hat;
    run.estimands = add_c2g_estimands(fit);
    select_each([&](double a) { return select_by_average(fit.w, a); });
    run.diagnostics = {{"em_iterations", fit.em.iterations},
                       {"em_converged", fit.em.converged},
                       {"em_stalled", fit.em.stalled},
                       {"no_responder_mass", fit.em.no_responder_mass},
                       {"zero_density_count", fit.zero_density_count},
                       {"clamped_pi_count", fit.clamped_pi_count},
                       {"krr_bandwidth", fit.mu0.bandwidth},
                       {"krr_ridge", fit.mu0.ridge},
                       {"pr_bandwidth", fit.g_hat.kernel_bandwidth}};
  } else if (method == "np-c2g") {
    const NpC2gConfig config = np_c2g_config(hyper, fit_seed);
    const NpC2gFit fit = fit_np_c2g(ds, config);
    run.scores = fit.w;
    run.pi = fit.pi_star;
    run.estimands = np_estimands(fit);
    json levels = json::array();
    select_each([&](double a) {
      const EmpiricalControlResult r = np_select(fit, config, a);
      levels.push_back(r.found ? json(r.selection.level) : json(nullptr));
      return r.selection;
    });
    const auto hyper_json = [](const CdeHyper& h) {
      return json{{"h1", h.h1}, {"h2", h.h2}, {"k", h.k}};
    };
    run.diagnostics = {{"f0", hyper_json(fit.f0.hyper())},
                       {"ft", hyper_json(fit.ft.hyper())},
                       {"zero_denominator_count", fit.zero_denominator_count},
                       {"control_levels", levels}};
  } else if (method == "np-oracle") {
    if (truth == nullptr) throw ValidationError("np-oracle requires the generating truth");
    if (truth->n != ds.n()) throw ValidationError("truth does not match the dataset size");
    const NpOracle oracle = np_oracle(*truth, ds);
    run.scores = oracle.w;
    run.pi = oracle.estimands.pi;
    run.estimands = oracle.estimands;
    select_each([&](double a) { return select_by_average(oracle.w, a); });
  } else if (method == "frequentist-bh") {
    const TreatmentSplit split = split_by_treatment(ds);
    const Eigen::MatrixXd x0 = select_rows(ds.x, split.untreated);
    const Eigen::VectorXd y0 = select_rows(ds.y, split.untreated);
    CdeGrid grid = cde_grid(hyper);
    const CdeGrid defaults = default_cde_grid(x0, y0);
    if (grid.h1.empty()) grid.h1 = defaults.h1;
    if (grid.h2.empty()) grid.h2 = defaults.h2;
    if (grid.k.empty()) grid.k = defaults.k;
    const CdeModel f0 = cde_tune(x0, y0, grid);
    const NpC2gConfig np_defaults;
    const Eigen::VectorXd y_grid = pooled_y_grid(
        ds.y, np_defaults.y_grid_margin * f0.hyper().h2, np_defaults.y_grid_size);
    const std::vector<double> p = frequentist_pvalues(f0, select_rows(ds.x, split.treated),
                                                      select_rows(ds.y, split.treated), y_grid);
    run.scores.indices = split.treated;
    run.scores.w = to_eigen(p);
    select_each([&](double a) {
      SelectionResult s;
      s.level = a;
      for (Index pos : bh_procedure(p, a)) {
        s.selected.push_back(split.treated[static_cast<std::size_t>(pos)]);
      }
      std::sort(s.selected.begin(), s.selected.end());
      s.estimated_fdr = kNaN;
      return s;
    });
    run.diagnostics = {{"f0", {{"h1", f0.hyper().h1}, {"h2", f0.hyper().h2}, {"k", f0.hyper().k}}}};
  } else {
    throw ValidationError("unknown method '" + method + "'");
  }
  return run;
}

std::vector<std::filesystem::path> cmd_simulate(const ExperimentConfig& config) {
  validate(config);
  const std::string header = to_json(config).dump();
  std::vector<std::filesystem::path> written;
  for (Index n : config.n) {
    for (double tau : config.tau) {
      for (std::uint64_t seed : config.seeds) {
        const Simulation sim = simulate(config.scenario, n, config.d, tau, seed);
        const std::string stem = to_string(config.scenario) + "_n" + std::to_string(n) + "_tau" +
                                 tag(tau) + "_seed" + std::to_string(seed);
        const std::filesystem::path dir(config.out);
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        const std::filesystem::path csv = dir / (stem + ".csv");
        write_dataset(csv, sim.data,
                      {"c2g simulate", "config: " + header,
                       "scenario=" + to_string(config.scenario) + " n=" + std::to_string(n) +
                           " d=" + std::to_string(config.d) + " tau=" + num(tau) +
                           " seed=" + std::to_string(seed)});
        std::ofstream truth = open_output(dir / (stem + ".truth.json"));
        json j = truth_to_json(sim.truth);
        j["config"] = to_json(config);
        truth << j.dump(1) << '\n';
        if (!truth) throw ValidationError("cannot write truth file for " + stem);
        written.push_back(csv);
      }
    }
  }
  return written;
}

json cmd_fit_select(const FitSelectArgs& args) {
  const Dataset ds = load_dataset(args.data);
  std::optional<GeneratorTruth> truth;
  if (args.truth) truth = load_truth(*args.truth);
  if (args.method == "np-oracle" && !truth) {
    throw ValidationError("np-oracle needs --truth; real data has no generating laws");
  }
  MethodRun run = run_method(args.method, ds, truth ? &*truth : nullptr, {args.alpha}, args.hyper,
                             args.seed, args.standardize);
  const SelectionResult& sel = run.selections.front();
  json scores = json::array();
  const bool pvalues = args.method == "frequentist-bh";
  for (std::size_t k = 0; k < run.scores.indices.size(); ++k) {
    const auto i = static_cast<Index>(k);
    json entry = {{"index", run.scores.indices[k]}, {pvalues ? "pvalue" : "w", run.scores.w[i]}};
    if (run.pi.size() > 0) entry["pi"] = run.pi[i];
    scores.push_back(entry);
  }
  json out = {{"method", args.method},
              {"alpha", args.alpha},
              {"seed", args.seed},
              {"standardize", args.standardize},
              {"data", args.data.string()},
              {"selected", indices_json(sel.selected)},
              {"selected_count", sel.selected.size()},
              {"level", sel.level},
              {"scores", scores},
              {"diagnostics", run.diagnostics}};
  out["estimated_fdr"] = std::isfinite(sel.estimated_fdr) ? json(sel.estimated_fdr) : json(nullptr);
  out["estimands"] = run.estimands ? report_json(*run.estimands) : json(nullptr);
  if (ds.has_truth()) {
    out["fdp"] = fdr_metric(sel.selected, *ds.h);
    const auto power = power_metric(sel.selected, *ds.h);
    out["power"] = power ? json(*power) : json(nullptr);
  }
  return out;
}

SeedResult run_seed(const ExperimentConfig& config, Index n, double tau, std::uint64_t seed) {
  SeedResult r;
  r.n = n;
  r.tau = tau;
  r.seed = seed;
  const std::string scenario = to_string(config.scenario);
  const Simulation sim = simulate(config.scenario, n, config.d, tau, seed);
  const Eigen::VectorXi& h = *sim.data.h;

  std::optional<EstimandReport> oracle_report;
  bool oracle_tried = false;
  const auto oracle_are = [&]() -> const std::optional<EstimandReport>& {
    if (!oracle_tried) {
      oracle_tried = true;
      if (sim.truth.analytic()) oracle_report = np_oracle(sim.truth, sim.data).estimands;
    }
    return oracle_report;
  };

  for (const std::string& method : config.methods) {
    std::optional<MethodRun> run;
    std::string status = "ok";
    try {
      run = run_method(method, sim.data, &sim.truth, config.alpha_grid, config.hyper, seed,
                       config.standardize);
    } catch (const std::exception& e) {
      status = sanitize(std::string("error: ") + e.what());
    }
    for (std::size_t a = 0; a < config.alpha_grid.size(); ++a) {
      MetricRow m = metric_row(method, scenario, n, tau, config.alpha_grid[a], seed);
      m.status = status;
      if (run) {
        const SelectionResult& s = run->selections[a];
        m.fdp = fdr_metric(s.selected, h);
        m.power = power_metric(s.selected, h);
        m.selected = static_cast<Index>(s.selected.size());
        r.curves.push_back({method, scenario, n, tau, seed, config.alpha_grid[a], m.selected,
                            s.estimated_fdr});
      } else {
        m.fdp = kNaN;
      }
      r.metrics.push_back(m);
    }
    if (run && run->estimands) {
      const EstimandReport& e = *run->estimands;
      EstimandRow row;
      row.method = method;
      row.scenario = scenario;
      row.n = n;
      row.tau = tau;
      row.seed = seed;
      row.are_lo = e.are_lo;
      row.are_hi = e.are_hi;
      row.erpf = e.erpf;
      row.unbounded = e.unbounded_count;
      if (method == "np-c2g" || method == "np-oracle") {
        const auto& oracle = oracle_are();
        if (oracle) {
          row.oracle_are_lo = oracle->are_lo;
          row.oracle_are_hi = oracle->are_hi;
          const Interval mine{e.are_lo, e.are_hi};
          const Interval ref{oracle->are_lo, oracle->are_hi};
          if (std::isfinite(mine.lo) && std::isfinite(mine.hi) && std::isfinite(ref.lo) &&
              std::isfinite(ref.hi)) {
            row.jaccard = jaccard_intervals(std::span(&mine, 1), std::span(&ref, 1));
          }
        }
      }
      r.estimands.push_back(row);
    }
  }
  return r;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows) {
  using Key = std::tuple<std::string, std::string, Index, double, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const MetricRow*>> groups;
  for (const auto& r : rows) {
    const Key key{r.method, r.scenario, r.n, r.tau, r.alpha};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const Key& key : order) {
    AggregateRow a;
    std::tie(a.method, a.scenario, a.n, a.tau, a.alpha) = key;
    std::vector<double> fdp;
    std::vector<double> power;
    for (const MetricRow* r : groups[key]) {
      if (r->status != "ok") {
        ++a.failures;
        continue;
      }
      fdp.push_back(r->fdp);
      if (r->power) power.push_back(*r->power);
    }
    a.reps = static_cast<Index>(fdp.size());
    if (fdp.empty()) {
      a.mean_fdr = a.fdr_ci95 = kNaN;
    } else {
      const MeanCi f = mean_ci95(fdp);
      a.mean_fdr = f.mean;
      a.fdr_ci95 = f.halfwidth;
    }
    if (power.empty()) {
      a.mean_power = a.power_ci95 = kNaN;
    } else {
      const MeanCi p = mean_ci95(power);
      a.mean_power = p.mean;
      a.power_ci95 = p.halfwidth;
    }
    a.valid_power = (std::isfinite(a.mean_fdr) && std::isfinite(a.mean_power))
                        ? valid_power(a.mean_fdr, a.fdr_ci95, a.mean_power, a.alpha)
                        : kNaN;
    out.push_back(a);
  }
  return out;
}

std::string metrics_header() { return "method,scenario,n,tau,alpha,seed,fdp,power,selected,status"; }

std::string format_metric(const MetricRow& r) {
  return r.method + ',' + r.scenario + ',' + std::to_string(r.n) + ',' + num(r.tau) + ',' +
         num(r.alpha) + ',' + std::to_string(r.seed) + ',' + num(r.fdp) + ',' + num(r.power) + ',' +
         std::to_string(r.selected) + ',' + r.status;
}

std::string aggregate_header() {
  return "method,scenario,n,tau,alpha,reps,failures,mean_fdr,fdr_ci95,mean_power,power_ci95,"
         "valid_power";
}

std::string format_aggregate(const AggregateRow& r) {
  return r.method + ',' + r.scenario + ',' + std::to_string(r.n) + ',' + num(r.tau) + ',' +
         num(r.alpha) + ',' + std::to_string(r.reps) + ',' + std::to_string(r.failures) + ',' +
         num(r.mean_fdr) + ',' + num(r.fdr_ci95) + ',' + num(r.mean_power) + ',' +
         num(r.power_ci95) + ',' + num(r.valid_power);
}

std::string curves_header() { return "method,scenario,n,tau,seed,alpha,selected,estimated_fdr"; }

std::string format_curve(const CurveRow& r) {
  return r.method + ',' + r.scenario + ',' + std::to_string(r.n) + ',' + num(r.tau) + ',' +
         std::to_string(r.seed) + ',' + num(r.alpha) + ',' + std::to_string(r.selected) + ',' +
         num(r.estimated_fdr);
}

std::string estimands_header() {
  return "method,scenario,n,tau,seed,are_lo,are_hi,erpf,unbounded,oracle_are_lo,oracle_are_hi,"
         "jaccard";
}

std::string format_estimand(const EstimandRow& r) {
  return r.method + ',' + r.scenario + ',' + std::to_string(r.n) + ',' + num(r.tau) + ',' +
         std::to_string(r.seed) + ',' + num(r.are_lo) + ',' + num(r.are_hi) + ',' + num(r.erpf) +
         ',' + std::to_string(r.unbounded) + ',' + num(r.oracle_are_lo) + ',' +
         num(r.oracle_are_hi) + ',' + num(r.jaccard);
}

ParsedMetrics read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open metrics file " + path.string());
  ParsedMetrics out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0 && !header_seen) {
      out.comments.push_back(line.substr(2));
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != metrics_header()) throw ValidationError("metrics: unexpected header " + line);
      header_seen = true;
      continue;
    }
    const auto c = split_csv(line);
    if (c.size() != 10) throw ValidationError("metrics: expected 10 columns in '" + line + "'");
    MetricRow r;
    r.method = c[0];
    r.scenario = c[1];
    r.n = static_cast<Index>(parse_double(c[2], "n"));
    r.tau = parse_double(c[3], "tau");
    r.alpha = parse_double(c[4], "alpha");
    r.seed = std::stoull(c[5]);
    r.fdp = c[6].empty() ? kNaN : parse_double(c[6], "fdp");
    r.power = parse_optional(c[7], "power");
    r.selected = static_cast<Index>(parse_double(c[8], "selected"));
    r.status = c[9];
    out.rows.push_back(r);
  }
  if (!header_seen) throw ValidationError("metrics: missing header in " + path.string());
  return out;
}

namespace {

void write_aggregate(const std::filesystem::path& path, const std::vector<std::string>& comments,
                     const std::vector<MetricRow>& rows) {
  std::ofstream out = open_output(path);
  write_comments(out, comments);
  out << aggregate_header() << '\n';
  for (const auto& a : aggregate(rows)) out << format_aggregate(a) << '\n';
  if (!out) throw ValidationError("cannot write " + path.string());
}

}  // namespace

BenchmarkSummary cmd_benchmark(const ExperimentConfig& config,
                               const std::function<bool(const SeedProgress&)>& on_seed_done) {
  validate(config);
  struct Task {
    Index n;
    double tau;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (Index n : config.n) {
    for (double tau : config.tau) {
      for (std::uint64_t seed : config.seeds) tasks.push_back({n, tau, seed});
    }
  }

  BenchmarkSummary summary;
  summary.total = static_cast<Index>(tasks.size());
  const std::filesystem::path dir(config.out);
  summary.metrics = dir / "metrics.csv";
  summary.aggregate = dir / "aggregate.csv";
  summary.curves = dir / "curves.csv";
  summary.estimands = dir / "estimands.csv";

  const std::vector<std::string> comments{"c2g benchmark", "config: " + to_json(config).dump()};
  std::ofstream metrics = open_output(summary.metrics);
  std::ofstream curves = open_output(summary.curves);
  std::ofstream estimands = open_output(summary.estimands);
  for (auto* f : {&metrics, &curves, &estimands}) write_comments(*f, comments);
  metrics << metrics_header() << '\n' << std::flush;
  curves << curves_header() << '\n' << std::flush;
  estimands << estimands_header() << '\n' << std::flush;

  std::vector<std::optional<SeedResult>> results(tasks.size());
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancel{false};

  const auto worker = [&] {
    for (;;) {
      if (cancel.load()) return;
      const std::size_t k = next.fetch_add(1);
      if (k >= tasks.size()) return;
      SeedResult r;
      try {
        r = run_seed(config, tasks[k].n, tasks[k].tau, tasks[k].seed);
      } catch (const std::exception& e) {
        // The generator itself failed: one error row per method and level.
        r = SeedResult{tasks[k].n, tasks[k].tau, tasks[k].seed, {}, {}, {}};
        for (const auto& m : config.methods) {
          for (double a : config.alpha_grid) {
            MetricRow row = metric_row(m, to_string(config.scenario), tasks[k].n, tasks[k].tau, a, tasks[k].seed);
            row.fdp = kNaN;
            row.status = sanitize(std::string("error: ") + e.what());
            r.metrics.push_back(row);
          }
        }
      }
      {
        std::lock_guard lock(mu);
        results[k] = std::move(r);
      }
      ready.notify_all();
    }
  };

  const int threads = std::max(1, std::min<int>(config.workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);

  std::vector<MetricRow> all_rows;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    std::unique_lock lock(mu);
    ready.wait(lock, [&] { return results[k].has_value() || (cancel.load() && k >= next.load()); });
    if (!results[k]) break;
    const SeedResult r = std::move(*results[k]);
    results[k].reset();
    lock.unlock();
    for (const auto& m : r.metrics) metrics << format_metric(m) << '\n';
    for (const auto& c : r.curves) curves << format_curve(c) << '\n';
    for (const auto& e : r.estimands) estimands << format_estimand(e) << '\n';
    metrics.flush();
    curves.flush();
    estimands.flush();
    all_rows.insert(all_rows.end(), r.metrics.begin(), r.metrics.end());
    ++summary.done;
    if (on_seed_done && !on_seed_done({summary.done, summary.total, &r})) {
      cancel.store(true);
      break;
    }
  }
  cancel.store(true);
  ready.notify_all();
  for (auto& t : pool) t.join();
  summary.cancelled = summary.done < summary.total;

  write_aggregate(summary.aggregate, comments, all_rows);
  return summary;
}

void cmd_metrics(const std::filesystem::path& metrics_csv, const std::filesystem::path& out) {
  const ParsedMetrics parsed = read_metrics(metrics_csv);
  write_aggregate(out, parsed.comments, parsed.rows);
}

}  // namespace c2g::app
