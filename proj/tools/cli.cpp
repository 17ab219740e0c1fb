#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cgof/em.hpp"
#include "cgof/error.hpp"
#include "cgof/gof.hpp"
#include "cgof/io.hpp"
#include "cgof/mixture.hpp"
#include "cgof/numerics.hpp"
#include "cgof/parallel.hpp"
#include "cgof/sim.hpp"
#include "json.hpp"

#ifndef CGOF_VERSION
#define CGOF_VERSION "unknown"
#endif

namespace cgof::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  json inputs = json::object();
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const json doc = {{"subcommand", subcommand}, {"version", CGOF_VERSION},
                      {"argv", argv},             {"inputs", inputs},
                      {"config", config},         {"seed", seed},
                      {"outputs", outputs},       {"elapsed_seconds", elapsed}};
    io::write_text(path, doc.dump(2) + "\n");
  }
};

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

std::vector<int> parse_k_range(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("invalid K range '" + text + "' (use a..b or a comma list)");
    }
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (lo < 1 || hi < lo) throw UsageError("invalid K range '" + text + "'");
    for (int k = lo; k <= hi; ++k) out.push_back(k);
  } else {
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
      const int k = to_int(part);
      if (k < 1) throw UsageError("K must be >= 1");
      out.push_back(k);
    }
  }
  if (out.empty()) throw UsageError("empty K range");
  return out;
}

std::vector<int> infer_categories(const Matrix& data) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    out.push_back(std::max(2, static_cast<int>(data.col(j).maxCoeff()) + 1));
  }
  return out;
}

// ---------------------------------------------------------------- fit
struct FitArgs {
  std::string data;
  std::string family;
  int K = 0;
  std::string k_range;
  std::string categories;
  std::string init = "centres";
  int starts = 20;
  double tol = 1e-8;
  int max_iter = 500;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out_dir;
};

int cmd_fit(const FitArgs& a, Manifest& manifest, std::ostream& out, std::ostream& err) {
  const Matrix data = io::read_csv(a.data).values;
  MixtureSpec spec;
  spec.family = family_from_string(a.family);
  if (!spec.fittable()) {
    throw UsageError("family '" + a.family + "' cannot be fitted; choose gaussian_diagonal, "
                     "poisson_product, bernoulli_product or multinomial_product");
  }
  spec.d = static_cast<int>(data.cols());
  if (spec.family == Family::kMultinomialProduct) {
    fs::path sidecar = a.categories.empty() ? fs::path(a.data + ".categories") : fs::path(a.categories);
    if (fs::exists(sidecar)) {
      spec.categories = io::read_categories(sidecar);
      manifest.inputs["categories"] = sidecar.string();
    } else if (!a.categories.empty()) {
      throw ValidationError("cannot open '" + sidecar.string() + "' for reading");
    } else {
      spec.categories = infer_categories(data);
      err << "note: no category sidecar found; category counts inferred from the data\n";
    }
    if (spec.categories.size() != static_cast<std::size_t>(spec.d)) {
      throw ValidationError("category sidecar lists " + std::to_string(spec.categories.size()) +
                            " variables, data has " + std::to_string(spec.d));
    }
  }
  std::vector<int> ks;
  if (!a.k_range.empty()) {
    ks = parse_k_range(a.k_range);
  } else if (a.K >= 1) {
    ks = {a.K};
  } else {
    throw UsageError("fit: give --K or --k-range");
  }

  EmSettings settings;
  if (a.init == "centres") {
    settings.init = EmInit::kRandomCentres;
  } else if (a.init == "posterior") {
    settings.init = EmInit::kRandomPosterior;
  } else {
    throw UsageError("unknown --init '" + a.init + "' (centres or posterior)");
  }
  settings.n_starts = a.starts;
  settings.tol = a.tol;
  settings.max_iter = a.max_iter;
  settings.workers = resolve_workers(a.workers);

  Rng rng(a.seed, derive_stream_id(0, StreamTag::kEmInit));
  const ModelSelection sel = select_K(spec, data, ks, settings, rng);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  io::write_params(dir / "params.json", sel.best.spec, sel.best.params);
  {
    io::Table table;
    table.header = {"K", "bic"};
    table.values.resize(static_cast<Eigen::Index>(sel.bic_table.size()), 2);
    for (std::size_t i = 0; i < sel.bic_table.size(); ++i) {
      table.values(static_cast<Eigen::Index>(i), 0) = sel.bic_table[i].first;
      table.values(static_cast<Eigen::Index>(i), 1) = sel.bic_table[i].second;
    }
    io::write_csv(dir / "bic.csv", table);
  }
  const Mixture model(sel.best.spec, sel.best.params);
  io::write_posteriors(dir / "posteriors.csv", model.posteriors(data));

  manifest.inputs["data"] = a.data;
  manifest.config = {{"family", a.family},     {"K", ks},         {"init", a.init},
                     {"starts", a.starts},     {"tol", a.tol},     {"max_iter", a.max_iter}};
  manifest.seed = a.seed;
  manifest.outputs = {(dir / "params.json").string(), (dir / "bic.csv").string(),
                      (dir / "posteriors.csv").string()};
  manifest.write(dir / "manifest.json");

  out << "family: " << a.family << "\n";
  for (const auto& [k, b] : sel.bic_table) out << "K=" << k << " BIC=" << io::format_double(b) << "\n";
  out << "selected K: " << sel.best.spec.K << "\n";
  out << "log-likelihood: " << io::format_double(sel.best.final_log_likelihood()) << "\n";
  out << "converged: " << (sel.best.converged ? "yes" : "no") << "\n";
  return kOk;
}

// ---------------------------------------------------------------- gof
struct GofArgs {
  std::string data;
  std::string params;
  std::string posteriors;
  std::string reference;
  double alpha = 0.05;
  std::string basis = "bernstein";
  std::string terms = "independent";
  std::size_t mc_draws = 100000;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
};

int cmd_gof(const GofArgs& a, Manifest& manifest, std::ostream& out) {
  GofConfig config;
  config.alpha = a.alpha;
  config.basis = basis_kind_from_string(a.basis);
  if (a.terms == "independent") {
    config.bernstein_terms = BernsteinTerms::kIndependent;
  } else if (a.terms == "all") {
    config.bernstein_terms = BernsteinTerms::kAll;
  } else {
    throw UsageError("unknown --bernstein-terms '" + a.terms + "' (independent or all)");
  }
  config.mc_draws = a.mc_draws;
  config.seed = a.seed;
  config.workers = a.workers;
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  GofReport report;
  if (!a.params.empty()) {
    if (!a.posteriors.empty()) throw UsageError("gof: give either --params or --posteriors");
    if (a.data.empty()) throw UsageError("gof: --params requires --data");
    const Matrix data = io::read_csv(a.data).values;
    const auto [spec, params] = io::read_params(a.params);
    report = gof_test(data, Mixture(spec, params), config);
    manifest.inputs = {{"data", a.data}, {"params", a.params}};
  } else if (!a.posteriors.empty()) {
    if (a.reference.empty()) {
      throw UsageError("gof: --posteriors requires --reference (posteriors of model draws)");
    }
    const PosteriorMatrix post = io::read_posteriors(a.posteriors);
    const PosteriorMatrix ref = io::read_posteriors(a.reference);
    if (!a.data.empty()) {
      const Matrix data = io::read_csv(a.data).values;
      if (data.rows() != post.rows()) {
        throw ValidationError("posterior file has " + std::to_string(post.rows()) +
                              " rows, data has " + std::to_string(data.rows()));
      }
      manifest.inputs["data"] = a.data;
    }
    report = gof_test(post, ref, config);
    manifest.inputs["posteriors"] = a.posteriors;
    manifest.inputs["reference"] = a.reference;
  } else {
    throw UsageError("gof: give --params or --posteriors");
  }

  io::write_text(a.out, io::report_to_json(report));
  manifest.config = {{"alpha", a.alpha}, {"basis", a.basis}, {"bernstein_terms", a.terms},
                     {"mc_draws", a.mc_draws}};
  manifest.seed = a.seed;
  manifest.outputs = {a.out};
  manifest.write(sibling(a.out, ".manifest.json"));

  char line[256];
  std::snprintf(line, sizeof line, "n: %zu  K: %d  B: %d  p: %d\n", report.n, report.K, report.B,
                report.p);
  out << line;
  std::snprintf(line, sizeof line, "alpha_n: %.6g\nq: %.6g\nY*: %.6g\n", report.alpha_n,
                report.threshold, report.max_statistic);
  out << line;
  out << "decision: " << (report.reject ? "reject" : "do not reject") << "\n";
  return kOk;
}

// ---------------------------------------------------------------- simulate
struct SimArgs {
  std::string scenario;
  std::size_t n = 1000;
  std::size_t replicates = 200;
  int workers = 0;
  std::uint64_t seed = 0;
  std::size_t mc_draws = 0;
  int starts = 20;
  std::string out;
  bool list = false;
};

int cmd_simulate(const SimArgs& a, Manifest& manifest, std::ostream& out) {
  if (a.list) {
    for (const ScenarioConfig& s : scenario_catalog()) out << s.id << "\n";
    return kOk;
  }
  if (a.scenario.empty()) throw UsageError("simulate: --scenario is required (see --list)");
  if (a.out.empty()) throw UsageError("simulate: --out is required");
  const ScenarioConfig* scenario = nullptr;
  try {
    scenario = &find_scenario(a.scenario);
  } catch (const LookupError& e) {
    throw UsageError(e.what());
  }
  SimOptions options;
  options.replicates = a.replicates;
  options.seed = a.seed;
  options.workers = a.workers;
  options.mc_draws = a.mc_draws;
  options.em.n_starts = a.starts;
  const SimResult result = run_scenario(*scenario, a.n, options);

  io::write_text(a.out, io::sim_result_to_json(result));
  const fs::path row_path = sibling(a.out, ".row.csv");
  const fs::path log_path = sibling(a.out, ".replicates.csv");
  {
    std::ostringstream row;
    const auto reference = scenario->reference_rejection.find(a.n);
    row << "scenario,n,N,proportion,std_error,failures,reference\n"
        << result.scenario << ',' << result.n << ',' << result.N << ','
        << io::format_double(result.proportion) << ',' << io::format_double(result.std_error) << ','
        << result.failures << ','
        << (reference == scenario->reference_rejection.end() ? std::string("") : io::format_double(reference->second))
        << "\n";
    io::write_text(row_path, row.str());
  }
  {
    std::ostringstream log;
    log << "index,stream_id,failed,reject,max_statistic,threshold,error\n";
    for (const ReplicateRecord& rec : result.replicates) {
      std::string error = rec.error;
      for (char& c : error) {
        if (c == ',' || c == '\n') c = ';';
      }
      log << rec.index << ',' << rec.stream_id << ',' << rec.failed << ',' << rec.reject << ','
          << io::format_double(rec.max_statistic) << ',' << io::format_double(rec.threshold) << ','
          << error << "\n";
    }
    io::write_text(log_path, log.str());
  }
  manifest.inputs = {{"scenario", a.scenario}};
  manifest.config = {{"n", a.n}, {"replicates", a.replicates}, {"mc_draws", a.mc_draws},
                     {"starts", a.starts}};
  manifest.seed = a.seed;
  manifest.outputs = {a.out, row_path.string(), log_path.string()};
  manifest.write(sibling(a.out, ".manifest.json"));

  char line[256];
  std::snprintf(line, sizeof line, "%s n=%zu N=%zu rejections=%zu proportion=%.3f se=%.3f failures=%zu\n",
                result.scenario.c_str(), result.n, result.N, result.rejections, result.proportion,
                result.std_error, result.failures);
  out << line;
  return kOk;
}

// ---------------------------------------------------------------- quantile
int cmd_quantile(int p, int B, double alpha, std::ostream& out) {
  if (p < 1) throw UsageError("quantile: p must be >= 1");
  if (B < 1) throw UsageError("quantile: B must be >= 1");
  if (!(alpha > 0.0 && alpha < 0.5)) throw UsageError("quantile: alpha must lie in (0, 0.5)");
  const double alpha_n = block_level(alpha, B);
  const double q = numerics::chi2_upper_quantile(p, alpha_n);
  char line[128];
  std::snprintf(line, sizeof line, "alpha_n: %.6g\nq: %.6g\n", alpha_n, q);
  out << line;
  return kOk;
}

// ---------------------------------------------------------------- qq
struct QqArgs {
  std::string data;
  std::string params;
  int component = 1;
  std::size_t draws = 10000;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_qq(const QqArgs& a, Manifest& manifest, std::ostream& out) {
  const Matrix data = io::read_csv(a.data).values;
  const auto [spec, params] = io::read_params(a.params);
  const Mixture model(spec, params);
  if (a.component < 1 || a.component > model.K()) {
    throw UsageError("qq: component must lie in 1.." + std::to_string(model.K()));
  }
  Rng rng(a.seed, derive_stream_id(0, StreamTag::kQq));
  const auto table = qq_export(data, model, a.component - 1, a.draws, rng);
  io::write_qq(a.out, table);
  manifest.inputs = {{"data", a.data}, {"params", a.params}};
  manifest.config = {{"component", a.component}, {"draws", a.draws}};
  manifest.seed = a.seed;
  manifest.outputs = {a.out};
  manifest.write(sibling(a.out, ".manifest.json"));
  out << "wrote " << table.size() << " quantile pairs to " << a.out << "\n";
  return kOk;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_rerun(const std::string& path, std::ostream& out, std::ostream& err) {
  const json doc = json::parse(io::read_text(path), nullptr, false);
  if (doc.is_discarded() || !doc.contains("argv")) {
    throw ValidationError("'" + path + "' is not a run manifest");
  }
  return dispatch(doc["argv"].get<std::vector<std::string>>(), out, err);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Goodness-of-fit testing for model-based clustering", "cgof"};
  app.set_version_flag("--version", CGOF_VERSION);
  app.require_subcommand(1);

  Manifest manifest;
  manifest.argv = args;

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a mixture by EM, optionally selecting K by BIC");
  fit_cmd->add_option("--data", fit.data, "CSV data file with header row")->required();
  fit_cmd->add_option("--family", fit.family, "Mixture family")->required();
  fit_cmd->add_option("--K", fit.K, "Number of components");
  fit_cmd->add_option("--k-range", fit.k_range, "Candidate K values, e.g. 1..6");
  fit_cmd->add_option("--categories", fit.categories, "Category-count sidecar (multinomial)");
  fit_cmd->add_option("--init", fit.init, "EM initialisation: centres or posterior");
  fit_cmd->add_option("--starts", fit.starts, "EM random starts")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--tol", fit.tol, "Relative log-likelihood tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-iter", fit.max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--seed", fit.seed, "Master seed");
  fit_cmd->add_option("--workers", fit.workers, "Worker threads (default: CGOF_WORKERS or all cores)");
  fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->required();

  GofArgs gof;
  auto* gof_cmd = app.add_subcommand("gof", "Run the goodness-of-fit test");
  gof_cmd->add_option("--data", gof.data, "CSV data file");
  gof_cmd->add_option("--params", gof.params, "Fitted mixture document");
  gof_cmd->add_option("--posteriors", gof.posteriors, "Posterior file (c1..cK) of the data");
  gof_cmd->add_option("--reference", gof.reference, "Posterior file of draws from the fitted model");
  gof_cmd->add_option("--alpha", gof.alpha, "Nominal level in (0, 0.5)");
  gof_cmd->add_option("--basis", gof.basis, "bernstein or indicator");
  gof_cmd->add_option("--bernstein-terms", gof.terms, "independent or all");
  gof_cmd->add_option("--mc-draws", gof.mc_draws, "Monte Carlo draws for centring");
  gof_cmd->add_option("--seed", gof.seed, "Master seed");
  gof_cmd->add_option("--workers", gof.workers, "Worker threads");
  gof_cmd->add_option("--out", gof.out, "Report path (JSON)")->required();

  SimArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a catalog scenario");
  sim_cmd->add_option("--scenario", sim.scenario, "Scenario id (see --list)");
  sim_cmd->add_option("--n", sim.n, "Sample size");
  sim_cmd->add_option("--replicates,-N", sim.replicates, "Replicates")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--workers", sim.workers, "Worker threads");
  sim_cmd->add_option("--seed", sim.seed, "Master seed");
  sim_cmd->add_option("--mc-draws", sim.mc_draws, "Override Monte Carlo draws");
  sim_cmd->add_option("--starts", sim.starts, "EM random starts")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", sim.out, "Result path (JSON)");
  sim_cmd->add_flag("--list", sim.list, "List scenario ids");

  int q_p = 0;
  int q_B = 0;
  double q_alpha = 0.05;
  auto* q_cmd = app.add_subcommand("quantile", "Print alpha_n and the rejection threshold");
  q_cmd->add_option("--p", q_p, "Number of moment functions")->required();
  q_cmd->add_option("--B", q_B, "Number of blocks")->required();
  q_cmd->add_option("--alpha", q_alpha, "Nominal level");

  QqArgs qq;
  auto* qq_cmd = app.add_subcommand("qq", "Export a posterior QQ table");
  qq_cmd->add_option("--data", qq.data, "CSV data file")->required();
  qq_cmd->add_option("--params", qq.params, "Fitted mixture document")->required();
  qq_cmd->add_option("--component", qq.component, "Component index (1-based)");
  qq_cmd->add_option("--draws", qq.draws, "Model draws")->check(CLI::PositiveNumber);
  qq_cmd->add_option("--seed", qq.seed, "Master seed");
  qq_cmd->add_option("--out", qq.out, "Output CSV")->required();

  std::string manifest_path;
  auto* rerun_cmd = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
  rerun_cmd->add_option("manifest", manifest_path, "Manifest file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (fit_cmd->parsed()) {
    manifest.subcommand = "fit";
    return cmd_fit(fit, manifest, out, err);
  }
  if (gof_cmd->parsed()) {
    manifest.subcommand = "gof";
    return cmd_gof(gof, manifest, out);
  }
  if (sim_cmd->parsed()) {
    manifest.subcommand = "simulate";
    return cmd_simulate(sim, manifest, out);
  }
  if (q_cmd->parsed()) return cmd_quantile(q_p, q_B, q_alpha, out);
  if (qq_cmd->parsed()) {
    manifest.subcommand = "qq";
    return cmd_qq(qq, manifest, out);
  }
  if (rerun_cmd->parsed()) return cmd_rerun(manifest_path, out, err);
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::logic_error& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  }
}

}  // namespace cgof::cli
