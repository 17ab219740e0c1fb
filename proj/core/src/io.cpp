#include "cgof/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cgof/error.hpp"
#include "json.hpp"

namespace cgof::io {
namespace {

using nlohmann::json;

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double to_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ValidationError("expected a number, got " + j.dump());
}

json vector_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

std::vector<double> vector_from(const json& j) {
  std::vector<double> out;
  for (const json& x : j) out.push_back(to_number(x));
  return out;
}

template <typename Derived>
json vector_json(const Eigen::MatrixBase<Derived>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i)));
  return out;
}

Eigen::MatrixXd matrix_from(const json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != static_cast<std::size_t>(out.cols())) throw ValidationError("ragged matrix in document");
    for (std::size_t c = 0; c < j[i].size(); ++c) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = to_number(j[i][c]);
    }
  }
  return out;
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed ") + what + " document: " + e.what());
  }
}

template <typename F>
auto guarded(const char* what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid ") + what + " document: " + e.what());
  }
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
  return out;
}

json basis_json(const BasisSet& basis) {
  json terms = json::array();
  for (const BernsteinTerm& t : basis.terms) {
    terms.push_back({{"exponents", t.exponents}, {"coefficient", number(t.coefficient)}});
  }
  return {{"kind", std::string(to_string(basis.kind))},
          {"K", basis.K},
          {"p", basis.p},
          {"terms", terms},
          {"cut_points", vector_json(basis.cut_points)}};
}

BasisSet basis_from(const json& j) {
  BasisSet basis;
  basis.kind = basis_kind_from_string(j.at("kind").get<std::string>());
  basis.K = j.at("K").get<int>();
  basis.p = j.at("p").get<int>();
  for (const json& t : j.at("terms")) {
    basis.terms.push_back(
        BernsteinTerm{t.at("exponents").get<std::vector<int>>(), to_number(t.at("coefficient"))});
  }
  basis.cut_points = vector_from(j.at("cut_points"));
  if (basis.kind == BasisKind::kIndicatorPca) basis.contrasts = helmert_contrasts(basis.p);
  return basis;
}

ElStatus status_from(const std::string& s) {
  if (s == "converged") return ElStatus::kConverged;
  if (s == "hull_violation") return ElStatus::kHullViolation;
  if (s == "max_iter") return ElStatus::kMaxIter;
  throw ValidationError("unknown solver status '" + s + "'");
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  const std::string where = path.string();
  Table table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw ValidationError(where + ": missing header row");
  for (const std::string& field : split(line)) table.header.push_back(trim(field));
  const std::size_t cols = table.header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != cols) {
      throw ValidationError(where + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v) || !std::isfinite(v)) {
        throw ValidationError(where + ": line " + std::to_string(line_no) + ", column " +
                              std::to_string(c + 1) + ": '" + trim(fields[c]) +
                              "' is not a finite number");
      }
      values.push_back(v);
    }
    ++rows;
  }
  table.values = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(rows),
                                          static_cast<Eigen::Index>(cols));
  return table;
}

void write_csv(const std::filesystem::path& path, const Table& table) {
  std::ofstream out = open_out(path);
  for (std::size_t c = 0; c < table.header.size(); ++c) out << (c ? "," : "") << table.header[c];
  out << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
      out << (c ? "," : "") << format_double(table.values(i, c));
    }
    out << '\n';
  }
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

PosteriorMatrix read_posteriors(const std::filesystem::path& path) {
  Table table = read_csv(path);
  for (std::size_t k = 0; k < table.header.size(); ++k) {
    if (table.header[k] != "c" + std::to_string(k + 1)) {
      throw ValidationError(path.string() + ": posterior header must be c1..cK, found '" +
                            table.header[k] + "'");
    }
  }
  try {
    validate_posteriors(table.values, 1e-6);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return std::move(table.values);
}

void write_posteriors(const std::filesystem::path& path, const PosteriorMatrix& posteriors) {
  Table table;
  for (Eigen::Index k = 0; k < posteriors.cols(); ++k) table.header.push_back("c" + std::to_string(k + 1));
  table.values = posteriors;
  write_csv(path, table);
}

std::vector<int> read_categories(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  while (std::getline(in, line) && trim(line).empty()) {
  }
  std::vector<int> out;
  for (const std::string& field : split(line)) {
    const std::string t = trim(field);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || v < 2) {
      throw ValidationError(path.string() + ": category count '" + t + "' is not an integer >= 2");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError(path.string() + ": no category counts");
  return out;
}

void write_categories(const std::filesystem::path& path, const std::vector<int>& categories) {
  std::ofstream out = open_out(path);
  for (std::size_t j = 0; j < categories.size(); ++j) out << (j ? "," : "") << categories[j];
  out << '\n';
}

std::string params_to_json(const MixtureSpec& spec, const MixtureParams& params) {
  json components = json::array();
  for (const ComponentParams& c : params.components) {
    json comp = json::object();
    if (!c.location.empty()) comp["location"] = vector_json(c.location);
    if (!c.scale.empty()) comp["scale"] = vector_json(c.scale);
    if (!c.category_probs.empty()) {
      json rows = json::array();
      for (const auto& row : c.category_probs) rows.push_back(vector_json(row));
      comp["category_probs"] = rows;
    }
    if (c.dependence.size() > 0) comp["dependence"] = matrix_json(c.dependence);
    components.push_back(comp);
  }
  json doc = {{"family", std::string(to_string(spec.family))},
              {"K", spec.K},
              {"d", spec.d},
              {"proportions", vector_json(params.proportions)},
              {"components", components}};
  if (!spec.categories.empty()) doc["categories"] = spec.categories;
  if (spec.family == Family::kGaussianCopula) {
    doc["copula_marginal"] = std::string(to_string(spec.copula_marginal));
  }
  return doc.dump(2) + "\n";
}

std::pair<MixtureSpec, MixtureParams> params_from_json(const std::string& text) {
  const json doc = parse(text, "parameter");
  return guarded("parameter", [&] {
    MixtureSpec spec;
    spec.family = family_from_string(doc.at("family").get<std::string>());
    spec.K = doc.at("K").get<int>();
    spec.d = doc.at("d").get<int>();
    if (doc.contains("categories")) spec.categories = doc["categories"].get<std::vector<int>>();
    if (doc.contains("copula_marginal")) {
      spec.copula_marginal = marginal_from_string(doc["copula_marginal"].get<std::string>());
    }
    MixtureParams params;
    params.proportions = vector_from(doc.at("proportions"));
    for (const json& comp : doc.at("components")) {
      ComponentParams c;
      if (comp.contains("location")) c.location = vector_from(comp["location"]);
      if (comp.contains("scale")) c.scale = vector_from(comp["scale"]);
      if (comp.contains("category_probs")) {
        for (const json& row : comp["category_probs"]) c.category_probs.push_back(vector_from(row));
      }
      if (comp.contains("dependence")) c.dependence = matrix_from(comp["dependence"]);
      params.components.push_back(std::move(c));
    }
    return std::make_pair(spec, params);
  });
}

void write_params(const std::filesystem::path& path, const MixtureSpec& spec,
                  const MixtureParams& params) {
  write_text(path, params_to_json(spec, params));
}

std::pair<MixtureSpec, MixtureParams> read_params(const std::filesystem::path& path) {
  try {
    return params_from_json(read_text(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string report_to_json(const GofReport& report) {
  json blocks = json::array();
  for (const BlockResult& b : report.blocks) {
    blocks.push_back({{"size", b.size},
                      {"statistic", number(b.statistic)},
                      {"status", std::string(to_string(b.status))},
                      {"iterations", b.iterations}});
  }
  const json doc = {
      {"n", report.n},
      {"K", report.K},
      {"B", report.B},
      {"p", report.p},
      {"alpha", number(report.alpha)},
      {"alpha_n", number(report.alpha_n)},
      {"threshold", number(report.threshold)},
      {"max_statistic", number(report.max_statistic)},
      {"reject", report.reject},
      {"blocks", blocks},
      {"basis", basis_json(report.basis)},
      {"basis_description", report.basis_description},
      {"expectation",
       {{"mean", vector_json(report.expectation.mean)},
        {"std_error", vector_json(report.expectation.std_error)},
        {"draws", report.expectation.draws}}},
      {"seed", report.seed}};
  return doc.dump(2) + "\n";
}

GofReport report_from_json(const std::string& text) {
  const json doc = parse(text, "report");
  return guarded("report", [&] {
    GofReport r;
    r.n = doc.at("n").get<std::size_t>();
    r.K = doc.at("K").get<int>();
    r.B = doc.at("B").get<int>();
    r.p = doc.at("p").get<int>();
    r.alpha = to_number(doc.at("alpha"));
    r.alpha_n = to_number(doc.at("alpha_n"));
    r.threshold = to_number(doc.at("threshold"));
    r.max_statistic = to_number(doc.at("max_statistic"));
    r.reject = doc.at("reject").get<bool>();
    for (const json& b : doc.at("blocks")) {
      r.blocks.push_back(BlockResult{b.at("size").get<std::size_t>(), to_number(b.at("statistic")),
                                     status_from(b.at("status").get<std::string>()),
                                     b.at("iterations").get<int>()});
    }
    r.basis = basis_from(doc.at("basis"));
    r.basis_description = doc.at("basis_description").get<std::string>();
    const json& e = doc.at("expectation");
    const auto mean = vector_from(e.at("mean"));
    const auto se = vector_from(e.at("std_error"));
    r.expectation.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    r.expectation.std_error = Eigen::Map<const Eigen::VectorXd>(se.data(), static_cast<Eigen::Index>(se.size()));
    r.expectation.draws = e.at("draws").get<std::size_t>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    return r;
  });
}

std::string sim_result_to_json(const SimResult& result) {
  json reps = json::array();
  for (const ReplicateRecord& rec : result.replicates) {
    json r = {{"index", rec.index},
              {"stream_id", rec.stream_id},
              {"failed", rec.failed},
              {"reject", rec.reject},
              {"max_statistic", number(rec.max_statistic)},
              {"threshold", number(rec.threshold)}};
    if (rec.failed) r["error"] = rec.error;
    reps.push_back(r);
  }
  const json doc = {{"scenario", result.scenario},
                    {"n", result.n},
                    {"requested", result.requested},
                    {"N", result.N},
                    {"failures", result.failures},
                    {"rejections", result.rejections},
                    {"proportion", number(result.proportion)},
                    {"std_error", number(result.std_error)},
                    {"seed", result.seed},
                    {"replicates", reps}};
  return doc.dump(2) + "\n";
}

SimResult sim_result_from_json(const std::string& text) {
  const json doc = parse(text, "simulation result");
  return guarded("simulation result", [&] {
    SimResult s;
    s.scenario = doc.at("scenario").get<std::string>();
    s.n = doc.at("n").get<std::size_t>();
    s.requested = doc.at("requested").get<std::size_t>();
    s.N = doc.at("N").get<std::size_t>();
    s.failures = doc.at("failures").get<std::size_t>();
    s.rejections = doc.at("rejections").get<std::size_t>();
    s.proportion = to_number(doc.at("proportion"));
    s.std_error = to_number(doc.at("std_error"));
    s.seed = doc.at("seed").get<std::uint64_t>();
    for (const json& r : doc.at("replicates")) {
      ReplicateRecord rec;
      rec.index = r.at("index").get<std::size_t>();
      rec.stream_id = r.at("stream_id").get<std::uint64_t>();
      rec.failed = r.at("failed").get<bool>();
      rec.reject = r.at("reject").get<bool>();
      rec.max_statistic = to_number(r.at("max_statistic"));
      rec.threshold = to_number(r.at("threshold"));
      if (r.contains("error")) rec.error = r["error"].get<std::string>();
      s.replicates.push_back(std::move(rec));
    }
    return s;
  });
}

void write_qq(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& table) {
  std::ofstream out = open_out(path);
  out << "empirical,theoretical\n";
  for (const auto& [e, t] : table) out << format_double(e) << ',' << format_double(t) << '\n';
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

}  // namespace cgof::io
