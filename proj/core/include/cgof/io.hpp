#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cgof/gof.hpp"
#include "cgof/mixture.hpp"
#include "cgof/sim.hpp"

namespace cgof::io {

/// Comma-delimited table with a header row.
struct Table {
  std::vector<std::string> header;
  Matrix values;
};

/// Reads a header row plus rows of decimal reals. Ragged or unparsable rows
/// raise ValidationError naming the file and 1-based line number.
Table read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Table& table);

/// Posterior files: header c1..cK, rows on the simplex within 1e-6.
PosteriorMatrix read_posteriors(const std::filesystem::path& path);
void write_posteriors(const std::filesystem::path& path, const PosteriorMatrix& posteriors);

/// Category-count sidecar of categorical data: one line of comma-separated
/// counts, one per column.
std::vector<int> read_categories(const std::filesystem::path& path);
void write_categories(const std::filesystem::path& path, const std::vector<int>& categories);

/// Mixture documents (spec + parameters) as JSON.
std::string params_to_json(const MixtureSpec& spec, const MixtureParams& params);
std::pair<MixtureSpec, MixtureParams> params_from_json(const std::string& text);
void write_params(const std::filesystem::path& path, const MixtureSpec& spec,
                  const MixtureParams& params);
std::pair<MixtureSpec, MixtureParams> read_params(const std::filesystem::path& path);

std::string report_to_json(const GofReport& report);
GofReport report_from_json(const std::string& text);

std::string sim_result_to_json(const SimResult& result);
SimResult sim_result_from_json(const std::string& text);

void write_qq(const std::filesystem::path& path, const std::vector<std::pair<double, double>>& table);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace cgof::io
