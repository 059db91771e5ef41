#include "rlfa/population.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rlfa/errors.hpp"

namespace rlfa {
namespace {

void check_unit_interval(const std::vector<double>& values, std::size_t n,
                         std::string_view what) {
  if (values.size() != n) {
    throw Error(ErrorKind::validation,
                std::string(what) + " has " + std::to_string(values.size()) +
                    " entries, expected " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
      throw Error(ErrorKind::validation, std::string(what) + " at index " +
                                             std::to_string(i) +
                                             " is outside [0,1]");
    }
  }
}

// RFC 4180-ish: commas, double quotes with "" escapes, CR/LF line endings.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        any = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        any = true;
        break;
      case '\r':
        break;
      case '\n':
        if (any || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        any = false;
        break;
      default:
        field.push_back(c);
        any = true;
    }
  }
  if (quoted) throw Error(ErrorKind::format, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, std::size_t row, std::string_view column) {
  cell = trim(cell);
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorKind::format, "row " + std::to_string(row) + ": column '" +
                                       std::string(column) + "' is not a number: '" +
                                       std::string(cell) + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<double> normalize_weights(std::span<const double> reported) {
  if (reported.empty()) {
    throw Error(ErrorKind::validation, "reported values are empty");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < reported.size(); ++i) {
    if (!(reported[i] > 0.0) || !std::isfinite(reported[i])) {
      throw Error(ErrorKind::validation, "reported value at index " + std::to_string(i) +
                                             " must be positive");
    }
    total += reported[i];
  }
  std::vector<double> weights(reported.size());
  for (std::size_t i = 0; i < reported.size(); ++i) weights[i] = reported[i] / total;
  return weights;
}

Population::Population(std::vector<std::string> ids, std::vector<double> reported,
                       std::optional<std::vector<double>> scores,
                       std::optional<std::vector<double>> truth)
    : ids_(std::move(ids)),
      reported_(std::move(reported)),
      weights_(normalize_weights(reported_)),
      scores_(std::move(scores)),
      truth_(std::move(truth)) {
  const std::size_t n = reported_.size();
  if (ids_.empty()) {
    ids_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) ids_.push_back(std::to_string(i));
  } else if (ids_.size() != n) {
    throw Error(ErrorKind::validation, "ids and reported values differ in length");
  }
  if (scores_) check_unit_interval(*scores_, n, "score");
  if (truth_) check_unit_interval(*truth_, n, "true_f");
  for (double v : reported_) total_value_ += v;
}

const std::vector<double>& Population::scores() const {
  if (!scores_) throw Error(ErrorKind::configuration, "population has no scores");
  return *scores_;
}

const std::vector<double>& Population::truth() const {
  if (!truth_) throw Error(ErrorKind::configuration, "population has no true_f values");
  return *truth_;
}

double Population::true_misstatement() const {
  const auto& f = truth();
  // Compensated so that m* agrees with running audited sums to ~1 ulp.
  long double sum = 0.0L;
  for (std::size_t i = 0; i < f.size(); ++i)
    sum += static_cast<long double>(weights_[i]) * f[i];
  return static_cast<double>(sum);
}

Population parse_population_csv(std::string_view text) {
  auto rows = split_csv(text);
  if (rows.empty()) throw Error(ErrorKind::format, "missing header row");
  const auto& header = rows.front();
  int id_col = -1, value_col = -1, score_col = -1, truth_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string_view name = trim(header[c]);
    if (c == 0 && name.size() >= 3 && name.substr(0, 3) == "\xEF\xBB\xBF") name.remove_prefix(3);
    if (name == "id") id_col = static_cast<int>(c);
    else if (name == "reported_value") value_col = static_cast<int>(c);
    else if (name == "score") score_col = static_cast<int>(c);
    else if (name == "true_f") truth_col = static_cast<int>(c);
  }
  if (value_col < 0) throw Error(ErrorKind::format, "missing required column 'reported_value'");

  std::vector<std::string> ids;
  std::vector<double> reported;
  std::vector<double> scores;
  std::vector<double> truth;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    auto cell = [&](int col, std::string_view name) -> std::string_view {
      if (static_cast<std::size_t>(col) >= row.size()) {
        throw Error(ErrorKind::format, "row " + std::to_string(line) + ": missing column '" +
                                           std::string(name) + "'");
      }
      return row[static_cast<std::size_t>(col)];
    };
    ids.emplace_back(id_col >= 0 ? std::string(trim(cell(id_col, "id")))
                                 : std::to_string(r - 1));
    const double value = parse_number(cell(value_col, "reported_value"), line, "reported_value");
    if (!(value > 0.0)) {
      throw Error(ErrorKind::validation, "row " + std::to_string(line) +
                                             ": reported_value must be positive");
    }
    reported.push_back(value);
    if (score_col >= 0) scores.push_back(parse_number(cell(score_col, "score"), line, "score"));
    if (truth_col >= 0) truth.push_back(parse_number(cell(truth_col, "true_f"), line, "true_f"));
  }
  if (reported.empty()) throw Error(ErrorKind::validation, "population has no rows");

  std::optional<std::vector<double>> s, f;
  if (score_col >= 0) s = std::move(scores);
  if (truth_col >= 0) f = std::move(truth);
  return Population(std::move(ids), std::move(reported), std::move(s), std::move(f));
}

Population load_population(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open population file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_population_csv(buf.str());
}

std::string to_csv(const Population& population) {
  std::string out = "id,reported_value";
  if (population.has_scores()) out += ",score";
  if (population.has_truth()) out += ",true_f";
  out += '\n';
  for (std::size_t i = 0; i < population.size(); ++i) {
    const std::string& id = population.ids()[i];
    if (id.find_first_of(",\"\n\r") != std::string::npos) {
      out += '"';
      for (char c : id) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += id;
    }
    out += ',' + format_double(population.reported()[i]);
    if (population.has_scores()) out += ',' + format_double(population.scores()[i]);
    if (population.has_truth()) out += ',' + format_double(population.truth()[i]);
    out += '\n';
  }
  return out;
}

}  // namespace rlfa
