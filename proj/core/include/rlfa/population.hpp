#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rlfa {

// Maps reported monetary values to weights pi(i) = M(i) / sum M.
// Throws Error{validation} on an empty list or a non-positive entry.
std::vector<double> normalize_weights(std::span<const double> reported);

// The audited population. Immutable once constructed; share it by
// `std::shared_ptr<const Population>` across sessions and trials.
class Population {
 public:
  // Validates every invariant and computes the weights. `ids` may be empty,
  // in which case positional ids ("0", "1", ...) are assigned.
  Population(std::vector<std::string> ids, std::vector<double> reported,
             std::optional<std::vector<double>> scores = std::nullopt,
             std::optional<std::vector<double>> truth = std::nullopt);

  std::size_t size() const noexcept { return reported_.size(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<double>& reported() const noexcept { return reported_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double total_value() const noexcept { return total_value_; }

  bool has_scores() const noexcept { return scores_.has_value(); }
  bool has_truth() const noexcept { return truth_.has_value(); }
  const std::vector<double>& scores() const;
  const std::vector<double>& truth() const;

  // m* = sum_i pi(i) f(i). Requires truth.
  double true_misstatement() const;

 private:
  std::vector<std::string> ids_;
  std::vector<double> reported_;
  std::vector<double> weights_;
  std::optional<std::vector<double>> scores_;
  std::optional<std::vector<double>> truth_;
  double total_value_ = 0.0;
};

// CSV with header row; `reported_value` is required, `id`, `score` and
// `true_f` are optional and unknown columns are ignored.
Population parse_population_csv(std::string_view text);
Population load_population(const std::filesystem::path& path);

// Emits the same CSV layout with 17 significant digits so that
// `parse_population_csv(to_csv(p))` reproduces `p` exactly.
std::string to_csv(const Population& population);

}  // namespace rlfa
