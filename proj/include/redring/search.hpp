#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "redring/nn.hpp"
#include "redring/simulator.hpp"

namespace redring {

/// Fraction b = num/den of the full-ring DReLU bits. A config satisfies it iff
/// sum_g width_g * numel_g <= b * N * sum_g numel_g.
struct Budget {
  std::uint64_t num = 1, den = 1;

  // "8/64", "0.125" or "1".
  static Budget parse(const std::string& text);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string to_string() const;
  // Right-hand side scaled by den: num * N * sum numel.
  std::uint64_t limit(int ring_bits, std::uint64_t total_numel) const;
};

// Width in bits of a group window; identity counts as 0.
int window_bits(const std::optional<BitWindow>& w);
// sum_g width_g * numel_g
std::uint64_t weighted_bits(const ReluConfig& config, const std::vector<std::size_t>& numel);
double bits_fraction(const ReluConfig& config, const std::vector<std::size_t>& numel, int ring_bits);
bool budget_satisfied(const ReluConfig& config, const std::vector<std::size_t>& numel, int ring_bits,
                      const Budget& budget);

enum class StopReason { Continue, Stop1, Stop2, Stop3 };
const char* stop_reason_name(StopReason r);

struct NodeState {
  std::optional<double> optimistic;  // unknown before the node is evaluated
  double threshold = 0.0;
  std::optional<double> incumbent;
  std::uint64_t bits_lower_bound = 0;  // assigned bits plus the cheapest completion, times den
  std::uint64_t bits_limit = 0;
};

/// Stop3 if the bound exceeds the limit, else Stop1 if optimistic < threshold,
/// else Stop2 if optimistic < incumbent.
StopReason early_stop_check(const NodeState& node);

struct SearchTrace {
  std::uint64_t nodes = 0;        // (group, width) nodes evaluated
  std::uint64_t evaluations = 0;  // simulator runs
  std::uint64_t leaves = 0;
  std::uint64_t stop1 = 0, stop2 = 0, stop3 = 0;
  friend bool operator==(const SearchTrace&, const SearchTrace&) = default;
};

struct SearchResult {
  std::string mode;
  ReluConfig config;
  double accuracy = 0.0;
  double baseline_accuracy = 0.0;
  double bits_fraction = 1.0;
  std::optional<Budget> budget;
  std::optional<double> threshold;
  std::vector<int> k_range;
  std::vector<std::size_t> group_numel;
  SearchTrace trace;

  nlohmann::json to_json() const;
  friend bool operator==(const SearchResult& a, const SearchResult& b) {
    return a.to_json() == b.to_json();
  }
};

struct SearchOptions {
  Budget budget;
  std::optional<double> threshold;  // default: baseline - 0.05
  std::vector<int> candidate_widths{0, 2, 3, 4, 6, 8, 12, 16};
  std::uint64_t seed = 0;
};

struct LocalOpt {
  std::optional<BitWindow> window;
  double accuracy = -1.0;
  bool valid = false;  // false if every candidate overflowed
};

/// Best (k, m) with k - m = width for `group`, groups before it fixed by
/// `partial`, later groups at the full window. `act` enters the group's first
/// layer. m runs from 0 to k_cap - width; ties keep the smaller m.
LocalOpt local_opt_km(const SimEvaluator& eval, int group, int width, const ReluConfig& partial,
                      const Tensor& act, int k_cap);

SearchResult search_eco(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                        std::uint64_t seed);

// Throws InfeasibleError when no leaf survives.
SearchResult search_budget(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                           const SearchOptions& options);

}  // namespace redring
