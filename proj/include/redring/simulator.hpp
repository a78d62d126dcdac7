#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "redring/nn.hpp"
#include "redring/prng.hpp"

namespace redring {

struct SimConfig {
  ReluConfig relu;
  std::uint64_t seed = 0;
};

// Share masks for `count` elements of one ReLU layer, laid out sample-major.
// Sample j uses stream (seed, layer, first_sample + j), so any batch split of
// the same samples sees the same masks.
std::vector<std::uint64_t> sim_masks(std::uint64_t seed, std::size_t layer, std::size_t first_sample,
                                     std::size_t samples, std::size_t per_sample);

struct SimReluOutcome {
  std::size_t range_violations = 0;   // encode overflows
  std::vector<std::uint8_t> decisions;  // DReLU bit per element
};

/// Per element: e = encode(x_f), shares (e + r, -r), t = slice(s0) + slice(s1)
/// on the small ring, d = 1 - msb(t). Output is x_f if d = 1, else 0; an
/// element that encodes to 0 yields max(x_f, 0) either way. nullopt is the
/// identity.
Tensor sim_relu(const Tensor& x, const std::optional<BitWindow>& w, const FixedPointConfig& fp,
                std::span<const std::uint64_t> masks, SimReluOutcome* outcome = nullptr);
// Draws one mask per element from rng, in order (same order as share_arith).
Tensor sim_relu(const Tensor& x, const std::optional<BitWindow>& w, const FixedPointConfig& fp,
                Prng& rng, SimReluOutcome* outcome = nullptr);

struct SimResult {
  Tensor logits;
  double accuracy = 0.0;
  std::size_t range_violations = 0;
  std::vector<std::vector<std::uint8_t>> decisions;  // per model layer; empty for non-ReLU
};

SimResult sim_forward(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                      const SimConfig& config, std::size_t first_sample = 0,
                      bool keep_decisions = false);

/// Per group, the smallest k with -2^(k-1) <= encode(x_f) < 2^(k-1) for every
/// activation entering the group's ReLUs under exact ReLU.
std::vector<int> collect_activation_ranges(const Model& model, const Tensor& inputs);

/// sim_forward with cached masks and resumable prefixes, for search.
class SimEvaluator {
 public:
  SimEvaluator(const Model& model, Tensor inputs, std::vector<int> labels, std::uint64_t seed);

  const Model& model() const noexcept { return model_; }
  const Tensor& inputs() const noexcept { return inputs_; }
  // First layer index of a ReLU group.
  std::size_t group_start(int group) const { return group_start_.at(static_cast<std::size_t>(group)); }

  // Runs layers [from, to) on `act`.
  Tensor advance(const Tensor& act, std::size_t from, std::size_t to, const ReluConfig& config,
                 SimResult* info = nullptr) const;
  SimResult run_from(std::size_t from, const Tensor& act, const ReluConfig& config,
                     bool keep_decisions = false) const;
  SimResult run(const ReluConfig& config, bool keep_decisions = false) const;

  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  Model model_;
  Tensor inputs_;
  std::vector<int> labels_;
  std::vector<std::vector<std::uint64_t>> masks_;  // per layer
  std::vector<std::size_t> group_start_;
  mutable std::size_t evaluations_ = 0;
};

}  // namespace redring
