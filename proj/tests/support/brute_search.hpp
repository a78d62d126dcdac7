#pragma once

// Exhaustive budget search over the same space the DFS explores: per group a
// width from the candidate set plus N, every (k, m) with k - m = width and
// k <= cap, evaluated through plain sim_forward.

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "redring/nn.hpp"
#include "redring/simulator.hpp"

namespace redring::testing {

// Smallest k holding every encoded activation that reaches each group's ReLUs.
inline std::vector<int> brute_k_range(const Model& model, const Tensor& x) {
  std::vector<std::int64_t> peak(static_cast<std::size_t>(model.num_groups()), 0);
  Tensor cur = x;
  for (const Layer& layer : model.layers) {
    if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      auto& p = peak[static_cast<std::size_t>(r->group)];
      for (double v : cur.data) {
        const std::int64_t e = to_signed(encode_fixed_word(v, model.fixed_point), model.fixed_point.ring_bits);
        p = std::max(p, e < 0 ? -e - 1 : e);
      }
      cur = relu_plain(cur);
    } else {
      cur = apply_layer(layer, cur);
    }
  }
  std::vector<int> k;
  for (auto p : peak) {
    int need = 1;
    while ((std::int64_t{1} << (need - 1)) <= p) ++need;
    k.push_back(need);
  }
  return k;
}

inline std::vector<std::optional<BitWindow>> brute_windows(int width, int cap, int N) {
  if (width == 0) return {std::nullopt};
  if (width == N) return {BitWindow{N, 0}};
  if (width >= cap) return {BitWindow{width, 0}};
  std::vector<std::optional<BitWindow>> out;
  for (int m = 0; m + width <= cap; ++m) out.push_back(BitWindow{m + width, m});
  return out;
}

struct BruteResult {
  std::optional<double> accuracy;
  std::vector<ReluConfig> argmax;  // every config reaching the optimum
  std::size_t evaluated = 0;
};

inline BruteResult brute_force_budget(const Model& model, const Tensor& x, const std::vector<int>& labels,
                                      std::uint64_t seed, std::uint64_t num, std::uint64_t den,
                                      double threshold, std::vector<int> widths) {
  const int N = model.fixed_point.ring_bits;
  widths.push_back(N);
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  const auto numel = model.group_numel();
  std::uint64_t total = 0;
  for (auto n : numel) total += n;
  const auto caps = brute_k_range(model, x);
  const std::size_t G = numel.size();

  BruteResult best;
  ReluConfig cfg;
  cfg.groups.resize(G);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t g, std::uint64_t bits) {
    if (g == G) {
      if (bits * den > num * static_cast<std::uint64_t>(N) * total) return;
      ++best.evaluated;
      const SimResult r = sim_forward(model, x, labels, {cfg, seed});
      if (r.range_violations || r.accuracy < threshold) return;
      if (!best.accuracy || r.accuracy > *best.accuracy) {
        best.accuracy = r.accuracy;
        best.argmax.clear();
      }
      if (r.accuracy == *best.accuracy) best.argmax.push_back(cfg);
      return;
    }
    for (int w : widths) {
      for (const auto& win : brute_windows(w, std::min(N, caps[g] + 1), N)) {
        cfg.groups[g] = win;
        rec(g + 1, bits + static_cast<std::uint64_t>(w) * numel[g]);
      }
    }
  };
  rec(0, 0);
  return best;
}

// Every width assignment, no pruning; each group's (k, m) is the first argmax
// with later groups at full width, as the DFS picks it. Threshold and budget
// apply to leaves only.
inline BruteResult brute_force_assignments(const Model& model, const Tensor& x, const std::vector<int>& labels,
                                           std::uint64_t seed, std::uint64_t num, std::uint64_t den,
                                           double threshold, std::vector<int> widths) {
  const int N = model.fixed_point.ring_bits;
  widths.push_back(N);
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  const auto numel = model.group_numel();
  std::uint64_t total = 0;
  for (auto n : numel) total += n;
  const auto caps = brute_k_range(model, x);
  const std::size_t G = numel.size();

  BruteResult best;
  std::vector<int> assign(G);
  std::function<void(std::size_t, std::uint64_t)> rec = [&](std::size_t g, std::uint64_t bits) {
    if (g < G) {
      for (int w : widths) {
        assign[g] = w;
        rec(g + 1, bits + static_cast<std::uint64_t>(w) * numel[g]);
      }
      return;
    }
    if (bits * den > num * static_cast<std::uint64_t>(N) * total) return;
    ReluConfig cfg = ReluConfig::full(model);
    double acc = -1;
    for (std::size_t h = 0; h < G; ++h) {
      std::optional<std::optional<BitWindow>> pick;
      double pick_acc = -1;
      for (const auto& win : brute_windows(assign[h], std::min(N, caps[h] + 1), N)) {
        cfg.groups[h] = win;
        ++best.evaluated;
        const SimResult r = sim_forward(model, x, labels, {cfg, seed});
        if (r.range_violations) continue;
        if (!pick || r.accuracy > pick_acc) {
          pick = win;
          pick_acc = r.accuracy;
        }
      }
      if (!pick) return;
      cfg.groups[h] = *pick;
      acc = pick_acc;
    }
    if (acc < threshold) return;
    if (!best.accuracy || acc > *best.accuracy) {
      best.accuracy = acc;
      best.argmax.clear();
    }
    if (acc == *best.accuracy) best.argmax.push_back(cfg);
  };
  rec(0, 0);
  return best;
}

}  // namespace redring::testing
