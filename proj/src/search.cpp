#include "redring/search.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

#include "redring/errors.hpp"

namespace redring {

Budget Budget::parse(const std::string& text) {
  Budget b;
  bool reduce = false;
  try {
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
      std::size_t used = 0;
      b.num = std::stoull(text.substr(0, slash), &used);
      if (used != slash) throw ConfigError("");
      const std::string den = text.substr(slash + 1);
      b.den = std::stoull(den, &used);
      if (used != den.size()) throw ConfigError("");
    } else {
      const auto dot = text.find('.');
      const std::string whole = text.substr(0, dot);
      const std::string frac = dot == std::string::npos ? "" : text.substr(dot + 1);
      if (frac.size() > 12 || (whole.empty() && frac.empty()) ||
          (whole + frac).find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("");
      }
      b.den = 1;
      for (std::size_t i = 0; i < frac.size(); ++i) b.den *= 10;
      b.num = (whole.empty() ? 0 : std::stoull(whole)) * b.den + (frac.empty() ? 0 : std::stoull(frac));
      reduce = true;
    }
  } catch (const std::exception&) {
    throw ConfigError("cannot parse budget '" + text + "'");
  }
  if (b.den == 0 || b.num == 0 || b.num > b.den) {
    throw ConfigError("budget must satisfy 0 < b <= 1, got '" + text + "'");
  }
  if (reduce) {
    const std::uint64_t g = std::gcd(b.num, b.den);
    b.num /= g;
    b.den /= g;
  }
  return b;
}

std::string Budget::to_string() const { return std::to_string(num) + "/" + std::to_string(den); }

std::uint64_t Budget::limit(int ring_bits, std::uint64_t total_numel) const {
  return num * static_cast<std::uint64_t>(ring_bits) * total_numel;
}

int window_bits(const std::optional<BitWindow>& w) { return w ? w->width() : 0; }

std::uint64_t weighted_bits(const ReluConfig& config, const std::vector<std::size_t>& numel) {
  if (config.groups.size() != numel.size()) throw ConfigError("config and group sizes disagree");
  std::uint64_t bits = 0;
  for (std::size_t g = 0; g < numel.size(); ++g) {
    bits += static_cast<std::uint64_t>(window_bits(config.groups[g])) * numel[g];
  }
  return bits;
}

double bits_fraction(const ReluConfig& config, const std::vector<std::size_t>& numel, int ring_bits) {
  const std::uint64_t total = std::accumulate(numel.begin(), numel.end(), std::uint64_t{0});
  if (total == 0) return 0.0;
  return static_cast<double>(weighted_bits(config, numel)) /
         (static_cast<double>(ring_bits) * static_cast<double>(total));
}

bool budget_satisfied(const ReluConfig& config, const std::vector<std::size_t>& numel, int ring_bits,
                      const Budget& budget) {
  const std::uint64_t total = std::accumulate(numel.begin(), numel.end(), std::uint64_t{0});
  return weighted_bits(config, numel) * budget.den <= budget.limit(ring_bits, total);
}

const char* stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::Continue: return "continue";
    case StopReason::Stop1: return "stop1";
    case StopReason::Stop2: return "stop2";
    case StopReason::Stop3: return "stop3";
  }
  return "continue";
}

StopReason early_stop_check(const NodeState& node) {
  if (node.bits_lower_bound > node.bits_limit) return StopReason::Stop3;
  if (!node.optimistic) return StopReason::Continue;
  if (*node.optimistic < node.threshold) return StopReason::Stop1;
  if (node.incumbent && *node.optimistic < *node.incumbent) return StopReason::Stop2;
  return StopReason::Continue;
}

nlohmann::json SearchResult::to_json() const {
  nlohmann::json j = config.to_json();
  j["mode"] = mode;
  j["accuracy"] = accuracy;
  j["baseline_accuracy"] = baseline_accuracy;
  j["bits_fraction"] = bits_fraction;
  j["budget"] = budget ? nlohmann::json(budget->to_string()) : nlohmann::json(nullptr);
  j["threshold"] = threshold ? nlohmann::json(*threshold) : nlohmann::json(nullptr);
  j["k_range"] = k_range;
  j["group_numel"] = group_numel;
  j["trace"] = {{"nodes", trace.nodes},   {"evaluations", trace.evaluations},
                {"leaves", trace.leaves}, {"stop1", trace.stop1},
                {"stop2", trace.stop2},   {"stop3", trace.stop3}};
  return j;
}

// ---------------------------------------------------------------------------

namespace {

void check_validation(const Tensor& inputs, const std::vector<int>& labels) {
  if (inputs.shape.empty() || inputs.shape[0] == 0) throw ConfigError("validation set is empty");
  if (labels.size() != inputs.shape[0]) throw ShapeError("validation labels do not match inputs");
}

std::vector<std::optional<BitWindow>> candidates_for(int width, int k_cap, int ring_bits) {
  std::vector<std::optional<BitWindow>> out;
  if (width == 0) {
    out.emplace_back(std::nullopt);
  } else if (width >= ring_bits) {
    out.emplace_back(BitWindow::full(ring_bits));
  } else if (width >= k_cap) {
    out.emplace_back(BitWindow{width, 0});
  } else {
    for (int m = 0; m + width <= k_cap; ++m) out.emplace_back(BitWindow{m + width, m});
  }
  return out;
}

}  // namespace

LocalOpt local_opt_km(const SimEvaluator& eval, int group, int width, const ReluConfig& partial,
                      const Tensor& act, int k_cap) {
  const Model& model = eval.model();
  const int N = model.fixed_point.ring_bits;
  ReluConfig cfg = partial;
  for (std::size_t g = static_cast<std::size_t>(group) + 1; g < cfg.groups.size(); ++g) {
    cfg.groups[g] = BitWindow::full(N);
  }
  LocalOpt best;
  for (const auto& w : candidates_for(width, k_cap, N)) {
    cfg.groups[static_cast<std::size_t>(group)] = w;
    const SimResult r = eval.run_from(eval.group_start(group), act, cfg);
    if (r.range_violations) continue;
    if (!best.valid || r.accuracy > best.accuracy) {
      best.window = w;
      best.accuracy = r.accuracy;
      best.valid = true;
    }
  }
  return best;
}

SearchResult search_eco(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                        std::uint64_t seed) {
  check_validation(inputs, labels);
  const SimEvaluator eval(model, inputs, labels, seed);
  const int N = model.fixed_point.ring_bits;
  const int G = model.num_groups();
  const ReluConfig full = ReluConfig::full(model);

  SearchResult res;
  res.mode = "eco";
  res.k_range = collect_activation_ranges(model, inputs);
  res.group_numel = model.group_numel();
  const SimResult base = eval.run(full, true);
  res.baseline_accuracy = base.accuracy;
  ++res.trace.evaluations;

  res.config = full;
  for (int g = 0; g < G; ++g) {
    const std::size_t start = eval.group_start(g);
    const Tensor act = eval.advance(inputs, 0, start, full);
    std::vector<std::size_t> layers;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
      const auto* r = std::get_if<ReluLayer>(&model.layers[i]);
      if (r && r->group == g) layers.push_back(i);
    }
    // Walk k down from N; the answer is the last k before any decision changes.
    int k_best = N;
    ReluConfig cfg = full;
    for (int k = N - 1; k >= 2; --k) {
      ++res.trace.nodes;
      cfg.groups[static_cast<std::size_t>(g)] = BitWindow{k, 0};
      const SimResult r = eval.run_from(start, act, cfg, true);
      ++res.trace.evaluations;
      bool same = r.range_violations == 0;
      for (std::size_t i : layers) same = same && r.decisions[i] == base.decisions[i];
      if (!same) break;
      k_best = k;
    }
    res.config.groups[static_cast<std::size_t>(g)] = BitWindow{k_best, 0};
  }
  res.accuracy = eval.run(res.config).accuracy;
  ++res.trace.evaluations;
  res.bits_fraction = bits_fraction(res.config, res.group_numel, N);
  return res;
}

SearchResult search_budget(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                           const SearchOptions& options) {
  check_validation(inputs, labels);
  const SimEvaluator eval(model, inputs, labels, options.seed);
  const int N = model.fixed_point.ring_bits;
  const int G = model.num_groups();
  const ReluConfig full = ReluConfig::full(model);

  std::vector<int> widths;
  for (int w : options.candidate_widths) {
    if (w < 0 || w == 1 || w > N) throw ConfigError("candidate width " + std::to_string(w) + " is not 0 or 2..N");
    widths.push_back(w);
  }
  widths.push_back(N);  // the unreduced window is always a candidate
  std::sort(widths.begin(), widths.end(), std::greater<>());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());
  const int w_min = widths.back();

  SearchResult res;
  res.mode = "budget";
  res.budget = options.budget;
  res.k_range = collect_activation_ranges(model, inputs);
  res.group_numel = model.group_numel();
  const auto& numel = res.group_numel;
  const std::uint64_t total = std::accumulate(numel.begin(), numel.end(), std::uint64_t{0});
  const std::uint64_t limit = options.budget.limit(N, total);
  const std::uint64_t den = options.budget.den;
  // rest[g] = sum of numel over groups >= g
  std::vector<std::uint64_t> rest(static_cast<std::size_t>(G) + 1, 0);
  for (int g = G - 1; g >= 0; --g) rest[static_cast<std::size_t>(g)] = rest[static_cast<std::size_t>(g) + 1] + numel[static_cast<std::size_t>(g)];

  const SimResult base = eval.run(full);
  res.baseline_accuracy = base.accuracy;
  const double threshold = options.threshold.value_or(base.accuracy - 0.05);
  res.threshold = threshold;

  // The root is optimistic at the baseline with the cheapest completion.
  NodeState root{base.accuracy, threshold, std::nullopt,
                 static_cast<std::uint64_t>(w_min) * total * den, limit};
  const StopReason root_stop = early_stop_check(root);
  std::optional<double> best_acc;
  ReluConfig best_cfg;

  std::function<void(int, ReluConfig&, const Tensor&, std::uint64_t)> dfs =
      [&](int g, ReluConfig& cfg, const Tensor& act, std::uint64_t bits) {
        const auto gi = static_cast<std::size_t>(g);
        const int k_cap = std::min(N, res.k_range[gi] + 1);
        for (int w : widths) {
          const std::uint64_t here = bits + static_cast<std::uint64_t>(w) * numel[gi];
          NodeState node{std::nullopt, threshold, best_acc,
                         (here + static_cast<std::uint64_t>(w_min) * rest[gi + 1]) * den, limit};
          if (early_stop_check(node) == StopReason::Stop3) {
            ++res.trace.stop3;
            continue;
          }
          ++res.trace.nodes;
          const LocalOpt lo = local_opt_km(eval, g, w, cfg, act, k_cap);
          if (!lo.valid) continue;
          node.optimistic = lo.accuracy;
          const StopReason stop = early_stop_check(node);
          if (stop == StopReason::Stop1) {
            ++res.trace.stop1;
            continue;
          }
          if (stop == StopReason::Stop2) {
            ++res.trace.stop2;
            continue;
          }
          cfg.groups[gi] = lo.window;
          if (g + 1 == G) {
            ++res.trace.leaves;
            if (!best_acc || lo.accuracy > *best_acc) {
              best_acc = lo.accuracy;
              best_cfg = cfg;
            }
          } else {
            const Tensor next = eval.advance(act, eval.group_start(g), eval.group_start(g + 1), cfg);
            dfs(g + 1, cfg, next, here);
          }
          cfg.groups[gi] = BitWindow::full(N);
        }
      };

  if (root_stop == StopReason::Stop1) {
    ++res.trace.stop1;
  } else if (root_stop == StopReason::Stop3) {
    ++res.trace.stop3;
  } else if (G == 0 || options.budget.num == options.budget.den) {
    // b = 1 asks for no reduction.
    best_acc = base.accuracy;
    best_cfg = full;
  } else {
    ReluConfig cfg = full;
    dfs(0, cfg, eval.advance(inputs, 0, eval.group_start(0), full), 0);
  }
  res.trace.evaluations = eval.evaluations();

  if (!best_acc) {
    throw InfeasibleError("no configuration meets budget " + options.budget.to_string() +
                          " with accuracy >= " + std::to_string(threshold) + " (baseline " +
                          std::to_string(base.accuracy) + ", stop1=" + std::to_string(res.trace.stop1) +
                          ", stop2=" + std::to_string(res.trace.stop2) +
                          ", stop3=" + std::to_string(res.trace.stop3) + ")");
  }
  res.config = best_cfg;
  res.accuracy = *best_acc;
  res.bits_fraction = bits_fraction(res.config, numel, N);
  return res;
}

}  // namespace redring
