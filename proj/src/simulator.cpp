#include "redring/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "redring/errors.hpp"

namespace redring {

namespace {

constexpr std::uint64_t kSimStream = 0x51e1;

std::size_t per_sample_of(const Tensor& x) {
  if (x.shape.empty() || x.shape[0] == 0) return 0;
  return x.size() / x.shape[0];
}

}  // namespace

std::vector<std::uint64_t> sim_masks(std::uint64_t seed, std::size_t layer, std::size_t first_sample,
                                     std::size_t samples, std::size_t per_sample) {
  std::vector<std::uint64_t> out(samples * per_sample);
  for (std::size_t j = 0; j < samples; ++j) {
    Prng rng(seed, derive_stream(kSimStream, layer, first_sample + j));
    rng.fill(std::span(out).subspan(j * per_sample, per_sample));
  }
  return out;
}

Tensor sim_relu(const Tensor& x, const std::optional<BitWindow>& w, const FixedPointConfig& fp,
                std::span<const std::uint64_t> masks, SimReluOutcome* outcome) {
  if (outcome) {
    outcome->range_violations = 0;
    outcome->decisions.assign(x.size(), 1);
  }
  if (!w) return x;
  w->validate(fp.ring_bits);
  if (masks.size() < x.size()) throw ShapeError("sim_relu needs one mask per element");
  const int N = fp.ring_bits;
  const std::uint64_t mask = ring_mask(N);
  const std::uint64_t small = ring_mask(w->width());
  const int top = w->width() - 1;

  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xf = x.data[i];
    std::uint64_t e;
    try {
      e = encode_fixed_word(xf, fp);
    } catch (const EncodeRangeError&) {
      if (outcome) {
        ++outcome->range_violations;
        outcome->decisions[i] = 0;
      }
      y.data[i] = 0.0;
      continue;
    }
    const std::uint64_t r = masks[i] & mask;
    const std::uint64_t s0 = (e + r) & mask, s1 = (0 - r) & mask;
    const std::uint64_t t = (slice_word(s0, *w) + slice_word(s1, *w)) & small;
    const bool d = ((t >> top) & 1U) == 0;
    if (outcome) outcome->decisions[i] = d;
    y.data[i] = e == 0 ? std::max(xf, 0.0) : (d ? xf : 0.0);
  }
  return y;
}

Tensor sim_relu(const Tensor& x, const std::optional<BitWindow>& w, const FixedPointConfig& fp,
                Prng& rng, SimReluOutcome* outcome) {
  std::vector<std::uint64_t> masks(x.size());
  rng.fill(masks);
  return sim_relu(x, w, fp, masks, outcome);
}

SimResult sim_forward(const Model& model, const Tensor& inputs, const std::vector<int>& labels,
                      const SimConfig& config, std::size_t first_sample, bool keep_decisions) {
  config.relu.validate(model);
  SimResult res;
  if (keep_decisions) res.decisions.resize(model.layers.size());
  const std::size_t batch = inputs.shape.empty() ? 0 : inputs.shape[0];
  Tensor cur = inputs;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      const auto masks = sim_masks(config.seed, i, first_sample, batch, per_sample_of(cur));
      SimReluOutcome out;
      cur = sim_relu(cur, config.relu.groups[static_cast<std::size_t>(r->group)], model.fixed_point,
                     masks, &out);
      res.range_violations += out.range_violations;
      if (keep_decisions) res.decisions[i] = std::move(out.decisions);
    } else {
      cur = apply_layer(layer, cur);
    }
  }
  res.accuracy = labels.empty() ? 0.0 : accuracy(cur, labels);
  res.logits = std::move(cur);
  return res;
}

std::vector<int> collect_activation_ranges(const Model& model, const Tensor& inputs) {
  std::vector<int> k(static_cast<std::size_t>(model.num_groups()), 1);
  const FixedPointConfig& fp = model.fixed_point;
  Tensor cur = inputs;
  for (const auto& layer : model.layers) {
    if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      int& kg = k[static_cast<std::size_t>(r->group)];
      for (double v : cur.data) {
        const std::int64_t e = encode_fixed(v, fp).signed_value();
        while (kg < fp.ring_bits && !(e >= -(std::int64_t{1} << (kg - 1)) && e < (std::int64_t{1} << (kg - 1)))) ++kg;
      }
      cur = relu_plain(cur);
    } else {
      cur = apply_layer(layer, cur);
    }
  }
  return k;
}

// ---------------------------------------------------------------------------

SimEvaluator::SimEvaluator(const Model& model, Tensor inputs, std::vector<int> labels,
                           std::uint64_t seed)
    : model_(model), inputs_(std::move(inputs)), labels_(std::move(labels)) {
  model_.validate();
  const auto shapes = model_.layer_shapes();
  const std::size_t batch = inputs_.shape.empty() ? 0 : inputs_.shape[0];
  masks_.resize(model_.layers.size());
  group_start_.assign(static_cast<std::size_t>(model_.num_groups()), model_.layers.size());
  int seen = 0;
  for (std::size_t i = 0; i < model_.layers.size(); ++i) {
    const auto* r = std::get_if<ReluLayer>(&model_.layers[i]);
    if (!r) continue;
    masks_[i] = sim_masks(seed, i, 0, batch, numel(shapes[i]));
    auto& start = group_start_[static_cast<std::size_t>(r->group)];
    if (start == model_.layers.size()) {
      if (r->group != seen) throw ConfigError("relu group ids must be numbered in order of first use");
      start = i;
      ++seen;
    }
  }
}

Tensor SimEvaluator::advance(const Tensor& act, std::size_t from, std::size_t to,
                             const ReluConfig& config, SimResult* info) const {
  Tensor cur = act;
  for (std::size_t i = from; i < to; ++i) {
    const Layer& layer = model_.layers[i];
    if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      SimReluOutcome out;
      cur = sim_relu(cur, config.groups[static_cast<std::size_t>(r->group)], model_.fixed_point,
                     masks_[i], info ? &out : nullptr);
      if (info) {
        info->range_violations += out.range_violations;
        if (!info->decisions.empty()) info->decisions[i] = std::move(out.decisions);
      }
    } else {
      cur = apply_layer(layer, cur);
    }
  }
  return cur;
}

SimResult SimEvaluator::run_from(std::size_t from, const Tensor& act, const ReluConfig& config,
                                 bool keep_decisions) const {
  ++evaluations_;
  SimResult res;
  if (keep_decisions) res.decisions.resize(model_.layers.size());
  res.logits = advance(act, from, model_.layers.size(), config, &res);
  res.accuracy = labels_.empty() ? 0.0 : accuracy(res.logits, labels_);
  return res;
}

SimResult SimEvaluator::run(const ReluConfig& config, bool keep_decisions) const {
  return run_from(0, inputs_, config, keep_decisions);
}

}  // namespace redring
