#include "redring/nn.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kernels.hpp"
#include "redring/errors.hpp"

namespace redring {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

std::size_t batch_of(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor without a batch dimension");
  return shape[0];
}

Shape sample_shape(const Shape& shape) { return Shape(shape.begin() + 1, shape.end()); }

Shape with_batch(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

Shape output_shape(const Layer& layer, const Shape& in) {
  return std::visit(
      Overloaded{
          [&](const LinearLayer& l) -> Shape {
            if (in.size() != 1 || in[0] != l.in) {
              throw ShapeError("linear expects [" + std::to_string(l.in) + "], got " +
                               shape_string(in));
            }
            return {l.out};
          },
          [&](const Conv2dLayer& l) -> Shape {
            if (in.size() != 3 || in[0] != l.c_in) {
              throw ShapeError("conv2d expects [" + std::to_string(l.c_in) + ",h,w], got " +
                               shape_string(in));
            }
            if (l.stride == 0 || in[1] + 2 * l.pad < l.kh || in[2] + 2 * l.pad < l.kw) {
              throw ShapeError("conv2d kernel does not fit input " + shape_string(in));
            }
            const detail::ConvGeometry g{l.c_in, in[1], in[2], l.c_out, l.kh, l.kw, l.stride, l.pad};
            return {l.c_out, g.out_h(), g.out_w()};
          },
          [&](const AvgPoolLayer& l) -> Shape {
            if (in.size() != 3 || l.stride == 0 || in[1] < l.kh || in[2] < l.kw || l.kh * l.kw == 0) {
              throw ShapeError("avgpool does not fit input " + shape_string(in));
            }
            const detail::PoolGeometry g{in[0], in[1], in[2], l.kh, l.kw, l.stride};
            return {in[0], g.out_h(), g.out_w()};
          },
          [&](const ReluLayer&) -> Shape { return in; },
          [&](const FlattenLayer&) -> Shape { return {numel(in)}; },
      },
      layer);
}

std::vector<std::uint64_t> encode_weights(const std::vector<float>& w, const FixedPointConfig& fp) {
  std::vector<std::uint64_t> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = encode_fixed_word(static_cast<double>(w[i]), fp);
  return out;
}

ArithShareTensor finish_affine(ArithShareTensor acc, const std::vector<float>& bias,
                               std::size_t per_channel, const FixedPointConfig& fp) {
  const std::uint64_t mask = ring_mask(acc.width);
  for (auto& v : acc.data) v &= mask;
  ArithShareTensor out = truncate_local(acc, fp.frac_bits);
  if (out.party == 0 && !bias.empty()) {
    const auto b = encode_weights(bias, fp);
    const std::size_t channels = bias.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.data[i] = (out.data[i] + b[(i / per_channel) % channels]) & mask;
    }
  }
  return out;
}

void check_share_width(const ArithShareTensor& x, const FixedPointConfig& fp) {
  if (x.width != fp.ring_bits) {
    throw ShapeError("share width " + std::to_string(x.width) + " does not match ring of " +
                     std::to_string(fp.ring_bits) + " bits");
  }
}

}  // namespace

const char* layer_kind(const Layer& layer) {
  return std::visit(Overloaded{
                        [](const LinearLayer&) { return "linear"; },
                        [](const Conv2dLayer&) { return "conv2d"; },
                        [](const AvgPoolLayer&) { return "avgpool"; },
                        [](const ReluLayer&) { return "relu"; },
                        [](const FlattenLayer&) { return "flatten"; },
                    },
                    layer);
}

// ---------------------------------------------------------------------------

void Model::validate() const {
  fixed_point.validate();
  if (input_shape.empty()) throw ShapeError("model input shape is empty");
  Shape shape = input_shape;
  std::set<int> groups;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      if (l->w.size() != l->in * l->out || l->b.size() != l->out) {
        throw ShapeError("layer " + std::to_string(i) + ": linear weights do not match " +
                         std::to_string(l->out) + "x" + std::to_string(l->in));
      }
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      if (c->w.size() != c->c_out * c->c_in * c->kh * c->kw || c->b.size() != c->c_out) {
        throw ShapeError("layer " + std::to_string(i) + ": conv2d weights do not match kernel");
      }
    } else if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      if (r->group < 0) throw ConfigError("layer " + std::to_string(i) + ": negative relu group");
      groups.insert(r->group);
    }
    shape = output_shape(layer, shape);
  }
  if (!groups.empty() && (*groups.rbegin() + 1 != static_cast<int>(groups.size()))) {
    throw ConfigError("relu group ids must cover 0.." + std::to_string(groups.size() - 1));
  }
}

int Model::num_groups() const {
  int g = 0;
  for (const auto& layer : layers) {
    if (const auto* r = std::get_if<ReluLayer>(&layer)) g = std::max(g, r->group + 1);
  }
  return g;
}

std::vector<Shape> Model::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape shape = input_shape;
  for (const auto& layer : layers) {
    shape = output_shape(layer, shape);
    shapes.push_back(shape);
  }
  return shapes;
}

std::vector<std::size_t> Model::group_numel() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_groups()), 0);
  const auto shapes = layer_shapes();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (const auto* r = std::get_if<ReluLayer>(&layers[i])) {
      counts[static_cast<std::size_t>(r->group)] += numel(shapes[i]);
    }
  }
  return counts;
}

std::vector<std::size_t> Model::relu_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (std::holds_alternative<ReluLayer>(layers[i])) idx.push_back(i);
  }
  return idx;
}

// ---------------------------------------------------------------------------

ReluConfig ReluConfig::full(const Model& model) {
  ReluConfig c;
  c.groups.assign(static_cast<std::size_t>(model.num_groups()),
                  BitWindow::full(model.fixed_point.ring_bits));
  return c;
}

void ReluConfig::validate(const Model& model) const {
  if (groups.size() != static_cast<std::size_t>(model.num_groups())) {
    throw ConfigError("config has " + std::to_string(groups.size()) + " groups, model has " +
                      std::to_string(model.num_groups()));
  }
  for (const auto& g : groups) {
    if (g) g->validate(model.fixed_point.ring_bits);
  }
}

nlohmann::json ReluConfig::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& g : groups) {
    if (g) {
      arr.push_back({{"k", g->k}, {"m", g->m}});
    } else {
      arr.push_back({{"identity", true}});
    }
  }
  return {{"groups", arr}};
}

ReluConfig ReluConfig::from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_object() ? j.at("groups") : j;
  if (!arr.is_array()) throw FormatError("relu config groups must be an array");
  ReluConfig c;
  try {
    for (const auto& g : arr) {
      if (g.value("identity", false)) {
        c.groups.emplace_back(std::nullopt);
      } else {
        c.groups.emplace_back(BitWindow{g.at("k").get<int>(), g.at("m").get<int>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad relu config entry: ") + e.what());
  }
  return c;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel(shape) != data.size()) throw ShapeError("tensor data does not match " + shape_string(shape));
}

// ---------------------------------------------------------------------------
// Share layers

ArithShareTensor truncate_local(const ArithShareTensor& x, int frac_bits) {
  ArithShareTensor out(x.party, x.width, x.shape);
  const std::uint64_t mask = ring_mask(x.width);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x.party == 0) {
      out.data[i] = static_cast<std::uint64_t>(to_signed(x.data[i], x.width) >> frac_bits) & mask;
    } else {
      const std::int64_t neg = to_signed((0 - x.data[i]) & mask, x.width);
      out.data[i] = (0 - static_cast<std::uint64_t>(neg >> frac_bits)) & mask;
    }
  }
  return out;
}

ArithShareTensor linear_forward(const ArithShareTensor& x, const LinearLayer& layer,
                                const FixedPointConfig& fp) {
  check_share_width(x, fp);
  const std::size_t batch = batch_of(x.shape);
  output_shape(layer, sample_shape(x.shape));
  const auto w = encode_weights(layer.w, fp);
  ArithShareTensor acc(x.party, x.width, {batch, layer.out});
  detail::linear_kernel<std::uint64_t>(x.data, batch, layer.in, layer.out, w, acc.data);
  return finish_affine(std::move(acc), layer.b, 1, fp);
}

ArithShareTensor conv2d_forward(const ArithShareTensor& x, const Conv2dLayer& layer,
                                const FixedPointConfig& fp) {
  check_share_width(x, fp);
  const std::size_t batch = batch_of(x.shape);
  const Shape out = output_shape(layer, sample_shape(x.shape));
  const detail::ConvGeometry g{layer.c_in, x.shape[2], x.shape[3], layer.c_out,
                               layer.kh,   layer.kw,   layer.stride, layer.pad};
  const auto w = encode_weights(layer.w, fp);
  ArithShareTensor acc(x.party, x.width, with_batch(batch, out));
  detail::conv_kernel<std::uint64_t>(x.data, batch, g, w, acc.data);
  return finish_affine(std::move(acc), layer.b, out[1] * out[2], fp);
}

ArithShareTensor avgpool_forward(const ArithShareTensor& x, const AvgPoolLayer& layer,
                                 const FixedPointConfig& fp) {
  check_share_width(x, fp);
  const std::size_t batch = batch_of(x.shape);
  const Shape out = output_shape(layer, sample_shape(x.shape));
  const detail::PoolGeometry g{x.shape[1], x.shape[2], x.shape[3], layer.kh, layer.kw, layer.stride};
  ArithShareTensor sum(x.party, x.width, with_batch(batch, out));
  detail::pool_sum_kernel<std::uint64_t>(x.data, batch, g, sum.data);
  const std::uint64_t inv = encode_fixed_word(1.0 / static_cast<double>(layer.kh * layer.kw), fp);
  return truncate_local(mul_public(sum, inv), fp.frac_bits);
}

ArithShareTensor model_forward(ProtocolSession& s, const ArithShareTensor& x, const Model& model,
                               const ReluConfig& config, std::vector<LayerStat>* stats) {
  config.validate(model);
  const FixedPointConfig& fp = model.fixed_point;
  check_share_width(x, fp);
  if (sample_shape(x.shape) != model.input_shape) {
    throw ShapeError("input " + shape_string(x.shape) + " does not match model input " +
                     shape_string(model.input_shape));
  }
  ArithShareTensor cur = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    const MeterSnapshot before = s.endpoint().meter().snapshot();
    LayerStat st;
    st.index = i;
    st.kind = layer_kind(layer);
    cur = std::visit(
        Overloaded{
            [&](const LinearLayer& l) { return linear_forward(cur, l, fp); },
            [&](const Conv2dLayer& l) { return conv2d_forward(cur, l, fp); },
            [&](const AvgPoolLayer& l) { return avgpool_forward(cur, l, fp); },
            [&](const ReluLayer& l) {
              st.group = l.group;
              const auto& w = config.groups[static_cast<std::size_t>(l.group)];
              if (!w) {
                st.window = "identity";
                return cur;
              }
              st.window = w->to_string();
              return relu(s, cur, *w);
            },
            [&](const FlattenLayer&) {
              ArithShareTensor flat = cur;
              flat.shape = {batch_of(cur.shape), numel(sample_shape(cur.shape))};
              return flat;
            },
        },
        layer);
    if (stats) {
      st.meter = s.endpoint().meter().snapshot() - before;
      stats->push_back(std::move(st));
    }
  }
  return cur;
}

TripleDemand model_triple_demand(const Model& model, const ReluConfig& config, std::size_t batch) {
  config.validate(model);
  TripleDemand d;
  const auto shapes = model.layer_shapes();
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const auto* r = std::get_if<ReluLayer>(&model.layers[i]);
    if (!r) continue;
    const auto& w = config.groups[static_cast<std::size_t>(r->group)];
    if (w) merge_demand(d, relu_triple_demand(batch * numel(shapes[i]), *w, model.fixed_point.ring_bits));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Plain path

Tensor apply_layer(const Layer& layer, const Tensor& x) {
  const std::size_t batch = batch_of(x.shape);
  const Shape out = output_shape(layer, sample_shape(x.shape));
  Tensor y(with_batch(batch, out));
  std::visit(
      Overloaded{
          [&](const LinearLayer& l) {
            const std::vector<double> w(l.w.begin(), l.w.end());
            detail::linear_kernel<double>(x.data, batch, l.in, l.out, w, y.data);
            for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += static_cast<double>(l.b[i % l.out]);
          },
          [&](const Conv2dLayer& l) {
            const detail::ConvGeometry g{l.c_in, x.shape[2], x.shape[3], l.c_out,
                                         l.kh,   l.kw,       l.stride,   l.pad};
            const std::vector<double> w(l.w.begin(), l.w.end());
            detail::conv_kernel<double>(x.data, batch, g, w, y.data);
            const std::size_t pix = out[1] * out[2];
            for (std::size_t i = 0; i < y.size(); ++i) {
              y.data[i] += static_cast<double>(l.b[(i / pix) % l.c_out]);
            }
          },
          [&](const AvgPoolLayer& l) {
            const detail::PoolGeometry g{x.shape[1], x.shape[2], x.shape[3], l.kh, l.kw, l.stride};
            detail::pool_sum_kernel<double>(x.data, batch, g, y.data);
            const double inv = 1.0 / static_cast<double>(l.kh * l.kw);
            for (auto& v : y.data) v *= inv;
          },
          [&](const ReluLayer&) { throw ConfigError("apply_layer does not evaluate relu layers"); },
          [&](const FlattenLayer&) { y.data = x.data; },
      },
      layer);
  return y;
}

Tensor relu_plain(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor plain_forward(const Model& model, const Tensor& x) {
  Tensor cur = x;
  for (const auto& layer : model.layers) {
    cur = std::holds_alternative<ReluLayer>(layer) ? relu_plain(cur) : apply_layer(layer, cur);
  }
  return cur;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const std::size_t batch = batch_of(logits.shape);
  const std::size_t classes = batch ? logits.size() / batch : 0;
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto first = logits.data.begin() + static_cast<std::ptrdiff_t>(b * classes);
    out[b] = static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(classes)) - first);
  }
  return out;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const auto pred = argmax_rows(logits);
  if (pred.size() != labels.size()) throw ShapeError("label count does not match logits");
  if (pred.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace redring
