#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "redring/protocol.hpp"
#include "redring/ring.hpp"
#include "redring/sharing.hpp"
#include "redring/transport.hpp"

namespace redring {

// Weights are row-major: Linear W[out][in], Conv2d W[c_out][c_in][kh][kw].
struct LinearLayer {
  std::size_t in = 0, out = 0;
  std::string weight, bias;
  std::vector<float> w, b;
};

struct Conv2dLayer {
  std::size_t c_in = 0, c_out = 0, kh = 3, kw = 3, stride = 1, pad = 0;
  std::string weight, bias;
  std::vector<float> w, b;
};

struct AvgPoolLayer {
  std::size_t kh = 2, kw = 2, stride = 2;
};

struct ReluLayer {
  int group = 0;
};

struct FlattenLayer {};

using Layer = std::variant<LinearLayer, Conv2dLayer, AvgPoolLayer, ReluLayer, FlattenLayer>;

const char* layer_kind(const Layer& layer);

struct Model {
  FixedPointConfig fixed_point;
  Shape input_shape;  // per sample
  std::vector<Layer> layers;

  // Throws ShapeError / ConfigError on incompatible shapes, weight sizes or
  // non-contiguous group ids.
  void validate() const;
  int num_groups() const;
  // Per-sample output shape of every layer.
  std::vector<Shape> layer_shapes() const;
  // ReLU elements per sample, summed over the layers of each group.
  std::vector<std::size_t> group_numel() const;
  std::vector<std::size_t> relu_layers() const;
};

/// Per-group window. std::nullopt makes the group an identity layer.
struct ReluConfig {
  std::vector<std::optional<BitWindow>> groups;

  static ReluConfig full(const Model& model);
  void validate(const Model& model) const;
  nlohmann::json to_json() const;
  // Accepts either {"groups": [...]} or a bare array; entries are {k, m} or
  // {identity: true}.
  static ReluConfig from_json(const nlohmann::json& j);
  friend bool operator==(const ReluConfig&, const ReluConfig&) = default;
};

/// Plain real-valued tensor, batch first.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(numel(shape), 0.0) {}
  Tensor(Shape s, std::vector<double> d);
  std::size_t size() const noexcept { return data.size(); }
};

// ---------------------------------------------------------------------------
// Layers on shares (local, no communication)

/// Each party shifts its own share: party 0 by s >> f, party 1 by -((-s) >> f).
/// Reconstruction is floor(x / 2^f) + {0, 1} unless the shares wrap.
ArithShareTensor truncate_local(const ArithShareTensor& x, int frac_bits);

ArithShareTensor linear_forward(const ArithShareTensor& x, const LinearLayer& layer,
                                const FixedPointConfig& fp);
ArithShareTensor conv2d_forward(const ArithShareTensor& x, const Conv2dLayer& layer,
                                const FixedPointConfig& fp);
ArithShareTensor avgpool_forward(const ArithShareTensor& x, const AvgPoolLayer& layer,
                                 const FixedPointConfig& fp);

struct LayerStat {
  std::size_t index = 0;
  std::string kind;
  int group = -1;
  std::string window;  // "[k:m]", "identity" or empty
  MeterSnapshot meter;
};

ArithShareTensor model_forward(ProtocolSession& s, const ArithShareTensor& x, const Model& model,
                               const ReluConfig& config, std::vector<LayerStat>* stats = nullptr);

// Triples consumed by model_forward on a batch of `batch` samples.
TripleDemand model_triple_demand(const Model& model, const ReluConfig& config, std::size_t batch);

// ---------------------------------------------------------------------------
// Plain forward

// A non-ReLU layer in real arithmetic; ReLU layers are rejected.
Tensor apply_layer(const Layer& layer, const Tensor& x);
Tensor relu_plain(const Tensor& x);
Tensor plain_forward(const Model& model, const Tensor& x);

std::vector<int> argmax_rows(const Tensor& logits);

// ---------------------------------------------------------------------------
// Formats

// Writes manifest.json plus one float32 blob per weight into `dir`.
void save_model(const Model& model, const std::filesystem::path& dir);
// `path` is a manifest file or a directory holding manifest.json.
Model load_model(const std::filesystem::path& path);

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

// Unsigned-byte IDX files only (magic 0x00000801, 0x00000803, ...).
IdxArray load_idx(const std::filesystem::path& path);
void save_idx(const IdxArray& arr, const std::filesystem::path& path);

struct Dataset {
  std::size_t rows = 8, cols = 8;
  std::vector<std::uint8_t> pixels;  // count * rows * cols
  std::vector<std::uint8_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  // Samples [begin, end) as pixel / 255 in the model's input shape.
  Tensor batch(const Shape& input_shape, std::size_t begin, std::size_t end) const;
  std::vector<int> batch_labels(std::size_t begin, std::size_t end) const;
  Dataset slice(std::size_t begin, std::size_t end) const;
};

Dataset load_dataset(const std::filesystem::path& images, const std::filesystem::path& labels);
void save_dataset(const Dataset& ds, const std::filesystem::path& images,
                  const std::filesystem::path& labels);

// Class-dependent Gaussian blobs on an 8x8 canvas plus pixel noise.
Dataset gen_synthetic(std::uint64_t seed, std::size_t n_samples, int n_classes = 10);

// ---------------------------------------------------------------------------
// Reference models

Model make_mlp(std::uint64_t seed);
Model make_cnn(std::uint64_t seed);
// Two ReLU groups, small enough for exhaustive search.
Model make_toy(std::uint64_t seed);
Model make_model(const std::string& arch, std::uint64_t seed);

struct TrainOptions {
  int epochs = 8;
  std::size_t batch = 32;
  double lr = 0.05;
  std::uint64_t seed = 1;
};

// Plain minibatch SGD on softmax cross-entropy. Returns final train accuracy.
double train(Model& model, const Dataset& data, const TrainOptions& opt);

double accuracy(const Tensor& logits, const std::vector<int>& labels);

/// A reference model trained on synthetic train data, with its validation set.
/// Train and validation sets come from streams 1 and 2 of `seed`.
struct DeskModel {
  Model model;
  Dataset train, val;
  double train_accuracy = 0.0, val_accuracy = 0.0;
};

DeskModel build_desk_model(const std::string& arch, std::uint64_t seed, int epochs = 8,
                           std::size_t n_train = 4096, std::size_t n_val = 1024);
// manifest.json + blobs, train-{images,labels}.idx, val-{images,labels}.idx
void save_desk_model(const DeskModel& desk, const std::filesystem::path& dir);

}  // namespace redring
