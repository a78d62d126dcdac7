#include <cstring>
#include <fstream>
#include <iterator>

#include "redring/errors.hpp"
#include "redring/nn.hpp"

namespace redring {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_blob(const std::vector<float>& v, const fs::path& path) {
  std::vector<unsigned char> bytes(v.size() * 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint32_t u;
    std::memcpy(&u, &v[i], 4);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(u >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write " + path.string());
}

std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<float> read_blob(const fs::path& path, std::size_t expected, const std::string& name) {
  const auto bytes = read_file(path);
  if (bytes.size() != expected * 4) {
    throw ShapeError("blob '" + name + "' holds " + std::to_string(bytes.size() / 4) +
                     " floats, layer needs " + std::to_string(expected));
  }
  std::vector<float> v(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint32_t u = 0;
    for (int b = 3; b >= 0; --b) u = (u << 8) | bytes[i * 4 + static_cast<std::size_t>(b)];
    std::memcpy(&v[i], &u, 4);
  }
  return v;
}

}  // namespace

void save_model(const Model& model, const fs::path& dir) {
  model.validate();
  fs::create_directories(dir);
  json layers = json::array();
  json blobs = json::object();
  auto add_blob = [&](const std::string& name, const std::vector<float>& v) {
    const std::string file = name + ".bin";
    write_blob(v, dir / file);
    blobs[name] = file;
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    json j = {{"type", layer_kind(layer)}};
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      const std::string w = l->weight.empty() ? "layer" + std::to_string(i) + ".w" : l->weight;
      const std::string b = l->bias.empty() ? "layer" + std::to_string(i) + ".b" : l->bias;
      j.update({{"in", l->in}, {"out", l->out}, {"weight", w}, {"bias", b}});
      add_blob(w, l->w);
      add_blob(b, l->b);
    } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      const std::string w = c->weight.empty() ? "layer" + std::to_string(i) + ".w" : c->weight;
      const std::string b = c->bias.empty() ? "layer" + std::to_string(i) + ".b" : c->bias;
      j.update({{"c_in", c->c_in}, {"c_out", c->c_out}, {"kh", c->kh}, {"kw", c->kw},
                {"stride", c->stride}, {"pad", c->pad}, {"weight", w}, {"bias", b}});
      add_blob(w, c->w);
      add_blob(b, c->b);
    } else if (const auto* p = std::get_if<AvgPoolLayer>(&layer)) {
      j.update({{"kh", p->kh}, {"kw", p->kw}, {"stride", p->stride}});
    } else if (const auto* r = std::get_if<ReluLayer>(&layer)) {
      j["group"] = r->group;
    }
    layers.push_back(std::move(j));
  }
  const json manifest = {
      {"fixed_point", {{"ring_bits", model.fixed_point.ring_bits}, {"frac_bits", model.fixed_point.frac_bits}}},
      {"input_shape", model.input_shape},
      {"layers", layers},
      {"blobs", blobs}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw FormatError("cannot write manifest in " + dir.string());
}

Model load_model(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  const fs::path dir = manifest_path.parent_path();
  json m;
  try {
    const auto bytes = read_file(manifest_path);
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }

  Model model;
  try {
    const json& fp = m.at("fixed_point");
    model.fixed_point = {fp.at("ring_bits").get<int>(), fp.at("frac_bits").get<int>()};
    model.input_shape = m.at("input_shape").get<Shape>();
    const json& blobs = m.at("blobs");
    auto blob = [&](const json& j, const char* key, std::size_t count) {
      const std::string name = j.at(key).get<std::string>();
      if (!blobs.contains(name)) throw FormatError("manifest lists no blob named '" + name + "'");
      const fs::path file = dir / blobs.at(name).get<std::string>();
      if (!fs::exists(file)) throw FormatError("missing blob file " + file.string());
      return std::make_pair(name, read_blob(file, count, name));
    };
    for (const json& j : m.at("layers")) {
      const std::string type = j.at("type").get<std::string>();
      if (type == "linear") {
        LinearLayer l;
        l.in = j.at("in").get<std::size_t>();
        l.out = j.at("out").get<std::size_t>();
        std::tie(l.weight, l.w) = blob(j, "weight", l.in * l.out);
        std::tie(l.bias, l.b) = blob(j, "bias", l.out);
        model.layers.emplace_back(std::move(l));
      } else if (type == "conv2d") {
        Conv2dLayer c;
        c.c_in = j.at("c_in").get<std::size_t>();
        c.c_out = j.at("c_out").get<std::size_t>();
        c.kh = j.at("kh").get<std::size_t>();
        c.kw = j.at("kw").get<std::size_t>();
        c.stride = j.value("stride", std::size_t{1});
        c.pad = j.value("pad", std::size_t{0});
        std::tie(c.weight, c.w) = blob(j, "weight", c.c_out * c.c_in * c.kh * c.kw);
        std::tie(c.bias, c.b) = blob(j, "bias", c.c_out);
        model.layers.emplace_back(std::move(c));
      } else if (type == "avgpool") {
        AvgPoolLayer p;
        p.kh = j.at("kh").get<std::size_t>();
        p.kw = j.value("kw", p.kh);
        p.stride = j.value("stride", p.kh);
        model.layers.emplace_back(p);
      } else if (type == "relu") {
        model.layers.emplace_back(ReluLayer{j.at("group").get<int>()});
      } else if (type == "flatten") {
        model.layers.emplace_back(FlattenLayer{});
      } else {
        throw FormatError("unknown layer type '" + type + "'");
      }
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// IDX

IdxArray load_idx(const fs::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 4) throw FormatError("truncated IDX header in " + path.string());
  if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != 0x08 || bytes[3] == 0) {
    throw FormatError("bad IDX magic in " + path.string());
  }
  const std::size_t ndim = bytes[3];
  if (bytes.size() < 4 + 4 * ndim) throw FormatError("truncated IDX header in " + path.string());
  IdxArray arr;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    const std::size_t o = 4 + 4 * d;
    const std::uint32_t v = (std::uint32_t{bytes[o]} << 24) | (std::uint32_t{bytes[o + 1]} << 16) |
                            (std::uint32_t{bytes[o + 2]} << 8) | std::uint32_t{bytes[o + 3]};
    arr.dims.push_back(v);
    count *= v;
  }
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() != header + count) {
    throw FormatError("IDX payload of " + path.string() + " has " + std::to_string(bytes.size() - header) +
                      " bytes, header declares " + std::to_string(count));
  }
  arr.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return arr;
}

void save_idx(const IdxArray& arr, const fs::path& path) {
  if (arr.dims.empty() || arr.dims.size() > 255) throw FormatError("IDX needs 1..255 dimensions");
  std::size_t count = 1;
  for (auto d : arr.dims) count *= d;
  if (count != arr.data.size()) throw ShapeError("IDX dims do not match payload");
  std::vector<unsigned char> bytes{0, 0, 0x08, static_cast<unsigned char>(arr.dims.size())};
  for (auto d : arr.dims) {
    for (int s = 24; s >= 0; s -= 8) bytes.push_back(static_cast<unsigned char>(d >> s));
  }
  bytes.insert(bytes.end(), arr.data.begin(), arr.data.end());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("cannot write " + path.string());
}

Dataset load_dataset(const fs::path& images, const fs::path& labels) {
  const IdxArray img = load_idx(images);
  const IdxArray lab = load_idx(labels);
  if (img.dims.size() != 3 || lab.dims.size() != 1 || img.dims[0] != lab.dims[0]) {
    throw FormatError("expected images [n,rows,cols] and labels [n]");
  }
  Dataset ds;
  ds.rows = img.dims[1];
  ds.cols = img.dims[2];
  ds.pixels = img.data;
  ds.labels = lab.data;
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& images, const fs::path& labels) {
  const auto n = static_cast<std::uint32_t>(ds.size());
  save_idx({{n, static_cast<std::uint32_t>(ds.rows), static_cast<std::uint32_t>(ds.cols)}, ds.pixels}, images);
  save_idx({{n}, ds.labels}, labels);
}

Tensor Dataset::batch(const Shape& input_shape, std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ShapeError("batch range outside dataset");
  const std::size_t per = rows * cols;
  if (numel(input_shape) != per) {
    throw ShapeError("model input " + shape_string(input_shape) + " does not fit " +
                     std::to_string(rows) + "x" + std::to_string(cols) + " images");
  }
  Shape shape{end - begin};
  shape.insert(shape.end(), input_shape.begin(), input_shape.end());
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = pixels[begin * per + i] / 255.0;
  return t;
}

std::vector<int> Dataset::batch_labels(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ShapeError("batch range outside dataset");
  return {labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end)};
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw ShapeError("slice range outside dataset");
  Dataset d;
  d.rows = rows;
  d.cols = cols;
  const std::size_t per = rows * cols;
  d.pixels.assign(pixels.begin() + static_cast<std::ptrdiff_t>(begin * per),
                  pixels.begin() + static_cast<std::ptrdiff_t>(end * per));
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin), labels.begin() + static_cast<std::ptrdiff_t>(end));
  return d;
}

}  // namespace redring
