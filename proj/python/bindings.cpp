#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "redring/dealer.hpp"
#include "redring/errors.hpp"
#include "redring/runner.hpp"
#include "redring/search.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace redring;

namespace {

Dataset load_prefix(const std::string& prefix) {
  return load_dataset(prefix + "-images.idx", prefix + "-labels.idx");
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed ") + what + ": " + e.what());
  }
}

std::string gen_model(const std::string& arch, std::uint64_t seed, const std::string& out, int epochs) {
  const DeskModel d = build_desk_model(arch, seed, epochs);
  save_desk_model(d, out);
  return json{{"arch", arch},
              {"out", out},
              {"train_accuracy", d.train_accuracy},
              {"val_accuracy", d.val_accuracy},
              {"group_numel", d.model.group_numel()}}
      .dump();
}

std::string search(const std::string& model_path, const std::string& val_prefix, const std::string& mode,
                   const std::string& budget, std::optional<double> threshold, std::vector<int> widths,
                   std::size_t samples, std::uint64_t seed) {
  const Model model = load_model(model_path);
  Dataset val = load_prefix(val_prefix);
  if (samples && samples < val.size()) val = val.slice(0, samples);
  const Tensor x = val.batch(model.input_shape, 0, val.size());
  const auto labels = val.batch_labels(0, val.size());
  py::gil_scoped_release nogil;
  if (mode == "eco") return search_eco(model, x, labels, seed).to_json().dump();
  if (mode != "budget") throw ConfigError("mode must be eco or budget");
  SearchOptions opt;
  opt.budget = Budget::parse(budget);
  opt.threshold = threshold;
  if (!widths.empty()) opt.candidate_widths = std::move(widths);
  opt.seed = seed;
  return search_budget(model, x, labels, opt).to_json().dump();
}

std::string run_local_json(const std::string& model_path, const std::string& config, const std::string& data_prefix,
                           std::size_t batch, std::size_t samples, std::uint64_t seed, bool with_logits) {
  const Model model = load_model(model_path);
  ReluConfig cfg = config == "full" ? ReluConfig::full(model) : ReluConfig::from_json(parse(config, "config"));
  cfg.validate(model);
  const Dataset data = load_prefix(data_prefix);
  RunOptions opt;
  opt.batch = batch;
  opt.samples = samples;
  opt.seed = seed;
  py::gil_scoped_release nogil;
  return run_local(model, cfg, data, opt).to_json(with_logits).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "redring core bindings; structured results are JSON text";

  // Later registrations are tried first, so subclasses go after the base.
  auto& base = py::register_exception<Error>(m, "RedringError");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<TransportError>(m, "TransportError", base.ptr());
  py::register_exception<TripleExhaustedError>(m, "TripleExhaustedError", base.ptr());

  m.def(
      "encode_fixed",
      [](double x, int ring_bits, int frac_bits) {
        const FixedPointConfig fp{ring_bits, frac_bits};
        return encode_fixed(x, fp).signed_value();
      },
      py::arg("x"), py::arg("ring_bits") = 64, py::arg("frac_bits") = 16);
  m.def(
      "decode_fixed",
      [](std::int64_t v, int ring_bits, int frac_bits) {
        const FixedPointConfig fp{ring_bits, frac_bits};
        return decode_fixed_word(static_cast<std::uint64_t>(v) & ring_mask(ring_bits), fp);
      },
      py::arg("value"), py::arg("ring_bits") = 64, py::arg("frac_bits") = 16);
  m.def(
      "pack_words",
      [](const std::vector<std::uint64_t>& values, int width) {
        const auto bytes = pack_words(values, width);
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("values"), py::arg("width"));
  m.def(
      "unpack_words",
      [](const py::bytes& data, int width, std::size_t count) {
        const std::string s = data;
        const std::vector<std::uint8_t> bytes(s.begin(), s.end());
        return unpack_words(bytes, width, count);
      },
      py::arg("data"), py::arg("width"), py::arg("count"));
  m.def("packed_size_bytes", &packed_size_bytes, py::arg("count"), py::arg("width"));
  m.def(
      "gen_triples",
      [](const std::string& kind, std::size_t count, int width, std::uint64_t seed, const std::string& out) {
        save_triples(gen_triples(triple_kind_from_name(kind), count, width, seed), out);
      },
      py::arg("kind"), py::arg("count"), py::arg("width"), py::arg("seed"), py::arg("out"));
  m.def("gen_model", &gen_model, py::arg("arch"), py::arg("seed"), py::arg("out"), py::arg("epochs") = 8);
  m.def("search", &search, py::arg("model"), py::arg("val"), py::arg("mode") = "eco", py::arg("budget") = "8/64",
        py::arg("threshold") = py::none(), py::arg("widths") = std::vector<int>{}, py::arg("samples") = 1024,
        py::arg("seed") = 1);
  m.def("run_local", &run_local_json, py::arg("model"), py::arg("config"), py::arg("data"), py::arg("batch") = 64,
        py::arg("samples") = 0, py::arg("seed") = 1, py::arg("with_logits") = false);
  m.def(
      "compare_reports",
      [](const std::string& full, const std::string& reduced) {
        return compare_reports(parse(full, "report"), parse(reduced, "report")).dump();
      },
      py::arg("full"), py::arg("reduced"));
}
