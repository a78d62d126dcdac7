#include "redring/runner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <exception>
#include <thread>

#include "redring/errors.hpp"
#include "redring/prng.hpp"
#include "redring/protocol.hpp"

namespace redring {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInputStream = 0x1a9;
constexpr std::uint64_t kTripleStream = 0x7e1;

void accumulate(std::vector<LayerStat>& into, const std::vector<LayerStat>& batch) {
  if (into.empty()) {
    into = batch;
    return;
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t t = 0; t < kTagCount; ++t) into[i].meter.tags[t] += batch[i].meter.tags[t];
  }
}

json tags_json(const MeterSnapshot& m) { return m.to_json(); }

double ratio(std::uint64_t full, std::uint64_t reduced) {
  if (full == reduced) return 1.0;
  if (reduced == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(full) / static_cast<double>(reduced);
}

json ratio_entry(const TagCounters& f, const TagCounters& r) {
  auto num = [](double v) { return std::isinf(v) ? json(nullptr) : json(v); };
  return {{"full_bytes", f.bytes_sent},
          {"reduced_bytes", r.bytes_sent},
          {"bytes_ratio", num(ratio(f.bytes_sent, r.bytes_sent))},
          {"full_rounds", f.rounds},
          {"reduced_rounds", r.rounds},
          {"rounds_ratio", num(ratio(f.rounds, r.rounds))}};
}

}  // namespace

PartyRun run_party(int party, Endpoint& ep, const Model& model, const ReluConfig& config,
                   const Dataset& data, const RunOptions& options) {
  config.validate(model);
  if (options.batch == 0) throw ConfigError("batch size must be positive");
  if (options.triples && options.triples->party() != party) {
    throw ConfigError("triple store belongs to the other party");
  }
  const FixedPointConfig& fp = model.fixed_point;
  const std::size_t n = options.samples ? std::min(options.samples, data.size()) : data.size();
  if (n == 0) throw ConfigError("no samples to run");

  PartyRun run;
  run.party = party;
  std::vector<std::uint64_t> words;
  std::size_t classes = 0;
  for (std::size_t begin = 0; begin < n; begin += options.batch) {
    const std::size_t end = std::min(n, begin + options.batch);
    const Tensor x = data.batch(model.input_shape, begin, end);
    RingTensor secret(fp.ring_bits, x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) secret.data[i] = encode_fixed_word(x.data[i], fp);
    Prng share_rng(options.seed, derive_stream(kInputStream, begin));
    auto shares = share_arith(secret, share_rng);
    const ArithShareTensor& mine = party == 0 ? shares.first : shares.second;

    std::optional<TripleStore> fresh;
    if (!options.triples) {
      fresh.emplace(provision_party(model_triple_demand(model, config, end - begin),
                                    derive_stream(options.seed, kTripleStream, begin), party));
    }
    TripleStore& store = options.triples ? *options.triples : *fresh;
    ProtocolSession session(ep, store, fp);
    std::vector<LayerStat> stats;
    const ArithShareTensor out = model_forward(session, mine, model, config, &stats);
    const RingTensor opened = reveal(session, out);
    classes = opened.size() / (end - begin);
    words.insert(words.end(), opened.data.begin(), opened.data.end());
    accumulate(run.layers, stats);
  }
  run.logits = RingTensor(fp.ring_bits, {n, classes}, std::move(words));
  run.meter = ep.meter().snapshot();
  return run;
}

std::string config_digest(const Model& model, const ReluConfig& config, const RunOptions& options) {
  json j = config.to_json();
  j["ring_bits"] = model.fixed_point.ring_bits;
  j["frac_bits"] = model.fixed_point.frac_bits;
  j["batch"] = options.batch;
  j["seed"] = options.seed;
  j["samples"] = options.samples;
  return digest_hex(j.dump());
}

RunReport make_report(const PartyRun& run, const Model& model, const ReluConfig& config,
                      const Dataset& data, const RunOptions& options, double wall_ms) {
  RunReport r;
  r.parties = {run.meter};
  r.layers = run.layers;
  r.wall_ms = wall_ms;
  r.config_digest = config_digest(model, config, options);
  r.samples = run.logits.shape.empty() ? 0 : run.logits.shape[0];
  r.classes = run.logits.shape.size() > 1 ? run.logits.shape[1] : 0;

  std::vector<unsigned char> bytes;
  bytes.reserve(run.logits.size() * 8);
  r.logits.resize(run.logits.size());
  for (std::size_t i = 0; i < run.logits.size(); ++i) {
    const std::uint64_t w = run.logits.data[i];
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(w >> (8 * b)));
    r.logits[i] = decode_fixed_word(w, model.fixed_point);
  }
  r.output_digest = digest_hex(bytes);
  if (r.samples) {
    r.accuracy = accuracy(Tensor({r.samples, r.classes}, r.logits), data.batch_labels(0, r.samples));
  }
  return r;
}

MeterSnapshot RunReport::relu_totals() const {
  MeterSnapshot m;
  for (const auto& l : layers) {
    if (l.kind != "relu") continue;
    for (std::size_t t = 0; t < kTagCount; ++t) m.tags[t] += l.meter.tags[t];
  }
  return m;
}

json RunReport::to_json(bool with_logits) const {
  json j;
  j["tags"] = parties.empty() ? MeterSnapshot{}.to_json() : tags_json(parties.front());
  json ps = json::array();
  for (const auto& p : parties) ps.push_back(tags_json(p));
  j["parties"] = ps;
  j["relu_tags"] = tags_json(relu_totals());
  json ls = json::array();
  for (const auto& l : layers) {
    json e = {{"index", l.index}, {"kind", l.kind}, {"tags", tags_json(l.meter)}};
    if (l.group >= 0) e["group"] = l.group;
    if (!l.window.empty()) e["window"] = l.window;
    ls.push_back(std::move(e));
  }
  j["layers"] = ls;
  const TagCounters total = parties.empty() ? TagCounters{} : parties.front().total();
  j["total"] = {{"bytes", total.bytes_sent}, {"rounds", total.rounds}};
  j["wall_ms"] = wall_ms;
  j["config_digest"] = config_digest;
  j["output_digest"] = output_digest;
  j["accuracy"] = accuracy;
  j["samples"] = samples;
  j["classes"] = classes;
  if (with_logits) j["logits"] = logits;
  return j;
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  try {
    if (j.contains("parties")) {
      for (const auto& p : j.at("parties")) r.parties.push_back(MeterSnapshot::from_json(p));
    } else {
      r.parties.push_back(MeterSnapshot::from_json(j.at("tags")));
    }
    for (const auto& l : j.value("layers", json::array())) {
      LayerStat st;
      st.index = l.at("index").get<std::size_t>();
      st.kind = l.at("kind").get<std::string>();
      st.group = l.value("group", -1);
      st.window = l.value("window", std::string{});
      st.meter = MeterSnapshot::from_json(l.at("tags"));
      r.layers.push_back(std::move(st));
    }
    r.wall_ms = j.value("wall_ms", 0.0);
    r.config_digest = j.value("config_digest", std::string{});
    r.output_digest = j.value("output_digest", std::string{});
    r.accuracy = j.value("accuracy", 0.0);
    r.samples = j.value("samples", std::size_t{0});
    r.classes = j.value("classes", std::size_t{0});
    if (j.contains("logits")) r.logits = j.at("logits").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed run report: ") + e.what());
  }
  return r;
}

RunReport run_local(const Model& model, const ReluConfig& config, const Dataset& data,
                    const RunOptions& options) {
  auto [l0, l1] = make_local_link_pair();
  Endpoint e0(0, std::move(l0));
  Endpoint e1(1, std::move(l1));
  if (options.triples) throw ConfigError("run_local provisions its own triples");

  const auto t0 = std::chrono::steady_clock::now();
  PartyRun r0, r1;
  std::exception_ptr err0, err1;
  std::thread th([&] {
    try {
      r1 = run_party(1, e1, model, config, data, options);
    } catch (...) {
      err1 = std::current_exception();
      e1.close();
    }
  });
  try {
    r0 = run_party(0, e0, model, config, data, options);
  } catch (...) {
    err0 = std::current_exception();
    e0.close();
  }
  th.join();
  if (err0) std::rethrow_exception(err0);
  if (err1) std::rethrow_exception(err1);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!(r0.logits == r1.logits)) throw Error("parties reconstructed different outputs");

  RunReport rep = make_report(r0, model, config, data, options, ms);
  rep.parties = {r0.meter, r1.meter};
  return rep;
}

json compare_reports(const json& full, const json& reduced) {
  const RunReport f = RunReport::from_json(full);
  const RunReport r = RunReport::from_json(reduced);
  if (f.parties.empty() || r.parties.empty()) throw FormatError("report without meter data");
  json out;
  json tags = json::object();
  json relu = json::object();
  const MeterSnapshot fr = f.relu_totals(), rr = r.relu_totals();
  for (Tag t : kAllTags) {
    tags[std::string(tag_name(t))] = ratio_entry(f.parties[0].at(t), r.parties[0].at(t));
    relu[std::string(tag_name(t))] = ratio_entry(fr.at(t), rr.at(t));
  }
  out["tags"] = tags;
  out["total"] = ratio_entry(f.parties[0].total(), r.parties[0].total());
  out["relu_tags"] = relu;
  out["relu_total"] = ratio_entry(fr.total(), rr.total());
  out["same_output"] = f.output_digest == r.output_digest;
  return out;
}

}  // namespace redring
