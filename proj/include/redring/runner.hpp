#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "redring/dealer.hpp"
#include "redring/nn.hpp"
#include "redring/transport.hpp"

namespace redring {

struct RunOptions {
  std::size_t batch = 64;
  std::size_t samples = 0;  // 0 = whole dataset
  std::uint64_t seed = 1;
  // Preloaded dealer material; when absent each batch is provisioned from seed.
  std::shared_ptr<TripleStore> triples;
};

struct PartyRun {
  int party = 0;
  RingTensor logits;  // reconstructed, [samples, classes]
  MeterSnapshot meter;
  std::vector<LayerStat> layers;  // summed over batches
};

/// One party's side of batched inference over `ep`. Input shares and (unless
/// options.triples is set) triples are derived from options.seed, so both
/// parties can run independently and agree.
PartyRun run_party(int party, Endpoint& ep, const Model& model, const ReluConfig& config,
                   const Dataset& data, const RunOptions& options);

struct RunReport {
  std::vector<MeterSnapshot> parties;  // one per party present
  std::vector<LayerStat> layers;
  double wall_ms = 0.0;
  std::string config_digest;
  std::string output_digest;
  double accuracy = 0.0;
  std::size_t samples = 0;
  std::vector<double> logits;  // decoded, row-major
  std::size_t classes = 0;

  nlohmann::json to_json(bool with_logits = false) const;
  static RunReport from_json(const nlohmann::json& j);
  // Per-tag totals over all ReLU layers.
  MeterSnapshot relu_totals() const;
};

std::string config_digest(const Model& model, const ReluConfig& config, const RunOptions& options);

RunReport make_report(const PartyRun& run, const Model& model, const ReluConfig& config,
                      const Dataset& data, const RunOptions& options, double wall_ms);

/// Both parties in-process on two threads.
RunReport run_local(const Model& model, const ReluConfig& config, const Dataset& data,
                    const RunOptions& options);

/// Per-tag ratios full / reduced for bytes and rounds, plus totals and the
/// ReLU-only totals.
nlohmann::json compare_reports(const nlohmann::json& full, const nlohmann::json& reduced);

}  // namespace redring
