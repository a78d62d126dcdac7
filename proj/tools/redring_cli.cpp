// redring command-line driver. Exit codes: 0 ok, 1 internal, 2 config,
// 3 transport, 4 data format, 5 triple exhaustion.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "redring/dealer.hpp"
#include "redring/errors.hpp"
#include "redring/nn.hpp"
#include "redring/runner.hpp"
#include "redring/search.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace redring;

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << "\n";
  if (!out) throw FormatError("cannot write " + path);
}

// PREFIX-images.idx / PREFIX-labels.idx
Dataset load_prefix(const std::string& prefix) {
  return load_dataset(prefix + "-images.idx", prefix + "-labels.idx");
}

ReluConfig load_config(const std::string& spec, const Model& model) {
  if (spec == "full") return ReluConfig::full(model);
  ReluConfig c = ReluConfig::from_json(read_json(spec));
  c.validate(model);
  return c;
}

struct Common {
  std::string model, config = "full", data, out, logits_out;
  std::size_t batch = 64, samples = 0;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--model", c.model, "model manifest or directory")->required();
  cmd->add_option("--config", c.config, "relu config JSON, or 'full'");
  cmd->add_option("--data", c.data, "dataset prefix (PREFIX-images.idx, PREFIX-labels.idx)")->required();
  cmd->add_option("--batch", c.batch, "samples per protocol batch");
  cmd->add_option("--samples", c.samples, "limit on samples (0 = all)");
  cmd->add_option("--seed", c.seed, "seed for input shares and triples");
  cmd->add_option("--out", c.out, "write the run report here (default stdout)");
  cmd->add_option("--logits-out", c.logits_out, "write the report including decoded logits");
}

int run(int argc, char** argv) {
  CLI::App app{"redring: two-party fixed-point inference with reduced-ring ReLU"};
  app.require_subcommand(1);

  // gen-triples
  auto* gt = app.add_subcommand("gen-triples", "write a dealer triple batch");
  std::string kind = "arith", gt_out;
  int gt_width = 64;
  std::size_t gt_count = 0;
  std::uint64_t gt_seed = 1;
  gt->add_option("--kind", kind, "arith or bool")->check(CLI::IsMember({"arith", "bool"}));
  gt->add_option("--width", gt_width, "ring or word width")->check(CLI::Range(1, 64));
  gt->add_option("--count", gt_count)->required();
  gt->add_option("--seed", gt_seed);
  gt->add_option("--out", gt_out)->required();

  // gen-model
  auto* gm = app.add_subcommand("gen-model", "train a desk model on synthetic data");
  std::string arch = "cnn", gm_out;
  std::uint64_t gm_seed = 1;
  int epochs = 8;
  std::size_t n_train = 4096, n_val = 1024;
  gm->add_option("--arch", arch)->check(CLI::IsMember({"mlp", "cnn", "toy"}));
  gm->add_option("--seed", gm_seed);
  gm->add_option("--epochs", epochs);
  gm->add_option("--train-samples", n_train);
  gm->add_option("--val-samples", n_val);
  gm->add_option("--out", gm_out, "output directory")->required();

  // search
  auto* se = app.add_subcommand("search", "choose per-group bit windows");
  std::string mode = "eco", budget = "8/64", se_model, se_val, se_out;
  std::optional<double> threshold;
  std::vector<int> widths{0, 2, 3, 4, 6, 8, 12, 16};
  std::uint64_t se_seed = 1;
  std::size_t se_samples = 1024;
  se->add_option("--mode", mode)->check(CLI::IsMember({"eco", "budget"}));
  se->add_option("--budget", budget, "bit budget, e.g. 8/64");
  se->add_option("--threshold", threshold, "early-stop-1 accuracy threshold (default baseline - 0.05)");
  se->add_option("--widths", widths, "candidate widths")->delimiter(',');
  se->add_option("--model", se_model)->required();
  se->add_option("--val", se_val, "validation prefix")->required();
  se->add_option("--samples", se_samples, "validation samples used");
  se->add_option("--seed", se_seed);
  se->add_option("--out", se_out);

  // run-local / run-party
  auto* rl = app.add_subcommand("run-local", "run both parties in-process");
  Common lc;
  add_common(rl, lc);

  auto* rp = app.add_subcommand("run-party", "run one party over TCP");
  Common pc;
  int party = 0;
  std::string listen, connect;
  std::vector<std::string> triple_files;
  add_common(rp, pc);
  rp->add_option("--party", party)->required()->check(CLI::IsMember({0, 1}));
  auto* lopt = rp->add_option("--listen", listen, "host:port to listen on");
  auto* copt = rp->add_option("--connect", connect, "host:port to connect to");
  lopt->excludes(copt);
  rp->add_option("--triples", triple_files, "dealer triple files (default: derive from seed)");

  // report
  auto* rep = app.add_subcommand("report", "summarise or compare run reports");
  std::vector<std::string> compare;
  std::string rep_file;
  rep->add_option("--compare", compare, "full.json reduced.json")->expected(2);
  rep->add_option("file", rep_file, "single report to summarise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (gt->parsed()) {
    const TripleKind k = triple_kind_from_name(kind);
    save_triples(gen_triples(k, gt_count, gt_width, gt_seed), gt_out);
    json j = {{"kind", kind}, {"width", gt_width}, {"count", gt_count}, {"seed", gt_seed}, {"out", gt_out}};
    std::cout << j.dump() << "\n";
  } else if (gm->parsed()) {
    const fs::path dir = gm_out;
    const DeskModel desk = build_desk_model(arch, gm_seed, epochs, n_train, n_val);
    save_desk_model(desk, dir);
    const Model& model = desk.model;
    const double train_acc = desk.train_accuracy, val_acc = desk.val_accuracy;
    json j = {{"arch", arch}, {"out", dir.string()}, {"train_accuracy", train_acc}, {"val_accuracy", val_acc},
              {"groups", model.num_groups()}, {"group_numel", model.group_numel()}};
    std::cout << j.dump(2) << "\n";
  } else if (se->parsed()) {
    const Model model = load_model(se_model);
    Dataset val = load_prefix(se_val);
    if (se_samples && se_samples < val.size()) val = val.slice(0, se_samples);
    const Tensor x = val.batch(model.input_shape, 0, val.size());
    const auto labels = val.batch_labels(0, val.size());
    SearchResult res;
    if (mode == "eco") {
      res = search_eco(model, x, labels, se_seed);
    } else {
      SearchOptions opt;
      opt.budget = Budget::parse(budget);
      opt.threshold = threshold;
      opt.candidate_widths = widths;
      opt.seed = se_seed;
      res = search_budget(model, x, labels, opt);
    }
    write_json(res.to_json(), se_out);
  } else if (rl->parsed() || rp->parsed()) {
    const Common& c = rl->parsed() ? lc : pc;
    const Model model = load_model(c.model);
    const ReluConfig config = load_config(c.config, model);
    const Dataset data = load_prefix(c.data);
    RunOptions opt;
    opt.batch = c.batch;
    opt.samples = c.samples;
    opt.seed = c.seed;
    RunReport report;
    if (rl->parsed()) {
      report = run_local(model, config, data, opt);
    } else {
      if (listen.empty() == connect.empty()) throw ConfigError("run-party needs --listen or --connect");
      if (!triple_files.empty()) {
        opt.triples = std::make_shared<TripleStore>(party);
        for (const auto& f : triple_files) opt.triples->add(load_triples(f));
      }
      const auto [host, port] = parse_host_port(listen.empty() ? connect : listen);
      Endpoint ep(party, listen.empty() ? tcp_connect(host, port) : tcp_listen(host, port));
      const auto t0 = std::chrono::steady_clock::now();
      const PartyRun pr = run_party(party, ep, model, config, data, opt);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      report = make_report(pr, model, config, data, opt, ms);
    }
    if (!c.logits_out.empty()) write_json(report.to_json(true), c.logits_out);
    write_json(report.to_json(), c.out);
  } else if (rep->parsed()) {
    if (compare.size() == 2) {
      write_json(compare_reports(read_json(compare[0]), read_json(compare[1])), "-");
    } else if (!rep_file.empty()) {
      const RunReport r = RunReport::from_json(read_json(rep_file));
      write_json(r.to_json(), "-");
    } else {
      throw ConfigError("report needs --compare A B or a report file");
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const TripleExhaustedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
