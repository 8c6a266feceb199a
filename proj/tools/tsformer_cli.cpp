#include "tsformer/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>

using namespace tsformer;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_path, "INI config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", common.seed, "Override every seed");
  for (const std::string& key : RunConfig::keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&common, key](const std::string& v) { common.overrides[key] = v; },
        "Override " + key);
  }
}

RunConfig resolve(const Common& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : RunConfig::load(common.config_path);
  for (const auto& [key, value] : common.overrides) config.set(key, value);
  if (common.seed) config.set_seed(*common.seed);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Transformer encoder classifier for scalar time series"};
  app.require_subcommand(1);

  Common common;
  std::string out_path;
  std::string in_path;
  std::string checkpoint;
  std::string split_name = "test";

  auto* sim = app.add_subcommand("simulate", "Write an OU trajectory CSV");
  add_common(sim, common);
  sim->add_option("--out", out_path, "Output CSV")->required();

  auto* trn = app.add_subcommand("train", "Build data, train, evaluate and write artifacts");
  add_common(trn, common);

  auto* evl = app.add_subcommand("evaluate", "Evaluate a checkpoint on the configured data");
  add_common(evl, common);
  evl->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

  auto* ing = app.add_subcommand("ingest", "Convert a date,close CSV to derived returns");
  ing->add_option("--input", in_path, "Price CSV")->required();
  ing->add_option("--out", out_path, "Output CSV")->required();

  auto* plt = app.add_subcommand("plotdata", "Pointwise prediction table for a split");
  add_common(plt, common);
  plt->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  plt->add_option("--split", split_name, "train, validation or test");
  plt->add_option("--out", out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (ing->parsed()) {
      run_ingest(in_path, out_path);
      return 0;
    }
    const RunConfig config = resolve(common);
    if (sim->parsed()) {
      run_simulate(config, out_path);
    } else if (trn->parsed()) {
      const TrainOutcome outcome = run_train(config, &std::cerr);
      for (const EvalReport& r : outcome.reports) std::cout << r.to_json().dump() << '\n';
    } else if (evl->parsed()) {
      for (const EvalReport& r : run_evaluate(config, checkpoint)) std::cout << r.to_json().dump() << '\n';
    } else if (plt->parsed()) {
      run_plotdata(config, checkpoint, split_name, out_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
