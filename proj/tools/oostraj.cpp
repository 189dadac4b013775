// oostraj command-line tool. See README.md for the workflow.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oostraj/commands.hpp"

using namespace oostraj;

namespace {

struct Common {
  std::string config_path;
  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;
  std::vector<std::string> checkpoints;
  std::vector<std::string> methods;
  std::string split = "test";
  bool resume = false;
};

config::RunConfig load_config(const Common& c, bool seed_is_dataset) {
  config::RunConfig cfg = c.config_path.empty() ? config::profile(c.profile) : config::load(c.config_path);
  if (!c.config_path.empty() && c.profile != "desk")
    throw Error(Errc::InvalidConfig, "profile: use either --config or --profile");
  if (c.seed) {
    if (seed_is_dataset) cfg.seed = *c.seed;
    else cfg.train.seed = *c.seed;
  }
  cfg.validate();
  return cfg;
}

std::filesystem::path out_dir(const Common& c, const config::RunConfig& cfg) {
  return c.out.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(c.out);
}

std::vector<std::filesystem::path> paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Out-of-sight trajectory denoising and prediction"};
  app.require_subcommand(1);
  Common c;

  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "JSON run config overlaid on the defaults");
    sub->add_option("--profile", c.profile, "built-in profile when no --config is given")->check(CLI::IsMember({"desk", "long"}));
  };
  const auto add_dataset = [&](CLI::App* sub) {
    sub->add_option("--dataset", c.dataset, "dataset directory (manifest.json + JSONL splits)")->required();
  };
  const auto add_methods = [&](CLI::App* sub, const std::string& what) {
    sub->add_option("--methods", c.methods, what)->delimiter(',');
  };

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_config(simulate);
  simulate->add_option("--seed", c.seed, "dataset seed (overrides the config)");
  simulate->add_option("--out", c.out, "output directory (default: <output_dir>/data)");

  auto* train = app.add_subcommand("train", "train learned methods");
  add_config(train);
  add_dataset(train);
  train->add_option("--seed", c.seed, "training seed (overrides train.seed)");
  train->add_option("--out", c.out, "output directory (default: <output_dir>/models)");
  add_methods(train, "methods to train (default: ours)");
  train->add_flag("--resume", c.resume, "continue from <out>/<method>/last.ckpt");

  auto* eval = app.add_subcommand("eval", "score methods on a split");
  add_config(eval);
  add_dataset(eval);
  eval->add_option("--checkpoint", c.checkpoints, "checkpoint files or directories holding <method>/best.ckpt");
  eval->add_option("--out", c.out, "report directory (default: <output_dir>)");
  eval->add_option("--split", c.split, "split to score")->check(CLI::IsMember({"train", "val", "test"}));
  add_methods(eval, "methods to score (default: the config's list)");

  auto* ablate = app.add_subcommand("ablate", "train and score the full model and its ablations");
  add_config(ablate);
  add_dataset(ablate);
  ablate->add_option("--out", c.out, "report directory (default: <output_dir>)");

  auto* report = app.add_subcommand("report", "seeded benchmark of every method with a matched budget");
  add_config(report);
  add_dataset(report);
  report->add_option("--out", c.out, "report directory (default: <output_dir>)");
  add_methods(report, "methods to include (default: the config's list)");

  auto* calibrate = app.add_subcommand("calibrate", "DLT camera calibration diagnostics");
  add_dataset(calibrate);
  calibrate->add_option("--out", c.out, "report directory (default: the dataset directory)");

  auto* import = app.add_subcommand("import", "validate and import a generic-schema dataset");
  import->add_option("--dataset", c.dataset, "JSONL file or directory of {train,val,test}.jsonl")->required();
  import->add_option("--out", c.out, "output dataset directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto cfg = load_config(c, true);
      cmd::simulate(cfg, c.out.empty() ? out_dir(c, cfg) / "data" : std::filesystem::path(c.out), std::cout);
    } else if (train->parsed()) {
      const auto cfg = load_config(c, false);
      cmd::TrainOptions opt;
      if (!c.methods.empty()) opt.methods = c.methods;
      opt.resume = c.resume;
      cmd::train(cfg, c.dataset, c.out.empty() ? out_dir(c, cfg) / "models" : std::filesystem::path(c.out), opt, std::cout);
    } else if (eval->parsed()) {
      const auto cfg = load_config(c, false);
      cmd::EvalOptions opt{c.methods, paths(c.checkpoints), c.split};
      cmd::eval(cfg, c.dataset, out_dir(c, cfg), opt, std::cout);
    } else if (ablate->parsed()) {
      const auto cfg = load_config(c, false);
      cmd::ablate(cfg, c.dataset, out_dir(c, cfg), std::cout);
    } else if (report->parsed()) {
      const auto cfg = load_config(c, false);
      cmd::report(cfg, c.dataset, out_dir(c, cfg), c.methods, std::cout);
    } else if (calibrate->parsed()) {
      cmd::calibrate(c.dataset, c.out.empty() ? std::filesystem::path(c.dataset) : std::filesystem::path(c.out), std::cout);
    } else if (import->parsed()) {
      cmd::import_dataset(c.dataset, c.out, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
