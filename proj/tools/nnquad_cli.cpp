// nnquad command line: collect | train | plan | fly | eval | experiment | task
#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nnquad/nnquad.h"

namespace {

struct Options {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out = "out";
  std::string data;
  int passes = -1;
  std::string models;
  bool ground_truth = false;
  std::string desired;
  std::string trajectory;
  std::string mode = "model_free";
  std::string log;
};

int Report(nnq_status st) {
  const char* summary = nnq_last_summary();
  if (st == NNQ_OK || st == NNQ_ERR_CRASH || st == NNQ_ERR_NOT_CONVERGED) {
    if (summary && *summary) std::printf("%s\n", summary);
  }
  if (st != NNQ_OK) std::fprintf(stderr, "error: %s\n", nnq_last_error());
  return static_cast<int>(st);
}

// Loads --config (or defaults) and applies --seed.
nnq_config* LoadConfig(const Options& o, nnq_status* st) {
  nnq_config* cfg = nullptr;
  *st = o.config.empty() ? nnq_config_default(&cfg) : nnq_config_load(o.config.c_str(), &cfg);
  if (*st != NNQ_OK) return nullptr;
  if (o.seed) nnq_config_set_seed(cfg, *o.seed);
  return cfg;
}

void AddCommon(CLI::App* sub, Options& o, bool needs_config) {
  if (needs_config) {
    sub->add_option("--config", o.config, "INI configuration file");
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
  }
  sub->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-dynamics quadrotor planning and control pipeline"};
  app.set_version_flag("--version", std::string(nnq_version()));
  app.require_subcommand(1);
  Options o;

  auto* collect = app.add_subcommand("collect", "fly the training maneuvers and log them");
  AddCommon(collect, o, true);

  auto* train = app.add_subcommand("train", "train both dynamics networks on collected logs");
  AddCommon(train, o, true);
  train->add_option("--data", o.data, "collect output directory")->required();
  train->add_option("--passes", o.passes, "training passes (default: config)");

  auto* plan = app.add_subcommand("plan", "plan a feasible reference for a desired trajectory");
  AddCommon(plan, o, true);
  plan->add_option("--desired", o.desired, "desired trajectory CSV")->required();
  auto* models = plan->add_option("--models", o.models, "train output directory with the models");
  auto* gt = plan->add_flag("--ground-truth", o.ground_truth, "plan with the true plant instead");
  models->excludes(gt);

  auto* fly = app.add_subcommand("fly", "fly a desired trajectory or a plan in closed loop");
  AddCommon(fly, o, true);
  fly->add_option("--trajectory", o.trajectory, "trajectory or plan CSV")->required();
  fly->add_option("--mode", o.mode, "nn_model (needs a plan) or model_free")
      ->check(CLI::IsMember({"nn_model", "model_free"}));

  auto* eval = app.add_subcommand("eval", "tracking error of a flight log");
  AddCommon(eval, o, false);
  eval->add_option("--log", o.log, "flight log CSV")->required();
  eval->add_option("--desired", o.desired, "desired trajectory CSV")->required();

  auto* experiment = app.add_subcommand("experiment", "collect, train, plan, fly and compare");
  AddCommon(experiment, o, true);

  auto* task = app.add_subcommand("task", "write the configured sinusoid-yaw task as CSV");
  AddCommon(task, o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return NNQ_ERR_USAGE;
  }

  if (*plan && !o.ground_truth && o.models.empty()) {
    std::fprintf(stderr, "error: plan needs --models DIR or --ground-truth\n");
    return NNQ_ERR_USAGE;
  }

  if (*eval) return Report(nnq_eval(o.log.c_str(), o.desired.c_str(), o.out.c_str()));

  nnq_status st = NNQ_OK;
  nnq_config* cfg = LoadConfig(o, &st);
  if (!cfg) return Report(st);
  if (*collect) {
    st = nnq_collect(cfg, o.out.c_str());
  } else if (*train) {
    st = nnq_train(cfg, o.data.c_str(), o.out.c_str(), o.passes);
  } else if (*plan) {
    st = nnq_plan(cfg, o.ground_truth ? nullptr : o.models.c_str(), o.desired.c_str(), o.out.c_str());
  } else if (*fly) {
    st = nnq_fly(cfg, o.trajectory.c_str(), o.mode.c_str(), o.out.c_str());
  } else if (*experiment) {
    st = nnq_experiment(cfg, o.out.c_str());
  } else if (*task) {
    st = nnq_write_task(cfg, o.out.c_str());
  }
  nnq_config_free(cfg);
  return Report(st);
}
