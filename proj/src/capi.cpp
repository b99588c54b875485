#include "nnquad/nnquad.h"

#include <exception>
#include <new>
#include <string>

#include "nnquad/errors.hpp"
#include "nnquad/pipeline.hpp"
#include "nnquad/relu_net.hpp"

struct nnq_config {
  nnquad::RunConfig cfg;
};

struct nnq_net {
  nnquad::ReluNet net;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_summary;

nnq_status StatusFor(nnquad::ErrorCode code) {
  using nnquad::ErrorCode;
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kIoError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kLengthMismatch:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kDegenerateData:
    case ErrorCode::kMalformedModelFile:
    case ErrorCode::kModelContractViolation:
      return NNQ_ERR_USAGE;
    case ErrorCode::kEnvelopeViolation:
    case ErrorCode::kSingularAttitude:
      return NNQ_ERR_CRASH;
    default:
      return NNQ_ERR_INTERNAL;
  }
}

template <typename F>
nnq_status Guard(F&& f) {
  g_error.clear();
  try {
    return f();
  } catch (const nnquad::Error& e) {
    g_error = e.what();
    return StatusFor(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
  } catch (const std::exception& e) {
    g_error = e.what();
  } catch (...) {
    g_error = "unknown error";
  }
  return NNQ_ERR_INTERNAL;
}

nnq_status Usage(const char* what) {
  g_error = what;
  return NNQ_ERR_USAGE;
}

nnq_status FromOutcome(const nnquad::StageOutcome& o) {
  g_summary = o.summary;
  switch (o.status) {
    case nnquad::StageStatus::kCrash:
      g_error = o.summary;
      return NNQ_ERR_CRASH;
    case nnquad::StageStatus::kNotConverged:
      g_error = o.summary;
      return NNQ_ERR_NOT_CONVERGED;
    default:
      return NNQ_OK;
  }
}

std::string Str(const char* s) { return s ? s : ""; }

}  // namespace

extern "C" {

const char* nnq_version(void) { return nnquad::kToolVersion; }

const char* nnq_last_error(void) { return g_error.c_str(); }

const char* nnq_last_summary(void) { return g_summary.c_str(); }

nnq_status nnq_config_default(nnq_config** out) {
  if (!out) return Usage("out is null");
  return Guard([&] {
    *out = new nnq_config();
    return NNQ_OK;
  });
}

nnq_status nnq_config_load(const char* path, nnq_config** out) {
  if (!path || !out) return Usage("path and out must be non-null");
  return Guard([&] {
    auto* c = new nnq_config();
    try {
      c->cfg = nnquad::LoadRunConfig(path);
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
    return NNQ_OK;
  });
}

nnq_status nnq_config_set_seed(nnq_config* cfg, uint64_t seed) {
  if (!cfg) return Usage("config is null");
  cfg->cfg.seed = seed;
  return NNQ_OK;
}

nnq_status nnq_config_get_seed(const nnq_config* cfg, uint64_t* seed) {
  if (!cfg || !seed) return Usage("config and seed must be non-null");
  *seed = cfg->cfg.seed;
  return NNQ_OK;
}

void nnq_config_free(nnq_config* cfg) { delete cfg; }

nnq_status nnq_collect(const nnq_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) return Usage("config and out_dir must be non-null");
  return Guard([&] { return FromOutcome(nnquad::RunCollect(cfg->cfg, out_dir)); });
}

nnq_status nnq_train(const nnq_config* cfg, const char* data_dir, const char* out_dir, int passes) {
  if (!cfg || !data_dir || !out_dir) return Usage("config, data_dir and out_dir must be non-null");
  return Guard([&] { return FromOutcome(nnquad::RunTrain(cfg->cfg, data_dir, out_dir, passes)); });
}

nnq_status nnq_plan(const nnq_config* cfg, const char* model_dir, const char* desired_csv,
                    const char* out_dir) {
  if (!cfg || !desired_csv || !out_dir) return Usage("config, desired_csv and out_dir must be non-null");
  return Guard([&] {
    return FromOutcome(nnquad::RunPlan(cfg->cfg, Str(model_dir), desired_csv, out_dir));
  });
}

nnq_status nnq_fly(const nnq_config* cfg, const char* trajectory_csv, const char* mode,
                   const char* out_dir) {
  if (!cfg || !trajectory_csv || !mode || !out_dir) return Usage("null argument to nnq_fly");
  return Guard([&] { return FromOutcome(nnquad::RunFly(cfg->cfg, trajectory_csv, mode, out_dir)); });
}

nnq_status nnq_eval(const char* log_csv, const char* desired_csv, const char* out_dir) {
  if (!log_csv || !desired_csv || !out_dir) return Usage("null argument to nnq_eval");
  return Guard([&] { return FromOutcome(nnquad::RunEval(log_csv, desired_csv, out_dir)); });
}

nnq_status nnq_experiment(const nnq_config* cfg, const char* out_dir) {
  if (!cfg || !out_dir) return Usage("config and out_dir must be non-null");
  return Guard([&] { return FromOutcome(nnquad::RunExperiment(cfg->cfg, out_dir)); });
}

nnq_status nnq_write_task(const nnq_config* cfg, const char* path) {
  if (!cfg || !path) return Usage("config and path must be non-null");
  return Guard([&] {
    nnquad::WriteTrajectoryCsv(path, nnquad::TaskTrajectory(cfg->cfg));
    return NNQ_OK;
  });
}

nnq_status nnq_net_load(const char* path, nnq_net** out) {
  if (!path || !out) return Usage("path and out must be non-null");
  return Guard([&] {
    auto* n = new nnq_net();
    try {
      n->net = nnquad::LoadModel(path);
    } catch (...) {
      delete n;
      throw;
    }
    *out = n;
    return NNQ_OK;
  });
}

void nnq_net_free(nnq_net* net) { delete net; }

int nnq_net_input_dim(const nnq_net* net) { return net ? net->net.input_dim() : 0; }

nnq_status nnq_net_forward(const nnq_net* net, const double* in, double* out) {
  if (!net || !in || !out) return Usage("null argument to nnq_net_forward");
  return Guard([&] {
    const Eigen::Map<const Eigen::VectorXd> beta(in, net->net.input_dim());
    const Eigen::Vector3d y = nnquad::Forward(net->net, beta).physical;
    for (int i = 0; i < 3; ++i) out[i] = y(i);
    return NNQ_OK;
  });
}

nnq_status nnq_net_jacobian(const nnq_net* net, const double* in, double* out) {
  if (!net || !in || !out) return Usage("null argument to nnq_net_jacobian");
  return Guard([&] {
    const int d = net->net.input_dim();
    const Eigen::Map<const Eigen::VectorXd> beta(in, d);
    const Eigen::MatrixXd j = nnquad::Jacobian(net->net, beta);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < d; ++c) out[r * d + c] = j(r, c);
    }
    return NNQ_OK;
  });
}

}  // extern "C"
