/* C interface to the nnquad library: learned quadrotor dynamics, trajectory
 * planning and the flight pipeline stages. All functions return an
 * nnq_status; on failure nnq_last_error() describes the problem. */
#ifndef NNQUAD_NNQUAD_H
#define NNQUAD_NNQUAD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NNQ_API __declspec(dllexport)
#else
#define NNQ_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nnq_status {
  NNQ_OK = 0,
  NNQ_ERR_USAGE = 1,         /* bad arguments, config, or input files */
  NNQ_ERR_CRASH = 2,         /* a flight left the envelope (outputs kept) */
  NNQ_ERR_NOT_CONVERGED = 3, /* planner did not converge (outputs kept) */
  NNQ_ERR_INTERNAL = 4       /* numerical failure or unexpected error */
} nnq_status;

typedef struct nnq_config nnq_config;
typedef struct nnq_net nnq_net;

NNQ_API const char* nnq_version(void);

/* Message for the last failing call on this thread ("" if none). */
NNQ_API const char* nnq_last_error(void);

/* Summary line of the last successful or partially successful stage. */
NNQ_API const char* nnq_last_summary(void);

NNQ_API nnq_status nnq_config_default(nnq_config** out);
/* Reads an INI file on top of the defaults. */
NNQ_API nnq_status nnq_config_load(const char* path, nnq_config** out);
NNQ_API nnq_status nnq_config_set_seed(nnq_config* cfg, uint64_t seed);
NNQ_API nnq_status nnq_config_get_seed(const nnq_config* cfg, uint64_t* seed);
NNQ_API void nnq_config_free(nnq_config* cfg);

NNQ_API nnq_status nnq_collect(const nnq_config* cfg, const char* out_dir);
/* passes < 0 keeps the configured number of training passes. */
NNQ_API nnq_status nnq_train(const nnq_config* cfg, const char* data_dir, const char* out_dir, int passes);
/* model_dir NULL or "" plans with the ground-truth plant. */
NNQ_API nnq_status nnq_plan(const nnq_config* cfg, const char* model_dir, const char* desired_csv,
                            const char* out_dir);
/* mode: "nn_model" or "model_free". */
NNQ_API nnq_status nnq_fly(const nnq_config* cfg, const char* trajectory_csv, const char* mode,
                           const char* out_dir);
NNQ_API nnq_status nnq_eval(const char* log_csv, const char* desired_csv, const char* out_dir);
NNQ_API nnq_status nnq_experiment(const nnq_config* cfg, const char* out_dir);

/* Writes the configured sinusoid-yaw task as a trajectory CSV. */
NNQ_API nnq_status nnq_write_task(const nnq_config* cfg, const char* path);

NNQ_API nnq_status nnq_net_load(const char* path, nnq_net** out);
NNQ_API void nnq_net_free(nnq_net* net);
NNQ_API int nnq_net_input_dim(const nnq_net* net);
/* out[3] = physical prediction for in[input_dim]. */
NNQ_API nnq_status nnq_net_forward(const nnq_net* net, const double* in, double* out);
/* out[3 * input_dim], row-major d(out)/d(in). */
NNQ_API nnq_status nnq_net_jacobian(const nnq_net* net, const double* in, double* out);

#ifdef __cplusplus
}
#endif

#endif
