#pragma once

#include <cstdint>
#include <vector>

#include "hmica/model.hpp"

namespace hmica {

enum class TrainMode { kFullBatch, kSubchain };

struct TrainConfig {
    int num_states = 5;       // C
    int num_components = 2;   // N
    int layers = 1;           // demixing-net depth
    int em_iterations = 200;  // EM iteration / epoch cap
    int gradient_steps = 5;   // Adam steps per M-step (per minibatch in
                              // subchain mode); 0 freezes the network
    double learning_rate = 1e-3;
    double tolerance = 1e-6;  // relative free-energy change
    int tolerance_window = 5;
    int restarts = 5;
    TrainMode mode = TrainMode::kFullBatch;
    int subchain_length = 100;
    int minibatch_size = 64;
    int buffer_length = 10;
    bool reset_adam_each_iteration = false;
    double alpha = 0.1;
    double init_p_stay = 0.9;
    double init_mean_low = -4.0;
    double init_mean_high = 4.0;
    double init_var_low = 0.5;
    double init_var_high = 1.5;
    std::uint64_t seed = 0;

    void validate(long T) const;  // throws std::invalid_argument
};

struct TraceRecord {
    int iteration = 0;
    double free_energy = 0.0;
    double log_likelihood = 0.0;
    double grad_norm = 0.0;
    double seconds = 0.0;
};

using TrainingTrace = std::vector<TraceRecord>;

struct TrainResult {
    ModelParams params;
    TrainingTrace trace;
    double final_free_energy = 0.0;
    double final_log_likelihood = 0.0;
    int iterations = 0;
    int best_restart = 0;
};

// Random initialization per the training protocol: means uniform in the
// configured range, variances likewise, circular transition matrix with
// init_p_stay, orthogonal network weights.
ModelParams init_params(const TrainConfig& config, std::uint64_t seed);

// E-step: log-emission matrix + stationary distribution + forward-backward.
PosteriorSet e_step(const Matrix& data, const ModelParams& params);

// Free-energy lower bound E_q[log p(c, x)] + H(q), evaluated from the
// posterior's gamma/xi and the model's log-emission matrix. Equals the
// data log-likelihood when q is the exact posterior.
double free_energy(const Matrix& data, const ModelParams& params,
                   const PosteriorSet& q);

TrainResult train_full(const Matrix& data, const TrainConfig& config);

TrainResult train_stochastic(const Matrix& data, const TrainConfig& config);

// Dispatches on config.mode.
TrainResult train(const Matrix& data, const TrainConfig& config);

// Continue training from an existing parameter set (checkpoint resume).
TrainResult train_from(const Matrix& data, const TrainConfig& config,
                       const ModelParams& start, int start_iteration = 0);

// Posterior over the full sequence assembled from independent buffered
// subchain forward-backward passes; buffered positions are used for the
// recursion but only core positions are reported. Exposed for the
// subchain-approximation tests.
Matrix stitched_subchain_gamma(const Matrix& log_emissions,
                               const TransitionMatrix& A, const Vector& pi,
                               int subchain_length, int buffer_length);

}  // namespace hmica
