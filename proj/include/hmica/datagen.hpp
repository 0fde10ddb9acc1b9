#pragma once

#include <cstdint>

#include "hmica/model.hpp"

namespace hmica {

struct DatagenConfig {
    int num_components = 5;     // N
    int num_states = 11;        // C, defaults to 2N+1
    int mixing_layers = 1;      // L
    long sequence_length = 100000;
    double p_stay = 0.99;
    double alpha = 0.1;         // mixing-net activation slope
    double cond_cap = 25.0;     // per-layer condition number cap
    double mean_low = -4.0;
    double mean_high = 4.0;
    double var_low = 0.1;
    double var_high = 1.0;
    std::uint64_t seed = 0;
};

// Generated observations with all ground truth retained.
struct DatasetBundle {
    Matrix observations;  // T x N
    Matrix sources;       // T x N
    StatePath state_path;
    DemixNet mixing_net;
    ModelParams true_params;
    DatagenConfig config;
};

// Circular chain: stay with probability p_stay, otherwise move to the next
// state in a fixed cyclic order.
TransitionMatrix make_circular_transition(int num_states, double p_stay);

StatePath sample_states(const TransitionMatrix& A, const Vector& pi, long T,
                        std::uint64_t seed);

Matrix sample_sources(const StatePath& path, const GaussianStateParams& params,
                      std::uint64_t seed);

// Random invertible leaky-ReLU mixing MLP: Gaussian weight matrices
// re-sampled until each layer's condition number is below cond_cap,
// zero biases.
DemixNet make_mixing_mlp(int dim, int num_layers, std::uint64_t seed,
                         double cond_cap = 25.0, double alpha = 0.1);

// Draw random per-state Gaussian source parameters within the config ranges.
GaussianStateParams random_state_params(const DatagenConfig& config,
                                        std::uint64_t seed);

DatasetBundle generate_dataset(const DatagenConfig& config);

// Push every row of `sources` through the mixing net.
Matrix mix_sources(const DemixNet& net, const Matrix& sources);

}  // namespace hmica
