#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hmica/emission.hpp"

namespace hmica {

// Square leaky-ReLU multilayer perceptron. The activation (slope alpha on
// the negative side) is applied between layers, never after the last one,
// so an L=1 network is a plain affine map. Every weight matrix is N x N
// and must stay nonsingular for the map to be a bijection.
struct DemixNet {
    std::vector<Matrix> weights;  // L matrices, each N x N
    std::vector<Vector> biases;   // L vectors, length N
    double alpha = 0.1;

    int dim() const { return weights.empty() ? 0 : static_cast<int>(weights[0].rows()); }
    int num_layers() const { return static_cast<int>(weights.size()); }
};

// Cached forward-pass state for one input: pre-activations per layer and
// the activation slopes (1 or alpha) actually taken at each hidden unit.
struct ForwardTrace {
    Vector input;
    std::vector<Vector> pre_activations;  // L vectors (last one == output)
    std::vector<Vector> slopes;           // L-1 vectors, entries in {1, alpha}
    Vector output;
};

struct NetGradients {
    std::vector<Matrix> d_weights;
    std::vector<Vector> d_biases;

    void scale_by(double s);
    void accumulate(const NetGradients& other);
    double squared_norm() const;
};

struct AdamState {
    NetGradients first_moment;
    NetGradients second_moment;
    long step_count = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

NetGradients zero_gradients(const DemixNet& net);

// Random orthogonal weights (QR of a Gaussian matrix, diagonal sign-fixed),
// zero biases. Bijective by construction.
DemixNet init_network(int dim, int num_layers, std::uint64_t seed,
                      double alpha = 0.1);

ForwardTrace forward(const DemixNet& net, const Vector& x);

// Jacobian of the map at the traced input:
// J = W_L D_{L-1} W_{L-1} ... D_1 W_1 with D_l = diag(slopes at layer l).
Matrix jacobian(const ForwardTrace& trace, const DemixNet& net);

// log|det J| via the analytic decomposition
// sum_l log|det W_l| + sum over hidden units of log(slope).
// Throws std::runtime_error on a singular weight matrix.
double log_abs_det_jacobian(const ForwardTrace& trace, const DemixNet& net);

// Gradient of
//   scale * sum_t [ log|J g(x_t)| + sum_c gamma(t,c) log p(g(x_t) | c) ]
// with respect to all weights and biases. The log-det part uses the exact
// per-layer form d/dW_l = T_b * W_l^{-T}; the activation slopes are
// piecewise constant so they contribute zero almost everywhere. Set
// include_logdet = false to drop the log-det term (used by the benchmark).
NetGradients grad_lower_bound(const DemixNet& net, const Matrix& batch,
                              const Matrix& gamma,
                              const GaussianStateParams& params, double scale,
                              bool include_logdet = true);

// Value of the same objective, for gradient checking and traces.
double lower_bound_value(const DemixNet& net, const Matrix& batch,
                         const Matrix& gamma, const GaussianStateParams& params,
                         double scale);

// One Adam update applied as ascent (parameters move along +gradient).
void adam_step(DemixNet& net, const NetGradients& grads, AdamState& state);

}  // namespace hmica
