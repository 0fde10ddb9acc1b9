#pragma once

#include <Eigen/Dense>

namespace hmica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kVarianceFloor = 1e-8;

// Per-state diagonal Gaussian source parameters: row c holds the means and
// variances of the N components while state c is active.
struct GaussianStateParams {
    Matrix means;      // C x N
    Matrix variances;  // C x N, strictly positive (floored at kVarianceFloor)

    int num_states() const { return static_cast<int>(means.rows()); }
    int num_components() const { return static_cast<int>(means.cols()); }
};

// Natural-parameter form: per (state, component) the pair
// (mu/sigma^2, -1/(2 sigma^2)), stored as two C x N matrices.
struct NaturalParams {
    Matrix eta1;  // C x N, mu / sigma^2
    Matrix eta2;  // C x N, -1 / (2 sigma^2), strictly negative
};

// Throws std::invalid_argument on a non-positive variance.
NaturalParams gaussian_to_natural(const GaussianStateParams& params);

// Inverse map; throws std::invalid_argument if any eta2 >= 0.
GaussianStateParams natural_to_gaussian(const NaturalParams& nat);

// Sufficient statistics (s_1, s_1^2, s_2, s_2^2, ...), length 2N.
Vector sufficient_stats(const Vector& s);

struct DemixNet;  // demix_net.hpp

// T x C matrix with entry (t, c) =
//   log|det J g(x_t)| + sum_i log N(g_i(x_t); mu_{c,i}, sigma^2_{c,i}).
// The Jacobian term is computed once per t and shared across states.
Matrix log_emission_matrix(const Matrix& x_seq, const DemixNet& net,
                           const GaussianStateParams& params);

// Closed-form Gaussian M-step: gamma-weighted means and (biased) variances
// of the source estimates, variances floored at kVarianceFloor. Throws
// std::runtime_error on a state with zero occupancy.
GaussianStateParams m_step_gaussian(const Matrix& gamma, const Matrix& s_seq);

}  // namespace hmica
