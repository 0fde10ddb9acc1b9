#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hmica {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Row-stochastic C x C transition matrix. Row i holds the probabilities of
// moving from state i to each state j at the next time step.
struct TransitionMatrix {
    Matrix probs;

    int num_states() const { return static_cast<int>(probs.rows()); }

    // Throws std::invalid_argument if not square, not row-stochastic
    // (1e-12 row-sum tolerance) or any entry lies outside [0, 1].
    void validate() const;
};

// Smoothed posteriors from forward-backward.
//   gamma(t, c)  = q(c at time t | all observations)
//   xi[t-1](i,j) = q(state i at t-1, state j at t | all observations), t >= 1
struct PosteriorSet {
    Matrix gamma;                 // T x C
    std::vector<Matrix> xi;       // T-1 matrices, each C x C
    double log_likelihood = 0.0;
};

struct StatePath {
    std::vector<int> states;

    int length() const { return static_cast<int>(states.size()); }
};

// Diagnostic report for the transition-matrix conditions needed by the
// identifiability of the model: full rank and an irreducible chain with a
// unique stationary distribution.
struct TransitionReport {
    int rank = 0;                    // numerical rank, singular values > 1e-8
    bool full_rank = false;
    bool irreducible = false;        // strong connectivity of positive entries
    bool unique_stationary = false;  // power iteration converged
    Vector stationary;               // empty unless unique_stationary
};

// Exact smoothed posteriors and data log-likelihood, computed with a
// log-domain recursion (per-step log-sum-exp) so no intermediate underflows
// even for very long sequences.
PosteriorSet forward_backward(const Matrix& log_emissions,
                              const TransitionMatrix& A,
                              const Vector& pi);

// Most probable state path; ties broken toward the lowest state index.
StatePath viterbi(const Matrix& log_emissions,
                  const TransitionMatrix& A,
                  const Vector& pi);

// Stationary distribution via power iteration on A^T (tolerance 1e-12,
// capped at 1e5 iterations). Throws std::runtime_error if the iteration
// fails to converge (reducible or periodic chain).
Vector stationary_distribution(const TransitionMatrix& A);

// Transition M-step: A*(i,j) = sum_{t>=2} xi(t,i,j) / sum_t gamma(t,i),
// rows renormalized to sum exactly to 1. Throws std::runtime_error on a
// dead state (zero total occupancy).
TransitionMatrix update_transition(const PosteriorSet& posteriors);

TransitionReport check_transition(const TransitionMatrix& A);

}  // namespace hmica
