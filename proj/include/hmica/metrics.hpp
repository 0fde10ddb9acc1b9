#pragma once

#include <vector>

#include "hmica/model.hpp"

namespace hmica {

struct AssignmentResult {
    std::vector<int> permutation;  // row i assigned to column permutation[i]
    double total_cost = 0.0;
};

// Minimum-cost assignment on a square cost matrix (augmenting-path method).
// Ties broken toward the lexicographically smallest permutation.
AssignmentResult hungarian(const Matrix& cost);

// Mean absolute Pearson correlation over optimally matched
// (true, estimated) component pairs.
double mcc(const Matrix& s_true, const Matrix& s_est);

// Fraction of matching time steps after an optimal relabeling of the
// estimated path (assignment on the confusion matrix).
double state_accuracy(const StatePath& true_path, const StatePath& est_path,
                      int num_states);

// Per-pair matched |Pearson correlation| values along with the matching.
struct MatchedCorrelations {
    AssignmentResult assignment;
    std::vector<double> abs_correlations;  // per true component
    double mean = 0.0;
};
MatchedCorrelations matched_correlations(const Matrix& s_true,
                                         const Matrix& s_est);

// Numerical checks of the identifiability conditions: full-rank irreducible
// transition matrix, C >= 2N+1, invertible matrix of natural-parameter
// differences against a pivot state, pairwise distinct state means.
struct AssumptionReport {
    TransitionReport transition;
    bool state_count_ok = false;        // C >= 2N + 1
    bool lambda_tilde_invertible = false;
    double lambda_tilde_cond = 0.0;     // after unit row normalization
    bool distinct_means = false;
    double min_mean_gap = 0.0;
    bool all_pass = false;
};
AssumptionReport check_assumptions(const ModelParams& params);

struct BenchmarkRow {
    int dim = 0;
    double with_logdet_ms = 0.0;
    double without_logdet_ms = 0.0;
};
// Mean wall-clock time of grad_lower_bound with and without the log-det
// term, per dimension, on a random batch.
std::vector<BenchmarkRow> benchmark_logdet(const std::vector<int>& dims,
                                           int num_layers, int repetitions,
                                           int batch_size = 64,
                                           std::uint64_t seed = 0);

}  // namespace hmica
