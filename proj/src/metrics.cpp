#include "hmica/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hmica {

namespace {

// Augmenting-path (Jonker-Volgenant style) minimum-cost assignment.
// Returns row -> column and the optimal total cost.
std::pair<std::vector<int>, double> solve_assignment(const Matrix& cost) {
    const int n = static_cast<int>(cost.rows());
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1,
                                 std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, false);
        do {
            used[j0] = true;
            int i0 = p[j0], j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (int j = 1; j <= n; ++j)
                if (!used[j]) {
                    double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> rowsol(n, -1);
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
        if (p[j]) {
            rowsol[p[j] - 1] = j - 1;
            total += cost(p[j] - 1, j - 1);
        }
    return {rowsol, total};
}

double pearson(const Vector& a, const Vector& b) {
    const double n = static_cast<double>(a.size());
    double ma = a.mean(), mb = b.mean();
    Vector da = a.array() - ma, db = b.array() - mb;
    double va = da.squaredNorm() / n, vb = db.squaredNorm() / n;
    if (va <= 0.0 || vb <= 0.0)
        throw std::invalid_argument("zero-variance column in correlation");
    return da.dot(db) / (n * std::sqrt(va * vb));
}

}  // namespace

AssignmentResult hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols() || cost.rows() < 1)
        throw std::invalid_argument("cost matrix must be square");
    if (!cost.allFinite())
        throw std::invalid_argument("non-finite cost entry");
    const int n = static_cast<int>(cost.rows());
    const double opt = solve_assignment(cost).second;
    const double tol = 1e-9 * (1.0 + std::abs(opt));

    // Fix rows in order, picking for each the smallest column that still
    // admits an optimal completion; this yields the lexicographically
    // smallest optimal permutation.
    std::vector<int> perm(n, -1);
    std::vector<int> free_cols(n);
    std::iota(free_cols.begin(), free_cols.end(), 0);
    double fixed_cost = 0.0;
    for (int i = 0; i < n; ++i) {
        const int m = static_cast<int>(free_cols.size());
        int chosen = -1;
        int best_jj = 0;
        double best_total = std::numeric_limits<double>::infinity();
        for (int jj = 0; jj < m && chosen < 0; ++jj) {
            double trial_fixed = fixed_cost + cost(i, free_cols[jj]);
            double rest = 0.0;
            if (m > 1) {
                Matrix sub(m - 1, m - 1);
                int r = 0;
                for (int ii = i + 1; ii < n; ++ii, ++r) {
                    int cidx = 0;
                    for (int kk = 0; kk < m; ++kk) {
                        if (kk == jj) continue;
                        sub(r, cidx++) = cost(ii, free_cols[kk]);
                    }
                }
                rest = solve_assignment(sub).second;
            }
            if (trial_fixed + rest <= opt + tol) chosen = jj;
            if (trial_fixed + rest < best_total) {
                best_total = trial_fixed + rest;
                best_jj = jj;
            }
        }
        if (chosen < 0) chosen = best_jj;
        perm[i] = free_cols[chosen];
        fixed_cost += cost(i, perm[i]);
        free_cols.erase(free_cols.begin() + chosen);
    }

    AssignmentResult result;
    result.permutation = std::move(perm);
    result.total_cost = fixed_cost;
    return result;
}

MatchedCorrelations matched_correlations(const Matrix& s_true,
                                         const Matrix& s_est) {
    if (s_true.rows() != s_est.rows() || s_true.cols() != s_est.cols())
        throw std::invalid_argument("shape mismatch in correlation matching");
    const int N = static_cast<int>(s_true.cols());
    Matrix abs_corr(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            abs_corr(i, j) = std::abs(pearson(s_true.col(i), s_est.col(j)));
    Matrix cost = Matrix::Ones(N, N) - abs_corr;

    MatchedCorrelations out;
    out.assignment = hungarian(cost);
    out.abs_correlations.resize(N);
    double sum = 0.0;
    for (int i = 0; i < N; ++i) {
        out.abs_correlations[i] = abs_corr(i, out.assignment.permutation[i]);
        sum += out.abs_correlations[i];
    }
    out.mean = sum / N;
    return out;
}

double mcc(const Matrix& s_true, const Matrix& s_est) {
    return matched_correlations(s_true, s_est).mean;
}

double state_accuracy(const StatePath& true_path, const StatePath& est_path,
                      int num_states) {
    if (true_path.length() != est_path.length())
        throw std::invalid_argument("path length mismatch");
    const long T = true_path.length();
    Matrix counts = Matrix::Zero(num_states, num_states);
    for (long t = 0; t < T; ++t) {
        int a = true_path.states[t], b = est_path.states[t];
        if (a < 0 || a >= num_states || b < 0 || b >= num_states)
            throw std::invalid_argument("state index out of range");
        counts(a, b) += 1.0;
    }
    AssignmentResult match = hungarian(-counts);
    double matched = 0.0;
    for (int i = 0; i < num_states; ++i)
        matched += counts(i, match.permutation[i]);
    return matched / static_cast<double>(T);
}

AssumptionReport check_assumptions(const ModelParams& params) {
    AssumptionReport report;
    report.transition = check_transition(params.transition);

    const int C = params.num_states();
    const int N = params.num_components();
    report.state_count_ok = C >= 2 * N + 1;

    if (C >= 2 * N + 1) {
        NaturalParams nat = gaussian_to_natural(params.sources);
        // Rows are (lambda_c - lambda_0) for c = 1..2N, scaled to unit norm;
        // the invertibility condition is scale-free.
        Matrix lt(2 * N, 2 * N);
        for (int c = 1; c <= 2 * N; ++c) {
            Vector row(2 * N);
            for (int i = 0; i < N; ++i) {
                row(2 * i) = nat.eta1(c, i) - nat.eta1(0, i);
                row(2 * i + 1) = nat.eta2(c, i) - nat.eta2(0, i);
            }
            double norm = row.norm();
            if (norm > 0.0) row /= norm;
            lt.row(c - 1) = row.transpose();
        }
        Eigen::JacobiSVD<Matrix> svd(lt);
        const auto& sv = svd.singularValues();
        double smallest = sv(sv.size() - 1);
        report.lambda_tilde_cond =
            smallest > 0.0 ? sv(0) / smallest
                           : std::numeric_limits<double>::infinity();
        double abs_det = sv.array().prod();
        report.lambda_tilde_invertible = abs_det > 1e-10;
    }

    report.min_mean_gap = std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; ++c)
        for (int c2 = c + 1; c2 < C; ++c2)
            for (int i = 0; i < N; ++i)
                report.min_mean_gap =
                    std::min(report.min_mean_gap,
                             std::abs(params.sources.means(c, i) -
                                      params.sources.means(c2, i)));
    report.distinct_means = report.min_mean_gap > 1e-6;

    report.all_pass = report.transition.full_rank &&
                      report.transition.irreducible &&
                      report.transition.unique_stationary &&
                      report.state_count_ok &&
                      report.lambda_tilde_invertible && report.distinct_means;
    return report;
}

std::vector<BenchmarkRow> benchmark_logdet(const std::vector<int>& dims,
                                           int num_layers, int repetitions,
                                           int batch_size, std::uint64_t seed) {
    using clock = std::chrono::steady_clock;
    std::vector<BenchmarkRow> rows;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int C = 3;
    for (int dim : dims) {
        DemixNet net = init_network(dim, num_layers, seed + dim);
        Matrix batch(batch_size, dim);
        for (int t = 0; t < batch_size; ++t)
            for (int i = 0; i < dim; ++i) batch(t, i) = gauss(rng);
        Matrix gamma = Matrix::Constant(batch_size, C, 1.0 / C);
        GaussianStateParams params;
        params.means = Matrix::Zero(C, dim);
        params.variances = Matrix::Ones(C, dim);

        auto time_ms = [&](bool with_logdet) {
            // Warm-up pass, then the timed repetitions.
            grad_lower_bound(net, batch, gamma, params, 1.0, with_logdet);
            auto start = clock::now();
            for (int r = 0; r < repetitions; ++r)
                grad_lower_bound(net, batch, gamma, params, 1.0, with_logdet);
            auto stop = clock::now();
            return std::chrono::duration<double, std::milli>(stop - start)
                       .count() /
                   repetitions;
        };

        BenchmarkRow row;
        row.dim = dim;
        row.with_logdet_ms = time_ms(true);
        row.without_logdet_ms = time_ms(false);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace hmica
