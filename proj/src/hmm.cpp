#include "hmica/hmm.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hmica {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const Vector& v) {
    double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (int i = 0; i < v.size(); ++i) s += std::exp(v(i) - m);
    return m + std::log(s);
}

Matrix safe_log(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            out(i, j) = m(i, j) > 0.0 ? std::log(m(i, j)) : kNegInf;
    return out;
}

void check_inputs(const Matrix& log_emissions, const TransitionMatrix& A,
                  const Vector& pi) {
    A.validate();
    const int C = A.num_states();
    if (log_emissions.rows() < 1)
        throw std::invalid_argument("empty emission matrix");
    if (log_emissions.cols() != C)
        throw std::invalid_argument("emission/transition state count mismatch");
    if (pi.size() != C)
        throw std::invalid_argument("initial distribution size mismatch");
    if (std::abs(pi.sum() - 1.0) > 1e-9)
        throw std::invalid_argument("initial distribution does not sum to 1");
    if (log_emissions.hasNaN())
        throw std::invalid_argument("NaN in log emissions");
}

}  // namespace

void TransitionMatrix::validate() const {
    if (probs.rows() != probs.cols() || probs.rows() < 1)
        throw std::invalid_argument("transition matrix must be square, C >= 1");
    for (int i = 0; i < probs.rows(); ++i) {
        double row_sum = probs.row(i).sum();
        if (std::abs(row_sum - 1.0) > 1e-12)
            throw std::invalid_argument("transition row does not sum to 1");
        if (probs.row(i).minCoeff() < 0.0 || probs.row(i).maxCoeff() > 1.0)
            throw std::invalid_argument("transition entry outside [0,1]");
    }
}

PosteriorSet forward_backward(const Matrix& log_emissions,
                              const TransitionMatrix& A, const Vector& pi) {
    check_inputs(log_emissions, A, pi);
    const int T = static_cast<int>(log_emissions.rows());
    const int C = A.num_states();
    const Matrix log_A = safe_log(A.probs);
    Vector log_pi(C);
    for (int c = 0; c < C; ++c)
        log_pi(c) = pi(c) > 0.0 ? std::log(pi(c)) : kNegInf;

    Matrix log_alpha(T, C), log_beta(T, C);
    log_alpha.row(0) = (log_pi + log_emissions.row(0).transpose()).transpose();
    Vector work(C);
    for (int t = 1; t < T; ++t) {
        for (int j = 0; j < C; ++j) {
            work = log_alpha.row(t - 1).transpose() + log_A.col(j);
            log_alpha(t, j) = log_sum_exp(work) + log_emissions(t, j);
        }
    }
    log_beta.row(T - 1).setZero();
    for (int t = T - 2; t >= 0; --t) {
        for (int i = 0; i < C; ++i) {
            work = log_A.row(i).transpose() +
                   log_emissions.row(t + 1).transpose() +
                   log_beta.row(t + 1).transpose();
            log_beta(t, i) = log_sum_exp(work);
        }
    }

    PosteriorSet post;
    post.log_likelihood = log_sum_exp(log_alpha.row(T - 1).transpose());

    post.gamma.resize(T, C);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c)
            post.gamma(t, c) =
                std::exp(log_alpha(t, c) + log_beta(t, c) - post.log_likelihood);
        double row_sum = post.gamma.row(t).sum();
        post.gamma.row(t) /= row_sum;
    }

    post.xi.reserve(T > 1 ? T - 1 : 0);
    for (int t = 1; t < T; ++t) {
        Matrix slice(C, C);
        for (int i = 0; i < C; ++i)
            for (int j = 0; j < C; ++j)
                slice(i, j) = std::exp(log_alpha(t - 1, i) + log_A(i, j) +
                                       log_emissions(t, j) + log_beta(t, j) -
                                       post.log_likelihood);
        slice /= slice.sum();
        post.xi.push_back(std::move(slice));
    }
    return post;
}

StatePath viterbi(const Matrix& log_emissions, const TransitionMatrix& A,
                  const Vector& pi) {
    check_inputs(log_emissions, A, pi);
    const int T = static_cast<int>(log_emissions.rows());
    const int C = A.num_states();
    const Matrix log_A = safe_log(A.probs);

    Matrix delta(T, C);
    Eigen::MatrixXi back(T, C);
    for (int c = 0; c < C; ++c)
        delta(0, c) = (pi(c) > 0.0 ? std::log(pi(c)) : kNegInf) +
                      log_emissions(0, c);
    for (int t = 1; t < T; ++t) {
        for (int j = 0; j < C; ++j) {
            int best_i = 0;
            double best = delta(t - 1, 0) + log_A(0, j);
            for (int i = 1; i < C; ++i) {
                double cand = delta(t - 1, i) + log_A(i, j);
                if (cand > best) {  // strict: ties keep the lowest index
                    best = cand;
                    best_i = i;
                }
            }
            delta(t, j) = best + log_emissions(t, j);
            back(t, j) = best_i;
        }
    }

    StatePath path;
    path.states.resize(T);
    int last = 0;
    for (int c = 1; c < C; ++c)
        if (delta(T - 1, c) > delta(T - 1, last)) last = c;
    path.states[T - 1] = last;
    for (int t = T - 2; t >= 0; --t)
        path.states[t] = back(t + 1, path.states[t + 1]);
    return path;
}

Vector stationary_distribution(const TransitionMatrix& A) {
    A.validate();
    const int C = A.num_states();
    // Asymmetric start so that periodic chains oscillate instead of sitting
    // on the symmetric fixed point.
    Vector pi(C);
    for (int i = 0; i < C; ++i) pi(i) = i + 1.0;
    pi /= pi.sum();
    constexpr double tol = 1e-12;
    constexpr int max_iters = 100000;
    for (int it = 0; it < max_iters; ++it) {
        Vector next = A.probs.transpose() * pi;
        next /= next.sum();
        double diff = (next - pi).lpNorm<Eigen::Infinity>();
        pi = next;
        if (diff < tol) {
            double residual =
                (A.probs.transpose() * pi - pi).lpNorm<Eigen::Infinity>();
            if (residual < 1e-10) return pi;
        }
    }
    throw std::runtime_error(
        "stationary distribution: power iteration did not converge "
        "(reducible or periodic chain?)");
}

TransitionMatrix update_transition(const PosteriorSet& posteriors) {
    const int C = static_cast<int>(posteriors.gamma.cols());
    Vector occupancy = posteriors.gamma.colwise().sum().transpose();
    for (int i = 0; i < C; ++i)
        if (occupancy(i) <= 0.0)
            throw std::runtime_error("dead state in transition update: state " +
                                     std::to_string(i) +
                                     " has zero occupancy");
    Matrix numer = Matrix::Zero(C, C);
    for (const Matrix& slice : posteriors.xi) numer += slice;
    Matrix probs(C, C);
    for (int i = 0; i < C; ++i) {
        probs.row(i) = numer.row(i) / occupancy(i);
        double row_sum = probs.row(i).sum();
        if (row_sum <= 0.0)
            throw std::runtime_error("dead state in transition update: state " +
                                     std::to_string(i) +
                                     " has no outgoing mass");
        probs.row(i) /= row_sum;
    }
    return TransitionMatrix{probs};
}

TransitionReport check_transition(const TransitionMatrix& A) {
    A.validate();
    const int C = A.num_states();
    TransitionReport report;

    Eigen::JacobiSVD<Matrix> svd(A.probs);
    const auto& sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-8) ++report.rank;
    report.full_rank = (report.rank == C);

    // Strong connectivity of the positive-entry adjacency graph.
    auto reachable = [&](int from) {
        std::vector<bool> seen(C, false);
        std::vector<int> stack{from};
        seen[from] = true;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v = 0; v < C; ++v)
                if (!seen[v] && A.probs(u, v) > 0.0) {
                    seen[v] = true;
                    stack.push_back(v);
                }
        }
        return seen;
    };
    report.irreducible = true;
    for (int i = 0; i < C && report.irreducible; ++i) {
        auto seen = reachable(i);
        for (int j = 0; j < C; ++j)
            if (!seen[j]) {
                report.irreducible = false;
                break;
            }
    }

    try {
        report.stationary = stationary_distribution(A);
        report.unique_stationary = report.irreducible;
    } catch (const std::runtime_error&) {
        report.unique_stationary = false;
    }
    return report;
}

}  // namespace hmica
