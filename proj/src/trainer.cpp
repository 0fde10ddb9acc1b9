#include "hmica/trainer.hpp"

#include "hmica/datagen.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hmica {

namespace {

using clock_type = std::chrono::steady_clock;

double xlogy(double x, double y) { return x > 0.0 ? x * std::log(y) : 0.0; }

Matrix apply_net(const DemixNet& net, const Matrix& data) {
    Matrix out(data.rows(), data.cols());
    for (long t = 0; t < data.rows(); ++t)
        out.row(t) = forward(net, data.row(t).transpose()).output.transpose();
    return out;
}

double free_energy_impl(const Matrix& log_emissions, const TransitionMatrix& A,
                        const Vector& pi, const PosteriorSet& q) {
    const long T = q.gamma.rows();
    const int C = static_cast<int>(q.gamma.cols());
    double energy = 0.0;
    for (int c = 0; c < C; ++c) energy += xlogy(q.gamma(0, c), pi(c));
    for (long t = 0; t < T; ++t)
        for (int c = 0; c < C; ++c)
            if (q.gamma(t, c) > 0.0)
                energy += q.gamma(t, c) * log_emissions(t, c);
    double entropy = 0.0;
    for (int c = 0; c < C; ++c) entropy -= xlogy(q.gamma(0, c), q.gamma(0, c));
    for (long t = 1; t < T; ++t) {
        const Matrix& slice = q.xi[t - 1];
        for (int i = 0; i < C; ++i)
            for (int j = 0; j < C; ++j) {
                energy += xlogy(slice(i, j), A.probs(i, j));
                if (slice(i, j) > 0.0 && q.gamma(t - 1, i) > 0.0)
                    entropy -= slice(i, j) *
                               std::log(slice(i, j) / q.gamma(t - 1, i));
            }
    }
    return energy + entropy;
}

TransitionMatrix transition_from_stats(const Matrix& xi_sum,
                                       const Vector& occupancy) {
    const int C = static_cast<int>(occupancy.size());
    Matrix probs(C, C);
    for (int i = 0; i < C; ++i) {
        if (occupancy(i) <= 0.0)
            throw std::runtime_error("dead state in transition update: state " +
                                     std::to_string(i));
        probs.row(i) = xi_sum.row(i) / occupancy(i);
        double row_sum = probs.row(i).sum();
        if (row_sum <= 0.0)
            throw std::runtime_error("dead state in transition update: state " +
                                     std::to_string(i));
        probs.row(i) /= row_sum;
    }
    return TransitionMatrix{probs};
}

GaussianStateParams gaussians_from_stats(const Vector& occupancy,
                                         const Matrix& s_sum,
                                         const Matrix& s2_sum) {
    const int C = static_cast<int>(occupancy.size());
    const int N = static_cast<int>(s_sum.cols());
    GaussianStateParams out;
    out.means.resize(C, N);
    out.variances.resize(C, N);
    for (int c = 0; c < C; ++c) {
        if (occupancy(c) <= 0.0)
            throw std::runtime_error("zero occupancy in Gaussian M-step: state " +
                                     std::to_string(c));
        out.means.row(c) = s_sum.row(c) / occupancy(c);
        out.variances.row(c) =
            (s2_sum.row(c) / occupancy(c) -
             out.means.row(c).cwiseProduct(out.means.row(c)))
                .cwiseMax(kVarianceFloor);
    }
    return out;
}

bool converged(const std::vector<double>& history, double tolerance,
               int window) {
    const int n = static_cast<int>(history.size());
    if (n <= window) return false;
    double prev = history[n - 1 - window];
    double rel = std::abs(history[n - 1] - prev) / (std::abs(prev) + 1e-12);
    return rel < tolerance;
}

AdamState fresh_adam(const TrainConfig& config) {
    AdamState state;
    state.lr = config.learning_rate;
    return state;
}

TrainResult run_full(const Matrix& data, const TrainConfig& config,
                     ModelParams params, int start_iteration) {
    TrainResult result;
    AdamState adam = fresh_adam(config);
    std::vector<double> fe_history;
    auto t0 = clock_type::now();

    int iteration = start_iteration;
    for (int step = 0; step < config.em_iterations; ++step) {
        ++iteration;
        Vector pi = stationary_distribution(params.transition);
        Matrix log_emissions =
            log_emission_matrix(data, params.net, params.sources);
        PosteriorSet post =
            forward_backward(log_emissions, params.transition, pi);
        double fe = free_energy_impl(log_emissions, params.transition, pi, post);

        params.transition = update_transition(post);
        Matrix s_seq = apply_net(params.net, data);
        params.sources = m_step_gaussian(post.gamma, s_seq);

        double grad_norm = 0.0;
        if (config.gradient_steps > 0) {
            if (config.reset_adam_each_iteration) adam = fresh_adam(config);
            for (int k = 0; k < config.gradient_steps; ++k) {
                NetGradients grads = grad_lower_bound(
                    params.net, data, post.gamma, params.sources, 1.0);
                grad_norm = std::sqrt(grads.squared_norm());
                adam_step(params.net, grads, adam);
            }
        }

        double seconds =
            std::chrono::duration<double>(clock_type::now() - t0).count();
        result.trace.push_back(
            {iteration, fe, post.log_likelihood, grad_norm, seconds});
        fe_history.push_back(fe);
        if (converged(fe_history, config.tolerance, config.tolerance_window))
            break;
    }

    PosteriorSet final_post = e_step(data, params);
    result.params = std::move(params);
    result.final_log_likelihood = final_post.log_likelihood;
    result.final_free_energy = final_post.log_likelihood;  // tight at E-step
    result.iterations = iteration;
    return result;
}

TrainResult run_subchain(const Matrix& data, const TrainConfig& config,
                         ModelParams params, int start_iteration,
                         std::uint64_t shuffle_seed) {
    const long T = data.rows();
    const int N = static_cast<int>(data.cols());
    const int C = config.num_states;
    const int len = config.subchain_length;
    const int buf = config.buffer_length;
    const long num_chains = T / len;  // tail beyond num_chains*len is dropped

    TrainResult result;
    AdamState adam = fresh_adam(config);
    std::vector<double> fe_history;
    std::mt19937_64 shuffle_rng(shuffle_seed);
    auto t0 = clock_type::now();

    std::vector<long> order(num_chains);
    std::iota(order.begin(), order.end(), 0);

    int iteration = start_iteration;
    for (int epoch = 0; epoch < config.em_iterations; ++epoch) {
        ++iteration;
        Vector pi = stationary_distribution(params.transition);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        Vector occupancy = Vector::Zero(C);
        Matrix s_sum = Matrix::Zero(C, N);
        Matrix s2_sum = Matrix::Zero(C, N);
        Matrix xi_sum = Matrix::Zero(C, C);
        double grad_norm = 0.0;

        for (long start = 0; start < num_chains;
             start += config.minibatch_size) {
            const long batch_chains =
                std::min<long>(config.minibatch_size, num_chains - start);
            Matrix batch(batch_chains * len, N);
            Matrix batch_gamma(batch_chains * len, C);

            for (long b = 0; b < batch_chains; ++b) {
                const long chain = order[start + b];
                const long core_lo = chain * len;
                const long buf_lo = std::max<long>(0, core_lo - buf);
                const long buf_hi = std::min<long>(T, core_lo + len + buf);
                Matrix chunk = data.middleRows(buf_lo, buf_hi - buf_lo);
                Matrix log_emissions =
                    log_emission_matrix(chunk, params.net, params.sources);
                PosteriorSet post =
                    forward_backward(log_emissions, params.transition, pi);
                const long off = core_lo - buf_lo;

                Matrix s_core =
                    apply_net(params.net, data.middleRows(core_lo, len));
                for (long t = 0; t < len; ++t) {
                    const auto g = post.gamma.row(off + t);
                    occupancy += g.transpose();
                    s_sum += g.transpose() * s_core.row(t);
                    s2_sum += g.transpose() *
                              s_core.row(t).cwiseProduct(s_core.row(t));
                }
                // Transitions with both endpoints inside the core.
                for (long t = off + 1; t < off + len; ++t)
                    xi_sum += post.xi[t - 1];

                batch.middleRows(b * len, len) = data.middleRows(core_lo, len);
                batch_gamma.middleRows(b * len, len) =
                    post.gamma.middleRows(off, len);
            }

            if (config.gradient_steps > 0) {
                const double scale =
                    static_cast<double>(T) /
                    static_cast<double>(batch_chains * len);
                for (int k = 0; k < config.gradient_steps; ++k) {
                    NetGradients grads =
                        grad_lower_bound(params.net, batch, batch_gamma,
                                         params.sources, scale);
                    grad_norm = std::sqrt(grads.squared_norm());
                    adam_step(params.net, grads, adam);
                }
            }
        }

        params.transition = transition_from_stats(xi_sum, occupancy);
        params.sources = gaussians_from_stats(occupancy, s_sum, s2_sum);
        if (config.reset_adam_each_iteration) adam = fresh_adam(config);

        // Full-sequence objective once per epoch for the trace and the
        // convergence test.
        PosteriorSet post = e_step(data, params);
        double fe = post.log_likelihood;
        double seconds =
            std::chrono::duration<double>(clock_type::now() - t0).count();
        result.trace.push_back(
            {iteration, fe, post.log_likelihood, grad_norm, seconds});
        fe_history.push_back(fe);
        if (converged(fe_history, config.tolerance, config.tolerance_window))
            break;
    }

    PosteriorSet final_post = e_step(data, params);
    result.params = std::move(params);
    result.final_log_likelihood = final_post.log_likelihood;
    result.final_free_energy = final_post.log_likelihood;
    result.iterations = iteration;
    return result;
}

TrainResult run_once(const Matrix& data, const TrainConfig& config,
                     ModelParams params, int start_iteration,
                     std::uint64_t seed) {
    if (config.mode == TrainMode::kFullBatch)
        return run_full(data, config, std::move(params), start_iteration);
    return run_subchain(data, config, std::move(params), start_iteration,
                        seed);
}

}  // namespace

void TrainConfig::validate(long T) const {
    if (num_states < 1 || num_components < 1 || layers < 1)
        throw std::invalid_argument("counts must be positive");
    if (em_iterations < 0 || gradient_steps < 0)
        throw std::invalid_argument("iteration counts must be non-negative");
    if (learning_rate <= 0.0 || tolerance < 0.0)
        throw std::invalid_argument("invalid learning rate or tolerance");
    if (restarts < 1) throw std::invalid_argument("need at least one restart");
    if (T < num_states)
        throw std::invalid_argument("sequence shorter than the state count");
    if (mode == TrainMode::kSubchain) {
        if (subchain_length < 1 || subchain_length > T)
            throw std::invalid_argument("subchain length must be in [1, T]");
        if (minibatch_size < 1)
            throw std::invalid_argument("minibatch size must be positive");
        if (buffer_length < 0)
            throw std::invalid_argument("buffer length must be non-negative");
    }
}

ModelParams init_params(const TrainConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean_dist(config.init_mean_low,
                                                     config.init_mean_high);
    std::uniform_real_distribution<double> var_dist(config.init_var_low,
                                                    config.init_var_high);
    ModelParams params;
    params.sources.means.resize(config.num_states, config.num_components);
    params.sources.variances.resize(config.num_states, config.num_components);
    for (int c = 0; c < config.num_states; ++c)
        for (int i = 0; i < config.num_components; ++i) {
            params.sources.means(c, i) = mean_dist(rng);
            params.sources.variances(c, i) = var_dist(rng);
        }
    if (config.num_states >= 2) {
        params.transition =
            make_circular_transition(config.num_states, config.init_p_stay);
    } else {
        params.transition = TransitionMatrix{Matrix::Ones(1, 1)};
    }
    params.net = init_network(config.num_components, config.layers, rng(),
                              config.alpha);
    return params;
}

PosteriorSet e_step(const Matrix& data, const ModelParams& params) {
    Vector pi = stationary_distribution(params.transition);
    Matrix log_emissions =
        log_emission_matrix(data, params.net, params.sources);
    return forward_backward(log_emissions, params.transition, pi);
}

double free_energy(const Matrix& data, const ModelParams& params,
                   const PosteriorSet& q) {
    Vector pi = stationary_distribution(params.transition);
    Matrix log_emissions =
        log_emission_matrix(data, params.net, params.sources);
    return free_energy_impl(log_emissions, params.transition, pi, q);
}

TrainResult train(const Matrix& data, const TrainConfig& config) {
    config.validate(data.rows());
    TrainResult best;
    bool have_best = false;
    std::string last_error = "no restarts attempted";
    for (int r = 0; r < config.restarts; ++r) {
        const std::uint64_t restart_seed = config.seed + 1000003ULL * r;
        try {
            ModelParams init = init_params(config, restart_seed);
            TrainResult result =
                run_once(data, config, std::move(init), 0, restart_seed);
            result.best_restart = r;
            if (!have_best ||
                result.final_log_likelihood > best.final_log_likelihood) {
                best = std::move(result);
                have_best = true;
            }
        } catch (const std::runtime_error& e) {
            last_error = e.what();
        }
    }
    if (!have_best)
        throw std::runtime_error("all restarts failed; last error: " +
                                 last_error);
    return best;
}

TrainResult train_full(const Matrix& data, const TrainConfig& config) {
    TrainConfig cfg = config;
    cfg.mode = TrainMode::kFullBatch;
    return train(data, cfg);
}

TrainResult train_stochastic(const Matrix& data, const TrainConfig& config) {
    TrainConfig cfg = config;
    cfg.mode = TrainMode::kSubchain;
    return train(data, cfg);
}

TrainResult train_from(const Matrix& data, const TrainConfig& config,
                       const ModelParams& start, int start_iteration) {
    config.validate(data.rows());
    return run_once(data, config, start, start_iteration, config.seed);
}

Matrix stitched_subchain_gamma(const Matrix& log_emissions,
                               const TransitionMatrix& A, const Vector& pi,
                               int subchain_length, int buffer_length) {
    const long T = log_emissions.rows();
    const int C = static_cast<int>(log_emissions.cols());
    Matrix gamma(T, C);
    for (long lo = 0; lo < T; lo += subchain_length) {
        const long core_len = std::min<long>(subchain_length, T - lo);
        const long buf_lo = std::max<long>(0, lo - buffer_length);
        const long buf_hi = std::min<long>(T, lo + core_len + buffer_length);
        PosteriorSet post = forward_backward(
            log_emissions.middleRows(buf_lo, buf_hi - buf_lo), A, pi);
        gamma.middleRows(lo, core_len) =
            post.gamma.middleRows(lo - buf_lo, core_len);
    }
    return gamma;
}

}  // namespace hmica
