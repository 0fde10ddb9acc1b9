#include "hmica/datagen.hpp"

#include <random>
#include <stdexcept>

namespace hmica {

TransitionMatrix make_circular_transition(int num_states, double p_stay) {
    if (num_states < 2)
        throw std::invalid_argument("circular chain needs C >= 2");
    if (p_stay <= 0.0 || p_stay >= 1.0)
        throw std::invalid_argument("p_stay must lie in (0, 1)");
    Matrix probs = Matrix::Zero(num_states, num_states);
    for (int i = 0; i < num_states; ++i) {
        probs(i, i) = p_stay;
        probs(i, (i + 1) % num_states) = 1.0 - p_stay;
    }
    return TransitionMatrix{probs};
}

StatePath sample_states(const TransitionMatrix& A, const Vector& pi, long T,
                        std::uint64_t seed) {
    A.validate();
    const int C = A.num_states();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto draw = [&](const auto& dist) {
        double u = unif(rng);
        double cum = 0.0;
        for (int c = 0; c < C; ++c) {
            cum += dist(c);
            if (u <= cum) return c;
        }
        return C - 1;
    };
    StatePath path;
    path.states.resize(T);
    path.states[0] = draw([&](int c) { return pi(c); });
    for (long t = 1; t < T; ++t) {
        int prev = path.states[t - 1];
        path.states[t] = draw([&](int c) { return A.probs(prev, c); });
    }
    return path;
}

Matrix sample_sources(const StatePath& path, const GaussianStateParams& params,
                      std::uint64_t seed) {
    const int N = params.num_components();
    const long T = path.length();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix sources(T, N);
    for (long t = 0; t < T; ++t) {
        int c = path.states[t];
        if (c < 0 || c >= params.num_states())
            throw std::invalid_argument("state path index out of range");
        for (int i = 0; i < N; ++i)
            sources(t, i) = params.means(c, i) +
                            std::sqrt(params.variances(c, i)) * gauss(rng);
    }
    return sources;
}

DemixNet make_mixing_mlp(int dim, int num_layers, std::uint64_t seed,
                         double cond_cap, double alpha) {
    if (dim < 1 || num_layers < 1)
        throw std::invalid_argument("mixing net needs dim >= 1 and layers >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    constexpr int kMaxResamples = 1000;
    DemixNet net;
    net.alpha = alpha;
    for (int l = 0; l < num_layers; ++l) {
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
            Matrix w(dim, dim);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) w(i, j) = gauss(rng);
            Eigen::JacobiSVD<Matrix> svd(w);
            const auto& sv = svd.singularValues();
            if (sv(sv.size() - 1) > 0.0 &&
                sv(0) / sv(sv.size() - 1) < cond_cap) {
                net.weights.push_back(w);
                net.biases.push_back(Vector::Zero(dim));
                accepted = true;
                break;
            }
        }
        if (!accepted)
            throw std::runtime_error(
                "mixing net: condition-number re-sampling cap exceeded");
    }
    return net;
}

GaussianStateParams random_state_params(const DatagenConfig& config,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mean_dist(config.mean_low,
                                                     config.mean_high);
    std::uniform_real_distribution<double> var_dist(config.var_low,
                                                    config.var_high);
    GaussianStateParams params;
    params.means.resize(config.num_states, config.num_components);
    params.variances.resize(config.num_states, config.num_components);
    for (int c = 0; c < config.num_states; ++c)
        for (int i = 0; i < config.num_components; ++i) {
            params.means(c, i) = mean_dist(rng);
            params.variances(c, i) = var_dist(rng);
        }
    return params;
}

Matrix mix_sources(const DemixNet& net, const Matrix& sources) {
    Matrix out(sources.rows(), sources.cols());
    for (long t = 0; t < sources.rows(); ++t)
        out.row(t) = forward(net, sources.row(t).transpose()).output.transpose();
    return out;
}

DatasetBundle generate_dataset(const DatagenConfig& config) {
    if (config.sequence_length < 1)
        throw std::invalid_argument("sequence length must be positive");
    DatasetBundle bundle;
    bundle.config = config;

    TransitionMatrix A =
        make_circular_transition(config.num_states, config.p_stay);
    Vector pi = stationary_distribution(A);

    // Independent streams derived from the one user seed.
    bundle.state_path =
        sample_states(A, pi, config.sequence_length, config.seed * 4 + 1);
    GaussianStateParams params =
        random_state_params(config, config.seed * 4 + 2);
    bundle.sources = sample_sources(bundle.state_path, params,
                                    config.seed * 4 + 3);
    bundle.mixing_net =
        make_mixing_mlp(config.num_components, config.mixing_layers,
                        config.seed * 4 + 4, config.cond_cap, config.alpha);
    bundle.observations = mix_sources(bundle.mixing_net, bundle.sources);

    bundle.true_params.transition = A;
    bundle.true_params.sources = params;
    bundle.true_params.net = bundle.mixing_net;
    return bundle;
}

}  // namespace hmica
