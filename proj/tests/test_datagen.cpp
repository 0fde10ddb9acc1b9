#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmica/datagen.hpp"
#include "hmica/metrics.hpp"
#include "oracles.hpp"

using namespace hmica;

TEST_CASE("make_circular_transition layouts") {
    TransitionMatrix A = make_circular_transition(5, 0.99);
    for (int i = 0; i < 5; ++i) {
        CHECK(A.probs(i, i) == 0.99);
        CHECK(A.probs(i, (i + 1) % 5) == doctest::Approx(0.01));
        CHECK(A.probs.row(i).sum() == doctest::Approx(1.0));
    }

    TransitionMatrix degenerate = make_circular_transition(2, 0.5);
    CHECK((degenerate.probs.array() == 0.5).all());
    CHECK(!check_transition(degenerate).full_rank);

    Vector pi = stationary_distribution(make_circular_transition(3, 0.9));
    CHECK((pi - Vector::Constant(3, 1.0 / 3.0)).cwiseAbs().maxCoeff() < 1e-10);

    CHECK_THROWS_AS(make_circular_transition(1, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(make_circular_transition(3, 1.0), std::invalid_argument);
}

TEST_CASE("circular chains are full rank and irreducible for C in 2..20") {
    for (int C = 2; C <= 20; ++C) {
        TransitionReport report =
            check_transition(make_circular_transition(C, 0.99));
        CHECK(report.full_rank);
        CHECK(report.irreducible);
    }
}

TEST_CASE("sample_states absorbing and frequency checks") {
    TransitionMatrix identity{Matrix::Identity(3, 3)};
    Vector onehot = Vector::Zero(3);
    onehot(2) = 1.0;
    StatePath constant = sample_states(identity, onehot, 50, 1);
    CHECK(constant.states == std::vector<int>(50, 2));

    const long T = 100000;
    TransitionMatrix circ = make_circular_transition(5, 0.99);
    Vector uniform = Vector::Constant(5, 0.2);
    StatePath path = sample_states(circ, uniform, T, 7);
    long self = 0;
    for (long t = 1; t < T; ++t)
        if (path.states[t] == path.states[t - 1]) ++self;
    double self_freq = static_cast<double>(self) / (T - 1);
    CHECK(std::abs(self_freq - 0.99) < 0.005);

    std::vector<long> counts(5, 0);
    for (int s : path.states) ++counts[s];
    for (long c : counts)
        CHECK(std::abs(static_cast<double>(c) / T - 0.2) < 0.035);
}

TEST_CASE("sample_sources matches the requested moments") {
    const long T = 50000;
    GaussianStateParams p;
    p.means.resize(1, 2);
    p.means << 1.5, -2.0;
    p.variances.resize(1, 2);
    p.variances << 0.49, 2.25;
    StatePath constant;
    constant.states.assign(T, 0);
    Matrix s = sample_sources(constant, p, 3);
    for (int i = 0; i < 2; ++i) {
        double mean = s.col(i).mean();
        double var = (s.col(i).array() - mean).square().mean();
        CHECK(std::abs(mean - p.means(0, i)) < 0.02 * 5.0);
        CHECK(std::abs(var - p.variances(0, i)) / p.variances(0, i) < 0.02);
    }
    // Independence across components.
    Vector a = (s.col(0).array() - s.col(0).mean()).matrix();
    Vector b = (s.col(1).array() - s.col(1).mean()).matrix();
    double rho = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
    CHECK(std::abs(rho) < 0.02);
}

TEST_CASE("sample_sources near-deterministic at the variance floor") {
    GaussianStateParams p;
    p.means = Matrix::Constant(1, 1, 2.0);
    p.variances = Matrix::Constant(1, 1, kVarianceFloor);
    StatePath path;
    path.states.assign(100, 0);
    Matrix s = sample_sources(path, p, 5);
    CHECK((s.array() - 2.0).abs().maxCoeff() < 1e-3);
}

TEST_CASE("make_mixing_mlp is well conditioned and invertible") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        DemixNet net = make_mixing_mlp(3, 2, seed);
        for (const auto& w : net.weights) {
            Eigen::JacobiSVD<Matrix> svd(w);
            CHECK(svd.singularValues()(0) / svd.singularValues()(2) < 25.0);
        }
        // Newton inversion recovers random inputs.
        std::mt19937_64 rng(seed + 100);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int trial = 0; trial < 5; ++trial) {
            Vector x(3);
            for (int i = 0; i < 3; ++i) x(i) = gauss(rng);
            Vector y = forward(net, x).output;
            Vector back = oracles::newton_invert(net, y);
            CHECK((back - x).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
}

TEST_CASE("single-layer mixing is the linear case") {
    DemixNet net = make_mixing_mlp(4, 1, 9);
    CHECK(net.num_layers() == 1);
    Vector x = Vector::Random(4);
    CHECK((forward(net, x).output - net.weights[0] * x).cwiseAbs().maxCoeff() <
          1e-14);
}

TEST_CASE("generate_dataset consistency and determinism") {
    DatagenConfig config;
    config.num_components = 2;
    config.num_states = 5;
    config.sequence_length = 1000;
    config.mixing_layers = 2;
    config.seed = 11;
    DatasetBundle a = generate_dataset(config);
    DatasetBundle b = generate_dataset(config);
    CHECK((a.observations - b.observations).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.sources - b.sources).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.state_path.states == b.state_path.states);

    // Observations regenerate from the stored mixing net and sources.
    Matrix remixed = mix_sources(a.mixing_net, a.sources);
    CHECK((remixed - a.observations).cwiseAbs().maxCoeff() < 1e-10);

    for (int s : a.state_path.states) {
        CHECK(s >= 0);
        CHECK(s < 5);
    }
}

TEST_CASE("generated parameters satisfy the identifiability checks") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        DatagenConfig config;
        config.num_components = 2;
        config.num_states = 5;
        config.sequence_length = 10;
        config.seed = seed;
        DatasetBundle bundle = generate_dataset(config);
        AssumptionReport report = check_assumptions(bundle.true_params);
        CHECK(report.all_pass);
    }
}
