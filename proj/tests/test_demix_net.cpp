#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hmica/demix_net.hpp"
#include "oracles.hpp"

using namespace hmica;

namespace {

DemixNet stacked_identity(int dim, int layers, double alpha = 0.1) {
    DemixNet net;
    net.alpha = alpha;
    for (int l = 0; l < layers; ++l) {
        net.weights.push_back(Matrix::Identity(dim, dim));
        net.biases.push_back(Vector::Zero(dim));
    }
    return net;
}

GaussianStateParams random_params(int states, int dim, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mean_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> var_dist(0.3, 2.0);
    GaussianStateParams p;
    p.means.resize(states, dim);
    p.variances.resize(states, dim);
    for (int c = 0; c < states; ++c)
        for (int i = 0; i < dim; ++i) {
            p.means(c, i) = mean_dist(rng);
            p.variances(c, i) = var_dist(rng);
        }
    return p;
}

}  // namespace

TEST_CASE("init_network is orthogonal and deterministic") {
    DemixNet net = init_network(2, 1, 17);
    CHECK(std::abs(std::abs(net.weights[0].determinant()) - 1.0) < 1e-12);
    Vector x(2);
    x << 0.4, 0.7;
    ForwardTrace trace = forward(net, x);
    CHECK(log_abs_det_jacobian(trace, net) == doctest::Approx(0.0));

    DemixNet again = init_network(2, 1, 17);
    CHECK(net.weights[0] == again.weights[0]);

    DemixNet deep = init_network(5, 4, 99);
    for (const auto& w : deep.weights)
        CHECK((w.transpose() * w - Matrix::Identity(5, 5))
                  .cwiseAbs()
                  .maxCoeff() < 1e-10);
}

TEST_CASE("forward identity nets") {
    DemixNet net = stacked_identity(2, 1);
    Vector x(2);
    x << 1.5, 2.0;
    CHECK(forward(net, x).output == x);

    DemixNet two = stacked_identity(2, 2, 0.1);
    Vector neg(2);
    neg << -1.0, 2.0;
    ForwardTrace trace = forward(two, neg);
    CHECK(trace.output(0) == doctest::Approx(-0.1));
    CHECK(trace.output(1) == doctest::Approx(2.0));
    CHECK(trace.slopes.size() == 1);
    CHECK(trace.slopes[0](0) == 0.1);
    CHECK(trace.slopes[0](1) == 1.0);
}

TEST_CASE("forward rejects bad input and handles random nets") {
    DemixNet net = init_network(3, 2, 4);
    Vector bad(3);
    bad << 1.0, std::nan(""), 0.0;
    CHECK_THROWS_AS(forward(net, bad), std::invalid_argument);
    Vector x(3);
    x << 0.3, -1.2, 2.2;
    CHECK(forward(net, x).output.allFinite());
}

TEST_CASE("jacobian of a single layer is the weight matrix") {
    DemixNet net = init_network(3, 1, 8);
    Vector x = Vector::Random(3);
    ForwardTrace trace = forward(net, x);
    CHECK(jacobian(trace, net) == net.weights[0]);
}

TEST_CASE("jacobian diagonal slope factors") {
    DemixNet net = stacked_identity(2, 2, 0.1);
    Vector x(2);
    x << -3.0, 5.0;
    ForwardTrace trace = forward(net, x);
    Matrix j = jacobian(trace, net);
    Matrix expected(2, 2);
    expected << 0.1, 0.0, 0.0, 1.0;
    CHECK((j - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("jacobian matches finite differences away from kinks") {
    std::mt19937_64 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);
    int accepted = 0;
    while (accepted < 10) {
        DemixNet net = init_network(3, 3, rng());
        Vector x(3);
        for (int i = 0; i < 3; ++i) x(i) = gauss(rng);
        Matrix batch = x.transpose();
        if (oracles::min_abs_preactivation(net, batch) <= 1e-2) continue;
        ++accepted;
        ForwardTrace trace = forward(net, x);
        Matrix j = jacobian(trace, net);
        const double h = 1e-5;
        for (int k = 0; k < 3; ++k) {
            Vector up = x, down = x;
            up(k) += h;
            down(k) -= h;
            Vector col =
                (forward(net, up).output - forward(net, down).output) /
                (2.0 * h);
            for (int i = 0; i < 3; ++i) {
                double denom = std::max(std::abs(j(i, k)), 1e-8);
                CHECK(std::abs(col(i) - j(i, k)) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("log_abs_det_jacobian hand values") {
    DemixNet identity = stacked_identity(2, 1);
    Vector pos(2);
    pos << 1.0, 2.0;
    CHECK(log_abs_det_jacobian(forward(identity, pos), identity) == 0.0);

    DemixNet doubled;
    doubled.weights = {2.0 * Matrix::Identity(2, 2)};
    doubled.biases = {Vector::Zero(2)};
    CHECK(log_abs_det_jacobian(forward(doubled, pos), doubled) ==
          doctest::Approx(std::log(4.0)));

    // Second identity layer; one hidden unit goes negative.
    DemixNet two;
    two.alpha = 0.1;
    two.weights = {2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
    two.biases = {Vector::Zero(2), Vector::Zero(2)};
    Vector mixed(2);
    mixed << -1.0, 2.0;
    CHECK(log_abs_det_jacobian(forward(two, mixed), two) ==
          doctest::Approx(std::log(4.0) + std::log(0.1)));
}

TEST_CASE("analytic log-det agrees with LU of the explicit Jacobian") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<int> dim_dist(1, 10), layer_dist(1, 4);
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = dim_dist(rng), layers = layer_dist(rng);
        DemixNet net = init_network(dim, layers, rng());
        // Non-orthogonal scaling so determinants are non-trivial.
        for (auto& w : net.weights) w *= (0.5 + gauss(rng) * 0.1);
        Vector x(dim);
        for (int i = 0; i < dim; ++i) x(i) = gauss(rng);
        ForwardTrace trace = forward(net, x);
        double analytic = log_abs_det_jacobian(trace, net);
        double via_lu =
            std::log(std::abs(jacobian(trace, net).partialPivLu()
                                  .determinant()));
        CHECK(std::abs(analytic - via_lu) < 1e-8);
    }
}

TEST_CASE("log_abs_det_jacobian rejects singular weights") {
    DemixNet net;
    net.weights = {Matrix::Zero(2, 2)};
    net.biases = {Vector::Zero(2)};
    Vector x = Vector::Ones(2);
    CHECK_THROWS_AS(log_abs_det_jacobian(forward(net, x), net),
                    std::runtime_error);
}

TEST_CASE("one-layer net composes with its inverse") {
    DemixNet net = init_network(4, 1, 5);
    Matrix inverse = net.weights[0].inverse();
    Vector x = Vector::Random(4);
    Vector y = forward(net, x).output;
    Vector back = inverse * (y - net.biases[0]);
    CHECK((back - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("grad_lower_bound degenerate mixture equals single state") {
    std::mt19937_64 rng(31);
    DemixNet net = init_network(2, 2, 3);
    Matrix batch = Matrix::Random(4, 2);
    GaussianStateParams one = random_params(1, 2, rng);
    GaussianStateParams two;
    two.means = one.means.replicate(2, 1);
    two.variances = one.variances.replicate(2, 1);
    NetGradients g1 = grad_lower_bound(net, batch, Matrix::Ones(4, 1), one, 1.0);
    NetGradients g2 =
        grad_lower_bound(net, batch, Matrix::Constant(4, 2, 0.5), two, 1.0);
    for (int l = 0; l < net.num_layers(); ++l) {
        CHECK((g1.d_weights[l] - g2.d_weights[l]).cwiseAbs().maxCoeff() <
              1e-12);
        CHECK((g1.d_biases[l] - g2.d_biases[l]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("grad_lower_bound is linear in the scale") {
    std::mt19937_64 rng(37);
    DemixNet net = init_network(2, 2, 11);
    Matrix batch = Matrix::Random(3, 2);
    GaussianStateParams p = random_params(2, 2, rng);
    Matrix gamma = Matrix::Constant(3, 2, 0.5);
    NetGradients g1 = grad_lower_bound(net, batch, gamma, p, 1.0);
    NetGradients g2 = grad_lower_bound(net, batch, gamma, p, 2.0);
    for (int l = 0; l < net.num_layers(); ++l)
        CHECK((g2.d_weights[l] - 2.0 * g1.d_weights[l]).cwiseAbs().maxCoeff() <
              1e-12);
}

TEST_CASE("grad_lower_bound matches finite differences") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    int accepted = 0;
    while (accepted < 20) {
        DemixNet net = init_network(2, 2, rng());
        Matrix batch(4, 2);
        for (int t = 0; t < 4; ++t)
            for (int i = 0; i < 2; ++i) batch(t, i) = gauss(rng);
        if (oracles::min_abs_preactivation(net, batch) <= 1e-2) continue;
        ++accepted;
        Matrix gamma(4, 2);
        for (int t = 0; t < 4; ++t) {
            gamma(t, 0) = unif(rng);
            gamma(t, 1) = 1.0 - gamma(t, 0);
        }
        GaussianStateParams p = random_params(2, 2, rng);
        NetGradients analytic = grad_lower_bound(net, batch, gamma, p, 1.0);
        NetGradients numeric =
            oracles::finite_difference_grad(net, batch, gamma, p, 1.0);
        for (int l = 0; l < net.num_layers(); ++l) {
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    double a = analytic.d_weights[l](i, j);
                    double n = numeric.d_weights[l](i, j);
                    CHECK(std::abs(a - n) / std::max(std::abs(n), 1e-6) < 1e-4);
                }
                double a = analytic.d_biases[l](i);
                double n = numeric.d_biases[l](i);
                CHECK(std::abs(a - n) / std::max(std::abs(n), 1e-6) < 1e-4);
            }
        }
    }
}

TEST_CASE("objective is invariant to batch order") {
    std::mt19937_64 rng(43);
    DemixNet net = init_network(3, 2, 2);
    Matrix batch = Matrix::Random(5, 3);
    Matrix gamma = Matrix::Constant(5, 2, 0.5);
    GaussianStateParams p = random_params(2, 3, rng);
    double v1 = lower_bound_value(net, batch, gamma, p, 1.0);
    Matrix reversed = batch.colwise().reverse();
    double v2 = lower_bound_value(net, reversed, gamma, p, 1.0);
    CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
}

TEST_CASE("adam_step zero gradient leaves parameters unchanged") {
    DemixNet net = init_network(2, 1, 6);
    Matrix before = net.weights[0];
    AdamState state;
    adam_step(net, zero_gradients(net), state);
    CHECK(net.weights[0] == before);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam_step single step matches the hand recurrence") {
    DemixNet net = stacked_identity(1, 1);
    NetGradients g = zero_gradients(net);
    g.d_weights[0](0, 0) = 0.3;
    AdamState state;
    state.lr = 0.01;
    adam_step(net, g, state);
    // m_hat = g, v_hat = g^2 after bias correction at step 1.
    double expected = 1.0 + 0.01 * 0.3 / (std::sqrt(0.3 * 0.3) + state.eps);
    CHECK(net.weights[0](0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam_step is deterministic") {
    DemixNet a = init_network(2, 2, 12);
    DemixNet b = init_network(2, 2, 12);
    NetGradients g = zero_gradients(a);
    g.d_weights[0].setConstant(0.1);
    g.d_biases[1].setConstant(-0.2);
    AdamState sa, sb;
    adam_step(a, g, sa);
    adam_step(b, g, sb);
    for (int l = 0; l < 2; ++l) {
        CHECK(a.weights[l] == b.weights[l]);
        CHECK(a.biases[l] == b.biases[l]);
    }
}
