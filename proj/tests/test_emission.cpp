#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hmica/demix_net.hpp"
#include "hmica/emission.hpp"

using namespace hmica;

namespace {

DemixNet identity_net(int dim) {
    DemixNet net;
    net.weights = {Matrix::Identity(dim, dim)};
    net.biases = {Vector::Zero(dim)};
    return net;
}

double gauss_logpdf(double x, double mean, double var) {
    return -0.5 * std::log(2.0 * M_PI * var) -
           0.5 * (x - mean) * (x - mean) / var;
}

}  // namespace

TEST_CASE("gaussian_to_natural hand values") {
    GaussianStateParams p;
    p.means.resize(3, 1);
    p.variances.resize(3, 1);
    p.means << 0.0, 1.0, -3.0;
    p.variances << 1.0, 0.5, 4.0;
    NaturalParams nat = gaussian_to_natural(p);
    CHECK(nat.eta1(0, 0) == doctest::Approx(0.0));
    CHECK(nat.eta2(0, 0) == doctest::Approx(-0.5));
    CHECK(nat.eta1(1, 0) == doctest::Approx(2.0));
    CHECK(nat.eta2(1, 0) == doctest::Approx(-1.0));
    CHECK(nat.eta1(2, 0) == doctest::Approx(-0.75));
    CHECK(nat.eta2(2, 0) == doctest::Approx(-0.125));
}

TEST_CASE("natural_to_gaussian inverts and validates") {
    NaturalParams nat;
    nat.eta1 = Matrix::Constant(1, 1, 2.0);
    nat.eta2 = Matrix::Constant(1, 1, -1.0);
    GaussianStateParams p = natural_to_gaussian(nat);
    CHECK(p.means(0, 0) == doctest::Approx(1.0));
    CHECK(p.variances(0, 0) == doctest::Approx(0.5));

    nat.eta2(0, 0) = 0.0;
    CHECK_THROWS_AS(natural_to_gaussian(nat), std::invalid_argument);

    GaussianStateParams bad;
    bad.means = Matrix::Zero(1, 1);
    bad.variances = Matrix::Constant(1, 1, -1.0);
    CHECK_THROWS_AS(gaussian_to_natural(bad), std::invalid_argument);
}

TEST_CASE("natural parameter round trip on random parameters") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> mean_dist(-5.0, 5.0);
    std::uniform_real_distribution<double> var_dist(0.05, 4.0);
    GaussianStateParams p;
    p.means.resize(4, 3);
    p.variances.resize(4, 3);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 3; ++i) {
            p.means(c, i) = mean_dist(rng);
            p.variances(c, i) = var_dist(rng);
        }
    GaussianStateParams back = natural_to_gaussian(gaussian_to_natural(p));
    CHECK((back.means - p.means).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((back.variances - p.variances).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sufficient_stats interleaves values and squares") {
    Vector s0 = Vector::Zero(2);
    CHECK(sufficient_stats(s0).isZero());
    Vector s1(2);
    s1 << 1.0, -2.0;
    Vector t1 = sufficient_stats(s1);
    CHECK(t1(0) == 1.0);
    CHECK(t1(1) == 1.0);
    CHECK(t1(2) == -2.0);
    CHECK(t1(3) == 4.0);
    Vector s2(2);
    s2 << 0.5, 3.0;
    Vector t2 = sufficient_stats(s2);
    CHECK(t2(1) == 0.25);
    CHECK(t2(3) == 9.0);
}

TEST_CASE("log_emission_matrix identity net standard normal") {
    GaussianStateParams p;
    p.means = Matrix::Zero(1, 1);
    p.variances = Matrix::Ones(1, 1);
    Matrix x = Matrix::Zero(1, 1);
    Matrix le = log_emission_matrix(x, identity_net(1), p);
    CHECK(le(0, 0) == doctest::Approx(-0.5 * std::log(2.0 * M_PI)));
}

TEST_CASE("log_emission_matrix favors the state whose mean matches") {
    GaussianStateParams p;
    p.means.resize(2, 2);
    p.means << 0.0, 0.0, 3.0, 3.0;
    p.variances = Matrix::Ones(2, 2);
    Matrix x = Matrix::Zero(1, 2);  // exactly the state-0 mean
    Matrix le = log_emission_matrix(x, identity_net(2), p);
    CHECK(le(0, 0) > le(0, 1));
}

TEST_CASE("log_emission_matrix with a scaled linear net") {
    DemixNet net;
    net.weights = {2.0 * Matrix::Identity(2, 2)};
    net.biases = {Vector::Zero(2)};
    GaussianStateParams p;
    p.means.resize(1, 2);
    p.means << 0.3, -0.4;
    p.variances.resize(1, 2);
    p.variances << 0.7, 1.4;
    Matrix x(2, 2);
    x << 0.1, 0.2, -0.5, 0.9;
    Matrix le = log_emission_matrix(x, net, p);
    for (int t = 0; t < 2; ++t) {
        double expected = std::log(4.0);
        for (int i = 0; i < 2; ++i)
            expected +=
                gauss_logpdf(2.0 * x(t, i), p.means(0, i), p.variances(0, i));
        CHECK(le(t, 0) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("log_emission_matrix single state equals sum of univariate terms") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.5);
    const int T = 6, N = 3;
    Matrix x(T, N);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < N; ++i) x(t, i) = gauss(rng);
    GaussianStateParams p;
    p.means = Matrix::Constant(1, N, 0.2);
    p.variances = Matrix::Constant(1, N, 0.9);
    Matrix le = log_emission_matrix(x, identity_net(N), p);
    for (int t = 0; t < T; ++t) {
        double expected = 0.0;
        for (int i = 0; i < N; ++i)
            expected += gauss_logpdf(x(t, i), 0.2, 0.9);
        CHECK(std::abs(le(t, 0) - expected) < 1e-12);
    }
}

TEST_CASE("m_step_gaussian unweighted moments") {
    Matrix s(4, 1);
    s << 1.0, 2.0, 3.0, 6.0;
    Matrix gamma = Matrix::Ones(4, 1);
    GaussianStateParams p = m_step_gaussian(gamma, s);
    CHECK(p.means(0, 0) == doctest::Approx(3.0));
    // Biased variance: mean of squared residuals.
    CHECK(p.variances(0, 0) == doctest::Approx((4.0 + 1.0 + 0.0 + 9.0) / 4.0));
}

TEST_CASE("m_step_gaussian hard partition") {
    Matrix s(4, 1);
    s << 0.0, 2.0, 10.0, 14.0;
    Matrix gamma(4, 2);
    gamma << 1, 0, 1, 0, 0, 1, 0, 1;
    GaussianStateParams p = m_step_gaussian(gamma, s);
    CHECK(p.means(0, 0) == doctest::Approx(1.0));
    CHECK(p.variances(0, 0) == doctest::Approx(1.0));
    CHECK(p.means(1, 0) == doctest::Approx(12.0));
    CHECK(p.variances(1, 0) == doctest::Approx(4.0));
}

TEST_CASE("m_step_gaussian satisfies the moment-matching condition") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    std::normal_distribution<double> gauss(0.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int T = 6, N = 2, C = 2;
        Matrix s(T, N);
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < N; ++i) s(t, i) = gauss(rng);
        Matrix gamma(T, C);
        for (int t = 0; t < T; ++t) {
            for (int c = 0; c < C; ++c) gamma(t, c) = unif(rng);
            gamma.row(t) /= gamma.row(t).sum();
        }
        GaussianStateParams p = m_step_gaussian(gamma, s);
        for (int c = 0; c < C; ++c) {
            double weight = gamma.col(c).sum();
            for (int i = 0; i < N; ++i) {
                double emp1 = 0.0, emp2 = 0.0;
                for (int t = 0; t < T; ++t) {
                    emp1 += gamma(t, c) * s(t, i);
                    emp2 += gamma(t, c) * s(t, i) * s(t, i);
                }
                emp1 /= weight;
                emp2 /= weight;
                // Model moments of (s, s^2) are (mu, mu^2 + var).
                CHECK(std::abs(p.means(c, i) - emp1) < 1e-10);
                CHECK(std::abs(p.means(c, i) * p.means(c, i) +
                               p.variances(c, i) - emp2) < 1e-10);
            }
        }
    }
}

TEST_CASE("m_step_gaussian mean equivariance under data shifts") {
    std::mt19937_64 rng(33);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix s(10, 2);
    for (int t = 0; t < 10; ++t)
        for (int i = 0; i < 2; ++i) s(t, i) = gauss(rng);
    Matrix gamma = Matrix::Constant(10, 2, 0.5);
    GaussianStateParams base = m_step_gaussian(gamma, s);
    Eigen::RowVector2d shift(1.5, -0.25);
    Matrix shifted = s.rowwise() + shift;
    GaussianStateParams moved = m_step_gaussian(gamma, shifted);
    CHECK((moved.means - (base.means.rowwise() + shift)).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((moved.variances - base.variances).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("m_step_gaussian rejects empty states and floors variances") {
    Matrix s(3, 1);
    s << 1.0, 1.0, 1.0;
    Matrix gamma(3, 2);
    gamma << 1, 0, 1, 0, 1, 0;
    CHECK_THROWS_AS(m_step_gaussian(gamma, s), std::runtime_error);

    Matrix ones = Matrix::Ones(3, 1);
    GaussianStateParams p = m_step_gaussian(ones, s);  // zero variance data
    CHECK(p.variances(0, 0) == kVarianceFloor);
}
