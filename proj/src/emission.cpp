#include "hmica/emission.hpp"

#include <cmath>
#include <stdexcept>

#include "hmica/demix_net.hpp"

namespace hmica {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

NaturalParams gaussian_to_natural(const GaussianStateParams& params) {
    if ((params.variances.array() <= 0.0).any())
        throw std::invalid_argument("non-positive variance");
    NaturalParams nat;
    nat.eta1 = params.means.array() / params.variances.array();
    nat.eta2 = -0.5 / params.variances.array();
    return nat;
}

GaussianStateParams natural_to_gaussian(const NaturalParams& nat) {
    if ((nat.eta2.array() >= 0.0).any())
        throw std::invalid_argument("second natural parameter must be negative");
    GaussianStateParams params;
    params.variances = -0.5 / nat.eta2.array();
    params.means = nat.eta1.array() * params.variances.array();
    return params;
}

Vector sufficient_stats(const Vector& s) {
    Vector t(2 * s.size());
    for (int i = 0; i < s.size(); ++i) {
        t(2 * i) = s(i);
        t(2 * i + 1) = s(i) * s(i);
    }
    return t;
}

Matrix log_emission_matrix(const Matrix& x_seq, const DemixNet& net,
                           const GaussianStateParams& params) {
    const int T = static_cast<int>(x_seq.rows());
    const int N = static_cast<int>(x_seq.cols());
    const int C = params.num_states();
    if (net.dim() != N)
        throw std::invalid_argument("network dimension does not match data");
    if (params.num_components() != N)
        throw std::invalid_argument("parameter dimension does not match data");

    // Per-state constants: -0.5 * sum_i log(2 pi sigma^2).
    Vector log_norm(C);
    for (int c = 0; c < C; ++c)
        log_norm(c) =
            -0.5 * (params.variances.row(c).array().log() + kLog2Pi).sum();

    Matrix log_emissions(T, C);
    for (int t = 0; t < T; ++t) {
        ForwardTrace trace = forward(net, x_seq.row(t).transpose());
        if (!trace.output.allFinite())
            throw std::runtime_error("non-finite network output");
        double log_det = log_abs_det_jacobian(trace, net);
        for (int c = 0; c < C; ++c) {
            double quad = ((trace.output.transpose() - params.means.row(c))
                               .array()
                               .square() /
                           params.variances.row(c).array())
                              .sum();
            log_emissions(t, c) = log_det + log_norm(c) - 0.5 * quad;
        }
    }
    return log_emissions;
}

GaussianStateParams m_step_gaussian(const Matrix& gamma, const Matrix& s_seq) {
    const int T = static_cast<int>(s_seq.rows());
    const int N = static_cast<int>(s_seq.cols());
    const int C = static_cast<int>(gamma.cols());
    if (gamma.rows() != T)
        throw std::invalid_argument("gamma/source length mismatch");

    GaussianStateParams out;
    out.means.resize(C, N);
    out.variances.resize(C, N);
    for (int c = 0; c < C; ++c) {
        double weight = gamma.col(c).sum();
        if (weight <= 0.0)
            throw std::runtime_error("zero occupancy in Gaussian M-step: state " +
                                     std::to_string(c));
        Vector mean = Vector::Zero(N);
        for (int t = 0; t < T; ++t) mean += gamma(t, c) * s_seq.row(t).transpose();
        mean /= weight;
        Vector var = Vector::Zero(N);
        for (int t = 0; t < T; ++t) {
            Vector resid = s_seq.row(t).transpose() - mean;
            var += gamma(t, c) * resid.cwiseProduct(resid);
        }
        var /= weight;
        out.means.row(c) = mean.transpose();
        out.variances.row(c) = var.cwiseMax(kVarianceFloor).transpose();
    }
    return out;
}

}  // namespace hmica
