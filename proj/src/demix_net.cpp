#include "hmica/demix_net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace hmica {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kDetFloor = 1e-12;

// Gradient of sum_c gamma_c * log N(s_i; mu_{c,i}, var_{c,i}) wrt s.
Vector gaussian_term_grad(const Vector& s, const Eigen::RowVectorXd& gamma_row,
                          const GaussianStateParams& params) {
    Vector g = Vector::Zero(s.size());
    for (int c = 0; c < gamma_row.size(); ++c) {
        if (gamma_row(c) == 0.0) continue;
        g -= gamma_row(c) *
             ((s.transpose() - params.means.row(c)).array() /
              params.variances.row(c).array())
                 .matrix()
                 .transpose();
    }
    return g;
}

double gaussian_term_value(const Vector& s, const Eigen::RowVectorXd& gamma_row,
                           const GaussianStateParams& params) {
    double v = 0.0;
    for (int c = 0; c < gamma_row.size(); ++c) {
        if (gamma_row(c) == 0.0) continue;
        double quad = ((s.transpose() - params.means.row(c)).array().square() /
                       params.variances.row(c).array())
                          .sum();
        double log_norm =
            -0.5 * (params.variances.row(c).array().log() + kLog2Pi).sum();
        v += gamma_row(c) * (log_norm - 0.5 * quad);
    }
    return v;
}

}  // namespace

void NetGradients::scale_by(double s) {
    for (auto& w : d_weights) w *= s;
    for (auto& b : d_biases) b *= s;
}

void NetGradients::accumulate(const NetGradients& other) {
    for (std::size_t l = 0; l < d_weights.size(); ++l) {
        d_weights[l] += other.d_weights[l];
        d_biases[l] += other.d_biases[l];
    }
}

double NetGradients::squared_norm() const {
    double s = 0.0;
    for (const auto& w : d_weights) s += w.squaredNorm();
    for (const auto& b : d_biases) s += b.squaredNorm();
    return s;
}

NetGradients zero_gradients(const DemixNet& net) {
    NetGradients g;
    for (int l = 0; l < net.num_layers(); ++l) {
        g.d_weights.push_back(Matrix::Zero(net.dim(), net.dim()));
        g.d_biases.push_back(Vector::Zero(net.dim()));
    }
    return g;
}

DemixNet init_network(int dim, int num_layers, std::uint64_t seed,
                      double alpha) {
    if (dim < 1 || num_layers < 1)
        throw std::invalid_argument("network needs dim >= 1 and layers >= 1");
    if (alpha <= 0.0)
        throw std::invalid_argument("activation slope must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    DemixNet net;
    net.alpha = alpha;
    for (int l = 0; l < num_layers; ++l) {
        Matrix raw(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) raw(i, j) = gauss(rng);
        Eigen::HouseholderQR<Matrix> qr(raw);
        Matrix q = qr.householderQ();
        Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
        // Fix the sign ambiguity of the QR factorization.
        for (int j = 0; j < dim; ++j)
            if (r(j, j) < 0.0) q.col(j) = -q.col(j);
        net.weights.push_back(q);
        net.biases.push_back(Vector::Zero(dim));
    }
    return net;
}

ForwardTrace forward(const DemixNet& net, const Vector& x) {
    if (x.size() != net.dim())
        throw std::invalid_argument("input dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("non-finite input");
    ForwardTrace trace;
    trace.input = x;
    Vector h = x;
    const int L = net.num_layers();
    for (int l = 0; l < L; ++l) {
        Vector z = net.weights[l] * h + net.biases[l];
        trace.pre_activations.push_back(z);
        if (l < L - 1) {
            Vector slope(z.size());
            for (int i = 0; i < z.size(); ++i)
                slope(i) = z(i) >= 0.0 ? 1.0 : net.alpha;
            trace.slopes.push_back(slope);
            h = z.cwiseProduct(slope);
        } else {
            h = z;
        }
    }
    trace.output = h;
    return trace;
}

Matrix jacobian(const ForwardTrace& trace, const DemixNet& net) {
    Matrix j = net.weights[0];
    for (int l = 1; l < net.num_layers(); ++l)
        j = net.weights[l] * trace.slopes[l - 1].asDiagonal() * j;
    return j;
}

double log_abs_det_jacobian(const ForwardTrace& trace, const DemixNet& net) {
    double total = 0.0;
    for (const Matrix& w : net.weights) {
        Eigen::PartialPivLU<Matrix> lu(w);
        const auto& lu_m = lu.matrixLU();
        for (int i = 0; i < lu_m.rows(); ++i) {
            double d = lu_m(i, i);
            if (std::abs(d) < kDetFloor)
                throw std::runtime_error("singular weight matrix");
            total += std::log(std::abs(d));
        }
    }
    for (const Vector& slope : trace.slopes)
        total += slope.array().log().sum();
    return total;
}

NetGradients grad_lower_bound(const DemixNet& net, const Matrix& batch,
                              const Matrix& gamma,
                              const GaussianStateParams& params, double scale,
                              bool include_logdet) {
    const int T_b = static_cast<int>(batch.rows());
    const int L = net.num_layers();
    if (gamma.rows() != T_b)
        throw std::invalid_argument("gamma/batch length mismatch");
    if (scale <= 0.0) throw std::invalid_argument("scale must be positive");

    NetGradients grads = zero_gradients(net);

    // Fixed left-to-right accumulation over the batch.
    for (int t = 0; t < T_b; ++t) {
        ForwardTrace trace = forward(net, batch.row(t).transpose());
        // Backprop the Gaussian expectation term.
        Vector delta = gaussian_term_grad(trace.output, gamma.row(t), params);
        for (int l = L - 1; l >= 0; --l) {
            Vector h_in = l == 0 ? trace.input
                                 : trace.pre_activations[l - 1].cwiseProduct(
                                       trace.slopes[l - 1]);
            grads.d_weights[l] += delta * h_in.transpose();
            grads.d_biases[l] += delta;
            if (l > 0)
                delta = trace.slopes[l - 1].cwiseProduct(
                    net.weights[l].transpose() * delta);
        }
    }

    if (include_logdet) {
        // d/dW_l sum_t log|det W_l| = T_b * W_l^{-T}; slope terms are
        // piecewise constant in the parameters and contribute zero a.e.
        for (int l = 0; l < L; ++l) {
            Eigen::PartialPivLU<Matrix> lu(net.weights[l]);
            double abs_det = std::abs(lu.determinant());
            if (abs_det < kDetFloor)
                throw std::runtime_error("singular weight matrix");
            grads.d_weights[l] +=
                static_cast<double>(T_b) * lu.inverse().transpose();
        }
    }

    grads.scale_by(scale);
    return grads;
}

double lower_bound_value(const DemixNet& net, const Matrix& batch,
                         const Matrix& gamma, const GaussianStateParams& params,
                         double scale) {
    double total = 0.0;
    for (int t = 0; t < batch.rows(); ++t) {
        ForwardTrace trace = forward(net, batch.row(t).transpose());
        total += log_abs_det_jacobian(trace, net);
        total += gaussian_term_value(trace.output, gamma.row(t), params);
    }
    return scale * total;
}

void adam_step(DemixNet& net, const NetGradients& grads, AdamState& state) {
    if (state.step_count == 0 && state.first_moment.d_weights.empty()) {
        state.first_moment = zero_gradients(net);
        state.second_moment = zero_gradients(net);
    }
    ++state.step_count;
    const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
    const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
    for (int l = 0; l < net.num_layers(); ++l) {
        auto& m_w = state.first_moment.d_weights[l];
        auto& v_w = state.second_moment.d_weights[l];
        m_w = state.beta1 * m_w + (1.0 - state.beta1) * grads.d_weights[l];
        v_w = state.beta2 * v_w +
              (1.0 - state.beta2) * grads.d_weights[l].cwiseProduct(
                                        grads.d_weights[l]);
        net.weights[l].array() +=
            state.lr * (m_w.array() / bc1) /
            ((v_w.array() / bc2).sqrt() + state.eps);

        auto& m_b = state.first_moment.d_biases[l];
        auto& v_b = state.second_moment.d_biases[l];
        m_b = state.beta1 * m_b + (1.0 - state.beta1) * grads.d_biases[l];
        v_b = state.beta2 * v_b +
              (1.0 - state.beta2) * grads.d_biases[l].cwiseProduct(
                                        grads.d_biases[l]);
        net.biases[l].array() += state.lr * (m_b.array() / bc1) /
                                 ((v_b.array() / bc2).sqrt() + state.eps);
    }
}

}  // namespace hmica
