// Python bindings for the main operations: data generation, EM training,
// inference and evaluation metrics.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hmica/datagen.hpp"
#include "hmica/metrics.hpp"
#include "hmica/trainer.hpp"

namespace py = pybind11;
using namespace hmica;

namespace {

TrainMode mode_from_string(const std::string& mode) {
    if (mode == "full") return TrainMode::kFullBatch;
    if (mode == "subchain") return TrainMode::kSubchain;
    throw std::invalid_argument("mode must be 'full' or 'subchain'");
}

}  // namespace

PYBIND11_MODULE(_hmica, m) {
    m.doc() = "Hidden-Markov nonlinear ICA core";

    py::class_<TransitionMatrix>(m, "TransitionMatrix")
        .def(py::init([](const Matrix& probs) {
            TransitionMatrix A{probs};
            A.validate();
            return A;
        }))
        .def_readonly("probs", &TransitionMatrix::probs);

    py::class_<PosteriorSet>(m, "PosteriorSet")
        .def_readonly("gamma", &PosteriorSet::gamma)
        .def_readonly("xi", &PosteriorSet::xi)
        .def_readonly("log_likelihood", &PosteriorSet::log_likelihood);

    py::class_<GaussianStateParams>(m, "GaussianStateParams")
        .def(py::init([](const Matrix& means, const Matrix& variances) {
            return GaussianStateParams{means, variances};
        }))
        .def_readonly("means", &GaussianStateParams::means)
        .def_readonly("variances", &GaussianStateParams::variances);

    py::class_<DemixNet>(m, "DemixNet")
        .def_readonly("weights", &DemixNet::weights)
        .def_readonly("biases", &DemixNet::biases)
        .def_readonly("alpha", &DemixNet::alpha);

    py::class_<ModelParams>(m, "ModelParams")
        .def_readonly("transition", &ModelParams::transition)
        .def_readonly("sources", &ModelParams::sources)
        .def_readonly("net", &ModelParams::net);

    py::class_<DatasetBundle>(m, "DatasetBundle")
        .def_readonly("observations", &DatasetBundle::observations)
        .def_readonly("sources", &DatasetBundle::sources)
        .def_property_readonly(
            "states",
            [](const DatasetBundle& b) { return b.state_path.states; })
        .def_readonly("mixing_net", &DatasetBundle::mixing_net)
        .def_readonly("true_params", &DatasetBundle::true_params);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("params", &TrainResult::params)
        .def_readonly("final_log_likelihood",
                      &TrainResult::final_log_likelihood)
        .def_readonly("iterations", &TrainResult::iterations)
        .def_property_readonly("trace", [](const TrainResult& r) {
            py::list rows;
            for (const auto& rec : r.trace)
                rows.append(py::dict(
                    py::arg("iteration") = rec.iteration,
                    py::arg("free_energy") = rec.free_energy,
                    py::arg("log_likelihood") = rec.log_likelihood,
                    py::arg("grad_norm") = rec.grad_norm,
                    py::arg("seconds") = rec.seconds));
            return rows;
        });

    m.def(
        "forward_backward",
        [](const Matrix& log_emissions, const Matrix& A, const Vector& pi) {
            return forward_backward(log_emissions, TransitionMatrix{A}, pi);
        },
        py::arg("log_emissions"), py::arg("transition"), py::arg("pi"));

    m.def(
        "viterbi",
        [](const Matrix& log_emissions, const Matrix& A, const Vector& pi) {
            return viterbi(log_emissions, TransitionMatrix{A}, pi).states;
        },
        py::arg("log_emissions"), py::arg("transition"), py::arg("pi"));

    m.def(
        "stationary_distribution",
        [](const Matrix& A) {
            return stationary_distribution(TransitionMatrix{A});
        },
        py::arg("transition"));

    m.def(
        "generate_dataset",
        [](int components, int states, int layers, long length, double p_stay,
           std::uint64_t seed) {
            DatagenConfig config;
            config.num_components = components;
            config.num_states = states;
            config.mixing_layers = layers;
            config.sequence_length = length;
            config.p_stay = p_stay;
            config.seed = seed;
            return generate_dataset(config);
        },
        py::arg("components") = 5, py::arg("states") = 11,
        py::arg("layers") = 1, py::arg("length") = 100000,
        py::arg("p_stay") = 0.99, py::arg("seed") = 0);

    m.def(
        "train",
        [](const Matrix& data, int states, int layers, const std::string& mode,
           int iterations, int gradient_steps, double lr, int restarts,
           int subchain_length, int minibatch, int buffer,
           std::uint64_t seed) {
            TrainConfig config;
            config.num_components = static_cast<int>(data.cols());
            config.num_states = states;
            config.layers = layers;
            config.mode = mode_from_string(mode);
            config.em_iterations = iterations;
            config.gradient_steps = gradient_steps;
            config.learning_rate = lr;
            config.restarts = restarts;
            config.subchain_length = subchain_length;
            config.minibatch_size = minibatch;
            config.buffer_length = buffer;
            config.seed = seed;
            return train(data, config);
        },
        py::arg("data"), py::arg("states"), py::arg("layers") = 1,
        py::arg("mode") = "full", py::arg("iterations") = 100,
        py::arg("gradient_steps") = 5, py::arg("lr") = 1e-3,
        py::arg("restarts") = 3, py::arg("subchain_length") = 100,
        py::arg("minibatch") = 64, py::arg("buffer") = 10,
        py::arg("seed") = 0);

    m.def(
        "decode",
        [](const Matrix& data, const ModelParams& params) {
            Vector pi = stationary_distribution(params.transition);
            Matrix log_emissions =
                log_emission_matrix(data, params.net, params.sources);
            return viterbi(log_emissions, params.transition, pi).states;
        },
        py::arg("data"), py::arg("params"));

    m.def(
        "demix",
        [](const Matrix& data, const DemixNet& net) {
            Matrix out(data.rows(), data.cols());
            for (long t = 0; t < data.rows(); ++t)
                out.row(t) =
                    forward(net, data.row(t).transpose()).output.transpose();
            return out;
        },
        py::arg("data"), py::arg("net"));

    m.def(
        "hungarian",
        [](const Matrix& cost) {
            AssignmentResult result = hungarian(cost);
            return py::make_tuple(result.permutation, result.total_cost);
        },
        py::arg("cost"));

    m.def("mcc", &mcc, py::arg("s_true"), py::arg("s_est"));

    m.def(
        "state_accuracy",
        [](const std::vector<int>& true_path, const std::vector<int>& est_path,
           int num_states) {
            return state_accuracy(StatePath{true_path}, StatePath{est_path},
                                  num_states);
        },
        py::arg("true_path"), py::arg("est_path"), py::arg("num_states"));

    m.def(
        "check_assumptions",
        [](const ModelParams& params) {
            AssumptionReport r = check_assumptions(params);
            return py::dict(
                py::arg("transition_full_rank") = r.transition.full_rank,
                py::arg("transition_irreducible") = r.transition.irreducible,
                py::arg("unique_stationary") = r.transition.unique_stationary,
                py::arg("state_count_ok") = r.state_count_ok,
                py::arg("lambda_tilde_invertible") = r.lambda_tilde_invertible,
                py::arg("distinct_means") = r.distinct_means,
                py::arg("all_pass") = r.all_pass);
        },
        py::arg("params"));
}
