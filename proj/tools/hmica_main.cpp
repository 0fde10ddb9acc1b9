// Command-line frontend: generate synthetic data, train by EM, decode the
// hidden state path, evaluate component recovery, and benchmark the
// log-det-Jacobian gradient cost.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "hmica/io.hpp"
#include "hmica/metrics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hmica;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericalError = 3;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> states, components, layers, iters, restarts,
        gradient_steps;
    std::optional<long> length;
    std::optional<double> lr;

    void apply(RunConfig& config) const {
        if (seed) config.datagen.seed = *seed;
        if (states) config.datagen.num_states = *states;
        if (components) config.datagen.num_components = *components;
        if (layers) {
            config.datagen.mixing_layers = *layers;
            config.train.layers = *layers;
        }
        if (length) config.datagen.sequence_length = *length;
        if (iters) config.train.em_iterations = *iters;
        if (restarts) config.train.restarts = *restarts;
        if (gradient_steps) config.train.gradient_steps = *gradient_steps;
        if (lr) config.train.learning_rate = *lr;
        if (mode) {
            if (*mode == "full")
                config.train.mode = TrainMode::kFullBatch;
            else if (*mode == "subchain")
                config.train.mode = TrainMode::kSubchain;
            else
                throw std::invalid_argument("mode must be full|subchain");
        }
        config.sync_shared_fields();
    }
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--seed", ov.seed, "Override the config seed");
    cmd->add_option("--mode", ov.mode, "full | subchain");
    cmd->add_option("--states", ov.states, "Number of hidden states C");
    cmd->add_option("--components", ov.components, "Number of components N");
    cmd->add_option("--layers", ov.layers, "MLP depth L");
    cmd->add_option("--length", ov.length, "Sequence length T");
    cmd->add_option("--iters", ov.iters, "EM iteration cap");
    cmd->add_option("--gradient-steps", ov.gradient_steps,
                    "Adam steps per M-step (0 freezes the network)");
    cmd->add_option("--lr", ov.lr, "Learning rate");
    cmd->add_option("--restarts", ov.restarts, "Random restarts");
}

RunConfig resolve_config(const std::string& config_path,
                         const Overrides& ov) {
    RunConfig config;
    if (!config_path.empty()) config = load_config(config_path);
    ov.apply(config);
    return config;
}

json assumption_report_json(const AssumptionReport& report) {
    return json{
        {"transition_full_rank", report.transition.full_rank},
        {"transition_rank", report.transition.rank},
        {"transition_irreducible", report.transition.irreducible},
        {"unique_stationary", report.transition.unique_stationary},
        {"state_count_ok", report.state_count_ok},
        {"lambda_tilde_invertible", report.lambda_tilde_invertible},
        {"lambda_tilde_cond", report.lambda_tilde_cond},
        {"distinct_means", report.distinct_means},
        {"min_mean_gap", report.min_mean_gap},
        {"all_pass", report.all_pass},
    };
}

ModelParams checkpoint_params(const std::string& path) {
    return load_checkpoint(path).params;
}

int cmd_generate(const std::string& config_path, const Overrides& ov,
                 const std::string& out_dir) {
    RunConfig config = resolve_config(config_path, ov);
    const auto& dg = config.datagen;
    if (config.strict && dg.num_states < 2 * dg.num_components + 1) {
        std::cerr << "generate: identifiability requires C >= 2N+1, got C="
                  << dg.num_states << ", N=" << dg.num_components << "\n";
        return kExitConfigError;
    }
    DatasetBundle bundle = generate_dataset(dg);
    fs::create_directories(out_dir);

    write_matrix_csv(out_dir + "/observations.csv", "x", bundle.observations);
    write_matrix_csv(out_dir + "/sources.csv", "s", bundle.sources);
    write_path_csv(out_dir + "/states.csv", {bundle.state_path.states},
                   {"state"});

    Checkpoint truth;
    truth.params = bundle.true_params;
    truth.seed = dg.seed;
    truth.config = config_to_json(config);
    save_checkpoint(out_dir + "/mixing.json", truth);

    AssumptionReport report = check_assumptions(bundle.true_params);
    json meta{{"config", config_to_json(config)},
              {"assumptions", assumption_report_json(report)}};
    std::ofstream meta_out(out_dir + "/meta.json");
    meta_out << meta.dump(2) << "\n";

    std::cout << meta["assumptions"].dump(2) << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const Overrides& ov,
              const std::string& data_path, const std::string& ckpt_out,
              const std::string& trace_out, const std::string& resume_path) {
    RunConfig config = resolve_config(config_path, ov);
    Matrix data = read_matrix_csv(data_path);
    config.datagen.num_components = static_cast<int>(data.cols());
    config.sync_shared_fields();

    TrainResult result;
    if (!resume_path.empty()) {
        Checkpoint start = load_checkpoint(resume_path);
        config.train.num_states = start.params.num_states();
        config.train.layers = start.params.net.num_layers();
        result = train_from(data, config.train, start.params,
                            start.iteration);
    } else {
        result = train(data, config.train);
    }

    Checkpoint ckpt;
    ckpt.params = result.params;
    ckpt.seed = config.train.seed;
    ckpt.iteration = result.iterations;
    ckpt.final_free_energy = result.final_free_energy;
    ckpt.config = config_to_json(config);
    save_checkpoint(ckpt_out, ckpt);

    if (!trace_out.empty()) {
        std::ofstream out(trace_out);
        out << "iteration,free_energy,loglik,grad_norm,seconds\n";
        out.precision(17);
        for (const auto& row : result.trace)
            out << row.iteration << ',' << row.free_energy << ','
                << row.log_likelihood << ',' << row.grad_norm << ','
                << row.seconds << "\n";
    }
    std::cout << "final log-likelihood: " << result.final_log_likelihood
              << " after " << result.iterations << " iterations (restart "
              << result.best_restart << ")\n";
    return 0;
}

int cmd_decode(const std::string& ckpt_path, const std::string& data_path,
               const std::string& out_path) {
    ModelParams params = checkpoint_params(ckpt_path);
    Matrix data = read_matrix_csv(data_path);
    if (data.cols() != params.num_components())
        throw std::invalid_argument(
            "checkpoint and data dimensions disagree");
    Vector pi = stationary_distribution(params.transition);
    Matrix log_emissions = log_emission_matrix(data, params.net, params.sources);
    StatePath path = viterbi(log_emissions, params.transition, pi);
    PosteriorSet post = forward_backward(log_emissions, params.transition, pi);
    std::vector<int> argmax(data.rows());
    for (long t = 0; t < data.rows(); ++t) {
        int best = 0;
        for (int c = 1; c < params.num_states(); ++c)
            if (post.gamma(t, c) > post.gamma(t, best)) best = c;
        argmax[t] = best;
    }
    write_path_csv(out_path, {path.states, argmax},
                   {"viterbi", "gamma_argmax"});
    return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& bundle_dir,
                 const std::string& out_path) {
    ModelParams params = checkpoint_params(ckpt_path);
    Matrix observations = read_matrix_csv(bundle_dir + "/observations.csv");
    if (!fs::exists(bundle_dir + "/sources.csv") ||
        !fs::exists(bundle_dir + "/states.csv"))
        throw std::invalid_argument("dataset bundle is missing ground truth");
    Matrix true_sources = read_matrix_csv(bundle_dir + "/sources.csv");
    StatePath true_path = read_path_csv(bundle_dir + "/states.csv");

    Matrix est_sources(observations.rows(), observations.cols());
    for (long t = 0; t < observations.rows(); ++t)
        est_sources.row(t) =
            forward(params.net, observations.row(t).transpose())
                .output.transpose();

    MatchedCorrelations matched =
        matched_correlations(true_sources, est_sources);
    Vector pi = stationary_distribution(params.transition);
    Matrix log_emissions =
        log_emission_matrix(observations, params.net, params.sources);
    StatePath est_path = viterbi(log_emissions, params.transition, pi);
    double accuracy =
        state_accuracy(true_path, est_path, params.num_states());
    AssumptionReport report = check_assumptions(params);

    json metrics{
        {"mcc", matched.mean},
        {"state_accuracy", accuracy},
        {"per_component_abs_corr", matched.abs_correlations},
        {"component_assignment", matched.assignment.permutation},
        {"assumptions", assumption_report_json(report)},
    };
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << metrics.dump(2) << "\n";
    std::cout << metrics.dump(2) << "\n";
    return 0;
}

int cmd_benchmark(const std::vector<int>& dims, int layers, int reps,
                  const std::string& out_path) {
    auto rows = benchmark_logdet(dims, layers, reps);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << "N,with_logdet_ms,without_logdet_ms,ratio\n";
    out.precision(17);
    for (const auto& row : rows)
        out << row.dim << ',' << row.with_logdet_ms << ','
            << row.without_logdet_ms << ','
            << row.with_logdet_ms / row.without_logdet_ms << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hidden-Markov nonlinear ICA: EM estimation of a nonlinear "
                 "demixing network with per-state Gaussian sources"};
    bool show_reference = false;
    app.add_flag("--config-reference", show_reference,
                 "Print the config-file key reference and exit");
    app.require_subcommand(0, 1);

    std::string config_path, data_path, ckpt_path, out_path, trace_path,
        resume_path;
    Overrides ov;

    auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
    gen->add_option("--config", config_path, "Config file (key = value)");
    gen->add_option("--out", out_path, "Output directory")->required();
    add_override_flags(gen, ov);

    auto* train_cmd = app.add_subcommand("train", "Fit the model by EM");
    train_cmd->add_option("--config", config_path, "Config file");
    train_cmd->add_option("--data", data_path, "Observations CSV")->required();
    train_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint output path")
        ->required();
    train_cmd->add_option("--out", trace_path, "Training trace CSV");
    train_cmd->add_option("--resume", resume_path,
                          "Resume from an existing checkpoint");
    add_override_flags(train_cmd, ov);

    auto* dec = app.add_subcommand("decode", "Viterbi-decode a state path");
    dec->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    dec->add_option("--data", data_path, "Observations CSV")->required();
    dec->add_option("--out", out_path, "Output CSV")->required();

    auto* ev = app.add_subcommand("evaluate",
                                  "Score recovery against ground truth");
    ev->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
    ev->add_option("--data", data_path, "Dataset bundle directory")
        ->required();
    ev->add_option("--out", out_path, "Metrics JSON output")->required();

    std::vector<int> bench_dims{5, 20, 50};
    int bench_layers = 4;
    int bench_reps = 20;
    auto* bench = app.add_subcommand(
        "benchmark", "Time the gradient with/without the log-det term");
    bench->add_option("--dims", bench_dims, "Dimensions to benchmark");
    bench->add_option("--layers", bench_layers, "Network depth");
    bench->add_option("--reps", bench_reps, "Repetitions per timing");
    bench->add_option("--out", out_path, "Timing CSV output")->required();

    CLI11_PARSE(app, argc, argv);

    if (show_reference) {
        std::cout << config_reference();
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return kExitConfigError;
    }

    try {
        if (gen->parsed()) return cmd_generate(config_path, ov, out_path);
        if (train_cmd->parsed())
            return cmd_train(config_path, ov, data_path, ckpt_path,
                             trace_path, resume_path);
        if (dec->parsed()) return cmd_decode(ckpt_path, data_path, out_path);
        if (ev->parsed()) return cmd_evaluate(ckpt_path, data_path, out_path);
        if (bench->parsed())
            return cmd_benchmark(bench_dims, bench_layers, bench_reps,
                                 out_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalError;
    }
    return 0;
}
