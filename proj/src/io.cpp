#include "hmica/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace hmica {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    auto lo = s.find_first_not_of(" \t\r\n");
    if (lo == std::string::npos) return "";
    auto hi = s.find_last_not_of(" \t\r\n");
    return s.substr(lo, hi - lo + 1);
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (long i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return json{{"shape", {m.rows(), m.cols()}}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const json& j) {
    const auto& shape = j.at("shape");
    Matrix m(shape.at(0).get<long>(), shape.at(1).get<long>());
    const auto& rows = j.at("data");
    for (long i = 0; i < m.rows(); ++i)
        for (long k = 0; k < m.cols(); ++k)
            m(i, k) = rows.at(i).at(k).get<double>();
    return m;
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (long i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Vector vector_from_json(const json& j) {
    Vector v(j.size());
    for (long i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
    return v;
}

}  // namespace

void RunConfig::sync_shared_fields() {
    train.num_components = datagen.num_components;
    train.num_states = datagen.num_states;
    train.alpha = datagen.alpha;
    train.seed = datagen.seed;
}

std::string config_reference() {
    return
        "# Data generation\n"
        "components = 5        # N, number of independent components\n"
        "states = 11           # C, number of hidden states\n"
        "layers = 1            # mixing / demixing MLP depth\n"
        "length = 100000       # T, sequence length\n"
        "p_stay = 0.99         # self-transition probability of the chain\n"
        "alpha = 0.1           # leaky-ReLU slope\n"
        "cond_cap = 25.0       # mixing-layer condition number cap\n"
        "seed = 0\n"
        "strict = false        # reject C < 2N+1 at generation\n"
        "# Training\n"
        "mode = full           # full | subchain\n"
        "iters = 200           # EM iteration / epoch cap\n"
        "gradient_steps = 5    # Adam steps per M-step (0 freezes the net)\n"
        "lr = 0.001\n"
        "tolerance = 1e-6      # relative free-energy change\n"
        "tolerance_window = 5\n"
        "restarts = 5\n"
        "subchain_length = 100\n"
        "minibatch = 64\n"
        "buffer = 10\n"
        "init_p_stay = 0.9\n"
        "reset_adam = false\n";
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " +
                                        std::to_string(line_no) +
                                        ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "components") {
                config.datagen.num_components = std::stoi(value);
            } else if (key == "states") {
                config.datagen.num_states = std::stoi(value);
            } else if (key == "layers") {
                config.datagen.mixing_layers = std::stoi(value);
                config.train.layers = std::stoi(value);
            } else if (key == "length") {
                config.datagen.sequence_length = std::stol(value);
            } else if (key == "p_stay") {
                config.datagen.p_stay = std::stod(value);
            } else if (key == "alpha") {
                config.datagen.alpha = std::stod(value);
            } else if (key == "cond_cap") {
                config.datagen.cond_cap = std::stod(value);
            } else if (key == "seed") {
                config.datagen.seed = std::stoull(value);
            } else if (key == "strict") {
                config.strict = (value == "true" || value == "1");
            } else if (key == "mode") {
                if (value == "full") {
                    config.train.mode = TrainMode::kFullBatch;
                } else if (value == "subchain") {
                    config.train.mode = TrainMode::kSubchain;
                } else {
                    throw std::invalid_argument("mode must be full|subchain");
                }
            } else if (key == "iters") {
                config.train.em_iterations = std::stoi(value);
            } else if (key == "gradient_steps") {
                config.train.gradient_steps = std::stoi(value);
            } else if (key == "lr") {
                config.train.learning_rate = std::stod(value);
            } else if (key == "tolerance") {
                config.train.tolerance = std::stod(value);
            } else if (key == "tolerance_window") {
                config.train.tolerance_window = std::stoi(value);
            } else if (key == "restarts") {
                config.train.restarts = std::stoi(value);
            } else if (key == "subchain_length") {
                config.train.subchain_length = std::stoi(value);
            } else if (key == "minibatch") {
                config.train.minibatch_size = std::stoi(value);
            } else if (key == "buffer") {
                config.train.buffer_length = std::stoi(value);
            } else if (key == "init_p_stay") {
                config.train.init_p_stay = std::stod(value);
            } else if (key == "reset_adam") {
                config.train.reset_adam_each_iteration =
                    (value == "true" || value == "1");
            } else {
                throw std::invalid_argument("unknown config key: " + key);
            }
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " +
                                        std::to_string(line_no) +
                                        ": bad value for " + key);
        }
    }
    config.sync_shared_fields();
    return config;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void write_matrix_csv(const std::string& path, const std::string& prefix,
                      const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (long j = 0; j < m.cols(); ++j)
        out << (j ? "," : "") << prefix << j;
    out << "\n";
    char buf[64];
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) {
            auto res = std::to_chars(buf, buf + sizeof(buf), m(i, j));
            out << (j ? "," : "")
                << std::string_view(buf, res.ptr - buf);
        }
        out << "\n";
    }
}

Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty CSV: " + path);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("no data rows in " + path);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw std::runtime_error("ragged CSV: " + path);
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

void write_path_csv(const std::string& path,
                    const std::vector<std::vector<int>>& columns,
                    const std::vector<std::string>& names) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t j = 0; j < names.size(); ++j)
        out << (j ? "," : "") << names[j];
    out << "\n";
    const std::size_t T = columns.empty() ? 0 : columns[0].size();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < columns.size(); ++j)
            out << (j ? "," : "") << columns[j][t];
        out << "\n";
    }
}

StatePath read_path_csv(const std::string& path, int column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty CSV: " + path);
    StatePath result;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        for (int j = 0; j <= column; ++j)
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("missing column in " + path);
        result.states.push_back(std::stoi(cell));
    }
    return result;
}

json checkpoint_to_json(const Checkpoint& ckpt) {
    json weights = json::array();
    json biases = json::array();
    for (const auto& w : ckpt.params.net.weights)
        weights.push_back(matrix_to_json(w));
    for (const auto& b : ckpt.params.net.biases)
        biases.push_back(vector_to_json(b));
    NaturalParams nat = gaussian_to_natural(ckpt.params.sources);
    return json{
        {"version", ckpt.version},
        {"transition", matrix_to_json(ckpt.params.transition.probs)},
        {"means", matrix_to_json(ckpt.params.sources.means)},
        {"variances", matrix_to_json(ckpt.params.sources.variances)},
        {"natural_eta1", matrix_to_json(nat.eta1)},
        {"natural_eta2", matrix_to_json(nat.eta2)},
        {"weights", std::move(weights)},
        {"biases", std::move(biases)},
        {"alpha", ckpt.params.net.alpha},
        {"seed", ckpt.seed},
        {"iteration", ckpt.iteration},
        {"final_free_energy", ckpt.final_free_energy},
        {"config", ckpt.config},
    };
}

Checkpoint checkpoint_from_json(const json& j) {
    Checkpoint ckpt;
    ckpt.version = j.at("version").get<int>();
    if (ckpt.version != 1)
        throw std::runtime_error("unsupported checkpoint version");
    ckpt.params.transition.probs = matrix_from_json(j.at("transition"));
    ckpt.params.sources.means = matrix_from_json(j.at("means"));
    ckpt.params.sources.variances = matrix_from_json(j.at("variances"));
    for (const auto& w : j.at("weights"))
        ckpt.params.net.weights.push_back(matrix_from_json(w));
    for (const auto& b : j.at("biases"))
        ckpt.params.net.biases.push_back(vector_from_json(b));
    ckpt.params.net.alpha = j.at("alpha").get<double>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.iteration = j.at("iteration").get<int>();
    ckpt.final_free_energy = j.at("final_free_energy").get<double>();
    ckpt.config = j.value("config", json::object());
    return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << checkpoint_to_json(ckpt).dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return checkpoint_from_json(j);
}

json config_to_json(const RunConfig& config) {
    return json{
        {"components", config.datagen.num_components},
        {"states", config.datagen.num_states},
        {"layers", config.train.layers},
        {"length", config.datagen.sequence_length},
        {"p_stay", config.datagen.p_stay},
        {"alpha", config.datagen.alpha},
        {"cond_cap", config.datagen.cond_cap},
        {"seed", config.datagen.seed},
        {"strict", config.strict},
        {"mode", config.train.mode == TrainMode::kFullBatch ? "full"
                                                            : "subchain"},
        {"iters", config.train.em_iterations},
        {"gradient_steps", config.train.gradient_steps},
        {"lr", config.train.learning_rate},
        {"tolerance", config.train.tolerance},
        {"tolerance_window", config.train.tolerance_window},
        {"restarts", config.train.restarts},
        {"subchain_length", config.train.subchain_length},
        {"minibatch", config.train.minibatch_size},
        {"buffer", config.train.buffer_length},
        {"init_p_stay", config.train.init_p_stay},
        {"reset_adam", config.train.reset_adam_each_iteration},
    };
}

}  // namespace hmica
