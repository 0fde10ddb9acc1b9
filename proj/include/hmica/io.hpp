#pragma once

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hmica/datagen.hpp"
#include "hmica/trainer.hpp"

namespace hmica {

// Flat key = value configuration shared by the CLI commands. One parser,
// one set of defaults; unknown keys are rejected.
struct RunConfig {
    DatagenConfig datagen;
    TrainConfig train;
    bool strict = false;  // enforce C >= 2N+1 at generation time

    // Keep the shared fields (N, C, layers, alpha, seed) in sync.
    void sync_shared_fields();
};

// Parses `key = value` lines ('#' starts a comment). Throws
// std::invalid_argument on unknown keys or malformed values.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// The full key list with defaults, for --help style output.
std::string config_reference();

// CSV helpers: header row, one data row per time step.
void write_matrix_csv(const std::string& path, const std::string& prefix,
                      const Matrix& m);
Matrix read_matrix_csv(const std::string& path);
void write_path_csv(const std::string& path,
                    const std::vector<std::vector<int>>& columns,
                    const std::vector<std::string>& names);
StatePath read_path_csv(const std::string& path, int column = 0);

struct Checkpoint {
    int version = 1;
    ModelParams params;
    std::uint64_t seed = 0;
    int iteration = 0;
    double final_free_energy = 0.0;
    nlohmann::json config;  // snapshot of the run configuration
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json config_to_json(const RunConfig& config);

}  // namespace hmica
