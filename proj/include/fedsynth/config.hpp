#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsynth/attacks.hpp"
#include "fedsynth/federation.hpp"
#include "fedsynth/mixture.hpp"
#include "fedsynth/privacy.hpp"

namespace fedsynth {

struct DatasetConfig {
    std::string kind = "mixture";  // "mixture" | "idx"
    MixtureSpec mixture;
    std::string idx_images;
    std::string idx_labels;
    std::size_t idx_downscale = 1;
};

struct AttackConfig {
    std::size_t steps = 300;
    std::vector<double> step_sizes = {0.02, 0.05, 0.1, 0.2};
    double detection_target = 0.25;
};

struct StudentConfig {
    StudentArch arch;
    StudentHyper hyper;
};

struct ExperimentPlan {
    std::vector<std::uint64_t> seeds = {1};
    std::vector<std::string> modes = {"iid"};
    std::vector<std::size_t> mean_points = {500};
    double test_fraction = 0.2;
};

/// Everything a pipeline run needs. Runtime seeds for sharding, federation,
/// and removal are derived from `seed`, never read from JSON.
struct ExperimentConfig {
    std::string name = "mixture8x64";
    std::uint64_t seed = 1;
    DatasetConfig dataset;
    ShardingConfig sharding;
    FederationConfig fed;
    bool oracle_generator = false;
    double artificial_per_real = 1.0;
    RemovalConfig removal;
    double gamma = 1e-15;
    std::size_t knn_k = 2;
    std::string metric = "auto";  // auto | raw | projection | student
    StudentConfig student;
    AttackConfig attack;
    ExperimentPlan plan;

    void validate() const;
};

ExperimentConfig default_config();

/// Complete canonical dump: every field, defaults included, sorted keys.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Strict parse: unknown keys and type mismatches are errors; missing keys
/// take defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig config_from_json_text(const std::string& text);

/// FNV-1a64 over the canonical dump with the master seed zeroed, as 16 hex
/// digits; identifies the configuration independently of the seed.
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace fedsynth
