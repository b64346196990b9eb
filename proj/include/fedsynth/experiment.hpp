#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsynth/attacks.hpp"
#include "fedsynth/config.hpp"
#include "fedsynth/federation.hpp"
#include "fedsynth/mixture.hpp"
#include "fedsynth/privacy.hpp"

namespace fedsynth {

/// Relative file name -> exact bytes. Pipelines build outputs in memory so
/// reruns can be compared byte-for-byte; write_output_files persists them.
using OutputFiles = std::vector<std::pair<std::string, std::string>>;

void write_output_files(const OutputFiles& files, const std::string& out_dir);

/// Data for one run: the full draw, its split, the client shards, and the
/// pooled union of shards (the real data the run actually touches).
struct PreparedData {
    LabelledDataset train;
    LabelledDataset test;
    std::vector<LabelledDataset> shards;
    LabelledDataset pooled;
    AffineMap map;       // raw -> [-1, 1]; identity for idx data
    Tensor2 raw_means;   // mixture only, empty otherwise
};

/// Mixture size auto-grows with the sharding demand so shard draws cannot
/// exhaust a class pool: per-class points = max(configured,
/// ceil(2 * clients * mean_points / (classes * (1 - test_fraction)))).
std::size_t required_points_per_class(const ExperimentConfig& cfg, std::size_t mean_points);

/// Draws (or loads) the dataset, splits train/test, shards the train side.
/// `mode` and `mean_points` override the sharding config for this run.
PreparedData prepare_data(const ExperimentConfig& cfg, ShardMode mode, std::size_t mean_points,
                          const Rng& run);

/// Trains the federated generator over the shards (seed derived from `run`).
GeneratorModel train_generator(const ExperimentConfig& cfg,
                               const std::vector<LabelledDataset>& shards, const Rng& run,
                               const std::function<void(const RoundStats&)>& on_round = {});

/// Artificial release: round(artificial_per_real * |pooled|) samples whose
/// labels cycle through the pooled label multiset. With oracle_generator the
/// release is the pooled data itself, relabelled artificial.
LabelledDataset make_artificial(const ExperimentConfig& cfg, const GeneratorModel& gen,
                                const LabelledDataset& pooled, const Rng& run);

/// Resolves the configured similarity metric. "student" embeds with the
/// given student's hidden stack and requires `baseline` non-null.
SimilarityMetric resolve_metric(const ExperimentConfig& cfg, std::size_t data_dim,
                                const StudentModel* baseline, const Rng& run);

/// Trains a student on `data` with the run's shared student stream, so every
/// student of one run sees identical randomness regardless of training data.
StudentModel train_run_student(const ExperimentConfig& cfg, const LabelledDataset& data,
                               const Rng& run);

struct AttackArtifacts {
    StudentModel fedgp_student;
    std::vector<InversionResult> baseline_inversions;
    std::vector<InversionResult> fedgp_inversions;
    double tau = 0.0;  // calibrated so baseline detection ~= attack.detection_target
    ReconstructionReport baseline;
    ReconstructionReport fedgp;
};

/// Inversion attack against the baseline student and a student trained on
/// the artificial release, with tau calibrated on the baseline's distances.
AttackArtifacts run_attack(const ExperimentConfig& cfg, const StudentModel& baseline,
                           const LabelledDataset& pooled, const LabelledDataset& artificial,
                           const SimilarityMetric& sim, const Rng& run);

struct LearningRow {
    std::string setting;
    ShardMode mode = ShardMode::iid;
    std::size_t mean_points = 0;
    double baseline_acc = 0.0;
    double centgp_acc = 0.0;  // meaningful only when centgp_present
    double fedgp_acc = 0.0;
    bool centgp_present = false;
    std::uint64_t seed = 0;
};

struct LearningReport {
    std::vector<LearningRow> rows;
    OutputFiles files;
};

/// Learning pipeline: per (mode, seed) trains the baseline student on pooled
/// real data and the FedGP student on the federated release; iid runs add the
/// CentGP (single-client) release. All students share one derived rng stream
/// and are evaluated on the held-out real test split.
LearningReport run_learning_experiment(const ExperimentConfig& cfg);

struct PrivacyRun {
    std::size_t mean_points = 0;
    std::uint64_t seed = 0;
    DapReport dap;
};

struct AttackRun {
    std::uint64_t seed = 0;
    double tau = 0.0;
    ReconstructionReport baseline;
    ReconstructionReport fedgp;
};

struct PrivacyReport {
    std::vector<PrivacyRun> dap_runs;
    std::vector<AttackRun> attack_runs;
    OutputFiles files;
};

/// Privacy pipeline: per (mean_points, seed) trains the generator, releases
/// artificial data, and estimates the disclosure bound; at the first
/// mean_points entry it additionally attacks the baseline and FedGP students,
/// calibrating tau so baseline detection hits attack.detection_target.
PrivacyReport run_privacy_experiment(const ExperimentConfig& cfg);

}  // namespace fedsynth
