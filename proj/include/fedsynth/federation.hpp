#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fedsynth/gan.hpp"

namespace fedsynth {

/// One simulated client. The shard and the critic never leave this struct;
/// the only server-bound message type is GeneratorDelta.
struct ClientState {
    std::size_t id = 0;
    LabelledDataset shard;
    CriticModel critic;
    AdamState critic_opt;
    AdamState gen_opt;
    Rng rng{0};
    std::vector<double> label_probs;  // shard label frequencies, conditions local fakes
};

enum class WeightPolicy { uniform, shard_size };

std::string weight_policy_name(WeightPolicy p);
WeightPolicy weight_policy_from_name(const std::string& name);

struct ServerState {
    GeneratorModel global_gen;
    std::size_t round = 0;
    WeightPolicy weights = WeightPolicy::uniform;
    Rng mask_rng{0};
};

struct GeneratorDelta {
    std::vector<double> values;
    std::size_t client_id = 0;
    std::size_t round = 0;
};

enum class ShardMode { iid, non_iid };

std::string shard_mode_name(ShardMode m);
ShardMode shard_mode_from_name(const std::string& name);

struct ShardingConfig {
    std::size_t client_count = 1;
    std::size_t mean_points = 500;
    ShardMode mode = ShardMode::iid;
    std::size_t classes_per_client = 2;  // non-iid only
    std::uint64_t seed = 0;

    void validate() const;
};

/// Splits `data` into client_count shards, sampling without replacement.
/// Shard sizes are uniform on [max(100, 0.2*mean), 1.8*mean], rounded.
/// iid mode matches global class proportions per shard (largest remainder);
/// non-iid gives each client classes_per_client random classes, split evenly.
std::vector<LabelledDataset> shard_dataset(const LabelledDataset& data,
                                           const ShardingConfig& cfg);

/// Weighted sum of deltas; weights must be nonnegative and sum to 1 within 1e-9.
std::vector<double> aggregate_deltas(const std::vector<GeneratorDelta>& deltas,
                                     const std::vector<double>& weights);

/// Pairwise-mask submissions: client i submits delta_i + sum_{j>i} m_ij - sum_{j<i} m_ji,
/// so masks cancel in the sum. Masks are derived from `rng` by pair position only.
std::vector<std::vector<double>> masked_submissions(const std::vector<std::vector<double>>& deltas,
                                                    const Rng& rng);

/// Sum of masked submissions; equals the plain sum within 1e-9 per coordinate.
std::vector<double> masked_sum(const std::vector<std::vector<double>>& deltas, const Rng& rng);

struct LocalUpdateResult {
    GeneratorDelta delta;
    double mean_critic_gap = 0.0;  // pre-update gap averaged over all critic steps
};

/// Local epochs of alternating critic/generator steps starting from global_gen.
/// The client's critic and optimizer states persist across calls.
LocalUpdateResult local_update(const GeneratorModel& global_gen, ClientState& client,
                               const GanHyper& hyper, std::size_t round);

struct RoundStats {
    std::size_t round = 0;  // index of the completed round (pre-increment value)
    std::size_t client_count = 0;
    double mean_critic_gap = 0.0;
    double seconds = 0.0;
};

/// One synchronous round: broadcast, local updates, masked aggregation, apply.
/// Throws without touching `server` if any client update fails.
RoundStats run_round(ServerState& server, std::vector<ClientState>& clients,
                     const GanHyper& hyper);

struct FederationConfig {
    std::size_t noise_dim = 16;
    std::vector<std::size_t> gen_hidden = {64};
    std::vector<std::size_t> critic_hidden = {64};
    std::size_t rounds = 1;
    GanHyper hyper;
    WeightPolicy weights = WeightPolicy::uniform;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Full federated training over the given shards; n=1 is the centralized
/// special case. Telemetry goes to `on_round` when provided.
GeneratorModel train_federated(const std::vector<LabelledDataset>& shards,
                               const FederationConfig& cfg,
                               const std::function<void(const RoundStats&)>& on_round = {});

}  // namespace fedsynth
