#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedsynth/dataset.hpp"
#include "fedsynth/mlp.hpp"
#include "fedsynth/tensor.hpp"

namespace fedsynth {

struct DpParams {
    double epsilon = 0.0;
    double delta = 0.0;

    void validate() const;  // epsilon >= 0, delta in [0, 1)
};

/// log(p/q) for outcome probabilities p, q > 0.
double privacy_loss(double p, double q);

/// Gaussian-mechanism noise scale C*sqrt(2*ln(1.25/delta))/epsilon.
/// Requires epsilon > 0 and 0 < delta < 1.
double gaussian_sigma(double sensitivity, const DpParams& dp);

enum class MetricKind { euclidean_raw, random_projection, mlp_embedding };

/// Pseudo-metric on feature space: Euclidean distance after an embedding.
/// euclidean_raw embeds with the identity; random_projection with a seeded
/// Gaussian linear map; mlp_embedding with the leading layers of a trained net.
struct SimilarityMetric {
    MetricKind kind = MetricKind::euclidean_raw;
    std::size_t projection_dim = 32;
    std::uint64_t projection_seed = 0;
    MlpParams embed_params;
    std::size_t embed_layer_count = 0;
};

std::string metric_name(const SimilarityMetric& sim);

/// Raw Euclidean for dim <= 32, otherwise a seeded random projection to 32.
SimilarityMetric auto_metric(std::size_t data_dim, std::uint64_t seed);

/// Maps points into the metric's embedding space (identity copy for raw).
Tensor2 metric_embed(const SimilarityMetric& sim, const Tensor2& points);

double metric_distance(const SimilarityMetric& sim, std::span<const double> a,
                       std::span<const double> b);

/// k-NN estimate of KL(P || Q) from samples (n x d and m x d):
/// (d/n) * sum_i log(nu_k(i)/rho_k(i)) + log(m/(n-1)), where rho_k is the
/// distance to the k-th neighbour within sample_p excluding the point itself
/// and nu_k the distance to the k-th neighbour in sample_q. When the nearest
/// point in sample_q lies within the 1e-12 floor it is treated as the query's
/// own copy and skipped (at most one), so KL(P||P) evaluates near zero and
/// overlapping samples behave like self-exclusion. All distances are floored
/// at 1e-12 before logs. Requires n > k and m >= k.
double knn_kl_estimate(const Tensor2& sample_p, const Tensor2& sample_q, std::size_t k);

struct RemovalConfig {
    std::size_t k = 0;  // neighbours removed per trial; 0 = auto |artificial|/|real|
    std::size_t trials = 64;
    std::uint64_t seed = 0;
    bool symmetrized = false;  // average the divergence over both directions
};

/// The k to remove: cfg.k, or max(1, round(|artificial| / |real|)) when auto.
std::size_t resolve_removal_k(const RemovalConfig& cfg, std::size_t artificial_size,
                              std::size_t real_size);

/// Artificial set minus the k points nearest (under sim) to real[real_index];
/// distance ties break toward the lower row index. Row order is preserved.
LabelledDataset simulate_removal(const LabelledDataset& real, const LabelledDataset& artificial,
                                 std::size_t real_index, const SimilarityMetric& sim,
                                 const RemovalConfig& cfg);

/// Student-t inverse CDF via regularized incomplete beta inversion.
double t_quantile(std::size_t df, double p);

/// Quantile with upper-tail probability `tail` in (0, 1); equals
/// t_quantile(df, 1 - tail) but stays accurate for tails near 0.
double t_upper_quantile(std::size_t df, double tail);

/// Loss sample summary; stddev uses the 1/n normalization.
struct LossSamples {
    std::vector<double> values;
    double mean = 0.0;
    double stddev = 0.0;

    static LossSamples from_values(std::vector<double> values);  // needs n >= 2
};

/// Upper confidence bound mean + t_{n-1}(1-gamma) * stddev / sqrt(n-1).
double loss_upper_bound(const LossSamples& samples, double gamma);

struct DapReport {
    double mu = 0.0;
    double gamma = 0.0;
    std::size_t trials = 0;
    std::size_t removal_k = 0;
    std::size_t knn_k = 0;
    std::string metric;
    std::vector<double> samples;  // per-trial KL estimates, negatives retained
    double sample_mean = 0.0;
    double sample_stddev = 0.0;
    double mean_abs_sample = 0.0;  // mean |l_i|, recorded alongside the signed mean
};

std::string dap_report_json(const DapReport& report);
std::string dap_report_csv_header();
std::string dap_report_csv_line(const DapReport& report);

/// Full removal-and-estimate procedure: for each of cfg.trials sampled real
/// indices (without replacement when trials <= |real|), estimates
/// KL(artificial || artificial-with-removal) in raw feature space and applies
/// the confidence bound at gamma; cfg.symmetrized averages in the reverse
/// direction. Deterministic given datasets, cfg.seed and config.
DapReport dap_estimate(const LabelledDataset& real, const LabelledDataset& artificial,
                       const SimilarityMetric& sim, const RemovalConfig& cfg, double gamma,
                       std::size_t knn_k);

}  // namespace fedsynth
