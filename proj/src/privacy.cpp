#include "fedsynth/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "fedsynth/io.hpp"
#include "fedsynth/kdtree.hpp"
#include "fedsynth/rng.hpp"

namespace fedsynth {
namespace {

constexpr double kDistanceFloor = 1e-12;
constexpr double kDistanceFloor2 = kDistanceFloor * kDistanceFloor;

double betacf(double a, double b, double x) {
    const int max_iter = 300;
    const double eps = 3e-16;
    const double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// P(T > t) for t >= 0 under Student-t with df degrees of freedom.
double t_upper_tail(std::size_t df, double t) {
    const double v = static_cast<double>(df);
    const double x = v / (v + t * t);
    return 0.5 * reg_inc_beta(0.5 * v, 0.5, x);
}

}  // namespace

void DpParams::validate() const {
    if (!(epsilon >= 0.0)) throw std::invalid_argument("DpParams: epsilon must be >= 0");
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("DpParams: delta in [0, 1)");
}

double privacy_loss(double p, double q) {
    if (!(p > 0.0) || !(q > 0.0)) {
        throw std::invalid_argument("privacy_loss: probabilities must be positive");
    }
    return std::log(p / q);
}

double gaussian_sigma(double sensitivity, const DpParams& dp) {
    dp.validate();
    if (!(sensitivity > 0.0)) throw std::invalid_argument("gaussian_sigma: sensitivity must be > 0");
    if (!(dp.epsilon > 0.0)) throw std::invalid_argument("gaussian_sigma: epsilon must be > 0");
    if (!(dp.delta > 0.0)) throw std::invalid_argument("gaussian_sigma: delta must be > 0");
    return sensitivity * std::sqrt(2.0 * std::log(1.25 / dp.delta)) / dp.epsilon;
}

std::string metric_name(const SimilarityMetric& sim) {
    switch (sim.kind) {
        case MetricKind::euclidean_raw:
            return "euclidean_raw";
        case MetricKind::random_projection:
            return "random_projection_" + std::to_string(sim.projection_dim);
        case MetricKind::mlp_embedding:
            return "mlp_embedding_" + std::to_string(sim.embed_layer_count);
    }
    return "unknown";
}

SimilarityMetric auto_metric(std::size_t data_dim, std::uint64_t seed) {
    SimilarityMetric sim;
    if (data_dim <= 32) {
        sim.kind = MetricKind::euclidean_raw;
        return sim;
    }
    sim.kind = MetricKind::random_projection;
    sim.projection_dim = 32;
    sim.projection_seed = seed;
    return sim;
}

Tensor2 metric_embed(const SimilarityMetric& sim, const Tensor2& points) {
    switch (sim.kind) {
        case MetricKind::euclidean_raw:
            return points;
        case MetricKind::random_projection: {
            if (sim.projection_dim == 0) {
                throw std::invalid_argument("metric_embed: projection_dim must be >= 1");
            }
            Rng rng = Rng(sim.projection_seed).fork("projection");
            Tensor2 proj(points.cols(), sim.projection_dim);
            const double scale = 1.0 / std::sqrt(static_cast<double>(sim.projection_dim));
            for (double& v : proj.data()) v = rng.normal() * scale;
            return matmul_nn(points, proj);
        }
        case MetricKind::mlp_embedding: {
            if (sim.embed_layer_count == 0 ||
                sim.embed_layer_count > sim.embed_params.layer_count()) {
                throw std::invalid_argument("metric_embed: embed_layer_count outside [1, layers]");
            }
            std::vector<MlpLayer> leading(
                sim.embed_params.layers().begin(),
                sim.embed_params.layers().begin() +
                    static_cast<std::ptrdiff_t>(sim.embed_layer_count));
            const MlpParams head(std::move(leading));
            return mlp_forward(head, points).output();
        }
    }
    throw std::invalid_argument("metric_embed: unknown metric kind");
}

double metric_distance(const SimilarityMetric& sim, std::span<const double> a,
                       std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("metric_distance: dim mismatch");
    Tensor2 pair(2, a.size());
    std::copy(a.begin(), a.end(), pair.row(0).begin());
    std::copy(b.begin(), b.end(), pair.row(1).begin());
    const Tensor2 emb = metric_embed(sim, pair);
    return std::sqrt(squared_distance(emb.row(0), emb.row(1)));
}

double knn_kl_estimate(const Tensor2& sample_p, const Tensor2& sample_q, std::size_t k) {
    if (sample_p.cols() != sample_q.cols()) {
        throw std::invalid_argument("knn_kl_estimate: dimension mismatch: " +
                                    std::to_string(sample_p.cols()) + " vs " +
                                    std::to_string(sample_q.cols()));
    }
    if (k == 0) throw std::invalid_argument("knn_kl_estimate: k must be >= 1");
    const std::size_t n = sample_p.rows();
    const std::size_t m = sample_q.rows();
    if (n <= k) {
        throw std::invalid_argument("knn_kl_estimate: need n > k, got n=" + std::to_string(n) +
                                    ", k=" + std::to_string(k));
    }
    if (m < k) {
        throw std::invalid_argument("knn_kl_estimate: need m >= k, got m=" + std::to_string(m) +
                                    ", k=" + std::to_string(k));
    }
    const KdTree tree_p(sample_p);
    const KdTree tree_q(sample_q);
    const double d = static_cast<double>(sample_p.cols());

    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = sample_p.row(i);

        const std::vector<Neighbor> np = tree_p.nearest(row, k + 1);
        double rho2 = np.back().dist2;
        std::size_t kept = 0;
        for (const Neighbor& nb : np) {
            if (nb.index == i) continue;
            ++kept;
            if (kept == k) {
                rho2 = nb.dist2;
                break;
            }
        }

        const std::size_t q_len = std::min(k + 1, m);
        const std::vector<Neighbor> nq = tree_q.nearest(row, q_len);
        const bool drop_first = q_len > k && nq.front().dist2 <= kDistanceFloor2;
        const double nu2 = drop_first ? nq[k].dist2 : nq[k - 1].dist2;

        const double rho = std::max(std::sqrt(rho2), kDistanceFloor);
        const double nu = std::max(std::sqrt(nu2), kDistanceFloor);
        sum += std::log(nu) - std::log(rho);
    }
    return d / static_cast<double>(n) * sum +
           std::log(static_cast<double>(m) / static_cast<double>(n - 1));
}

std::size_t resolve_removal_k(const RemovalConfig& cfg, std::size_t artificial_size,
                              std::size_t real_size) {
    if (cfg.k > 0) return cfg.k;
    if (real_size == 0) throw std::invalid_argument("resolve_removal_k: empty real set");
    const auto ratio = static_cast<double>(artificial_size) / static_cast<double>(real_size);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio)));
}

LabelledDataset simulate_removal(const LabelledDataset& real, const LabelledDataset& artificial,
                                 std::size_t real_index, const SimilarityMetric& sim,
                                 const RemovalConfig& cfg) {
    if (real_index >= real.size()) {
        throw std::out_of_range("simulate_removal: real_index " + std::to_string(real_index) +
                                " >= " + std::to_string(real.size()));
    }
    if (real.dim() != artificial.dim()) {
        throw std::invalid_argument("simulate_removal: feature dims differ");
    }
    const std::size_t k = resolve_removal_k(cfg, artificial.size(), real.size());
    if (k >= artificial.size()) {
        throw std::invalid_argument("simulate_removal: k=" + std::to_string(k) +
                                    " >= |artificial|=" + std::to_string(artificial.size()));
    }
    const Tensor2 emb_art = metric_embed(sim, artificial.features);
    Tensor2 query_row(1, real.dim());
    const auto src = real.features.row(real_index);
    std::copy(src.begin(), src.end(), query_row.row(0).begin());
    const Tensor2 emb_query = metric_embed(sim, query_row);

    const KdTree tree(emb_art);
    const std::vector<Neighbor> nearest = tree.nearest(emb_query.row(0), k);
    std::vector<bool> removed(artificial.size(), false);
    for (const Neighbor& nb : nearest) removed[nb.index] = true;

    std::vector<std::size_t> keep;
    keep.reserve(artificial.size() - k);
    for (std::size_t i = 0; i < artificial.size(); ++i) {
        if (!removed[i]) keep.push_back(i);
    }
    return subset(artificial, keep);
}

double t_upper_quantile(std::size_t df, double tail) {
    if (df == 0) throw std::invalid_argument("t_upper_quantile: df must be >= 1");
    if (!(tail > 0.0 && tail < 1.0)) {
        throw std::invalid_argument("t_upper_quantile: tail must be in (0, 1)");
    }
    if (tail == 0.5) return 0.0;
    if (tail > 0.5) return -t_upper_quantile(df, 1.0 - tail);

    double hi = 1.0;
    while (t_upper_tail(df, hi) > tail) {
        hi *= 2.0;
        if (hi > 1e300) break;
    }
    double lo = hi == 1.0 ? 0.0 : hi / 2.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (t_upper_tail(df, mid) > tail) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

double t_quantile(std::size_t df, double p) {
    if (df == 0) throw std::invalid_argument("t_quantile: df must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t_quantile: p must be in (0, 1)");
    if (p == 0.5) return 0.0;
    if (p > 0.5) return t_upper_quantile(df, 1.0 - p);
    return -t_upper_quantile(df, p);
}

LossSamples LossSamples::from_values(std::vector<double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("LossSamples: need at least 2 values, got " +
                                    std::to_string(values.size()));
    }
    LossSamples out;
    out.values = std::move(values);
    const auto n = static_cast<double>(out.values.size());
    for (double v : out.values) out.mean += v;
    out.mean /= n;
    double var = 0.0;
    for (double v : out.values) var += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(var / n);
    return out;
}

double loss_upper_bound(const LossSamples& samples, double gamma) {
    if (samples.values.size() < 2) throw std::invalid_argument("loss_upper_bound: need n >= 2");
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("loss_upper_bound: gamma must be in (0, 1)");
    }
    const std::size_t df = samples.values.size() - 1;
    return samples.mean +
           t_upper_quantile(df, gamma) * samples.stddev / std::sqrt(static_cast<double>(df));
}

std::string dap_report_json(const DapReport& report) {
    nlohmann::json j;
    j["mu"] = report.mu;
    j["gamma"] = report.gamma;
    j["trials"] = report.trials;
    j["k"] = report.removal_k;
    j["knn_k"] = report.knn_k;
    j["metric"] = report.metric;
    j["samples"] = report.samples;
    j["sample_mean"] = report.sample_mean;
    j["sample_stddev"] = report.sample_stddev;
    j["mean_abs_sample"] = report.mean_abs_sample;
    return j.dump(2);
}

std::string dap_report_csv_header() {
    return "mu,gamma,trials,removal_k,knn_k,metric,sample_mean,sample_stddev,mean_abs_sample";
}

std::string dap_report_csv_line(const DapReport& report) {
    std::string line;
    line += format_double(report.mu);
    line += ',' + format_double(report.gamma);
    line += ',' + std::to_string(report.trials);
    line += ',' + std::to_string(report.removal_k);
    line += ',' + std::to_string(report.knn_k);
    line += ',' + report.metric;
    line += ',' + format_double(report.sample_mean);
    line += ',' + format_double(report.sample_stddev);
    line += ',' + format_double(report.mean_abs_sample);
    return line;
}

DapReport dap_estimate(const LabelledDataset& real, const LabelledDataset& artificial,
                       const SimilarityMetric& sim, const RemovalConfig& cfg, double gamma,
                       std::size_t knn_k) {
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("dap_estimate: gamma must be in (0, 1)");
    }
    if (knn_k == 0) throw std::invalid_argument("dap_estimate: knn_k must be >= 1");
    if (cfg.trials < 2) throw std::invalid_argument("dap_estimate: trials must be >= 2");
    if (real.size() == 0) throw std::invalid_argument("dap_estimate: empty real set");
    if (real.dim() != artificial.dim()) {
        throw std::invalid_argument("dap_estimate: feature dims differ");
    }
    const std::size_t k_rm = resolve_removal_k(cfg, artificial.size(), real.size());
    const std::size_t n = artificial.size();
    if (k_rm >= n) {
        throw std::invalid_argument("dap_estimate: removal k=" + std::to_string(k_rm) +
                                    " >= |artificial|=" + std::to_string(n));
    }
    const std::size_t m = n - k_rm;
    if (n <= knn_k || m < knn_k + 1) {
        throw std::invalid_argument("dap_estimate: artificial set too small for knn_k=" +
                                    std::to_string(knn_k) + " after removing " +
                                    std::to_string(k_rm));
    }

    const Rng root(cfg.seed);
    Rng trial_rng = root.fork("trials");
    std::vector<std::size_t> trial_indices;
    if (cfg.trials <= real.size()) {
        std::vector<std::size_t> order(real.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        trial_rng.shuffle(order);
        trial_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.trials));
    } else {
        trial_indices.resize(cfg.trials);
        for (std::size_t& idx : trial_indices) idx = trial_rng.uniform_index(real.size());
    }

    const Tensor2 emb_art = metric_embed(sim, artificial.features);
    const Tensor2 emb_real = metric_embed(sim, real.features);
    const KdTree tree_raw(artificial.features);
    const KdTree tree_emb(emb_art);

    // One neighbour-list pass over the artificial set serves every trial: the
    // k_rm extra entries absorb whatever a single trial removes, so filtering
    // the list reproduces a fresh search on the reduced set exactly.
    const std::size_t list_len = std::min(n, knn_k + 1 + k_rm);
    std::vector<std::vector<Neighbor>> lists(n);
    std::vector<double> log_rho(n);
    const double d = static_cast<double>(artificial.dim());
    for (std::size_t i = 0; i < n; ++i) {
        lists[i] = tree_raw.nearest(artificial.features.row(i), list_len);
        double rho2 = lists[i].back().dist2;
        std::size_t kept = 0;
        for (const Neighbor& nb : lists[i]) {
            if (nb.index == i) continue;
            ++kept;
            if (kept == knn_k) {
                rho2 = nb.dist2;
                break;
            }
        }
        log_rho[i] = std::log(std::max(std::sqrt(rho2), kDistanceFloor));
    }

    std::vector<double> values;
    values.reserve(trial_indices.size());
    std::vector<bool> removed(n, false);
    const double log_ratio = std::log(static_cast<double>(m) / static_cast<double>(n - 1));
    for (std::size_t real_idx : trial_indices) {
        const std::vector<Neighbor> to_remove = tree_emb.nearest(emb_real.row(real_idx), k_rm);
        for (const Neighbor& nb : to_remove) removed[nb.index] = true;

        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t kept = 0;
            double first_kept_dist2 = 0.0;
            double nu2 = lists[i].back().dist2;
            bool drop_first = false;
            for (const Neighbor& nb : lists[i]) {
                if (removed[nb.index]) continue;
                if (kept == 0) {
                    first_kept_dist2 = nb.dist2;
                    drop_first = first_kept_dist2 <= kDistanceFloor2;
                }
                ++kept;
                const std::size_t want = drop_first ? knn_k + 1 : knn_k;
                if (kept == want) {
                    nu2 = nb.dist2;
                    break;
                }
            }
            const double nu = std::max(std::sqrt(nu2), kDistanceFloor);
            sum += std::log(nu) - log_rho[i];
        }
        double value = d / static_cast<double>(n) * sum + log_ratio;
        if (cfg.symmetrized) {
            Tensor2 reduced(m, artificial.dim());
            std::size_t row = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (removed[i]) continue;
                std::copy(artificial.features.row(i).begin(), artificial.features.row(i).end(),
                          reduced.row(row).begin());
                ++row;
            }
            value = 0.5 * (value + knn_kl_estimate(reduced, artificial.features, knn_k));
        }
        values.push_back(value);

        for (const Neighbor& nb : to_remove) removed[nb.index] = false;
    }

    const LossSamples samples = LossSamples::from_values(values);
    DapReport report;
    report.mu = loss_upper_bound(samples, gamma);
    report.gamma = gamma;
    report.trials = cfg.trials;
    report.removal_k = k_rm;
    report.knn_k = knn_k;
    report.metric = metric_name(sim);
    report.samples = samples.values;
    report.sample_mean = samples.mean;
    report.sample_stddev = samples.stddev;
    double abs_sum = 0.0;
    for (double v : samples.values) abs_sum += std::abs(v);
    report.mean_abs_sample = abs_sum / static_cast<double>(samples.values.size());
    return report;
}

}  // namespace fedsynth
