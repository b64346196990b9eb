#include "fedsynth/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace fedsynth {
namespace {

LabelledDataset sample_batch(const LabelledDataset& shard, std::size_t batch_size, Rng& rng) {
    std::vector<std::size_t> idx(batch_size);
    for (std::size_t& v : idx) v = rng.uniform_index(shard.size());
    return subset(shard, idx);
}

std::vector<double> label_frequencies(const LabelledDataset& shard) {
    std::vector<double> probs(shard.class_count, 0.0);
    for (int label : shard.labels) probs[static_cast<std::size_t>(label)] += 1.0;
    for (double& p : probs) p /= static_cast<double>(shard.size());
    return probs;
}

}  // namespace

std::string weight_policy_name(WeightPolicy p) {
    return p == WeightPolicy::uniform ? "uniform" : "shard_size";
}

WeightPolicy weight_policy_from_name(const std::string& name) {
    if (name == "uniform") return WeightPolicy::uniform;
    if (name == "shard_size") return WeightPolicy::shard_size;
    throw std::invalid_argument("unknown weight policy: " + name);
}

std::string shard_mode_name(ShardMode m) { return m == ShardMode::iid ? "iid" : "non_iid"; }

ShardMode shard_mode_from_name(const std::string& name) {
    if (name == "iid") return ShardMode::iid;
    if (name == "non_iid") return ShardMode::non_iid;
    throw std::invalid_argument("unknown shard mode: " + name);
}

void ShardingConfig::validate() const {
    if (client_count == 0) throw std::invalid_argument("ShardingConfig: client_count must be >= 1");
    if (mean_points == 0) throw std::invalid_argument("ShardingConfig: mean_points must be >= 1");
    if (mode == ShardMode::non_iid && classes_per_client == 0) {
        throw std::invalid_argument("ShardingConfig: classes_per_client must be >= 1");
    }
}

std::vector<LabelledDataset> shard_dataset(const LabelledDataset& data,
                                           const ShardingConfig& cfg) {
    cfg.validate();
    if (cfg.mode == ShardMode::non_iid && cfg.classes_per_client > data.class_count) {
        throw std::invalid_argument("shard_dataset: classes_per_client " +
                                    std::to_string(cfg.classes_per_client) + " > class count " +
                                    std::to_string(data.class_count));
    }
    const double mean = static_cast<double>(cfg.mean_points);
    const double lo = std::max(100.0, 0.2 * mean);
    const double hi = 1.8 * mean;
    if (hi < lo) {
        throw std::invalid_argument("shard_dataset: mean_points " +
                                    std::to_string(cfg.mean_points) +
                                    " too small for the [max(100, 0.2m), 1.8m] size range");
    }
    Rng root(cfg.seed);

    Rng size_rng = root.fork("sizes");
    std::vector<std::size_t> sizes(cfg.client_count);
    for (std::size_t& s : sizes) {
        s = static_cast<std::size_t>(std::llround(size_rng.uniform(lo, hi)));
    }

    // Per-class index pools, shuffled once; every draw is without replacement.
    std::vector<std::vector<std::size_t>> pools(data.class_count);
    for (std::size_t i = 0; i < data.size(); ++i) {
        pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
    }
    for (std::size_t c = 0; c < pools.size(); ++c) {
        Rng pool_rng = root.fork("pool").fork(c);
        pool_rng.shuffle(pools[c]);
    }
    std::vector<std::size_t> cursor(data.class_count, 0);
    auto draw = [&](std::size_t cls, std::size_t count, std::vector<std::size_t>& out) {
        if (cursor[cls] + count > pools[cls].size()) {
            throw std::invalid_argument("shard_dataset: insufficient data for class " +
                                        std::to_string(cls) + ": need " + std::to_string(count) +
                                        " more, have " +
                                        std::to_string(pools[cls].size() - cursor[cls]));
        }
        for (std::size_t i = 0; i < count; ++i) out.push_back(pools[cls][cursor[cls]++]);
    };

    std::vector<LabelledDataset> shards;
    shards.reserve(cfg.client_count);

    if (cfg.mode == ShardMode::iid) {
        for (std::size_t i = 0; i < cfg.client_count; ++i) {
            const std::size_t s = sizes[i];
            // Largest-remainder allocation keeps each shard's class histogram
            // within one point of the global proportions.
            std::vector<std::size_t> take(data.class_count, 0);
            std::vector<std::pair<double, std::size_t>> fracs;
            std::size_t assigned = 0;
            for (std::size_t c = 0; c < data.class_count; ++c) {
                const double exact = static_cast<double>(s) * static_cast<double>(pools[c].size()) /
                                     static_cast<double>(data.size());
                take[c] = static_cast<std::size_t>(std::floor(exact));
                assigned += take[c];
                fracs.emplace_back(exact - std::floor(exact), c);
            }
            std::sort(fracs.begin(), fracs.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            for (std::size_t r = 0; assigned < s; ++r, ++assigned) {
                ++take[fracs[r % fracs.size()].second];
            }
            std::vector<std::size_t> rows;
            rows.reserve(s);
            for (std::size_t c = 0; c < data.class_count; ++c) draw(c, take[c], rows);
            shards.push_back(subset(data, rows));
        }
        return shards;
    }

    Rng class_rng = root.fork("classes");
    std::vector<std::size_t> all_classes(data.class_count);
    std::iota(all_classes.begin(), all_classes.end(), std::size_t{0});
    for (std::size_t i = 0; i < cfg.client_count; ++i) {
        Rng client_class_rng = class_rng.fork(i);
        std::vector<std::size_t> deck = all_classes;
        client_class_rng.shuffle(deck);
        deck.resize(cfg.classes_per_client);
        const std::size_t s = sizes[i];
        const std::size_t base = s / deck.size();
        const std::size_t rem = s % deck.size();
        std::vector<std::size_t> rows;
        rows.reserve(s);
        for (std::size_t j = 0; j < deck.size(); ++j) {
            draw(deck[j], base + (j < rem ? 1 : 0), rows);
        }
        shards.push_back(subset(data, rows));
    }
    return shards;
}

std::vector<double> aggregate_deltas(const std::vector<GeneratorDelta>& deltas,
                                     const std::vector<double>& weights) {
    if (deltas.empty()) throw std::invalid_argument("aggregate_deltas: no deltas");
    if (weights.size() != deltas.size()) {
        throw std::invalid_argument("aggregate_deltas: " + std::to_string(deltas.size()) +
                                    " deltas vs " + std::to_string(weights.size()) + " weights");
    }
    const std::size_t len = deltas.front().values.size();
    const std::size_t round = deltas.front().round;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (deltas[i].values.size() != len) {
            throw std::invalid_argument("aggregate_deltas: delta length mismatch at entry " +
                                        std::to_string(i));
        }
        if (deltas[i].round != round) {
            throw std::invalid_argument("aggregate_deltas: round mismatch at entry " +
                                        std::to_string(i));
        }
        if (weights[i] < 0.0) throw std::invalid_argument("aggregate_deltas: negative weight");
        weight_sum += weights[i];
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("aggregate_deltas: weights sum to " +
                                    std::to_string(weight_sum) + ", expected 1");
    }
    // Summation runs in client-id order so the result is independent of the
    // order the (delta, weight) pairs arrive in.
    std::vector<std::size_t> order(deltas.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (deltas[a].client_id != deltas[b].client_id) {
            return deltas[a].client_id < deltas[b].client_id;
        }
        return a < b;
    });
    std::vector<double> out(len, 0.0);
    for (std::size_t pos : order) {
        const double w = weights[pos];
        const std::vector<double>& v = deltas[pos].values;
        for (std::size_t j = 0; j < len; ++j) out[j] += w * v[j];
    }
    return out;
}

std::vector<std::vector<double>> masked_submissions(const std::vector<std::vector<double>>& deltas,
                                                    const Rng& rng) {
    if (deltas.size() < 2) {
        throw std::invalid_argument("masked_submissions: need at least 2 participants, got " +
                                    std::to_string(deltas.size()));
    }
    const std::size_t len = deltas.front().size();
    for (const auto& d : deltas) {
        if (d.size() != len) throw std::invalid_argument("masked_submissions: length mismatch");
    }
    std::vector<std::vector<double>> subs = deltas;
    const Rng pair_root = rng.fork("mask");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        for (std::size_t j = i + 1; j < deltas.size(); ++j) {
            Rng pair_rng = pair_root.fork(i).fork(j);
            for (std::size_t t = 0; t < len; ++t) {
                const double m = pair_rng.uniform(-1.0, 1.0);
                subs[i][t] += m;
                subs[j][t] -= m;
            }
        }
    }
    return subs;
}

std::vector<double> masked_sum(const std::vector<std::vector<double>>& deltas, const Rng& rng) {
    const std::vector<std::vector<double>> subs = masked_submissions(deltas, rng);
    std::vector<double> out(subs.front().size(), 0.0);
    for (const auto& s : subs) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += s[j];
    }
    return out;
}

LocalUpdateResult local_update(const GeneratorModel& global_gen, ClientState& client,
                               const GanHyper& hyper, std::size_t round) {
    hyper.validate();
    if (client.shard.size() == 0) {
        throw std::invalid_argument("local_update: client " + std::to_string(client.id) +
                                    " has an empty shard");
    }
    GeneratorModel local_gen = global_gen;
    const std::vector<double> global_flat = flatten_params(global_gen.params);

    // One epoch lets the critic see roughly one pass over the shard.
    const std::size_t critic_batches =
        (client.shard.size() + hyper.batch_size - 1) / hyper.batch_size;
    const std::size_t gen_steps = (critic_batches + hyper.critic_steps - 1) / hyper.critic_steps;

    double gap_sum = 0.0;
    std::size_t gap_count = 0;
    for (std::size_t epoch = 0; epoch < hyper.local_epochs; ++epoch) {
        for (std::size_t step = 0; step < gen_steps; ++step) {
            for (std::size_t c = 0; c < hyper.critic_steps; ++c) {
                const LabelledDataset batch =
                    sample_batch(client.shard, hyper.batch_size, client.rng);
                gap_sum += critic_step(client.critic, client.critic_opt, local_gen, batch, hyper,
                                       client.rng);
                ++gap_count;
            }
            generator_step(local_gen, client.gen_opt, client.critic, hyper, client.label_probs,
                           client.rng);
        }
    }

    LocalUpdateResult result;
    result.delta.client_id = client.id;
    result.delta.round = round;
    result.delta.values = flatten_params(local_gen.params);
    for (std::size_t i = 0; i < result.delta.values.size(); ++i) {
        result.delta.values[i] -= global_flat[i];
    }
    result.mean_critic_gap = gap_count == 0 ? 0.0 : gap_sum / static_cast<double>(gap_count);
    return result;
}

RoundStats run_round(ServerState& server, std::vector<ClientState>& clients,
                     const GanHyper& hyper) {
    const auto start = std::chrono::steady_clock::now();
    if (clients.empty()) throw std::invalid_argument("run_round: no clients");
    const std::size_t param_count = server.global_gen.params.parameter_count();

    std::vector<LocalUpdateResult> results;
    results.reserve(clients.size());
    for (ClientState& client : clients) {
        results.push_back(local_update(server.global_gen, client, hyper, server.round));
        if (results.back().delta.values.size() != param_count) {
            throw std::invalid_argument("run_round: delta length mismatch from client " +
                                        std::to_string(client.id));
        }
    }
    std::sort(results.begin(), results.end(), [](const LocalUpdateResult& a,
                                                 const LocalUpdateResult& b) {
        return a.delta.client_id < b.delta.client_id;
    });

    const std::size_t n = results.size();
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    if (server.weights == WeightPolicy::shard_size) {
        double total = 0.0;
        for (const ClientState& c : clients) total += static_cast<double>(c.shard.size());
        std::vector<double> by_id(n);
        for (const ClientState& c : clients) {
            // Results are sorted by client id; locate the matching slot.
            for (std::size_t i = 0; i < n; ++i) {
                if (results[i].delta.client_id == c.id) {
                    by_id[i] = static_cast<double>(c.shard.size()) / total;
                    break;
                }
            }
        }
        weights = std::move(by_id);
    }

    // The server only ever sees mask-protected submissions; scaling by n*w
    // first makes the masked sum divided by n equal the weighted average.
    std::vector<double> averaged(param_count, 0.0);
    if (n == 1) {
        averaged = results.front().delta.values;
    } else {
        std::vector<std::vector<double>> scaled(n);
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = results[i].delta.values;
            const double f = static_cast<double>(n) * weights[i];
            for (double& v : scaled[i]) v *= f;
        }
        averaged = masked_sum(scaled, server.mask_rng.fork(server.round));
        for (double& v : averaged) v /= static_cast<double>(n);
    }

    std::vector<double> flat = flatten_params(server.global_gen.params);
    for (std::size_t i = 0; i < param_count; ++i) flat[i] += averaged[i];
    MlpParams next = unflatten_params(flat, server.global_gen.params.shape());

    double gap_sum = 0.0;
    for (const LocalUpdateResult& r : results) gap_sum += r.mean_critic_gap;

    RoundStats stats;
    stats.round = server.round;
    stats.client_count = n;
    stats.mean_critic_gap = gap_sum / static_cast<double>(n);

    server.global_gen.params = std::move(next);
    server.round += 1;

    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return stats;
}

void FederationConfig::validate() const {
    if (noise_dim == 0) throw std::invalid_argument("FederationConfig: noise_dim must be >= 1");
    if (rounds == 0) throw std::invalid_argument("FederationConfig: rounds must be >= 1");
    for (std::size_t w : gen_hidden) {
        if (w == 0) throw std::invalid_argument("FederationConfig: zero-width generator layer");
    }
    for (std::size_t w : critic_hidden) {
        if (w == 0) throw std::invalid_argument("FederationConfig: zero-width critic layer");
    }
    hyper.validate();
}

GeneratorModel train_federated(const std::vector<LabelledDataset>& shards,
                               const FederationConfig& cfg,
                               const std::function<void(const RoundStats&)>& on_round) {
    cfg.validate();
    if (shards.empty()) throw std::invalid_argument("train_federated: no shards");
    const std::size_t dim = shards.front().dim();
    const std::size_t classes = shards.front().class_count;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        if (shards[i].size() == 0) {
            throw std::invalid_argument("train_federated: shard " + std::to_string(i) +
                                        " is empty");
        }
        if (shards[i].dim() != dim || shards[i].class_count != classes) {
            throw std::invalid_argument("train_federated: shard " + std::to_string(i) +
                                        " shape disagrees with shard 0");
        }
    }

    const Rng master(cfg.seed);
    Rng gen_rng = master.fork("generator-init");

    ServerState server;
    server.global_gen = make_generator(cfg.noise_dim, classes, dim, cfg.gen_hidden, gen_rng);
    server.weights = cfg.weights;
    server.mask_rng = master.fork("masks");

    const std::size_t gen_params = server.global_gen.params.parameter_count();
    std::vector<ClientState> clients(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) {
        Rng critic_rng = master.fork("critic-init").fork(i);
        clients[i].id = i;
        clients[i].shard = shards[i];
        clients[i].critic = make_critic(dim, classes, cfg.critic_hidden, cfg.hyper.clip_bound,
                                        critic_rng);
        clients[i].critic_opt = AdamState(clients[i].critic.params.parameter_count(),
                                          cfg.hyper.adam);
        clients[i].gen_opt = AdamState(gen_params, cfg.hyper.adam);
        clients[i].rng = master.fork("client").fork(i);
        clients[i].label_probs = label_frequencies(shards[i]);
    }

    for (std::size_t r = 0; r < cfg.rounds; ++r) {
        const RoundStats stats = run_round(server, clients, cfg.hyper);
        if (on_round) on_round(stats);
    }
    return server.global_gen;
}

}  // namespace fedsynth
