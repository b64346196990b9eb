#include "fedsynth/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "fedsynth/idx.hpp"
#include "fedsynth/io.hpp"

namespace fedsynth {

namespace {

std::string provenance_line(const ExperimentConfig& cfg) {
    return "# config=" + config_hash_hex(cfg) + " seed=" + std::to_string(cfg.seed) + "\n";
}

nlohmann::json stamped(nlohmann::json j, const ExperimentConfig& cfg, std::uint64_t run_seed) {
    j["config_hash"] = config_hash_hex(cfg);
    j["master_seed"] = cfg.seed;
    j["run_seed"] = run_seed;
    return j;
}

std::string json_file(const nlohmann::json& j) {
    return j.dump(2) + "\n";
}

LabelledDataset pool_shards(const std::vector<LabelledDataset>& shards) {
    LabelledDataset pooled = shards.front();
    for (std::size_t i = 1; i < shards.size(); ++i) {
        pooled = concat(pooled, shards[i]);
    }
    return pooled;
}

/// Smallest value v in `sorted` such that fraction `target` of entries are <= v.
double lower_quantile(std::vector<double> values, double target) {
    std::sort(values.begin(), values.end());
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(target * static_cast<double>(values.size())));
    idx = std::clamp<std::size_t>(idx, 1, values.size());
    return values[idx - 1];
}

std::vector<InversionResult> run_inversions(const ExperimentConfig& cfg,
                                            const StudentModel& student) {
    std::vector<InversionResult> results;
    results.reserve(cfg.attack.step_sizes.size() * student.class_count);
    for (double step_size : cfg.attack.step_sizes) {
        for (std::size_t c = 0; c < student.class_count; ++c) {
            results.push_back(
                invert_class(student, static_cast<int>(c), cfg.attack.steps, step_size));
        }
    }
    return results;
}

}  // namespace

void write_output_files(const OutputFiles& files, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (const auto& [name, content] : files) {
        write_text_file((std::filesystem::path(out_dir) / name).string(), content);
    }
}

std::size_t required_points_per_class(const ExperimentConfig& cfg, std::size_t mean_points) {
    const double need = 2.0 * static_cast<double>(cfg.sharding.client_count) *
                        static_cast<double>(mean_points) /
                        (static_cast<double>(cfg.dataset.mixture.class_count) *
                         (1.0 - cfg.plan.test_fraction));
    return std::max(cfg.dataset.mixture.points_per_class,
                    static_cast<std::size_t>(std::ceil(need)));
}

PreparedData prepare_data(const ExperimentConfig& cfg, ShardMode mode, std::size_t mean_points,
                          const Rng& run) {
    PreparedData out;
    LabelledDataset full;
    if (cfg.dataset.kind == "mixture") {
        MixtureSpec spec = cfg.dataset.mixture;
        spec.points_per_class = required_points_per_class(cfg, mean_points);
        Rng data_rng = run.fork("data");
        MixtureResult mix = gen_mixture_dataset(spec, data_rng);
        full = std::move(mix.data);
        out.map = mix.map;
        out.raw_means = std::move(mix.raw_means);
    } else {
        full = load_idx_images(cfg.dataset.idx_images, cfg.dataset.idx_labels,
                               cfg.dataset.idx_downscale);
    }
    Rng split_rng = run.fork("split");
    TrainTestSplit split = train_test_split(full, cfg.plan.test_fraction, split_rng);
    ShardingConfig scfg = cfg.sharding;
    scfg.mode = mode;
    scfg.mean_points = mean_points;
    scfg.seed = run.fork("shard").seed();
    out.shards = shard_dataset(split.train, scfg);
    out.pooled = pool_shards(out.shards);
    out.train = std::move(split.train);
    out.test = std::move(split.test);
    return out;
}

GeneratorModel train_generator(const ExperimentConfig& cfg,
                               const std::vector<LabelledDataset>& shards, const Rng& run,
                               const std::function<void(const RoundStats&)>& on_round) {
    FederationConfig fcfg = cfg.fed;
    fcfg.seed = run.fork("fed").seed();
    return train_federated(shards, fcfg, on_round);
}

LabelledDataset make_artificial(const ExperimentConfig& cfg, const GeneratorModel& gen,
                                const LabelledDataset& pooled, const Rng& run) {
    if (pooled.size() == 0) {
        throw std::invalid_argument("cannot release artificial data for an empty pool");
    }
    if (cfg.oracle_generator) {
        return make_dataset(pooled.features, pooled.labels, pooled.class_count,
                            Provenance::artificial);
    }
    const auto target = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(cfg.artificial_per_real * static_cast<double>(pooled.size()))));
    std::vector<int> labels;
    labels.reserve(target);
    for (std::size_t i = 0; i < target; ++i) {
        labels.push_back(pooled.labels[i % pooled.size()]);
    }
    Rng sample_rng = run.fork("sample");
    return generate(gen, labels, sample_rng);
}

SimilarityMetric resolve_metric(const ExperimentConfig& cfg, std::size_t data_dim,
                                const StudentModel* baseline, const Rng& run) {
    const std::uint64_t metric_seed = run.fork("metric").seed();
    if (cfg.metric == "auto") {
        return auto_metric(data_dim, metric_seed);
    }
    if (cfg.metric == "raw") {
        return SimilarityMetric{};
    }
    if (cfg.metric == "projection") {
        SimilarityMetric sim;
        sim.kind = MetricKind::random_projection;
        sim.projection_seed = metric_seed;
        return sim;
    }
    if (cfg.metric == "student") {
        if (baseline == nullptr) {
            throw std::logic_error("student metric requires a trained baseline student");
        }
        if (baseline->params.layer_count() < 2) {
            throw std::invalid_argument("student metric needs at least one hidden layer");
        }
        SimilarityMetric sim;
        sim.kind = MetricKind::mlp_embedding;
        sim.embed_params = baseline->params;
        sim.embed_layer_count = baseline->params.layer_count() - 1;
        return sim;
    }
    throw std::invalid_argument("unknown metric '" + cfg.metric + "'");
}

StudentModel train_run_student(const ExperimentConfig& cfg, const LabelledDataset& data,
                               const Rng& run) {
    Rng rng = run.fork("student");
    return train_student(data, cfg.student.arch, cfg.student.hyper, rng);
}

AttackArtifacts run_attack(const ExperimentConfig& cfg, const StudentModel& baseline,
                           const LabelledDataset& pooled, const LabelledDataset& artificial,
                           const SimilarityMetric& sim, const Rng& run) {
    AttackArtifacts out;
    out.fedgp_student = train_run_student(cfg, artificial, run);
    out.baseline_inversions = run_inversions(cfg, baseline);
    out.fedgp_inversions = run_inversions(cfg, out.fedgp_student);

    const ReconstructionReport probe =
        reconstruction_report(out.baseline_inversions, pooled, sim, 0.0, 0.0);
    out.tau = lower_quantile(probe.nearest_mean_distance, cfg.attack.detection_target);

    out.baseline = reconstruction_report(out.baseline_inversions, pooled, sim, out.tau, out.tau);
    out.fedgp = reconstruction_report(out.fedgp_inversions, pooled, sim, out.tau, out.tau);
    return out;
}

LearningReport run_learning_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    LearningReport report;
    Rng root(cfg.seed);

    std::string csv = provenance_line(cfg);
    csv += "setting,mode,mean_points,baseline_acc,centgp_acc,fedgp_acc,seed\n";

    for (const std::string& mode_name : cfg.plan.modes) {
        const ShardMode mode = shard_mode_from_name(mode_name);
        for (std::uint64_t seed : cfg.plan.seeds) {
            const Rng run = root.fork("learning").fork(mode_name).fork(seed);
            const PreparedData data = prepare_data(cfg, mode, cfg.sharding.mean_points, run);

            const StudentModel baseline = train_run_student(cfg, data.pooled, run);

            GeneratorModel fed_gen;
            if (!cfg.oracle_generator) {
                fed_gen = train_generator(cfg, data.shards, run);
            }
            const LabelledDataset fed_art =
                make_artificial(cfg, fed_gen, data.pooled, run.fork("release-fed"));
            const StudentModel fed_student = train_run_student(cfg, fed_art, run);

            LearningRow row;
            row.setting = cfg.name;
            row.mode = mode;
            row.mean_points = cfg.sharding.mean_points;
            row.baseline_acc = evaluate_accuracy(baseline, data.test);
            row.fedgp_acc = evaluate_accuracy(fed_student, data.test);
            row.seed = seed;
            row.centgp_present = (mode == ShardMode::iid);
            if (row.centgp_present) {
                GeneratorModel cent_gen;
                if (!cfg.oracle_generator) {
                    FederationConfig ccfg = cfg.fed;
                    ccfg.seed = run.fork("cent").seed();
                    cent_gen = train_federated({data.pooled}, ccfg);
                }
                const LabelledDataset cent_art =
                    make_artificial(cfg, cent_gen, data.pooled, run.fork("release-cent"));
                const StudentModel cent_student = train_run_student(cfg, cent_art, run);
                row.centgp_acc = evaluate_accuracy(cent_student, data.test);
            }
            report.rows.push_back(row);

            csv += row.setting;
            csv += ',' + shard_mode_name(row.mode);
            csv += ',' + std::to_string(row.mean_points);
            csv += ',' + format_double(row.baseline_acc);
            csv += ',';
            if (row.centgp_present) {
                csv += format_double(row.centgp_acc);
            }
            csv += ',' + format_double(row.fedgp_acc);
            csv += ',' + std::to_string(row.seed);
            csv += '\n';
        }
    }

    report.files.emplace_back("config.json", json_file(config_to_json(cfg)));
    report.files.emplace_back("learning.csv", csv);
    return report;
}

PrivacyReport run_privacy_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    PrivacyReport report;
    Rng root(cfg.seed);

    std::string dap_csv = provenance_line(cfg);
    dap_csv += "mean_points,seed," + dap_report_csv_header() + "\n";
    std::string attack_csv = provenance_line(cfg);
    attack_csv += "seed,student,tau,detection_rate,recognition_rate\n";

    OutputFiles dap_files;
    OutputFiles attack_files;

    for (std::size_t mean_points : cfg.plan.mean_points) {
        const bool attacks_here = (mean_points == cfg.plan.mean_points.front());
        for (std::uint64_t seed : cfg.plan.seeds) {
            const Rng run = root.fork("privacy").fork(mean_points).fork(seed);
            const PreparedData data = prepare_data(cfg, ShardMode::iid, mean_points, run);

            GeneratorModel gen;
            if (!cfg.oracle_generator) {
                gen = train_generator(cfg, data.shards, run);
            }
            const LabelledDataset artificial =
                make_artificial(cfg, gen, data.pooled, run.fork("release"));

            const bool need_students = attacks_here || cfg.metric == "student";
            StudentModel baseline;
            if (need_students) {
                baseline = train_run_student(cfg, data.pooled, run);
            }
            const SimilarityMetric sim =
                resolve_metric(cfg, data.pooled.dim(), need_students ? &baseline : nullptr, run);

            RemovalConfig rcfg = cfg.removal;
            rcfg.seed = run.fork("dap").seed();
            DapReport dap = dap_estimate(data.pooled, artificial, sim, rcfg, cfg.gamma, cfg.knn_k);

            nlohmann::json dj = stamped(nlohmann::json::parse(dap_report_json(dap)), cfg, seed);
            dj["mean_points"] = mean_points;
            dap_files.emplace_back("dap_mean" + std::to_string(mean_points) + "_seed" +
                                       std::to_string(seed) + ".json",
                                   json_file(dj));
            dap_csv += std::to_string(mean_points);
            dap_csv += ',' + std::to_string(seed);
            dap_csv += ',' + dap_report_csv_line(dap) + "\n";
            report.dap_runs.push_back(PrivacyRun{mean_points, seed, std::move(dap)});

            if (attacks_here) {
                const AttackArtifacts attack =
                    run_attack(cfg, baseline, data.pooled, artificial, sim, run);

                nlohmann::json aj = stamped(nlohmann::json::object(), cfg, seed);
                aj["mean_points"] = mean_points;
                aj["tau"] = attack.tau;
                aj["metric"] = metric_name(sim);
                aj["baseline"] = nlohmann::json::parse(reconstruction_report_json(attack.baseline));
                aj["fedgp"] = nlohmann::json::parse(reconstruction_report_json(attack.fedgp));
                aj["detection_gap"] =
                    attack.baseline.detection_rate - attack.fedgp.detection_rate;
                aj["recognition_gap"] =
                    attack.baseline.recognition_rate - attack.fedgp.recognition_rate;
                attack_files.emplace_back("attack_seed" + std::to_string(seed) + ".json",
                                          json_file(aj));

                const auto append_row = [&](const std::string& name,
                                            const ReconstructionReport& rep) {
                    attack_csv += std::to_string(seed);
                    attack_csv += ',' + name;
                    attack_csv += ',' + format_double(attack.tau);
                    attack_csv += ',' + format_double(rep.detection_rate);
                    attack_csv += ',' + format_double(rep.recognition_rate);
                    attack_csv += '\n';
                };
                append_row("baseline", attack.baseline);
                append_row("fedgp", attack.fedgp);

                report.attack_runs.push_back(
                    AttackRun{seed, attack.tau, attack.baseline, attack.fedgp});
            }
        }
    }

    report.files.emplace_back("config.json", json_file(config_to_json(cfg)));
    for (auto& f : dap_files) {
        report.files.push_back(std::move(f));
    }
    report.files.emplace_back("dap_summary.csv", dap_csv);
    for (auto& f : attack_files) {
        report.files.push_back(std::move(f));
    }
    report.files.emplace_back("attack_summary.csv", attack_csv);
    return report;
}

}  // namespace fedsynth
