#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsynth/experiment.hpp"
#include "fedsynth/io.hpp"

namespace {

using namespace fedsynth;

std::string out_path(const std::string& out_dir, const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
}

std::string provenance_line(const ExperimentConfig& cfg) {
    return "# config=" + config_hash_hex(cfg) + " seed=" + std::to_string(cfg.seed) + "\n";
}

std::string stamp_comment(const ExperimentConfig& cfg, const std::string& extra) {
    std::string s = "config=" + config_hash_hex(cfg) + " seed=" + std::to_string(cfg.seed);
    if (!extra.empty()) {
        s += " " + extra;
    }
    return s;
}

nlohmann::json stamped(nlohmann::json j, const ExperimentConfig& cfg) {
    j["config_hash"] = config_hash_hex(cfg);
    j["master_seed"] = cfg.seed;
    return j;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

void write_config_dump(const ExperimentConfig& cfg, const std::string& out_dir) {
    write_json(out_path(out_dir, "config.json"), config_to_json(cfg));
}

/// All standalone subcommands derive data from the same node, so `train`,
/// `estimate-privacy`, and `attack` on one config see identical shards.
Rng cli_run(const ExperimentConfig& cfg) {
    return Rng(cfg.seed).fork("cli");
}

GeneratorModel load_model(const std::string& model_path, const std::string& out_dir) {
    const std::string path =
        model_path.empty() ? out_path(out_dir, "generator.json") : model_path;
    return generator_from_json(nlohmann::json::parse(read_text_file(path)));
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_dir) {
    const Rng run = cli_run(cfg);
    const PreparedData data =
        prepare_data(cfg, cfg.sharding.mode, cfg.sharding.mean_points, run);
    std::cout << "training on " << data.shards.size() << " client shard(s), "
              << data.pooled.size() << " points pooled\n";

    std::string telemetry = provenance_line(cfg);
    telemetry += "round,client_count,mean_critic_gap,seconds\n";
    const GeneratorModel gen =
        train_generator(cfg, data.shards, run, [&](const RoundStats& stats) {
            telemetry += std::to_string(stats.round);
            telemetry += ',' + std::to_string(stats.client_count);
            telemetry += ',' + format_double(stats.mean_critic_gap);
            telemetry += ',' + format_double(stats.seconds);
            telemetry += '\n';
            std::cout << "round " << stats.round << "/" << cfg.fed.rounds
                      << "  mean critic gap " << stats.mean_critic_gap << "\n";
        });

    std::filesystem::create_directories(out_dir);
    write_json(out_path(out_dir, "generator.json"), stamped(generator_to_json(gen), cfg));
    write_text_file(out_path(out_dir, "telemetry.csv"), telemetry);
    write_config_dump(cfg, out_dir);
    std::cout << "wrote " << out_path(out_dir, "generator.json") << "\n";
    return 0;
}

int cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& model_path, std::size_t count) {
    const GeneratorModel gen = load_model(model_path, out_dir);
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        labels[i] = static_cast<int>(i % gen.label_dim);
    }
    Rng rng = cli_run(cfg).fork("generate");
    const LabelledDataset artificial = generate(gen, labels, rng);
    std::filesystem::create_directories(out_dir);
    write_text_file(out_path(out_dir, "artificial.csv"),
                    dataset_to_csv(artificial, stamp_comment(cfg, "provenance=artificial")));
    std::cout << "wrote " << count << " samples to " << out_path(out_dir, "artificial.csv")
              << "\n";
    return 0;
}

int cmd_estimate_privacy(const ExperimentConfig& cfg, const std::string& out_dir,
                         const std::string& model_path) {
    const Rng run = cli_run(cfg);
    const PreparedData data =
        prepare_data(cfg, cfg.sharding.mode, cfg.sharding.mean_points, run);
    GeneratorModel gen;
    if (!cfg.oracle_generator) {
        gen = load_model(model_path, out_dir);
    }
    const LabelledDataset artificial =
        make_artificial(cfg, gen, data.pooled, run.fork("release"));

    StudentModel baseline;
    const bool need_student = cfg.metric == "student";
    if (need_student) {
        baseline = train_run_student(cfg, data.pooled, run);
    }
    const SimilarityMetric sim =
        resolve_metric(cfg, data.pooled.dim(), need_student ? &baseline : nullptr, run);

    RemovalConfig rcfg = cfg.removal;
    rcfg.seed = run.fork("dap").seed();
    const DapReport dap =
        dap_estimate(data.pooled, artificial, sim, rcfg, cfg.gamma, cfg.knn_k);

    std::filesystem::create_directories(out_dir);
    write_json(out_path(out_dir, "dap.json"),
               stamped(nlohmann::json::parse(dap_report_json(dap)), cfg));
    std::string csv = provenance_line(cfg);
    csv += dap_report_csv_header() + "\n" + dap_report_csv_line(dap) + "\n";
    write_text_file(out_path(out_dir, "dap.csv"), csv);
    write_config_dump(cfg, out_dir);
    std::cout << "DAP bound mu = " << dap.mu << " (gamma " << dap.gamma << ", "
              << dap.trials << " trials, metric " << dap.metric << ")\n";
    return 0;
}

void dump_reconstructions(const ExperimentConfig& cfg, const std::string& out_dir,
                          const std::string& student_name,
                          const std::vector<InversionResult>& inversions,
                          std::size_t class_count, std::size_t dim) {
    Tensor2 features(inversions.size(), dim);
    std::vector<int> labels(inversions.size());
    for (std::size_t i = 0; i < inversions.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            features.at(i, j) = inversions[i].reconstruction[j];
        }
        labels[i] = inversions[i].target_class;
    }
    const LabelledDataset recon =
        make_dataset(std::move(features), std::move(labels), class_count,
                     Provenance::artificial);
    write_text_file(
        out_path(out_dir, "recon_" + student_name + ".csv"),
        dataset_to_csv(recon, stamp_comment(cfg, "student=" + student_name)));

    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
    if (side * side != dim) {
        return;
    }
    for (std::size_t c = 0; c < class_count; ++c) {
        const InversionResult* best = nullptr;
        double best_obj = 0.0;
        for (const auto& inv : inversions) {
            if (static_cast<std::size_t>(inv.target_class) != c) {
                continue;
            }
            const double obj = *std::max_element(inv.objective_trajectory.begin(),
                                                 inv.objective_trajectory.end());
            if (best == nullptr || obj > best_obj) {
                best = &inv;
                best_obj = obj;
            }
        }
        if (best != nullptr) {
            const std::string name =
                "recon_" + student_name + "_c" + std::to_string(c) + ".pgm";
            write_pgm(out_path(out_dir, name), side, side, best->reconstruction,
                      stamp_comment(cfg, "student=" + student_name +
                                             " class=" + std::to_string(c)));
        }
    }
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& model_path) {
    const Rng run = cli_run(cfg);
    const PreparedData data =
        prepare_data(cfg, cfg.sharding.mode, cfg.sharding.mean_points, run);
    GeneratorModel gen;
    if (!cfg.oracle_generator) {
        gen = load_model(model_path, out_dir);
    }
    const LabelledDataset artificial =
        make_artificial(cfg, gen, data.pooled, run.fork("release"));

    const StudentModel baseline = train_run_student(cfg, data.pooled, run);
    const SimilarityMetric sim = resolve_metric(cfg, data.pooled.dim(), &baseline, run);
    const AttackArtifacts attack =
        run_attack(cfg, baseline, data.pooled, artificial, sim, run);

    std::filesystem::create_directories(out_dir);
    nlohmann::json aj = stamped(nlohmann::json::object(), cfg);
    aj["tau"] = attack.tau;
    aj["metric"] = metric_name(sim);
    aj["baseline"] = nlohmann::json::parse(reconstruction_report_json(attack.baseline));
    aj["fedgp"] = nlohmann::json::parse(reconstruction_report_json(attack.fedgp));
    aj["detection_gap"] = attack.baseline.detection_rate - attack.fedgp.detection_rate;
    aj["recognition_gap"] = attack.baseline.recognition_rate - attack.fedgp.recognition_rate;
    write_json(out_path(out_dir, "attack.json"), aj);

    dump_reconstructions(cfg, out_dir, "baseline", attack.baseline_inversions,
                         baseline.class_count, data.pooled.dim());
    dump_reconstructions(cfg, out_dir, "fedgp", attack.fedgp_inversions,
                         baseline.class_count, data.pooled.dim());
    write_config_dump(cfg, out_dir);

    std::cout << "tau " << attack.tau << " (baseline detection target "
              << cfg.attack.detection_target << ")\n";
    std::cout << "baseline: detection " << attack.baseline.detection_rate << ", recognition "
              << attack.baseline.recognition_rate << "\n";
    std::cout << "fedgp:    detection " << attack.fedgp.detection_rate << ", recognition "
              << attack.fedgp.recognition_rate << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& out_dir,
                 const std::string& model_path) {
    const Rng run = cli_run(cfg);
    const PreparedData data =
        prepare_data(cfg, cfg.sharding.mode, cfg.sharding.mean_points, run);

    std::string csv = provenance_line(cfg);
    csv += "student,train_points,accuracy\n";

    const StudentModel baseline = train_run_student(cfg, data.pooled, run);
    const double base_acc = evaluate_accuracy(baseline, data.test);
    csv += "baseline," + std::to_string(data.pooled.size()) + ',' + format_double(base_acc) +
           "\n";
    std::cout << "baseline accuracy " << base_acc << "\n";

    if (!model_path.empty() || cfg.oracle_generator) {
        GeneratorModel gen;
        if (!cfg.oracle_generator) {
            gen = load_model(model_path, out_dir);
        }
        const LabelledDataset artificial =
            make_artificial(cfg, gen, data.pooled, run.fork("release"));
        const StudentModel fed = train_run_student(cfg, artificial, run);
        const double fed_acc = evaluate_accuracy(fed, data.test);
        csv += "fedgp," + std::to_string(artificial.size()) + ',' + format_double(fed_acc) +
               "\n";
        std::cout << "fedgp accuracy    " << fed_acc << "\n";
    }

    std::filesystem::create_directories(out_dir);
    write_text_file(out_path(out_dir, "evaluate.csv"), csv);
    write_config_dump(cfg, out_dir);
    return 0;
}

int cmd_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                   const std::string& pipeline) {
    if (pipeline == "learning" || pipeline == "both") {
        const LearningReport report = run_learning_experiment(cfg);
        write_output_files(report.files, out_dir);
        for (const auto& row : report.rows) {
            std::cout << "learning " << shard_mode_name(row.mode) << " seed " << row.seed
                      << ": baseline " << row.baseline_acc;
            if (row.centgp_present) {
                std::cout << ", centgp " << row.centgp_acc;
            }
            std::cout << ", fedgp " << row.fedgp_acc << "\n";
        }
    }
    if (pipeline == "privacy" || pipeline == "both") {
        const PrivacyReport report = run_privacy_experiment(cfg);
        write_output_files(report.files, out_dir);
        for (const auto& run : report.dap_runs) {
            std::cout << "privacy mean " << run.mean_points << " seed " << run.seed
                      << ": mu " << run.dap.mu << "\n";
        }
        for (const auto& atk : report.attack_runs) {
            std::cout << "attack seed " << atk.seed << ": detection "
                      << atk.baseline.detection_rate << " -> " << atk.fedgp.detection_rate
                      << ", recognition " << atk.baseline.recognition_rate << " -> "
                      << atk.fedgp.recognition_rate << "\n";
        }
    }
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated GAN private data release workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string model_path;
    std::uint64_t seed = 0;
    std::size_t count = 1000;
    std::string pipeline = "both";

    app.add_option("--config", config_path, "JSON config path (defaults when omitted)");
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    app.add_option("--out", out_dir, "output directory (default: out)");
    app.add_option("--model", model_path, "generator JSON (default: <out>/generator.json)");

    auto* train_cmd = app.add_subcommand("train", "train the federated (or centralized) GAN");
    auto* generate_cmd =
        app.add_subcommand("generate", "sample an artificial dataset to CSV");
    generate_cmd->add_option("--count", count, "samples to draw (default: 1000)")
        ->check(CLI::PositiveNumber);
    auto* privacy_cmd =
        app.add_subcommand("estimate-privacy", "differential average-leakage bound");
    auto* attack_cmd =
        app.add_subcommand("attack", "model-inversion attack on baseline and fedgp students");
    auto* evaluate_cmd =
        app.add_subcommand("evaluate", "student accuracy on the held-out test split");
    auto* experiment_cmd = app.add_subcommand("experiment", "full experiment pipelines");
    experiment_cmd
        ->add_option("--pipeline", pipeline, "learning | privacy | both (default: both)")
        ->check(CLI::IsMember({"learning", "privacy", "both"}));

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = config_path.empty()
                                   ? fedsynth::default_config()
                                   : fedsynth::config_from_json_text(
                                         fedsynth::read_text_file(config_path));
        if (seed_opt->count() > 0) {
            cfg.seed = seed;
        }
        cfg.validate();

        if (train_cmd->parsed()) {
            return cmd_train(cfg, out_dir);
        }
        if (generate_cmd->parsed()) {
            return cmd_generate(cfg, out_dir, model_path, count);
        }
        if (privacy_cmd->parsed()) {
            return cmd_estimate_privacy(cfg, out_dir, model_path);
        }
        if (attack_cmd->parsed()) {
            return cmd_attack(cfg, out_dir, model_path);
        }
        if (evaluate_cmd->parsed()) {
            return cmd_evaluate(cfg, out_dir, model_path);
        }
        if (experiment_cmd->parsed()) {
            return cmd_experiment(cfg, out_dir, pipeline);
        }
        std::cerr << "no subcommand selected\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
