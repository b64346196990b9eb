#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsynth/experiment.hpp"
#include "fedsynth/io.hpp"

using namespace fedsynth;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.seed = 1;
    cfg.dataset.mixture.class_count = 2;
    cfg.dataset.mixture.dim = 4;
    cfg.dataset.mixture.points_per_class = 50;
    cfg.dataset.mixture.image_like = false;
    cfg.sharding.client_count = 2;
    cfg.sharding.mean_points = 120;
    cfg.fed.noise_dim = 4;
    cfg.fed.gen_hidden = {8};
    cfg.fed.critic_hidden = {8};
    cfg.fed.rounds = 1;
    cfg.fed.hyper.batch_size = 16;
    cfg.fed.hyper.critic_steps = 2;
    cfg.removal.trials = 8;
    cfg.gamma = 0.05;
    cfg.knn_k = 2;
    cfg.student.arch.hidden = {16};
    cfg.student.hyper.epochs = 2;
    cfg.student.hyper.batch_size = 16;
    cfg.student.hyper.adam.step_size = 1e-2;
    cfg.student.hyper.adam.beta1 = 0.9;
    cfg.attack.steps = 5;
    cfg.attack.step_sizes = {0.05, 0.1};
    cfg.attack.detection_target = 0.25;
    cfg.plan.seeds = {1};
    cfg.plan.modes = {"iid"};
    cfg.plan.mean_points = {120};
    cfg.plan.test_fraction = 0.2;
    cfg.validate();
    return cfg;
}

std::multiset<std::string> feature_keys(const LabelledDataset& data) {
    std::multiset<std::string> keys;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::string key;
        for (double v : data.features.row(i)) key += format_double(v) + "|";
        keys.insert(key);
    }
    return keys;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        lines.push_back(text.substr(start, end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t end = line.find(',', start);
        fields.push_back(line.substr(start, end - start));
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return fields;
}

const std::string* find_file(const OutputFiles& files, const std::string& name) {
    for (const auto& [n, content] : files) {
        if (n == name) return &content;
    }
    return nullptr;
}

}  // namespace

TEST_CASE("required_points_per_class grows with the sharding demand") {
    ExperimentConfig cfg = tiny_config();
    // 2 clients * 120 mean * 2 / (2 classes * 0.8 train fraction) = 300
    CHECK(required_points_per_class(cfg, 120) == 300);
    CHECK(required_points_per_class(cfg, 150) == 375);
    cfg.dataset.mixture.points_per_class = 5000;
    CHECK(required_points_per_class(cfg, 120) == 5000);
}

TEST_CASE("prepare_data splits, shards, and pools deterministically") {
    const ExperimentConfig cfg = tiny_config();
    const Rng run = Rng(3).fork("run");
    const PreparedData data = prepare_data(cfg, ShardMode::iid, 120, run);

    CHECK(data.train.size() == 480);
    CHECK(data.test.size() == 120);
    CHECK(data.shards.size() == 2);
    CHECK(data.raw_means.rows() == 2);

    SUBCASE("train and test are disjoint") {
        const std::multiset<std::string> train_keys = feature_keys(data.train);
        for (const std::string& k : feature_keys(data.test)) {
            CHECK(train_keys.count(k) == 0);
        }
    }

    SUBCASE("pooled is exactly the concatenated shards") {
        std::size_t total = 0;
        std::multiset<std::string> shard_keys;
        for (const LabelledDataset& s : data.shards) {
            total += s.size();
            for (const std::string& k : feature_keys(s)) shard_keys.insert(k);
        }
        CHECK(data.pooled.size() == total);
        CHECK(feature_keys(data.pooled) == shard_keys);

        const std::multiset<std::string> train_keys = feature_keys(data.train);
        for (const std::string& k : shard_keys) {
            CHECK(train_keys.count(k) >= 1);
        }
    }

    SUBCASE("identical run streams reproduce the draw bitwise") {
        const PreparedData again = prepare_data(cfg, ShardMode::iid, 120, run);
        CHECK(again.train.features == data.train.features);
        CHECK(again.test.features == data.test.features);
        CHECK(again.pooled.features == data.pooled.features);
    }

    SUBCASE("mode override reaches the sharder") {
        ExperimentConfig narrow = cfg;
        narrow.sharding.classes_per_client = 1;
        const PreparedData non_iid = prepare_data(narrow, ShardMode::non_iid, 120, run);
        for (const LabelledDataset& shard : non_iid.shards) {
            const std::set<int> distinct(shard.labels.begin(), shard.labels.end());
            CHECK(distinct.size() == 1);
        }
    }
}

TEST_CASE("make_artificial releases the right count and labels") {
    const ExperimentConfig cfg = tiny_config();
    const Rng run = Rng(5).fork("run");
    const PreparedData data = prepare_data(cfg, ShardMode::iid, 120, run);
    Rng gen_rng(7);
    const GeneratorModel gen = make_generator(cfg.fed.noise_dim, 2, 4, {8}, gen_rng);

    SUBCASE("oracle generator returns the pool itself, relabelled") {
        ExperimentConfig oracle = cfg;
        oracle.oracle_generator = true;
        const LabelledDataset art = make_artificial(oracle, gen, data.pooled, run.fork("r"));
        CHECK(art.features == data.pooled.features);
        CHECK(art.labels == data.pooled.labels);
        CHECK(art.provenance == Provenance::artificial);
    }

    SUBCASE("ratio rounds and labels cycle the pooled multiset") {
        ExperimentConfig half = cfg;
        half.artificial_per_real = 0.5;
        const LabelledDataset art = make_artificial(half, gen, data.pooled, run.fork("r"));
        const auto want =
            static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(data.pooled.size())));
        REQUIRE(art.size() == want);
        CHECK(art.provenance == Provenance::artificial);
        for (std::size_t i = 0; i < want; ++i) {
            CHECK(art.labels[i] == data.pooled.labels[i % data.pooled.size()]);
        }

        ExperimentConfig more = cfg;
        more.artificial_per_real = 1.5;
        const LabelledDataset art2 = make_artificial(more, gen, data.pooled, run.fork("r"));
        CHECK(art2.size() == static_cast<std::size_t>(std::llround(
                                 1.5 * static_cast<double>(data.pooled.size()))));
        CHECK(art2.labels[data.pooled.size()] == data.pooled.labels[0]);
    }

    SUBCASE("same release stream reproduces the same draw") {
        const LabelledDataset a = make_artificial(cfg, gen, data.pooled, run.fork("r"));
        const LabelledDataset b = make_artificial(cfg, gen, data.pooled, run.fork("r"));
        CHECK(a.features == b.features);
    }

    SUBCASE("empty pool is rejected") {
        const LabelledDataset none{Tensor2(0, 4), {}, 2, Provenance::real};
        CHECK_THROWS_AS(make_artificial(cfg, gen, none, run.fork("r")), std::invalid_argument);
    }
}

TEST_CASE("resolve_metric honors the configured kind") {
    ExperimentConfig cfg = tiny_config();
    const Rng run = Rng(9).fork("run");

    SUBCASE("auto picks raw in low dimension and projection in high") {
        CHECK(resolve_metric(cfg, 4, nullptr, run).kind == MetricKind::euclidean_raw);
        const SimilarityMetric high = resolve_metric(cfg, 64, nullptr, run);
        CHECK(high.kind == MetricKind::random_projection);
        CHECK(high.projection_dim == 32);
        const SimilarityMetric again = resolve_metric(cfg, 64, nullptr, run);
        CHECK(again.projection_seed == high.projection_seed);
    }

    SUBCASE("explicit raw and projection") {
        cfg.metric = "raw";
        CHECK(resolve_metric(cfg, 64, nullptr, run).kind == MetricKind::euclidean_raw);
        cfg.metric = "projection";
        const SimilarityMetric sim = resolve_metric(cfg, 4, nullptr, run);
        CHECK(sim.kind == MetricKind::random_projection);
    }

    SUBCASE("student metric embeds with the hidden stack") {
        cfg.metric = "student";
        CHECK_THROWS_AS(resolve_metric(cfg, 4, nullptr, run), std::logic_error);

        const PreparedData data = prepare_data(cfg, ShardMode::iid, 120, run);
        const StudentModel baseline = train_run_student(cfg, data.pooled, run);
        const SimilarityMetric sim = resolve_metric(cfg, 4, &baseline, run);
        CHECK(sim.kind == MetricKind::mlp_embedding);
        CHECK(sim.embed_layer_count == baseline.params.layer_count() - 1);
        CHECK(sim.embed_params == baseline.params);

        StudentModel shallow = baseline;
        shallow.params = MlpParams(std::vector<MlpLayer>{baseline.params.layers().back()});
        CHECK_THROWS_AS(resolve_metric(cfg, 4, &shallow, run), std::invalid_argument);
    }

    SUBCASE("unknown names fail") {
        cfg.metric = "cosine";
        CHECK_THROWS_AS(resolve_metric(cfg, 4, nullptr, run), std::invalid_argument);
    }
}

TEST_CASE("learning pipeline: oracle release makes every student identical") {
    ExperimentConfig cfg = tiny_config();
    cfg.oracle_generator = true;
    cfg.plan.modes = {"iid", "non_iid"};
    cfg.plan.seeds = {1, 2};

    const LearningReport report = run_learning_experiment(cfg);
    REQUIRE(report.rows.size() == 4);

    for (const LearningRow& row : report.rows) {
        CHECK(row.setting == "tiny");
        CHECK(row.mean_points == 120);
        CHECK(row.fedgp_acc == row.baseline_acc);  // exact: same data, same stream
        CHECK(row.centgp_present == (row.mode == ShardMode::iid));
        if (row.centgp_present) {
            CHECK(row.centgp_acc == row.baseline_acc);
        }
    }
    CHECK(report.rows[0].mode == ShardMode::iid);
    CHECK(report.rows[0].seed == 1);
    CHECK(report.rows[1].seed == 2);
    CHECK(report.rows[2].mode == ShardMode::non_iid);
    CHECK(report.rows[3].seed == 2);

    REQUIRE(report.files.size() == 2);
    const std::string* config_file = find_file(report.files, "config.json");
    REQUIRE(config_file != nullptr);
    CHECK(nlohmann::json::parse(*config_file) == config_to_json(cfg));

    const std::string* csv = find_file(report.files, "learning.csv");
    REQUIRE(csv != nullptr);
    const std::vector<std::string> lines = split_lines(*csv);
    REQUIRE(lines.size() == 6);
    CHECK(lines[0] == "# config=" + config_hash_hex(cfg) + " seed=1");
    CHECK(lines[1] == "setting,mode,mean_points,baseline_acc,centgp_acc,fedgp_acc,seed");
    const std::vector<std::string> iid_row = split_fields(lines[2]);
    REQUIRE(iid_row.size() == 7);
    CHECK(iid_row[1] == "iid");
    CHECK(iid_row[3] == format_double(report.rows[0].baseline_acc));
    CHECK(iid_row[4] == format_double(report.rows[0].centgp_acc));
    const std::vector<std::string> non_iid_row = split_fields(lines[4]);
    REQUIRE(non_iid_row.size() == 7);
    CHECK(non_iid_row[1] == "non_iid");
    CHECK(non_iid_row[4] == "");  // no centralized release outside iid
    CHECK(non_iid_row[5] == format_double(report.rows[2].fedgp_acc));
}

TEST_CASE("learning pipeline: a real one-round GAN run completes") {
    ExperimentConfig cfg = tiny_config();
    const LearningReport report = run_learning_experiment(cfg);
    REQUIRE(report.rows.size() == 1);
    const LearningRow& row = report.rows[0];
    for (double acc : {row.baseline_acc, row.centgp_acc, row.fedgp_acc}) {
        CHECK(acc >= 0.0);
        CHECK(acc <= 1.0);
    }
    CHECK(row.centgp_present);
}

TEST_CASE("privacy pipeline: run shape, stamps, and tau calibration") {
    ExperimentConfig cfg = tiny_config();
    cfg.oracle_generator = true;  // keeps this test about the harness, not the GAN
    cfg.plan.seeds = {1, 2};
    cfg.plan.mean_points = {120, 150};

    const PrivacyReport report = run_privacy_experiment(cfg);

    SUBCASE("dap runs cover mean_points x seeds; attacks only the first entry") {
        REQUIRE(report.dap_runs.size() == 4);
        CHECK(report.dap_runs[0].mean_points == 120);
        CHECK(report.dap_runs[0].seed == 1);
        CHECK(report.dap_runs[1].seed == 2);
        CHECK(report.dap_runs[2].mean_points == 150);
        CHECK(report.dap_runs[3].seed == 2);
        for (const PrivacyRun& run : report.dap_runs) {
            CHECK(std::isfinite(run.dap.mu));
            CHECK(run.dap.trials == cfg.removal.trials);
            CHECK(run.dap.knn_k == cfg.knn_k);
        }
        REQUIRE(report.attack_runs.size() == 2);
        CHECK(report.attack_runs[0].seed == 1);
        CHECK(report.attack_runs[1].seed == 2);
    }

    SUBCASE("tau hits the detection target exactly, and oracle releases tie") {
        // 2 step sizes x 2 classes = 4 inversions; the 0.25 quantile is the
        // smallest distance, so baseline detection is exactly 1/4.
        for (const AttackRun& run : report.attack_runs) {
            CHECK(run.baseline.detection_rate == 0.25);
            CHECK(run.fedgp.detection_rate == run.baseline.detection_rate);
            CHECK(run.fedgp.recognition_rate == run.baseline.recognition_rate);
            CHECK(run.tau > 0.0);
        }
    }

    SUBCASE("output files carry provenance stamps") {
        const std::vector<std::string> names = {
            "config.json",          "dap_mean120_seed1.json", "dap_mean120_seed2.json",
            "dap_mean150_seed1.json", "dap_mean150_seed2.json", "dap_summary.csv",
            "attack_seed1.json",    "attack_seed2.json",      "attack_summary.csv"};
        REQUIRE(report.files.size() == names.size());
        for (std::size_t i = 0; i < names.size(); ++i) {
            CHECK(report.files[i].first == names[i]);
        }

        const std::string hash = config_hash_hex(cfg);
        const nlohmann::json dap =
            nlohmann::json::parse(*find_file(report.files, "dap_mean150_seed2.json"));
        CHECK(dap.at("config_hash").get<std::string>() == hash);
        CHECK(dap.at("master_seed").get<std::uint64_t>() == cfg.seed);
        CHECK(dap.at("run_seed").get<std::uint64_t>() == 2);
        CHECK(dap.at("mean_points").get<std::size_t>() == 150);
        CHECK(dap.at("mu").get<double>() == report.dap_runs[3].dap.mu);

        const nlohmann::json attack =
            nlohmann::json::parse(*find_file(report.files, "attack_seed1.json"));
        CHECK(attack.at("config_hash").get<std::string>() == hash);
        CHECK(attack.at("tau").get<double>() == report.attack_runs[0].tau);
        CHECK(attack.at("detection_gap").get<double>() ==
              report.attack_runs[0].baseline.detection_rate -
                  report.attack_runs[0].fedgp.detection_rate);
        CHECK(attack.at("baseline").at("detection_rate").get<double>() == 0.25);

        const std::string* dap_csv = find_file(report.files, "dap_summary.csv");
        REQUIRE(dap_csv != nullptr);
        const std::vector<std::string> dap_lines = split_lines(*dap_csv);
        REQUIRE(dap_lines.size() == 6);
        CHECK(dap_lines[0] == "# config=" + hash + " seed=1");
        CHECK(dap_lines[1] == "mean_points,seed," + dap_report_csv_header());

        const std::string* attack_csv = find_file(report.files, "attack_summary.csv");
        REQUIRE(attack_csv != nullptr);
        const std::vector<std::string> attack_lines = split_lines(*attack_csv);
        REQUIRE(attack_lines.size() == 6);
        CHECK(attack_lines[1] == "seed,student,tau,detection_rate,recognition_rate");
        CHECK(split_fields(attack_lines[2])[1] == "baseline");
        CHECK(split_fields(attack_lines[3])[1] == "fedgp");
    }
}

TEST_CASE("pipelines are byte-identical across reruns") {
    ExperimentConfig cfg = tiny_config();

    SUBCASE("learning") {
        const LearningReport a = run_learning_experiment(cfg);
        const LearningReport b = run_learning_experiment(cfg);
        CHECK(a.files == b.files);
    }

    SUBCASE("privacy") {
        const PrivacyReport a = run_privacy_experiment(cfg);
        const PrivacyReport b = run_privacy_experiment(cfg);
        CHECK(a.files == b.files);
    }

    SUBCASE("a different master seed changes the learning outputs") {
        const LearningReport a = run_learning_experiment(cfg);
        ExperimentConfig other = cfg;
        other.seed = 2;
        const LearningReport c = run_learning_experiment(other);
        CHECK(a.files != c.files);
    }
}

TEST_CASE("write_output_files persists exact bytes") {
    const std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "fedsynth_outputs";
    std::filesystem::remove_all(dir);

    OutputFiles files;
    files.emplace_back("a.csv", "x,y\n1,2\n");
    std::string binary = "P5\n1 1\n255\n";
    binary.push_back('\0');
    files.emplace_back("img.pgm", binary);

    write_output_files(files, dir.string());
    CHECK(read_text_file((dir / "a.csv").string()) == "x,y\n1,2\n");
    CHECK(read_text_file((dir / "img.pgm").string()) == binary);
    std::filesystem::remove_all(dir);
}
