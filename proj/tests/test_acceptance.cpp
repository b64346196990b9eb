// Acceptance gate: one [PASS]/[FAIL] line per criterion, checked by ctest.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

#include "fedsynth/experiment.hpp"

using namespace fedsynth;

namespace {

bool report(int criterion, const std::string& detail, bool pass) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    return pass;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Benchmark shared by the learning and privacy criteria: 8 classes, 64 dims,
// 20 clients at a mean of 500 points each.
ExperimentConfig benchmark_config() {
    ExperimentConfig cfg;
    cfg.name = "acceptance";
    cfg.seed = 1;
    cfg.dataset.mixture.class_count = 8;
    cfg.dataset.mixture.dim = 64;
    cfg.dataset.mixture.points_per_class = 6000;
    cfg.dataset.mixture.image_like = true;
    cfg.sharding.client_count = 20;
    cfg.sharding.mean_points = 500;
    cfg.sharding.classes_per_client = 2;
    cfg.fed.noise_dim = 16;
    cfg.fed.gen_hidden = {64};
    cfg.fed.critic_hidden = {64};
    cfg.fed.rounds = 35;
    cfg.fed.hyper.batch_size = 32;
    cfg.fed.hyper.critic_steps = 3;
    cfg.fed.hyper.clip_bound = 0.05;
    cfg.fed.hyper.local_epochs = 4;
    cfg.fed.hyper.adam.step_size = 1e-3;
    cfg.fed.hyper.adam.beta1 = 0.5;
    cfg.student.arch.hidden = {100};
    cfg.student.hyper.epochs = 6;
    cfg.student.hyper.batch_size = 64;
    cfg.student.hyper.adam.step_size = 1e-2;
    cfg.student.hyper.adam.beta1 = 0.9;
    cfg.gamma = 1e-15;
    cfg.knn_k = 2;
    cfg.artificial_per_real = 0.5;
    cfg.removal.trials = 64;
    cfg.attack.steps = 300;
    cfg.attack.step_sizes = {0.02, 0.05, 0.1, 0.2};
    cfg.attack.detection_target = 0.25;
    cfg.plan.seeds = {1, 2, 3, 4, 5};
    cfg.plan.modes = {"iid", "non_iid"};
    cfg.plan.mean_points = {500};
    cfg.plan.test_fraction = 0.2;
    cfg.validate();
    return cfg;
}

struct PrivacyShared {
    PrivacyReport at500;
    PrivacyReport at2000;
    double seconds500 = 0.0;
    double seconds2000 = 0.0;
};

// Criteria 7 and 8 read the same benchmark; the mean-500 run (with attacks)
// is timed on its own because only criterion 8 carries a runtime bound.
const PrivacyShared& privacy_shared() {
    static const PrivacyShared shared = [] {
        PrivacyShared s;
        ExperimentConfig cfg = benchmark_config();
        cfg.plan.modes = {"iid"};

        cfg.plan.mean_points = {500};
        auto start = std::chrono::steady_clock::now();
        s.at500 = run_privacy_experiment(cfg);
        s.seconds500 = elapsed_seconds(start);

        cfg.plan.mean_points = {2000};
        start = std::chrono::steady_clock::now();
        s.at2000 = run_privacy_experiment(cfg);
        s.seconds2000 = elapsed_seconds(start);
        return s;
    }();
    return shared;
}

std::string format2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

}  // namespace

TEST_CASE("criterion 1") {
    Rng rng(101);
    double worst = 0.0;
    for (int net = 0; net < 50; ++net) {
        const std::size_t input_dim = 1 + rng.uniform_index(8);
        const std::size_t depth = 1 + rng.uniform_index(3);
        std::vector<std::size_t> hidden;
        for (std::size_t l = 0; l + 1 < depth; ++l) hidden.push_back(1 + rng.uniform_index(16));
        const std::size_t output_dim = 1 + rng.uniform_index(8);

        const Activation acts[] = {Activation::relu, Activation::tanh, Activation::sigmoid,
                                   Activation::identity};
        std::vector<LayerShape> shape = make_shape(input_dim, hidden, output_dim,
                                                   Activation::identity, Activation::identity);
        for (LayerShape& layer : shape) layer.act = acts[rng.uniform_index(4)];

        const MlpParams params = init_mlp(shape, rng);
        const std::size_t batch = 1 + rng.uniform_index(4);
        Tensor2 input(batch, input_dim);
        for (double& v : input.data()) v = rng.uniform(-1.0, 1.0);
        Tensor2 weights(batch, output_dim);
        for (double& v : weights.data()) v = rng.uniform(-1.0, 1.0);

        const Gradients grads = mlp_backward(params, mlp_forward(params, input), weights);

        auto loss_at = [&](const std::vector<double>& flat) {
            const MlpParams p = unflatten_params(flat, shape);
            const Tensor2 out = mlp_forward(p, input).output();
            double loss = 0.0;
            for (std::size_t i = 0; i < out.data().size(); ++i)
                loss += weights.data()[i] * out.data()[i];
            return loss;
        };

        std::vector<double> flat = flatten_params(params);
        const double h = 1e-6;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double keep = flat[i];
            flat[i] = keep + h;
            const double up = loss_at(flat);
            flat[i] = keep - h;
            const double down = loss_at(flat);
            flat[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double a = grads.params[i];
            worst = std::max(worst, std::abs(a - fd) / std::max(1e-6, std::abs(a) + std::abs(fd)));
        }
    }
    CHECK(report(1,
                 "analytic MLP gradients match central finite differences on 50 random nets "
                 "(max rel err " + format2(worst) + " <= 1e-4)",
                 worst <= 1e-4));
}

TEST_CASE("criterion 2") {
    Rng rng(202);
    bool ok = true;
    double worst_masked = 0.0;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t clients = 2 + rng.uniform_index(7);
        const std::size_t dim = 1 + rng.uniform_index(32);

        std::vector<double> shared(dim);
        for (double& v : shared) v = rng.uniform(-2.0, 2.0);
        std::vector<GeneratorDelta> same(clients);
        std::vector<GeneratorDelta> mixed(clients);
        std::vector<double> weights(clients);
        double wsum = 0.0;
        for (std::size_t c = 0; c < clients; ++c) {
            same[c] = {shared, c, 0};
            mixed[c].client_id = c;
            mixed[c].values.resize(dim);
            for (double& v : mixed[c].values) v = rng.uniform(-2.0, 2.0);
            weights[c] = 0.05 + rng.uniform();
            wsum += weights[c];
        }
        for (double& w : weights) w /= wsum;

        const std::vector<double> idem = aggregate_deltas(same, weights);
        for (std::size_t i = 0; i < dim; ++i) {
            ok = ok && std::abs(idem[i] - shared[i]) <= 1e-12 * std::max(1.0, std::abs(shared[i]));
        }

        std::vector<std::size_t> order(clients);
        for (std::size_t i = 0; i < clients; ++i) order[i] = i;
        rng.shuffle(order);
        std::vector<GeneratorDelta> permuted;
        std::vector<double> permuted_weights;
        for (std::size_t i : order) {
            permuted.push_back(mixed[i]);
            permuted_weights.push_back(weights[i]);
        }
        ok = ok && aggregate_deltas(mixed, weights) == aggregate_deltas(permuted, permuted_weights);

        std::vector<std::vector<double>> raw;
        std::vector<double> plain(dim, 0.0);
        for (const GeneratorDelta& d : mixed) {
            raw.push_back(d.values);
            for (std::size_t i = 0; i < dim; ++i) plain[i] += d.values[i];
        }
        const std::vector<double> masked = masked_sum(raw, rng.fork(trial));
        for (std::size_t i = 0; i < dim; ++i) {
            worst_masked = std::max(worst_masked, std::abs(masked[i] - plain[i]));
        }
        ok = ok && worst_masked <= 1e-9;
    }
    CHECK(report(2,
                 "federated averaging is idempotent, permutation invariant, and mask-exact over "
                 "200 random instances (masked vs plain sum " + format2(worst_masked) + ")",
                 ok));
}

TEST_CASE("criterion 3") {
    const std::size_t n = 10000;
    double shifted_sum = 0.0;
    double self_sum = 0.0;
    for (std::uint64_t run = 0; run < 10; ++run) {
        Rng rng = Rng(303).fork("kl").fork(run);
        Tensor2 p(n, 1);
        Tensor2 q(n, 1);
        Tensor2 p2(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            p.at(i, 0) = rng.normal(0.0, 1.0);
            q.at(i, 0) = rng.normal(1.0, 1.0);
            p2.at(i, 0) = rng.normal(0.0, 1.0);
        }
        shifted_sum += knn_kl_estimate(p, q, 1);
        self_sum += knn_kl_estimate(p, p2, 1);
    }
    const double shifted = shifted_sum / 10.0;
    const double self = self_sum / 10.0;
    const bool pass = std::abs(shifted - 0.5) <= 0.05 && std::abs(self) <= 0.05;
    CHECK(report(3,
                 "kNN divergence estimate for N(0,1) vs N(1,1) is " + format2(shifted) +
                 " (true 0.5) and " + format2(self) + " for identical distributions",
                 pass));
}

TEST_CASE("criterion 4") {
    Rng rng(404);
    const int trials = 10000;
    int violations = 0;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> values(20);
        for (double& v : values) v = rng.normal(0.0, 1.0);
        if (loss_upper_bound(LossSamples::from_values(values), 0.05) < 0.0) ++violations;
    }
    const double freq = static_cast<double>(violations) / trials;
    CHECK(report(4,
                 "confidence bound violation frequency " + format2(freq) +
                 " lies in [0.04, 0.06] at gamma 0.05 (10000 trials, n=20)",
                 freq >= 0.04 && freq <= 0.06));
}

TEST_CASE("criterion 5") {
    const std::vector<double> grid = {0.55, 0.6,  0.65, 0.7,   0.75,  0.8,  0.85,
                                      0.9,  0.95, 0.975, 0.99, 0.999};
    bool cauchy_ok = true;
    for (double p : grid) {
        const double got = t_quantile(1, p);
        const double want = std::tan(std::numbers::pi * (p - 0.5));
        cauchy_ok = cauchy_ok && std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want));
    }
    const double limit = t_quantile(10000, 0.975);
    const bool normal_ok = std::abs(limit - 1.9600) <= 1e-3;
    bool monotone = true;
    for (std::size_t df : {std::size_t{1}, std::size_t{5}, std::size_t{100}}) {
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            monotone = monotone && t_quantile(df, grid[i]) < t_quantile(df, grid[i + 1]);
        }
    }
    CHECK(report(5,
                 "t quantiles match the Cauchy closed form at df=1, give " + format2(limit) +
                 " at df=10000/p=0.975, and are monotone in p",
                 cauchy_ok && normal_ok && monotone));
}

TEST_CASE("criterion 6") {
    const auto start = std::chrono::steady_clock::now();
    const LearningReport learning = run_learning_experiment(benchmark_config());
    const double seconds = elapsed_seconds(start);

    std::vector<double> iid_base;
    std::vector<double> iid_fed;
    std::size_t non_iid_rows = 0;
    bool rows_sane = true;
    for (const LearningRow& row : learning.rows) {
        for (double acc : {row.baseline_acc, row.fedgp_acc}) {
            rows_sane = rows_sane && acc >= 0.0 && acc <= 1.0;
        }
        if (row.mode == ShardMode::iid) {
            iid_base.push_back(row.baseline_acc);
            iid_fed.push_back(row.fedgp_acc);
        } else {
            ++non_iid_rows;
        }
    }
    const double med_base = median(iid_base);
    const double med_fed = median(iid_fed);
    const bool pass = iid_base.size() == 5 && non_iid_rows == 5 && rows_sane &&
                      med_fed >= 0.85 * med_base && seconds < 900.0;
    CHECK(report(6,
                 "federated-release student reaches " + format2(med_fed) +
                 " vs baseline " + format2(med_base) +
                 " median accuracy over 5 seeds; iid and non-iid runs complete in " +
                 format2(seconds) + "s",
                 pass));
}

TEST_CASE("criterion 7") {
    const PrivacyShared& shared = privacy_shared();
    std::vector<double> mu500;
    std::vector<double> mu2000;
    bool finite = true;
    for (const PrivacyRun& run : shared.at500.dap_runs) {
        mu500.push_back(run.dap.mu);
        finite = finite && std::isfinite(run.dap.mu);
    }
    for (const PrivacyRun& run : shared.at2000.dap_runs) {
        mu2000.push_back(run.dap.mu);
        finite = finite && std::isfinite(run.dap.mu);
    }
    const double med500 = median(mu500);
    const double med2000 = median(mu2000);
    const bool pass = mu500.size() == 5 && mu2000.size() == 5 && finite && med2000 < med500;
    CHECK(report(7,
                 "leakage bound mu falls from " + format2(med500) + " to " + format2(med2000) +
                 " (median, 5 seeds) as per-client data grows 500 -> 2000, gamma 1e-15 finite",
                 pass));
}

TEST_CASE("criterion 8") {
    const PrivacyShared& shared = privacy_shared();
    std::vector<double> base_det;
    std::vector<double> base_rec;
    std::vector<double> fed_det;
    std::vector<double> fed_rec;
    for (const AttackRun& run : shared.at500.attack_runs) {
        base_det.push_back(run.baseline.detection_rate);
        base_rec.push_back(run.baseline.recognition_rate);
        fed_det.push_back(run.fedgp.detection_rate);
        fed_rec.push_back(run.fedgp.recognition_rate);
    }
    const double mb_det = median(base_det);
    const double mb_rec = median(base_rec);
    const double mf_det = median(fed_det);
    const double mf_rec = median(fed_rec);
    const bool calibrated = std::abs(mb_det - 0.25) <= 0.05;
    const bool pass = base_det.size() == 5 && calibrated && mf_det <= 0.5 * mb_det &&
                      mf_rec <= 0.5 * mb_rec && shared.seconds500 < 600.0;
    CHECK(report(8,
                 "with baseline detection calibrated to " + format2(mb_det) +
                 ", artificial-data detection " + format2(mf_det) + " and recognition " +
                 format2(mf_rec) + " are at most half the baseline's (" +
                 format2(shared.seconds500) + "s)",
                 pass));
}

TEST_CASE("criterion 9") {
    Rng rng(909);
    const std::size_t dim = 12;
    const std::size_t classes = 4;
    double worst = 1.0;
    for (int model_idx = 0; model_idx < 10; ++model_idx) {
        Tensor2 w(dim, classes);
        for (double& v : w.data()) v = 0.5 * rng.uniform(-1.0, 1.0);
        StudentModel model;
        model.params = MlpParams(std::vector<MlpLayer>{
            MlpLayer{w, std::vector<double>(classes, 0.0), Activation::identity}});
        model.class_count = classes;

        const int target = model_idx % static_cast<int>(classes);
        const InversionResult inv = invert_class(model, target, 20, 1e-3);

        std::vector<double> direction(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t c = 0; c < classes; ++c) {
                const double coef = static_cast<int>(c) == target
                                        ? 1.0
                                        : -1.0 / static_cast<double>(classes - 1);
                direction[i] += coef * w.at(i, c);
            }
        }
        double dot = 0.0;
        double na = 0.0;
        double nb = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            dot += inv.reconstruction[i] * direction[i];
            na += inv.reconstruction[i] * inv.reconstruction[i];
            nb += direction[i] * direction[i];
        }
        worst = std::min(worst, dot / std::sqrt(na * nb));
    }
    CHECK(report(9,
                 "inversion of 10 random linear softmax models recovers the class-score "
                 "direction (min cosine " + format2(worst) + " > 0.99)",
                 worst > 0.99));
}

TEST_CASE("criterion 10") {
    ExperimentConfig cfg;
    cfg.name = "repro";
    cfg.seed = 7;
    cfg.dataset.mixture.class_count = 2;
    cfg.dataset.mixture.dim = 4;
    cfg.dataset.mixture.points_per_class = 50;
    cfg.dataset.mixture.image_like = false;
    cfg.sharding.client_count = 2;
    cfg.sharding.mean_points = 120;
    cfg.fed.noise_dim = 4;
    cfg.fed.gen_hidden = {8};
    cfg.fed.critic_hidden = {8};
    cfg.fed.rounds = 2;
    cfg.fed.hyper.batch_size = 16;
    cfg.fed.hyper.critic_steps = 2;
    cfg.removal.trials = 8;
    cfg.gamma = 1e-15;
    cfg.knn_k = 2;
    cfg.student.arch.hidden = {16};
    cfg.student.hyper.epochs = 2;
    cfg.student.hyper.batch_size = 16;
    cfg.attack.steps = 5;
    cfg.attack.step_sizes = {0.05, 0.1};
    cfg.plan.seeds = {1, 2};
    cfg.plan.modes = {"iid", "non_iid"};
    cfg.plan.mean_points = {120};
    cfg.plan.test_fraction = 0.2;
    cfg.validate();

    const LearningReport learn_a = run_learning_experiment(cfg);
    const LearningReport learn_b = run_learning_experiment(cfg);
    const PrivacyReport priv_a = run_privacy_experiment(cfg);
    const PrivacyReport priv_b = run_privacy_experiment(cfg);

    const bool pass = learn_a.files == learn_b.files && priv_a.files == priv_b.files &&
                      !learn_a.files.empty() && !priv_a.files.empty();
    CHECK(report(10,
                 "repeated experiment runs with the same config and seed produce byte-identical "
                 "CSV/JSON outputs",
                 pass));
}
