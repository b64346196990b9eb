#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedsynth/gan.hpp"
#include "fedsynth/rng.hpp"

using namespace fedsynth;

namespace {

LabelledDataset constant_batch(std::size_t n, double value, int label, std::size_t classes) {
    Tensor2 features(n, 1);
    features.fill(value);
    std::vector<int> labels(n, label);
    return make_dataset(std::move(features), std::move(labels), classes, Provenance::real);
}

LabelledDataset two_blob_data(std::size_t per_class, double cx, double cy, double sigma,
                              Rng& rng) {
    Tensor2 features(2 * per_class, 2);
    std::vector<int> labels(2 * per_class);
    for (std::size_t i = 0; i < 2 * per_class; ++i) {
        const int label = i < per_class ? 0 : 1;
        const double sign = label == 0 ? 1.0 : -1.0;
        features.at(i, 0) = std::clamp(sign * cx + rng.normal(0.0, sigma), -1.0, 1.0);
        features.at(i, 1) = std::clamp(-sign * cy + rng.normal(0.0, sigma), -1.0, 1.0);
        labels[i] = label;
    }
    return make_dataset(std::move(features), std::move(labels), 2, Provenance::real);
}

LabelledDataset sample_batch(const LabelledDataset& data, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> idx(batch);
    for (std::size_t& i : idx) i = rng.uniform_index(data.size());
    return subset(data, idx);
}

void check_clipped(const MlpParams& params, double bound) {
    for (const MlpLayer& layer : params.layers()) {
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            CHECK(std::abs(layer.weight.data()[i]) <= bound + 1e-15);
        }
        for (double b : layer.bias) {
            CHECK(std::abs(b) <= bound + 1e-15);
        }
    }
}

}  // namespace

TEST_CASE("generate returns the requested label multiset in order") {
    Rng rng(3);
    const GeneratorModel gen = make_generator(4, 3, 2, {8}, rng);

    Rng sample_rng(10);
    const std::vector<int> labels = {0, 0, 1};
    const LabelledDataset out = generate(gen, labels, sample_rng);
    CHECK(out.labels == labels);
    CHECK(out.size() == 3);
    CHECK(out.dim() == 2);
    CHECK(out.class_count == 3);
    CHECK(out.provenance == Provenance::artificial);
    for (std::size_t i = 0; i < out.features.size(); ++i) {
        CHECK(out.features.data()[i] >= -1.0);
        CHECK(out.features.data()[i] <= 1.0);
    }

    Rng again(10);
    const LabelledDataset out2 = generate(gen, labels, again);
    CHECK(out2.features == out.features);

    Rng empty_rng(1);
    const LabelledDataset empty = generate(gen, std::vector<int>{}, empty_rng);
    CHECK(empty.size() == 0);

    Rng bad_rng(1);
    const std::vector<int> bad = {0, 3};
    CHECK_THROWS_AS(generate(gen, bad, bad_rng), std::invalid_argument);
}

TEST_CASE("model constructors validate and clip") {
    Rng rng(5);
    const GeneratorModel gen = make_generator(4, 2, 3, {6, 6}, rng);
    CHECK(gen.params.input_dim() == 6);
    CHECK(gen.params.output_dim() == 3);
    CHECK(gen.params.layers().back().act == Activation::tanh);
    gen.validate();

    const CriticModel critic = make_critic(3, 2, {6}, 0.01, rng);
    CHECK(critic.params.input_dim() == 5);
    CHECK(critic.params.output_dim() == 1);
    CHECK(critic.params.layers().back().act == Activation::identity);
    check_clipped(critic.params, 0.01);

    GeneratorModel broken = gen;
    broken.noise_dim = 5;  // input width no longer matches
    CHECK_THROWS_AS(broken.validate(), std::invalid_argument);

    GanHyper hyper;
    hyper.batch_size = 0;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);
    hyper = GanHyper{};
    hyper.clip_bound = 0.0;
    CHECK_THROWS_AS(hyper.validate(), std::invalid_argument);
    hyper = GanHyper{};
    hyper.local_epochs = 0;  // allowed: a client may sit a round out
    hyper.validate();
}

TEST_CASE("critic_step clips, is a no-op at step size 0, and needs valid shapes") {
    Rng rng(17);
    const GeneratorModel gen = make_generator(3, 2, 1, {8}, rng);
    CriticModel critic = make_critic(1, 2, {8}, 0.05, rng);
    GanHyper hyper;
    hyper.batch_size = 16;
    hyper.clip_bound = 0.05;

    const LabelledDataset batch = constant_batch(16, 1.0, 0, 2);

    SUBCASE("clipping holds after every step") {
        AdamState opt(critic.params.parameter_count(), hyper.adam);
        Rng step_rng(3);
        for (int i = 0; i < 20; ++i) {
            critic_step(critic, opt, gen, batch, hyper, step_rng);
            check_clipped(critic.params, hyper.clip_bound);
        }
    }

    SUBCASE("zero step size leaves the critic unchanged") {
        GanHyper frozen = hyper;
        frozen.adam.step_size = 0.0;
        AdamState opt(critic.params.parameter_count(), frozen.adam);
        const MlpParams before = critic.params;
        Rng step_rng(3);
        critic_step(critic, opt, gen, batch, frozen, step_rng);
        CHECK(critic.params == before);
    }

    SUBCASE("empty batch and shape mismatches are rejected") {
        AdamState opt(critic.params.parameter_count(), hyper.adam);
        Rng step_rng(3);
        const LabelledDataset empty{Tensor2(0, 1), {}, 2, Provenance::real};
        CHECK_THROWS_AS(critic_step(critic, opt, gen, empty, hyper, step_rng),
                        std::invalid_argument);
        const LabelledDataset wrong = two_blob_data(4, 0.5, 0.5, 0.01, step_rng);
        CHECK_THROWS_AS(critic_step(critic, opt, gen, wrong, hyper, step_rng),
                        std::invalid_argument);
    }
}

TEST_CASE("critic gap grows on the 1-D +1 vs -1 toy problem") {
    // real = +1 constant; generator weights forced to emit -1 constant
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Rng rng(seed);
        GeneratorModel gen = make_generator(2, 1, 1, {4}, rng);
        for (MlpLayer& layer : gen.params.layers()) {
            for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = 0.0;
            for (double& b : layer.bias) b = 0.0;
        }
        gen.params.layers().back().bias[0] = -20.0;  // tanh(-20) ~ -1

        CriticModel critic = make_critic(1, 1, {8}, 0.05, rng);
        GanHyper hyper;
        hyper.batch_size = 32;
        hyper.clip_bound = 0.05;
        hyper.adam.step_size = 1e-3;

        const LabelledDataset real = constant_batch(32, 1.0, 0, 1);
        AdamState opt(critic.params.parameter_count(), hyper.adam);
        Rng step_rng = rng.fork("steps");
        std::vector<double> gaps;
        for (int i = 0; i < 100; ++i) {
            gaps.push_back(critic_step(critic, opt, gen, real, hyper, step_rng));
        }
        double early = 0.0;
        double late = 0.0;
        for (int i = 0; i < 10; ++i) {
            early += gaps[static_cast<std::size_t>(i)];
            late += gaps[gaps.size() - 10 + static_cast<std::size_t>(i)];
        }
        CHECK(late / 10.0 > early / 10.0);
    }
}

TEST_CASE("generator_step: zero step size is a no-op; deterministic under fixed seed") {
    Rng rng(23);
    GeneratorModel gen = make_generator(3, 2, 2, {6}, rng);
    const CriticModel critic = make_critic(2, 2, {6}, 0.05, rng);
    GanHyper hyper;
    hyper.batch_size = 8;

    SUBCASE("zero step size") {
        GanHyper frozen = hyper;
        frozen.adam.step_size = 0.0;
        AdamState opt(gen.params.parameter_count(), frozen.adam);
        const MlpParams before = gen.params;
        Rng step_rng(4);
        generator_step(gen, opt, critic, frozen, {}, step_rng);
        CHECK(gen.params == before);
    }

    SUBCASE("determinism") {
        GeneratorModel g1 = gen;
        GeneratorModel g2 = gen;
        AdamState o1(gen.params.parameter_count(), hyper.adam);
        AdamState o2(gen.params.parameter_count(), hyper.adam);
        Rng r1(99);
        Rng r2(99);
        for (int i = 0; i < 5; ++i) {
            generator_step(g1, o1, critic, hyper, {}, r1);
            generator_step(g2, o2, critic, hyper, {}, r2);
        }
        CHECK(g1.params == g2.params);
    }
}

TEST_CASE("generator gradient through a linear critic is -w at the bias") {
    // Zero-weight generator: output = tanh(0) = 0 for every draw, so the
    // critic input grad -w_x/b reaches the bias as exactly -w_x. The first
    // Adam step is then alpha * sign(w_x) per bias coordinate.
    Rng rng(31);
    GeneratorModel gen = make_generator(3, 2, 4, {}, rng);
    for (MlpLayer& layer : gen.params.layers()) {
        for (std::size_t i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = 0.0;
        for (double& b : layer.bias) b = 0.0;
    }

    MlpLayer critic_layer;
    critic_layer.weight = Tensor2(6, 1, {0.3, -0.8, 0.0125, -0.5, 0.9, 0.7});
    critic_layer.bias = {0.0};
    critic_layer.act = Activation::identity;
    CriticModel critic;
    critic.params = MlpParams(std::vector<MlpLayer>{critic_layer});
    critic.clip_bound = 1.0;

    GanHyper hyper;
    hyper.batch_size = 16;
    hyper.adam.step_size = 1e-3;
    AdamState opt(gen.params.parameter_count(), hyper.adam);
    Rng step_rng(8);
    generator_step(gen, opt, critic, hyper, {}, step_rng);

    const std::vector<double>& bias = gen.params.layers().back().bias;
    const double w_x[4] = {0.3, -0.8, 0.0125, -0.5};  // first output_dim critic weights
    for (std::size_t j = 0; j < 4; ++j) {
        // loss gradient at bias j is exactly -w_x[j]; Adam moves against it
        CHECK(bias[j] * w_x[j] > 0.0);
        CHECK(std::abs(bias[j]) == doctest::Approx(hyper.adam.step_size).epsilon(1e-6));
    }
}

TEST_CASE("single-client GAN matches per-class means on a 2-D mixture") {
    // 2 classes at (+0.5, -0.5) and (-0.5, +0.5), sigma 0.15, 2000 points;
    // after 2000 generator steps the artificial class means should land
    // within 0.3 of the real ones (averaged over 5 seeds).
    double total_dev = 0.0;
    int class_cells = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        const LabelledDataset real = two_blob_data(1000, 0.5, 0.5, 0.15, rng);

        GeneratorModel gen = make_generator(4, 2, 2, {16}, rng);
        CriticModel critic = make_critic(2, 2, {16}, 0.05, rng);
        GanHyper hyper;
        hyper.batch_size = 64;
        hyper.critic_steps = 5;
        hyper.clip_bound = 0.05;
        hyper.adam.step_size = 5e-4;

        AdamState critic_opt(critic.params.parameter_count(), hyper.adam);
        AdamState gen_opt(gen.params.parameter_count(), hyper.adam);
        Rng loop_rng = rng.fork("train");
        const std::vector<double> probs = {0.5, 0.5};
        for (int step = 0; step < 2000; ++step) {
            for (std::size_t c = 0; c < hyper.critic_steps; ++c) {
                const LabelledDataset batch = sample_batch(real, hyper.batch_size, loop_rng);
                critic_step(critic, critic_opt, gen, batch, hyper, loop_rng);
            }
            generator_step(gen, gen_opt, critic, hyper, probs, loop_rng);
        }

        std::vector<int> labels(2000);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i < 1000 ? 0 : 1;
        Rng gen_rng = rng.fork("sample");
        const LabelledDataset art = generate(gen, labels, gen_rng);

        const Tensor2 real_means = class_means(real);
        const Tensor2 art_means = class_means(art);
        for (std::size_t c = 0; c < 2; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < 2; ++j) {
                const double diff = real_means.at(c, j) - art_means.at(c, j);
                d2 += diff * diff;
            }
            total_dev += std::sqrt(d2);
            ++class_cells;
        }
    }
    const double avg_dev = total_dev / class_cells;
    MESSAGE("average per-class mean deviation: " << avg_dev);
    CHECK(avg_dev <= 0.3);
}
