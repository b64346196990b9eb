#pragma once

#include <cstddef>
#include <span>

#include "fedsynth/adam.hpp"
#include "fedsynth/dataset.hpp"
#include "fedsynth/mlp.hpp"
#include "fedsynth/rng.hpp"

namespace fedsynth {

/// Conditional generator: input [noise | one-hot label], tanh output in [-1,1].
struct GeneratorModel {
    MlpParams params;
    std::size_t noise_dim = 0;
    std::size_t label_dim = 0;
    std::size_t output_dim = 0;

    void validate() const;
};

/// Conditional critic: input [features | one-hot label], scalar identity output.
/// All parameters stay within [-clip_bound, clip_bound] after every critic step.
struct CriticModel {
    MlpParams params;
    double clip_bound = 0.01;

    void validate() const;
};

struct GanHyper {
    std::size_t batch_size = 64;
    std::size_t critic_steps = 5;  // critic updates per generator update
    double clip_bound = 0.05;
    AdamConfig adam;
    std::size_t local_epochs = 1;  // 0 is allowed and yields a zero update

    void validate() const;
};

GeneratorModel make_generator(std::size_t noise_dim, std::size_t label_dim,
                              std::size_t output_dim, const std::vector<std::size_t>& hidden,
                              Rng& rng);
CriticModel make_critic(std::size_t data_dim, std::size_t label_dim,
                        const std::vector<std::size_t>& hidden, double clip_bound, Rng& rng);

/// Clamps every weight and bias to [-bound, bound].
void clip_params(MlpParams& params, double bound);

/// One artificial sample per requested label, in request order.
LabelledDataset generate(const GeneratorModel& gen, std::span<const int> labels, Rng& rng);

/// One Adam step on the Wasserstein critic loss mean[C(fake)] - mean[C(real)],
/// then clipping. Fake samples share the real batch's labels. Returns the
/// pre-update critic gap mean[C(real)] - mean[C(fake)].
double critic_step(CriticModel& critic, AdamState& critic_opt, const GeneratorModel& gen,
                   const LabelledDataset& real_batch, const GanHyper& hyper, Rng& rng);

/// One Adam step minimizing -mean[C(G(z, y), y)]. Labels for the fake batch are
/// drawn from `label_probs` (length label_dim); empty means uniform.
void generator_step(GeneratorModel& gen, AdamState& gen_opt, const CriticModel& critic,
                    const GanHyper& hyper, std::span<const double> label_probs, Rng& rng);

}  // namespace fedsynth
