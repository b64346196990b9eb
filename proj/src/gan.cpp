#include "fedsynth/gan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsynth {
namespace {

Tensor2 noise_batch(std::size_t rows, std::size_t dim, Rng& rng) {
    Tensor2 z(rows, dim);
    for (double& v : z.data()) v = rng.normal();
    return z;
}

int sample_label(std::span<const double> probs, std::size_t label_dim, Rng& rng) {
    if (probs.empty()) return static_cast<int>(rng.uniform_index(label_dim));
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        acc += probs[c];
        if (u < acc) return static_cast<int>(c);
    }
    return static_cast<int>(probs.size() - 1);
}

Tensor2 generator_forward_batch(const GeneratorModel& gen, const Tensor2& noise,
                                const Tensor2& onehot, ForwardTrace* trace_out) {
    ForwardTrace trace = mlp_forward(gen.params, hconcat(noise, onehot));
    Tensor2 out = trace.output();
    if (trace_out != nullptr) *trace_out = std::move(trace);
    return out;
}

}  // namespace

void GeneratorModel::validate() const {
    if (noise_dim == 0) throw std::invalid_argument("GeneratorModel: noise_dim must be >= 1");
    if (label_dim == 0) throw std::invalid_argument("GeneratorModel: label_dim must be >= 1");
    if (output_dim == 0) throw std::invalid_argument("GeneratorModel: output_dim must be >= 1");
    if (params.layer_count() == 0) throw std::invalid_argument("GeneratorModel: no layers");
    if (params.input_dim() != noise_dim + label_dim) {
        throw std::invalid_argument("GeneratorModel: input width " +
                                    std::to_string(params.input_dim()) + " != noise_dim+label_dim " +
                                    std::to_string(noise_dim + label_dim));
    }
    if (params.output_dim() != output_dim) {
        throw std::invalid_argument("GeneratorModel: output width " +
                                    std::to_string(params.output_dim()) + " != output_dim " +
                                    std::to_string(output_dim));
    }
    if (params.layers().back().act != Activation::tanh) {
        throw std::invalid_argument("GeneratorModel: output activation must be tanh");
    }
}

void CriticModel::validate() const {
    if (!(clip_bound > 0.0)) throw std::invalid_argument("CriticModel: clip_bound must be > 0");
    if (params.layer_count() == 0) throw std::invalid_argument("CriticModel: no layers");
    if (params.output_dim() != 1) {
        throw std::invalid_argument("CriticModel: output must be scalar, got width " +
                                    std::to_string(params.output_dim()));
    }
    if (params.layers().back().act != Activation::identity) {
        throw std::invalid_argument("CriticModel: output activation must be identity");
    }
}

void GanHyper::validate() const {
    if (batch_size == 0) throw std::invalid_argument("GanHyper: batch_size must be >= 1");
    if (critic_steps == 0) throw std::invalid_argument("GanHyper: critic_steps must be >= 1");
    if (!(clip_bound > 0.0)) throw std::invalid_argument("GanHyper: clip_bound must be > 0");
    adam.validate();
}

GeneratorModel make_generator(std::size_t noise_dim, std::size_t label_dim,
                              std::size_t output_dim, const std::vector<std::size_t>& hidden,
                              Rng& rng) {
    GeneratorModel gen;
    gen.noise_dim = noise_dim;
    gen.label_dim = label_dim;
    gen.output_dim = output_dim;
    gen.params = init_mlp(make_shape(noise_dim + label_dim, hidden, output_dim,
                                     Activation::relu, Activation::tanh),
                          rng);
    gen.validate();
    return gen;
}

CriticModel make_critic(std::size_t data_dim, std::size_t label_dim,
                        const std::vector<std::size_t>& hidden, double clip_bound, Rng& rng) {
    CriticModel critic;
    critic.clip_bound = clip_bound;
    critic.params = init_mlp(make_shape(data_dim + label_dim, hidden, 1, Activation::relu,
                                        Activation::identity),
                             rng);
    critic.validate();
    clip_params(critic.params, clip_bound);
    return critic;
}

void clip_params(MlpParams& params, double bound) {
    for (MlpLayer& layer : params.layers()) {
        for (double& w : layer.weight.data()) w = std::clamp(w, -bound, bound);
        for (double& b : layer.bias) b = std::clamp(b, -bound, bound);
    }
}

LabelledDataset generate(const GeneratorModel& gen, std::span<const int> labels, Rng& rng) {
    gen.validate();
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= gen.label_dim) {
            throw std::invalid_argument("generate: label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(gen.label_dim) + ")");
        }
    }
    std::vector<int> label_vec(labels.begin(), labels.end());
    if (label_vec.empty()) {
        return make_dataset(Tensor2(0, gen.output_dim), {}, gen.label_dim,
                            Provenance::artificial);
    }
    const Tensor2 z = noise_batch(label_vec.size(), gen.noise_dim, rng);
    const Tensor2 onehot = one_hot(label_vec, gen.label_dim);
    Tensor2 features = generator_forward_batch(gen, z, onehot, nullptr);
    return make_dataset(std::move(features), std::move(label_vec), gen.label_dim,
                        Provenance::artificial);
}

double critic_step(CriticModel& critic, AdamState& critic_opt, const GeneratorModel& gen,
                   const LabelledDataset& real_batch, const GanHyper& hyper, Rng& rng) {
    hyper.validate();
    if (real_batch.size() == 0) throw std::invalid_argument("critic_step: empty real batch");
    if (real_batch.dim() != gen.output_dim) {
        throw std::invalid_argument("critic_step: data dim " + std::to_string(real_batch.dim()) +
                                    " != generator output dim " + std::to_string(gen.output_dim));
    }
    if (critic.params.input_dim() != gen.output_dim + gen.label_dim) {
        throw std::invalid_argument("critic_step: critic input width " +
                                    std::to_string(critic.params.input_dim()) +
                                    " != data+label width " +
                                    std::to_string(gen.output_dim + gen.label_dim));
    }
    const std::size_t b = real_batch.size();
    const Tensor2 onehot = one_hot(real_batch.labels, gen.label_dim);
    const Tensor2 z = noise_batch(b, gen.noise_dim, rng);
    const Tensor2 fake = generator_forward_batch(gen, z, onehot, nullptr);

    const ForwardTrace fake_trace = mlp_forward(critic.params, hconcat(fake, onehot));
    const ForwardTrace real_trace = mlp_forward(critic.params, hconcat(real_batch.features, onehot));

    double mean_fake = 0.0;
    double mean_real = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        mean_fake += fake_trace.output().at(i, 0);
        mean_real += real_trace.output().at(i, 0);
    }
    mean_fake /= static_cast<double>(b);
    mean_real /= static_cast<double>(b);

    // Loss = mean[C(fake)] - mean[C(real)].
    Tensor2 fake_grad(b, 1);
    fake_grad.fill(1.0 / static_cast<double>(b));
    Tensor2 real_grad(b, 1);
    real_grad.fill(-1.0 / static_cast<double>(b));
    const Gradients g_fake = mlp_backward(critic.params, fake_trace, fake_grad);
    const Gradients g_real = mlp_backward(critic.params, real_trace, real_grad);

    std::vector<double> grads(g_fake.params.size());
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = g_fake.params[i] + g_real.params[i];

    std::vector<double> flat = flatten_params(critic.params);
    critic_opt.step(flat, grads);
    critic.params = unflatten_params(flat, critic.params.shape());
    clip_params(critic.params, critic.clip_bound);
    return mean_real - mean_fake;
}

void generator_step(GeneratorModel& gen, AdamState& gen_opt, const CriticModel& critic,
                    const GanHyper& hyper, std::span<const double> label_probs, Rng& rng) {
    hyper.validate();
    if (!label_probs.empty() && label_probs.size() != gen.label_dim) {
        throw std::invalid_argument("generator_step: label_probs length " +
                                    std::to_string(label_probs.size()) + " != label_dim " +
                                    std::to_string(gen.label_dim));
    }
    if (critic.params.input_dim() != gen.output_dim + gen.label_dim) {
        throw std::invalid_argument("generator_step: critic input width " +
                                    std::to_string(critic.params.input_dim()) +
                                    " != data+label width " +
                                    std::to_string(gen.output_dim + gen.label_dim));
    }
    const std::size_t b = hyper.batch_size;
    std::vector<int> labels(b);
    for (int& label : labels) label = sample_label(label_probs, gen.label_dim, rng);
    const Tensor2 onehot = one_hot(labels, gen.label_dim);
    const Tensor2 z = noise_batch(b, gen.noise_dim, rng);

    ForwardTrace gen_trace;
    const Tensor2 fake = generator_forward_batch(gen, z, onehot, &gen_trace);
    const ForwardTrace critic_trace = mlp_forward(critic.params, hconcat(fake, onehot));

    // Loss = -mean[C(fake)]; gradient reaches the generator through the
    // critic's input gradient, restricted to the feature columns.
    Tensor2 out_grad(b, 1);
    out_grad.fill(-1.0 / static_cast<double>(b));
    const Gradients critic_grads = mlp_backward(critic.params, critic_trace, out_grad);
    const Tensor2 fake_grad = left_columns(critic_grads.input, gen.output_dim);
    const Gradients gen_grads = mlp_backward(gen.params, gen_trace, fake_grad);

    std::vector<double> flat = flatten_params(gen.params);
    gen_opt.step(flat, gen_grads.params);
    gen.params = unflatten_params(flat, gen.params.shape());
}

}  // namespace fedsynth
