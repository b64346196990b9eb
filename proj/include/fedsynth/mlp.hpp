#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedsynth/rng.hpp"
#include "fedsynth/tensor.hpp"

namespace fedsynth {

enum class Activation { relu, tanh, sigmoid, identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    Activation act = Activation::identity;

    bool operator==(const LayerShape&) const = default;
};

struct MlpLayer {
    Tensor2 weight;             // in x out
    std::vector<double> bias;   // length out
    Activation act = Activation::identity;
};

/// Layered weight/bias collection for a fixed-architecture MLP.
/// Construction rejects non-finite entries and mismatched layer chains.
class MlpParams {
public:
    MlpParams() = default;
    explicit MlpParams(std::vector<MlpLayer> layers);

    const std::vector<MlpLayer>& layers() const { return layers_; }
    std::vector<MlpLayer>& layers() { return layers_; }

    std::size_t layer_count() const { return layers_.size(); }
    std::size_t input_dim() const;
    std::size_t output_dim() const;
    std::size_t parameter_count() const;
    std::vector<LayerShape> shape() const;

    bool operator==(const MlpParams& other) const;

private:
    std::vector<MlpLayer> layers_;
};

/// Shapes for input -> hidden... -> output with the given activations.
std::vector<LayerShape> make_shape(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                   std::size_t output_dim, Activation hidden_act,
                                   Activation output_act);

/// Weights uniform in +-sqrt(6/(fan_in+fan_out)), biases zero.
MlpParams init_mlp(const std::vector<LayerShape>& shape, Rng& rng);

/// Everything the backward pass needs: input plus per-layer pre/post activations.
struct ForwardTrace {
    Tensor2 input;
    std::vector<Tensor2> pre;   // one per layer
    std::vector<Tensor2> post;  // one per layer

    const Tensor2& output() const { return post.back(); }
};

ForwardTrace mlp_forward(const MlpParams& params, const Tensor2& input);

struct Gradients {
    std::vector<double> params;  // flatten_params ordering
    Tensor2 input;               // same shape as the forward input
};

/// Exact gradients of the scalar sum(output_grad .* output) w.r.t. params and input.
Gradients mlp_backward(const MlpParams& params, const ForwardTrace& trace,
                       const Tensor2& output_grad);

/// Layer 0 weights row-major, then layer 0 bias, then layer 1, ...
std::vector<double> flatten_params(const MlpParams& params);
MlpParams unflatten_params(std::span<const double> flat, const std::vector<LayerShape>& shape);

}  // namespace fedsynth
