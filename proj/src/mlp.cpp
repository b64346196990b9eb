#include "fedsynth/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsynth {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("activation_name: unknown activation");
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + name);
}

MlpParams::MlpParams(std::vector<MlpLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw std::invalid_argument("MlpParams: at least one layer required");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const MlpLayer& layer = layers_[i];
        if (layer.weight.rows() == 0 || layer.weight.cols() == 0) {
            throw std::invalid_argument("MlpParams: layer " + std::to_string(i) +
                                        " has a zero dimension");
        }
        if (layer.bias.size() != layer.weight.cols()) {
            throw std::invalid_argument("MlpParams: layer " + std::to_string(i) +
                                        " bias length does not match weight cols");
        }
        if (i + 1 < layers_.size() && layer.weight.cols() != layers_[i + 1].weight.rows()) {
            throw std::invalid_argument("MlpParams: layer " + std::to_string(i) + " output width " +
                                        std::to_string(layer.weight.cols()) +
                                        " does not chain into layer " + std::to_string(i + 1) +
                                        " input width " +
                                        std::to_string(layers_[i + 1].weight.rows()));
        }
        if (!layer.weight.all_finite()) {
            throw std::invalid_argument("MlpParams: non-finite weight in layer " +
                                        std::to_string(i));
        }
        for (double b : layer.bias) {
            if (!std::isfinite(b)) {
                throw std::invalid_argument("MlpParams: non-finite bias in layer " +
                                            std::to_string(i));
            }
        }
    }
}

std::size_t MlpParams::input_dim() const { return layers_.front().weight.rows(); }

std::size_t MlpParams::output_dim() const { return layers_.back().weight.cols(); }

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const MlpLayer& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
}

std::vector<LayerShape> MlpParams::shape() const {
    std::vector<LayerShape> s;
    s.reserve(layers_.size());
    for (const MlpLayer& layer : layers_) {
        s.push_back({layer.weight.rows(), layer.weight.cols(), layer.act});
    }
    return s;
}

bool MlpParams::operator==(const MlpParams& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].weight != other.layers_[i].weight) return false;
        if (layers_[i].bias != other.layers_[i].bias) return false;
        if (layers_[i].act != other.layers_[i].act) return false;
    }
    return true;
}

std::vector<LayerShape> make_shape(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                   std::size_t output_dim, Activation hidden_act,
                                   Activation output_act) {
    std::vector<LayerShape> shape;
    std::size_t in = input_dim;
    for (std::size_t width : hidden) {
        shape.push_back({in, width, hidden_act});
        in = width;
    }
    shape.push_back({in, output_dim, output_act});
    return shape;
}

MlpParams init_mlp(const std::vector<LayerShape>& shape, Rng& rng) {
    std::vector<MlpLayer> layers;
    layers.reserve(shape.size());
    for (const LayerShape& s : shape) {
        if (s.in == 0 || s.out == 0) {
            throw std::invalid_argument("init_mlp: zero-width layer");
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(s.in + s.out));
        Tensor2 w(s.in, s.out);
        for (double& x : w.data()) x = rng.uniform(-bound, bound);
        layers.push_back({std::move(w), std::vector<double>(s.out, 0.0), s.act});
    }
    return MlpParams(std::move(layers));
}

namespace {

void apply_activation(Activation act, const Tensor2& pre, Tensor2& post) {
    post = pre;
    switch (act) {
        case Activation::relu:
            for (double& x : post.data()) x = x > 0.0 ? x : 0.0;
            break;
        case Activation::tanh:
            for (double& x : post.data()) x = std::tanh(x);
            break;
        case Activation::sigmoid:
            for (double& x : post.data()) x = 1.0 / (1.0 + std::exp(-x));
            break;
        case Activation::identity:
            break;
    }
}

// delta := delta .* act'(z), using pre/post activations as appropriate.
void apply_activation_grad(Activation act, const Tensor2& pre, const Tensor2& post,
                           Tensor2& delta) {
    switch (act) {
        case Activation::relu:
            for (std::size_t i = 0; i < delta.size(); ++i) {
                if (pre.data()[i] <= 0.0) delta.data()[i] = 0.0;
            }
            break;
        case Activation::tanh:
            for (std::size_t i = 0; i < delta.size(); ++i) {
                const double a = post.data()[i];
                delta.data()[i] *= 1.0 - a * a;
            }
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < delta.size(); ++i) {
                const double a = post.data()[i];
                delta.data()[i] *= a * (1.0 - a);
            }
            break;
        case Activation::identity:
            break;
    }
}

}  // namespace

ForwardTrace mlp_forward(const MlpParams& params, const Tensor2& input) {
    if (params.layer_count() == 0) {
        throw std::invalid_argument("mlp_forward: empty model");
    }
    if (input.cols() != params.input_dim()) {
        throw std::invalid_argument("mlp_forward: input width " + std::to_string(input.cols()) +
                                    " does not match layer 0 input width " +
                                    std::to_string(params.input_dim()));
    }
    ForwardTrace trace;
    trace.input = input;
    trace.pre.reserve(params.layer_count());
    trace.post.reserve(params.layer_count());
    const Tensor2* current = &trace.input;
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
        const MlpLayer& layer = params.layers()[i];
        Tensor2 z = matmul_nn(*current, layer.weight);
        add_row_vector(z, layer.bias);
        Tensor2 a;
        apply_activation(layer.act, z, a);
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
        current = &trace.post.back();
    }
    return trace;
}

Gradients mlp_backward(const MlpParams& params, const ForwardTrace& trace,
                       const Tensor2& output_grad) {
    const std::size_t n_layers = params.layer_count();
    if (trace.pre.size() != n_layers || trace.post.size() != n_layers) {
        throw std::invalid_argument("mlp_backward: trace does not match model depth");
    }
    const Tensor2& out = trace.post.back();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
        throw std::invalid_argument("mlp_backward: output_grad shape " +
                                    std::to_string(output_grad.rows()) + "x" +
                                    std::to_string(output_grad.cols()) + " does not match output " +
                                    std::to_string(out.rows()) + "x" + std::to_string(out.cols()));
    }

    Gradients grads;
    grads.params.assign(params.parameter_count(), 0.0);

    // Per-layer flat offsets, in flatten_params order.
    std::vector<std::size_t> offsets(n_layers);
    std::size_t off = 0;
    for (std::size_t i = 0; i < n_layers; ++i) {
        offsets[i] = off;
        off += params.layers()[i].weight.size() + params.layers()[i].bias.size();
    }

    Tensor2 delta = output_grad;
    for (std::size_t li = n_layers; li-- > 0;) {
        const MlpLayer& layer = params.layers()[li];
        apply_activation_grad(layer.act, trace.pre[li], trace.post[li], delta);

        const Tensor2& layer_input = (li == 0) ? trace.input : trace.post[li - 1];
        Tensor2 w_grad = matmul_tn(layer_input, delta);

        double* flat = grads.params.data() + offsets[li];
        for (std::size_t i = 0; i < w_grad.size(); ++i) flat[i] = w_grad.data()[i];
        double* bias_flat = flat + w_grad.size();
        for (std::size_t j = 0; j < layer.bias.size(); ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < delta.rows(); ++r) s += delta.at(r, j);
            bias_flat[j] = s;
        }

        delta = matmul_nt(delta, layer.weight);
    }
    grads.input = std::move(delta);
    return grads;
}

std::vector<double> flatten_params(const MlpParams& params) {
    std::vector<double> flat;
    flat.reserve(params.parameter_count());
    for (const MlpLayer& layer : params.layers()) {
        flat.insert(flat.end(), layer.weight.data().begin(), layer.weight.data().end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

MlpParams unflatten_params(std::span<const double> flat, const std::vector<LayerShape>& shape) {
    std::size_t expected = 0;
    for (const LayerShape& s : shape) expected += s.in * s.out + s.out;
    if (flat.size() != expected) {
        throw std::invalid_argument("unflatten_params: vector length " +
                                    std::to_string(flat.size()) + " != parameter count " +
                                    std::to_string(expected));
    }
    std::vector<MlpLayer> layers;
    layers.reserve(shape.size());
    std::size_t off = 0;
    for (const LayerShape& s : shape) {
        Tensor2 w(s.in, s.out, std::vector<double>(flat.begin() + off, flat.begin() + off + s.in * s.out));
        off += s.in * s.out;
        std::vector<double> bias(flat.begin() + off, flat.begin() + off + s.out);
        off += s.out;
        layers.push_back({std::move(w), std::move(bias), s.act});
    }
    return MlpParams(std::move(layers));
}

}  // namespace fedsynth
