#include "fedsynth/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace fedsynth {
namespace {

Tensor2 scale_inputs(const StudentModel& model, const Tensor2& raw) {
    if (model.input_scale == 1.0 && model.input_offset == 0.0) return raw;
    Tensor2 out = raw;
    for (double& v : out.data()) v = model.input_scale * v + model.input_offset;
    return out;
}

int argmax_row(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
        if (row[j] > row[best]) best = j;
    }
    return static_cast<int>(best);
}

}  // namespace

void StudentHyper::validate() const {
    if (batch_size == 0) throw std::invalid_argument("StudentHyper: batch_size must be >= 1");
    adam.validate();
}

Tensor2 softmax_rows(const Tensor2& logits) {
    Tensor2 out = logits;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        const double hi = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - hi);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return out;
}

StudentModel train_student(const LabelledDataset& train, const StudentArch& arch,
                           const StudentHyper& hyper, Rng& rng) {
    hyper.validate();
    if (train.size() == 0) throw std::invalid_argument("train_student: empty training set");
    const std::set<int> distinct(train.labels.begin(), train.labels.end());
    if (distinct.size() < 2) {
        throw std::invalid_argument("train_student: need at least 2 classes present, got " +
                                    std::to_string(distinct.size()));
    }
    for (std::size_t w : arch.hidden) {
        if (w == 0) throw std::invalid_argument("train_student: zero-width hidden layer");
    }

    StudentModel model;
    model.class_count = train.class_count;
    model.params = init_mlp(make_shape(train.dim(), arch.hidden, train.class_count,
                                       Activation::relu, Activation::identity),
                            rng);
    AdamState opt(model.params.parameter_count(), hyper.adam);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
            const std::size_t end = std::min(start + hyper.batch_size, order.size());
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(end));
            const LabelledDataset batch = subset(train, idx);
            const std::size_t b = batch.size();

            const ForwardTrace trace = mlp_forward(model.params, batch.features);
            const Tensor2 probs = softmax_rows(trace.output());

            // Mean cross-entropy gradient at the logits: (softmax - onehot) / B.
            Tensor2 grad = probs;
            for (std::size_t i = 0; i < b; ++i) {
                grad.at(i, static_cast<std::size_t>(batch.labels[i])) -= 1.0;
            }
            for (double& v : grad.data()) v /= static_cast<double>(b);

            const Gradients grads = mlp_backward(model.params, trace, grad);
            std::vector<double> flat = flatten_params(model.params);
            opt.step(flat, grads.params);
            model.params = unflatten_params(flat, model.params.shape());
        }
    }
    return model;
}

double evaluate_accuracy(const StudentModel& model, const LabelledDataset& test) {
    if (test.size() == 0) throw std::invalid_argument("evaluate_accuracy: empty test set");
    const Tensor2 inputs = scale_inputs(model, test.features);
    const ForwardTrace trace = mlp_forward(model.params, inputs);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (argmax_row(trace.output().row(i)) == test.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

InversionResult invert_class(const StudentModel& model, int target_class, std::size_t steps,
                             double step_size) {
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= model.class_count) {
        throw std::invalid_argument("invert_class: class " + std::to_string(target_class) +
                                    " outside [0, " + std::to_string(model.class_count) + ")");
    }
    if (steps == 0) throw std::invalid_argument("invert_class: steps must be >= 1");
    const std::size_t d = model.params.input_dim();
    const auto target = static_cast<std::size_t>(target_class);

    Tensor2 x(1, d);
    x.fill(0.0);

    const auto objective = [&](const Tensor2& input) {
        const ForwardTrace trace = mlp_forward(model.params, scale_inputs(model, input));
        const Tensor2 probs = softmax_rows(trace.output());
        return std::log(std::max(probs.at(0, target), 1e-300));
    };

    InversionResult result;
    result.target_class = target_class;
    result.iterations = steps;
    result.reconstruction.assign(x.row(0).begin(), x.row(0).end());
    double best_obj = objective(x);
    result.objective_trajectory.push_back(best_obj);

    for (std::size_t step = 0; step < steps; ++step) {
        const Tensor2 scaled = scale_inputs(model, x);
        const ForwardTrace trace = mlp_forward(model.params, scaled);
        const Tensor2 probs = softmax_rows(trace.output());
        // d log p(target) / d logit_j = delta_tj - p_j.
        Tensor2 out_grad(1, model.class_count);
        for (std::size_t j = 0; j < model.class_count; ++j) out_grad.at(0, j) = -probs.at(0, j);
        out_grad.at(0, target) += 1.0;
        const Gradients grads = mlp_backward(model.params, trace, out_grad);
        for (std::size_t j = 0; j < d; ++j) {
            const double g = grads.input.at(0, j) * model.input_scale;
            x.at(0, j) = std::clamp(x.at(0, j) + step_size * g, -1.0, 1.0);
        }
        const double obj = objective(x);
        result.objective_trajectory.push_back(obj);
        if (obj > best_obj) {
            best_obj = obj;
            result.reconstruction.assign(x.row(0).begin(), x.row(0).end());
        }
    }
    return result;
}

std::string inversion_result_json(const InversionResult& result) {
    nlohmann::json j;
    j["target_class"] = result.target_class;
    j["reconstruction"] = result.reconstruction;
    j["objective_trajectory"] = result.objective_trajectory;
    j["iterations"] = result.iterations;
    return j.dump(2);
}

ReconstructionReport reconstruction_report(const std::vector<InversionResult>& results,
                                           const LabelledDataset& real,
                                           const SimilarityMetric& sim, double tau_d,
                                           double tau_r) {
    if (real.size() == 0) throw std::invalid_argument("reconstruction_report: empty real set");
    const std::vector<std::size_t> counts = label_histogram(real);
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            throw std::invalid_argument("reconstruction_report: class " + std::to_string(c) +
                                        " has no real examples");
        }
    }
    const Tensor2 means = class_means(real);
    const Tensor2 emb_means = metric_embed(sim, means);

    ReconstructionReport report;
    report.tau_d = tau_d;
    report.tau_r = tau_r;
    std::size_t detected = 0;
    std::size_t recognized = 0;
    for (const InversionResult& r : results) {
        if (r.reconstruction.size() != real.dim()) {
            throw std::invalid_argument("reconstruction_report: reconstruction dim mismatch");
        }
        Tensor2 recon(1, real.dim());
        std::copy(r.reconstruction.begin(), r.reconstruction.end(), recon.row(0).begin());
        const Tensor2 emb_recon = metric_embed(sim, recon);
        std::size_t best = 0;
        double best_d2 = squared_distance(emb_recon.row(0), emb_means.row(0));
        for (std::size_t c = 1; c < real.class_count; ++c) {
            const double d2 = squared_distance(emb_recon.row(0), emb_means.row(c));
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        const double dist = std::sqrt(best_d2);
        report.nearest_mean_distance.push_back(dist);
        report.nearest_mean_class.push_back(static_cast<int>(best));
        report.target_class.push_back(r.target_class);
        const bool detect = dist <= tau_d;
        if (detect) ++detected;
        if (detect && static_cast<int>(best) == r.target_class && dist <= tau_r) ++recognized;
    }
    if (!results.empty()) {
        report.detection_rate = static_cast<double>(detected) / static_cast<double>(results.size());
        report.recognition_rate =
            static_cast<double>(recognized) / static_cast<double>(results.size());
    }
    return report;
}

std::string reconstruction_report_json(const ReconstructionReport& report) {
    nlohmann::json j;
    j["nearest_mean_distance"] = report.nearest_mean_distance;
    j["nearest_mean_class"] = report.nearest_mean_class;
    j["target_class"] = report.target_class;
    j["detection_rate"] = report.detection_rate;
    j["recognition_rate"] = report.recognition_rate;
    j["tau_d"] = report.tau_d;
    j["tau_r"] = report.tau_r;
    return j.dump(2);
}

}  // namespace fedsynth
