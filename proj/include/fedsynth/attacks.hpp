#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedsynth/adam.hpp"
#include "fedsynth/dataset.hpp"
#include "fedsynth/mlp.hpp"
#include "fedsynth/privacy.hpp"
#include "fedsynth/rng.hpp"

namespace fedsynth {

struct StudentArch {
    std::vector<std::size_t> hidden = {1000, 300};
};

struct StudentHyper {
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};

    void validate() const;
};

/// Softmax classifier; the net outputs logits (identity activation) and the
/// softmax lives in the loss/prediction. input_scale/input_offset map raw
/// features into the trained scale: x_train = scale * x_raw + offset.
struct StudentModel {
    MlpParams params;
    std::size_t class_count = 0;
    double input_scale = 1.0;
    double input_offset = 0.0;
};

/// Row-wise numerically stable softmax.
Tensor2 softmax_rows(const Tensor2& logits);

/// Cross-entropy training with Adam; requires at least 2 distinct labels.
StudentModel train_student(const LabelledDataset& train, const StudentArch& arch,
                           const StudentHyper& hyper, Rng& rng);

/// Fraction of argmax predictions matching labels (ties break low).
double evaluate_accuracy(const StudentModel& model, const LabelledDataset& test);

struct InversionResult {
    int target_class = 0;
    std::vector<double> reconstruction;       // clamped to [-1, 1]
    std::vector<double> objective_trajectory;  // log p(target|x), init first
    std::size_t iterations = 0;
};

std::string inversion_result_json(const InversionResult& result);

/// Gradient ascent on log p(target|x) from the zero vector, clamping to
/// [-1, 1] each step; returns the best-objective iterate.
InversionResult invert_class(const StudentModel& model, int target_class, std::size_t steps,
                             double step_size);

struct ReconstructionReport {
    std::vector<double> nearest_mean_distance;  // per inversion, in metric space
    std::vector<int> nearest_mean_class;
    std::vector<int> target_class;
    double detection_rate = 0.0;
    double recognition_rate = 0.0;
    double tau_d = 0.0;
    double tau_r = 0.0;
};

std::string reconstruction_report_json(const ReconstructionReport& report);

/// Nearest-class-mean proxy: detected when the closest real class mean lies
/// within tau_d; recognized when additionally that mean is the target class
/// and within tau_r. Every class must appear in `real`.
ReconstructionReport reconstruction_report(const std::vector<InversionResult>& results,
                                           const LabelledDataset& real,
                                           const SimilarityMetric& sim, double tau_d,
                                           double tau_r);

}  // namespace fedsynth
