#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fedsynth/rng.hpp"
#include "fedsynth/tensor.hpp"

namespace fedsynth {

enum class Provenance { real, artificial };

std::string provenance_name(Provenance p);

// Feature rows live in [-1, 1]; labels index classes [0, class_count).
struct LabelledDataset {
    Tensor2 features;
    std::vector<int> labels;
    std::size_t class_count = 0;
    Provenance provenance = Provenance::real;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
};

// Validates shape, label range, and the [-1,1] feature bound.
LabelledDataset make_dataset(Tensor2 features, std::vector<int> labels, std::size_t class_count,
                             Provenance provenance);

LabelledDataset subset(const LabelledDataset& data, const std::vector<std::size_t>& indices);

// Concatenated rows keep the provenance of `a`; class counts must agree.
LabelledDataset concat(const LabelledDataset& a, const LabelledDataset& b);

// Per-class mean feature vectors, one row per class. Empty classes stay zero.
Tensor2 class_means(const LabelledDataset& data);

std::vector<std::size_t> label_histogram(const LabelledDataset& data);

struct TrainTestSplit {
    LabelledDataset train;
    LabelledDataset test;
};

// Shuffled split; test_fraction in (0,1) and both sides must end up nonempty.
TrainTestSplit train_test_split(const LabelledDataset& data, double test_fraction, Rng& rng);

}  // namespace fedsynth
