#include "fedsynth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fedsynth {

std::string provenance_name(Provenance p) {
    return p == Provenance::real ? "real" : "artificial";
}

LabelledDataset make_dataset(Tensor2 features, std::vector<int> labels, std::size_t class_count,
                             Provenance provenance) {
    if (features.rows() != labels.size()) {
        throw std::invalid_argument("make_dataset: " + std::to_string(features.rows()) +
                                    " feature rows vs " + std::to_string(labels.size()) +
                                    " labels");
    }
    if (class_count == 0) throw std::invalid_argument("make_dataset: class_count must be >= 1");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_count) {
            throw std::invalid_argument("make_dataset: label " + std::to_string(labels[i]) +
                                        " at row " + std::to_string(i) + " outside [0, " +
                                        std::to_string(class_count) + ")");
        }
    }
    for (std::size_t i = 0; i < features.data().size(); ++i) {
        const double v = features.data()[i];
        if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
            throw std::invalid_argument("make_dataset: feature value " + std::to_string(v) +
                                        " at flat index " + std::to_string(i) +
                                        " outside [-1, 1]");
        }
    }
    LabelledDataset out;
    out.features = std::move(features);
    out.labels = std::move(labels);
    out.class_count = class_count;
    out.provenance = provenance;
    return out;
}

LabelledDataset subset(const LabelledDataset& data, const std::vector<std::size_t>& indices) {
    Tensor2 feats(indices.size(), data.dim());
    std::vector<int> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= data.size()) {
            throw std::out_of_range("subset: index " + std::to_string(src) + " >= " +
                                    std::to_string(data.size()));
        }
        auto row = data.features.row(src);
        std::copy(row.begin(), row.end(), feats.row(i).begin());
        labels[i] = data.labels[src];
    }
    LabelledDataset out;
    out.features = std::move(feats);
    out.labels = std::move(labels);
    out.class_count = data.class_count;
    out.provenance = data.provenance;
    return out;
}

LabelledDataset concat(const LabelledDataset& a, const LabelledDataset& b) {
    if (a.class_count != b.class_count) {
        throw std::invalid_argument("concat: class counts differ: " +
                                    std::to_string(a.class_count) + " vs " +
                                    std::to_string(b.class_count));
    }
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("concat: feature dims differ: " + std::to_string(a.dim()) +
                                    " vs " + std::to_string(b.dim()));
    }
    Tensor2 feats(a.size() + b.size(), a.dim());
    std::copy(a.features.data().begin(), a.features.data().end(), feats.data().begin());
    std::copy(b.features.data().begin(), b.features.data().end(),
              feats.data().begin() + static_cast<std::ptrdiff_t>(a.features.data().size()));
    std::vector<int> labels = a.labels;
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
    LabelledDataset out;
    out.features = std::move(feats);
    out.labels = std::move(labels);
    out.class_count = a.class_count;
    out.provenance = a.provenance;
    return out;
}

Tensor2 class_means(const LabelledDataset& data) {
    Tensor2 means(data.class_count, data.dim());
    std::vector<std::size_t> counts(data.class_count, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto c = static_cast<std::size_t>(data.labels[i]);
        ++counts[c];
        auto row = data.features.row(i);
        for (std::size_t j = 0; j < data.dim(); ++j) means.at(c, j) += row[j];
    }
    for (std::size_t c = 0; c < data.class_count; ++c) {
        if (counts[c] == 0) continue;
        for (std::size_t j = 0; j < data.dim(); ++j) {
            means.at(c, j) /= static_cast<double>(counts[c]);
        }
    }
    return means;
}

std::vector<std::size_t> label_histogram(const LabelledDataset& data) {
    std::vector<std::size_t> counts(data.class_count, 0);
    for (int label : data.labels) ++counts[static_cast<std::size_t>(label)];
    return counts;
}

TrainTestSplit train_test_split(const LabelledDataset& data, double test_fraction, Rng& rng) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("train_test_split: test_fraction must be in (0,1)");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto test_n = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(data.size())));
    if (test_n == 0 || test_n >= data.size()) {
        throw std::invalid_argument("train_test_split: split leaves an empty side (" +
                                    std::to_string(test_n) + " of " +
                                    std::to_string(data.size()) + " rows in test)");
    }
    std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_n));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_n), order.end());
    return TrainTestSplit{subset(data, train_idx), subset(data, test_idx)};
}

}  // namespace fedsynth
