#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fedsynth/dataset.hpp"
#include "fedsynth/rng.hpp"
#include "fedsynth/tensor.hpp"

namespace fedsynth {

/// y = scale * x + offset, with the exact inverse recorded.
struct AffineMap {
    double scale = 1.0;
    double offset = 0.0;

    double apply(double x) const { return scale * x + offset; }
    double invert(double y) const { return (y - offset) / scale; }
};

/// Gaussian-mixture benchmark data. Class means come from mean_seed: in
/// image-like mode each class is a random blocky side x side template (dim
/// must be a perfect square); otherwise means are uniform in +-mean_scale.
/// Explicit means/sigmas override the seeded ones. Covariances are isotropic,
/// sigma = explicit_sigmas[c] when given, else noise_sigma.
struct MixtureSpec {
    std::size_t class_count = 8;
    std::size_t dim = 64;
    std::size_t points_per_class = 1000;
    bool image_like = true;
    double noise_sigma = 0.35;
    double mean_scale = 3.0;
    std::uint64_t mean_seed = 0;
    Tensor2 explicit_means;               // rows = class_count when nonempty
    std::vector<double> explicit_sigmas;  // length = class_count when nonempty

    void validate() const;
};

struct MixtureResult {
    LabelledDataset data;  // features mapped into [-1, 1]
    AffineMap map;         // the raw -> [-1, 1] map used
    Tensor2 raw_means;     // class means in raw space, one row per class
};

/// Labelled mixture draw; rows are grouped by class, points_per_class each.
/// Values farther than the 4-sigma headroom built into the map are clamped.
MixtureResult gen_mixture_dataset(const MixtureSpec& spec, Rng& rng);

}  // namespace fedsynth
