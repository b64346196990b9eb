#include "fedsynth/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsynth {
namespace {

std::size_t integer_side(std::size_t dim) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dim))));
    if (side * side != dim) {
        throw std::invalid_argument("MixtureSpec: image_like needs a square dim, got " +
                                    std::to_string(dim));
    }
    return side;
}

Tensor2 seeded_means(const MixtureSpec& spec) {
    if (spec.explicit_means.rows() > 0) return spec.explicit_means;
    Tensor2 means(spec.class_count, spec.dim);
    const Rng root(spec.mean_seed);
    if (!spec.image_like) {
        Rng rng = root.fork("means");
        for (double& v : means.data()) v = rng.uniform(-spec.mean_scale, spec.mean_scale);
        return means;
    }
    const std::size_t side = integer_side(spec.dim);
    const std::size_t coarse = (side + 1) / 2;
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        Rng rng = root.fork("template").fork(c);
        std::vector<double> grid(coarse * coarse);
        for (double& v : grid) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t col = 0; col < side; ++col) {
                means.at(c, r * side + col) = grid[(r / 2) * coarse + col / 2];
            }
        }
    }
    return means;
}

}  // namespace

void MixtureSpec::validate() const {
    if (class_count < 2) throw std::invalid_argument("MixtureSpec: need at least 2 classes");
    if (dim == 0) throw std::invalid_argument("MixtureSpec: dim must be >= 1");
    if (image_like) integer_side(dim);
    if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) {
        throw std::invalid_argument("MixtureSpec: invalid covariance: noise_sigma must be a "
                                    "positive real");
    }
    if (!(mean_scale > 0.0)) throw std::invalid_argument("MixtureSpec: mean_scale must be > 0");
    if (explicit_means.rows() > 0) {
        if (explicit_means.rows() != class_count || explicit_means.cols() != dim) {
            throw std::invalid_argument("MixtureSpec: explicit_means must be class_count x dim");
        }
        if (!explicit_means.all_finite()) {
            throw std::invalid_argument("MixtureSpec: non-finite explicit mean");
        }
    }
    if (!explicit_sigmas.empty()) {
        if (explicit_sigmas.size() != class_count) {
            throw std::invalid_argument("MixtureSpec: explicit_sigmas must have one entry per "
                                        "class");
        }
        for (double s : explicit_sigmas) {
            if (!(s > 0.0) || !std::isfinite(s)) {
                throw std::invalid_argument(
                    "MixtureSpec: invalid covariance: sigma must be a positive real, got " +
                    std::to_string(s));
            }
        }
    }
}

MixtureResult gen_mixture_dataset(const MixtureSpec& spec, Rng& rng) {
    spec.validate();
    const Tensor2 means = seeded_means(spec);

    double sigma_max = spec.noise_sigma;
    for (double s : spec.explicit_sigmas) sigma_max = std::max(sigma_max, s);
    double mean_lo = means.size() > 0 ? means.data()[0] : 0.0;
    double mean_hi = mean_lo;
    for (double v : means.data()) {
        mean_lo = std::min(mean_lo, v);
        mean_hi = std::max(mean_hi, v);
    }
    const double lo = mean_lo - 4.0 * sigma_max;
    const double hi = mean_hi + 4.0 * sigma_max;

    AffineMap map;
    map.scale = 2.0 / (hi - lo);
    map.offset = -1.0 - map.scale * lo;

    const std::size_t total = spec.class_count * spec.points_per_class;
    Tensor2 features(total, spec.dim);
    std::vector<int> labels(total);
    std::size_t row = 0;
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        const double sigma = spec.explicit_sigmas.empty() ? spec.noise_sigma
                                                          : spec.explicit_sigmas[c];
        for (std::size_t p = 0; p < spec.points_per_class; ++p, ++row) {
            labels[row] = static_cast<int>(c);
            auto out = features.row(row);
            for (std::size_t j = 0; j < spec.dim; ++j) {
                const double raw = means.at(c, j) + sigma * rng.normal();
                out[j] = std::clamp(map.apply(raw), -1.0, 1.0);
            }
        }
    }

    MixtureResult result;
    result.data = make_dataset(std::move(features), std::move(labels), spec.class_count,
                               Provenance::real);
    result.map = map;
    result.raw_means = means;
    return result;
}

}  // namespace fedsynth
