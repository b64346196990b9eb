#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fedsynth {

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.5;  // GAN-friendly default
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
    bool operator==(const AdamConfig&) const = default;
};

/// Adam moment estimates for one flat parameter vector.
class AdamState {
public:
    AdamState() = default;
    AdamState(std::size_t param_count, AdamConfig config);

    /// Standard Adam update with bias correction; increments the step counter.
    void step(std::span<double> params, std::span<const double> grads);

    std::size_t size() const { return m_.size(); }
    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::int64_t t_ = 0;
};

}  // namespace fedsynth
