#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace quap {

struct AdamState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t n, double beta1_, double beta2_, double eps_)
        : m(n, 0.0), v(n, 0.0), beta1(beta1_), beta2(beta2_), eps(eps_) {}
};

/// One bias-corrected Adam update in place. Throws NumericError on a
/// non-finite gradient, naming the first offending index.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);

/// base * factor^floor(epoch / interval)
double lr_schedule(double base_lr, double decay_factor, int interval_epochs, int epoch);

}  // namespace quap
