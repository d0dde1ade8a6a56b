#include "quap/optim.hpp"

#include <cmath>
#include <string>

#include "quap/error.hpp"

namespace quap {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and moment lengths differ");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i) + " (step " +
                               std::to_string(state.step + 1) + ")");
        }
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

double lr_schedule(double base_lr, double decay_factor, int interval_epochs, int epoch) {
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw DomainError("lr_schedule: decay factor must be in (0,1]");
    if (interval_epochs <= 0) throw DomainError("lr_schedule: decay interval must be positive");
    if (epoch < 0) throw DomainError("lr_schedule: negative epoch");
    return base_lr * std::pow(decay_factor, epoch / interval_epochs);
}

}  // namespace quap
