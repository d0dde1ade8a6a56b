#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/classifier.hpp"

namespace quap::attack {

struct AttackMode {
    bool targeted = false;
    int target = 0;

    static AttackMode untargeted() { return {}; }
    static AttackMode toward(int c) { return {true, c}; }
    std::string describe() const;
};

/// Targeted: CE(probs, target). Untargeted: -CE(probs, label).
/// `outcomes` are the raw 2^K outcome probabilities; the gradient is w.r.t. them.
classifier::CrossEntropy fooling_loss(std::span<const double> outcomes, int k, int label, const AttackMode& mode);

struct AttackReport {
    double rate = 0.0;           // fooled / evaluated
    std::size_t evaluated = 0;   // clean-correct samples
    std::size_t fooled = 0;
    std::size_t skipped = 0;     // perturbed input degenerate (additive only)
    std::optional<double> target_rate;  // targeted mode: share of evaluated samples sent to the target
    std::vector<double> perturbation;   // additive delta, empty for unitary attacks
    std::vector<double> loss_trace;     // mean loss per epoch
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const;
};

/// Tallies one evaluated sample into the report.
void tally(AttackReport& r, int clean_pred, int adv_pred, int label, const AttackMode& mode);
void finish(AttackReport& r, const AttackMode& mode);

}  // namespace quap::attack
