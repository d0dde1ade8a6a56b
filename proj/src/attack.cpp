#include "quap/attack.hpp"

#include "quap/error.hpp"

namespace quap::attack {

std::string AttackMode::describe() const {
    return targeted ? "targeted:" + std::to_string(target) : "untargeted";
}

classifier::CrossEntropy fooling_loss(std::span<const double> outcomes, int k, int label, const AttackMode& mode) {
    if (mode.targeted) {
        if (mode.target < 0 || mode.target >= k) throw InputError("fooling_loss: target class out of range");
        return classifier::cross_entropy(outcomes, k, mode.target);
    }
    auto ce = classifier::cross_entropy(outcomes, k, label);
    ce.loss = -ce.loss;
    for (auto& g : ce.grad) g = -g;
    return ce;
}

void tally(AttackReport& r, int clean_pred, int adv_pred, int label, const AttackMode& mode) {
    if (clean_pred != label) return;
    ++r.evaluated;
    if (adv_pred != label) ++r.fooled;
    if (mode.targeted && adv_pred == mode.target) r.target_rate = r.target_rate.value_or(0.0) + 1.0;
}

void finish(AttackReport& r, const AttackMode& mode) {
    r.rate = r.evaluated ? static_cast<double>(r.fooled) / static_cast<double>(r.evaluated) : 0.0;
    if (mode.targeted) {
        r.target_rate = r.evaluated ? r.target_rate.value_or(0.0) / static_cast<double>(r.evaluated) : 0.0;
    }
}

nlohmann::json AttackReport::to_json() const {
    nlohmann::json j;
    j["misclassification_rate"] = rate;
    j["evaluated"] = evaluated;
    j["fooled"] = fooled;
    j["skipped"] = skipped;
    j["target_rate"] = target_rate ? nlohmann::json(*target_rate) : nlohmann::json(nullptr);
    j["perturbation"] = perturbation;
    j["loss_trace"] = loss_trace;
    j["config"] = config;
    return j;
}

}  // namespace quap::attack
