#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "quap/classifier.hpp"

namespace quap::theory {

using classifier::ClassProbMatrices;

/// d (eps^2 + 2 eps)
double lemma2_bound(double epsilon, std::size_t d);
/// sqrt(2 - 2 sqrt(1 - 1/|p|^2)), |p| > 1
double lemma3_bound(double norm_p);
/// sqrt(2 - 2 (delta + z) / sqrt(delta^2 + 2 delta z + 1)), z = phat . x
double lemma4_bound(double delta, double phat_dot_x);

/// Upper end of the epsilon_c range for dimension d, -1 + sqrt(1 + 1/(2d)).
double epsilon_c_max(std::size_t d);
/// The d-independent ceiling, -1 + sqrt(3/2).
inline const double kEpsilonCCeiling = -1.0 + 1.224744871391589;

/// -1 + sqrt(1 + a / 2d) with a the gap between class c and the runner-up on
/// phat (raw x^T M x over the first k classes). c must be the argmax.
double epsilon_c(const ClassProbMatrices& mc, std::span<const double> phat, int c, std::size_t d);
double epsilon_c(const ClassProbMatrices& mc, std::span<const double> phat, int c);

/// Minimum perturbation norm, or unbounded when epsilon_c = 0.
class MinNorm {
public:
    static MinNorm finite(double v) { return MinNorm(v); }
    static MinNorm unbounded() { return MinNorm(); }
    bool is_unbounded() const { return !value_; }
    double value() const;  // throws DomainError when unbounded
    /// delta >= bound; never true for the unbounded variant.
    bool reached_by(double delta) const { return value_ && delta >= *value_; }

private:
    MinNorm() = default;
    explicit MinNorm(double v) : value_(v) {}
    std::optional<double> value_;
};

/// 2 / (eps_c sqrt(4 - eps_c^2))
MinNorm theorem1_min_norm(double eps_c);

enum class RegionCase { AllInputs, TwoSided, OneSided };
std::string to_string(RegionCase c);

struct BoundReport {
    double delta = 0.0;
    double epsilon_c = 0.0;
    MinNorm min_norm = MinNorm::unbounded();
    std::optional<double> t1;
    std::optional<double> t2;
    RegionCase region = RegionCase::AllInputs;
    // filled by the Monte-Carlo verifier
    std::optional<double> empirical_rate;
    std::size_t samples = 0;
    std::size_t satisfying = 0;
    std::uint64_t seed = 0;

    /// Whether an input with phat . x = z is covered by the region.
    bool covers(double z) const;
};

/// Region of inputs guaranteed to land in class c under |p| = delta.
BoundReport theorem2_region(double delta, double eps_c);

nlohmann::json to_json(const BoundReport& r);

/// Conic alpha x^2 + beta x y + gamma y^2 = P for class c of a 1-qubit classifier.
struct Conic {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double beta_imag = 0.0;  // imaginary part of M01 + M10, zero by Hermiticity
    double discriminant() const { return beta * beta - 4.0 * alpha * gamma; }
};
Conic xor_conic(const ClassProbMatrices& mc, int c = 0);

// Monte-Carlo checks over unit vectors drawn by normalizing Gaussians.

struct Sufficiency {
    std::size_t samples = 0;
    std::size_t satisfying = 0;  // inputs meeting the condition
    std::size_t as_c = 0;        // of those, classified as c after perturbation
    double rate() const { return satisfying ? static_cast<double>(as_c) / satisfying : 1.0; }
};

/// y = (p + x)/|p + x| with p = norm * phat, x random unit; counts argmax(y) == c.
Sufficiency verify_theorem1(const ClassProbMatrices& mc, std::span<const double> phat, int c, double norm,
                            std::size_t samples, std::uint64_t seed);
/// As above with |p| = report.delta, counting only inputs the region covers.
Sufficiency verify_theorem2(const ClassProbMatrices& mc, std::span<const double> phat, int c,
                            const BoundReport& report, std::size_t samples, std::uint64_t seed);

/// Largest |phat - y| over sampled unit x in dimension d with |p| = norm_p.
double sampled_max_distance(double norm_p, std::size_t d, std::size_t samples, std::uint64_t seed);
/// Largest (|phat - y| - lemma4_bound(|p|, phat . x)) over samples; <= 0 when the bound holds.
double lemma4_worst_gap(double norm_p, double delta, std::size_t d, std::size_t samples, std::uint64_t seed);
/// Largest |P_y - P_x| - lemma2_bound over pairs with |x - y| = epsilon.
double lemma2_worst_gap(const ClassProbMatrices& mc, double epsilon, std::size_t samples, std::uint64_t seed);

}  // namespace quap::theory
