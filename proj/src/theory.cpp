#include "quap/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "quap/error.hpp"
#include "quap/rng.hpp"

namespace quap::theory {

double lemma2_bound(double epsilon, std::size_t d) {
    if (!(epsilon >= 0.0)) throw DomainError("lemma2_bound: epsilon must be non-negative");
    return static_cast<double>(d) * (epsilon * epsilon + 2.0 * epsilon);
}

double lemma3_bound(double norm_p) {
    if (!(norm_p > 1.0)) throw DomainError("lemma3_bound: |p| must exceed 1");
    const double inner = std::sqrt(1.0 - 1.0 / (norm_p * norm_p));
    return std::sqrt(std::max(0.0, 2.0 - 2.0 * inner));
}

double lemma4_bound(double delta, double z) {
    if (!(delta > 0.0)) throw DomainError("lemma4_bound: delta must be positive");
    if (!(z >= -1.0 - 1e-12 && z <= 1.0 + 1e-12)) throw DomainError("lemma4_bound: phat.x must lie in [-1,1]");
    const double den2 = delta * delta + 2.0 * delta * z + 1.0;
    if (!(den2 > 1e-300)) throw DomainError("lemma4_bound: degenerate denominator (p = -x)");
    const double f = (delta + z) / std::sqrt(den2);
    return std::sqrt(std::max(0.0, 2.0 - 2.0 * f));
}

double epsilon_c_max(std::size_t d) {
    if (d == 0) throw DomainError("epsilon_c_max: d must be positive");
    return -1.0 + std::sqrt(1.0 + 1.0 / (2.0 * static_cast<double>(d)));
}

double epsilon_c(const ClassProbMatrices& mc, std::span<const double> phat, int c, std::size_t d) {
    if (c < 0 || c >= mc.k) throw DomainError("epsilon_c: class out of range");
    if (mc.k < 2) throw DomainError("epsilon_c: needs at least two classes");
    if (d == 0) throw DomainError("epsilon_c: d must be positive");
    const auto p = classifier::outcome_probs_mc(mc, phat);
    double runner = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mc.k; ++a) {
        if (a != c) runner = std::max(runner, p[a]);
    }
    const double gap = p[c] - runner;
    if (gap < -1e-12) {
        std::ostringstream msg;
        msg << "epsilon_c: class " << c << " is not the argmax of phat (gap " << gap << ")";
        throw DomainError(msg.str());
    }
    return -1.0 + std::sqrt(1.0 + std::max(0.0, gap) / (2.0 * static_cast<double>(d)));
}

double epsilon_c(const ClassProbMatrices& mc, std::span<const double> phat, int c) {
    return epsilon_c(mc, phat, c, mc.dim());
}

double MinNorm::value() const {
    if (!value_) throw DomainError("minimum norm is unbounded");
    return *value_;
}

MinNorm theorem1_min_norm(double eps_c) {
    if (!(eps_c >= 0.0 && eps_c <= kEpsilonCCeiling + 1e-15)) {
        throw DomainError("theorem1_min_norm: epsilon_c outside [0, -1 + sqrt(3/2)]");
    }
    if (eps_c == 0.0) return MinNorm::unbounded();
    return MinNorm::finite(2.0 / (eps_c * std::sqrt(4.0 - eps_c * eps_c)));
}

std::string to_string(RegionCase c) {
    switch (c) {
        case RegionCase::AllInputs: return "AllInputs";
        case RegionCase::TwoSided: return "TwoSided";
        case RegionCase::OneSided: return "OneSided";
    }
    return "?";
}

bool BoundReport::covers(double z) const {
    switch (region) {
        case RegionCase::AllInputs: return true;
        case RegionCase::TwoSided: return (t1 && z <= *t1) || (t2 && z >= *t2);
        case RegionCase::OneSided: return t2 && z >= *t2;
    }
    return false;
}

BoundReport theorem2_region(double delta, double eps_c) {
    if (!(delta > 0.0)) throw DomainError("theorem2_region: delta must be positive");
    BoundReport r;
    r.delta = delta;
    r.epsilon_c = eps_c;
    r.min_norm = theorem1_min_norm(eps_c);
    if (r.min_norm.reached_by(delta)) {
        r.region = RegionCase::AllInputs;
        return r;
    }
    // t^2 + 2 delta e' t + (e'(delta^2 + 1) - 1) = 0
    const double e = eps_c * eps_c - std::pow(eps_c, 4) / 4.0;
    const double b = delta * e;
    const double disc = b * b - (e * (delta * delta + 1.0) - 1.0);
    if (disc < 0.0) {
        throw NumericError("theorem2_region: complex thresholds below the minimum norm (internal inconsistency)");
    }
    const double s = std::sqrt(disc);
    r.t1 = -b - s;
    r.t2 = -b + s;
    r.region = delta >= 1.0 ? RegionCase::TwoSided : RegionCase::OneSided;
    if (r.region == RegionCase::OneSided) r.t1.reset();
    return r;
}

nlohmann::json to_json(const BoundReport& r) {
    nlohmann::json j;
    j["delta"] = r.delta;
    j["epsilon_c"] = r.epsilon_c;
    if (r.min_norm.is_unbounded()) j["min_norm"] = "unbounded";
    else j["min_norm"] = r.min_norm.value();
    j["t1"] = r.t1 ? nlohmann::json(*r.t1) : nlohmann::json(nullptr);
    j["t2"] = r.t2 ? nlohmann::json(*r.t2) : nlohmann::json(nullptr);
    j["case"] = to_string(r.region);
    j["empirical_rate"] = r.empirical_rate ? nlohmann::json(*r.empirical_rate) : nlohmann::json(nullptr);
    j["samples"] = r.samples;
    j["satisfying"] = r.satisfying;
    j["seed"] = r.seed;
    return j;
}

Conic xor_conic(const ClassProbMatrices& mc, int c) {
    if (mc.D != 1 || mc.K != 1) throw ShapeError("xor_conic: needs a D=1, K=1 classifier");
    if (c < 0 || c >= static_cast<int>(mc.outcomes())) throw IndexError("xor_conic: class out of range");
    const auto& m = mc.m[c];
    Conic k;
    k.alpha = m(0, 0).real();
    k.gamma = m(1, 1).real();
    const auto cross = m(0, 1) + m(1, 0);
    k.beta = cross.real();
    k.beta_imag = cross.imag();
    return k;
}

namespace {

std::vector<double> unit_gaussian(std::size_t d, Rng& rng) {
    std::vector<double> v(d);
    double s = 0.0;
    do {
        s = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            s += x * x;
        }
    } while (!(s > 0.0));
    const double inv = 1.0 / std::sqrt(s);
    for (auto& x : v) x *= inv;
    return v;
}

double dotp(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Normalized phat * norm + x; false if the sum vanishes.
bool perturbed(std::span<const double> phat, double norm, std::span<const double> x, std::vector<double>& y) {
    y.resize(x.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = norm * phat[i] + x[i];
        s += y[i] * y[i];
    }
    if (!(s > 1e-300)) return false;
    const double inv = 1.0 / std::sqrt(s);
    for (auto& v : y) v *= inv;
    return true;
}

void check_phat(const ClassProbMatrices& mc, std::span<const double> phat) {
    if (phat.size() != mc.dim()) throw ShapeError("theory: phat dimension mismatch");
    if (std::abs(std::sqrt(dotp(phat, phat)) - 1.0) > 1e-9) throw DomainError("theory: phat must be unit norm");
}

Sufficiency sample_region(const ClassProbMatrices& mc, std::span<const double> phat, int c, double norm,
                          const BoundReport* region, std::size_t samples, std::uint64_t seed) {
    check_phat(mc, phat);
    Sufficiency out;
    out.samples = samples;
    std::vector<double> y;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng rng(seed, "theory-sample", i);
        const auto x = unit_gaussian(mc.dim(), rng);
        if (region && !region->covers(dotp(phat, x))) continue;
        if (!perturbed(phat, norm, x, y)) continue;
        ++out.satisfying;
        const auto p = classifier::outcome_probs_mc(mc, y);
        if (classifier::argmax(std::span<const double>(p.data(), mc.k)) == c) ++out.as_c;
    }
    return out;
}

}  // namespace

Sufficiency verify_theorem1(const ClassProbMatrices& mc, std::span<const double> phat, int c, double norm,
                            std::size_t samples, std::uint64_t seed) {
    return sample_region(mc, phat, c, norm, nullptr, samples, seed);
}

Sufficiency verify_theorem2(const ClassProbMatrices& mc, std::span<const double> phat, int c,
                            const BoundReport& report, std::size_t samples, std::uint64_t seed) {
    return sample_region(mc, phat, c, report.delta, &report, samples, seed);
}

double sampled_max_distance(double norm_p, std::size_t d, std::size_t samples, std::uint64_t seed) {
    if (d == 0) throw DomainError("sampled_max_distance: d must be positive");
    Rng rng(seed, "lemma-distance");
    const auto phat = unit_gaussian(d, rng);
    double best = 0.0;
    std::vector<double> y;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r(seed, "lemma-distance-x", i);
        const auto x = unit_gaussian(d, r);
        if (!perturbed(phat, norm_p, x, y)) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (phat[j] - y[j]) * (phat[j] - y[j]);
        best = std::max(best, std::sqrt(s));
    }
    return best;
}

double lemma4_worst_gap(double norm_p, double delta, std::size_t d, std::size_t samples, std::uint64_t seed) {
    if (norm_p < delta) throw DomainError("lemma4_worst_gap: needs |p| >= delta");
    Rng rng(seed, "lemma4");
    const auto phat = unit_gaussian(d, rng);
    double worst = -std::numeric_limits<double>::infinity();
    std::vector<double> y;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r(seed, "lemma4-x", i);
        const auto x = unit_gaussian(d, r);
        if (!perturbed(phat, norm_p, x, y)) continue;
        const double z = std::clamp(dotp(phat, x), -1.0, 1.0);
        if (delta * delta + 2 * delta * z + 1 < 1e-12) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += (phat[j] - y[j]) * (phat[j] - y[j]);
        worst = std::max(worst, std::sqrt(s) - lemma4_bound(delta, z));
    }
    return worst;
}

double lemma2_worst_gap(const ClassProbMatrices& mc, double epsilon, std::size_t samples, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon <= 2.0)) throw DomainError("lemma2_worst_gap: epsilon must lie in [0,2]");
    const std::size_t d = mc.dim();
    if (d < 2) throw ShapeError("lemma2_worst_gap: needs dimension >= 2");
    const double bound = lemma2_bound(epsilon, d);
    const double angle = 2.0 * std::asin(epsilon / 2.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < samples; ++i) {
        Rng rng(seed, "lemma2", i);
        const auto x = unit_gaussian(d, rng);
        auto u = unit_gaussian(d, rng);
        const double proj = dotp(u, x);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            u[j] -= proj * x[j];
            s += u[j] * u[j];
        }
        if (!(s > 1e-24)) continue;
        std::vector<double> y(d);
        for (std::size_t j = 0; j < d; ++j) y[j] = std::cos(angle) * x[j] + std::sin(angle) * u[j] / std::sqrt(s);
        const auto px = classifier::outcome_probs_mc(mc, x);
        const auto py = classifier::outcome_probs_mc(mc, y);
        for (int c = 0; c < mc.k; ++c) worst = std::max(worst, std::abs(py[c] - px[c]) - bound);
    }
    return worst;
}

}  // namespace quap::theory
