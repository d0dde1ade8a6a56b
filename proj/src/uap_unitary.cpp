#include "quap/uap_unitary.hpp"

#include <algorithm>
#include <cmath>

#include "quap/error.hpp"
#include "quap/optim.hpp"
#include "quap/rng.hpp"

namespace quap::unitary {

using linalg::cplx;

double fidelity_loss(double f) {
    if (!(f >= 0.0 && f <= 1.0)) throw DomainError("fidelity_loss: fidelity outside [0, 1]");
    return (1.0 - f) * (1.0 - f);
}

UnitaryAttack UnitaryAttack::identity_matrix(std::size_t d) {
    UnitaryAttack a;
    a.matrix = CMatrix::identity(d);
    return a;
}

UnitaryAttack UnitaryAttack::circuit(CircuitSpec spec, qsim::ParamVector params) {
    UnitaryAttack a;
    a.form = Form::Circuit;
    a.spec = spec;
    a.params = std::move(params);
    a.validate();
    return a;
}

std::size_t UnitaryAttack::dim() const {
    return form == Form::Matrix ? matrix.rows() : std::size_t{1} << spec.qubits;
}

CVector UnitaryAttack::apply(std::span<const cplx> psi) const {
    if (psi.size() != dim()) throw ShapeError("unitary attack: state dimension mismatch");
    if (form == Form::Matrix) return matrix * psi;
    CVector out(psi.begin(), psi.end());
    qsim::run_circuit_inplace(spec, params, out);
    return out;
}

StateVector UnitaryAttack::apply(const StateVector& psi) const {
    if (form == Form::Matrix) return StateVector::normalized(psi.qubits(), apply(std::span<const cplx>(psi.amps())));
    return qsim::run_circuit(spec, params, psi);
}

CMatrix UnitaryAttack::as_matrix() const {
    return form == Form::Matrix ? matrix : qsim::circuit_unitary(spec, params);
}

void UnitaryAttack::validate() const {
    if (form == Form::Matrix) {
        if (!matrix.square() || matrix.rows() == 0) throw ShapeError("unitary attack: matrix must be square");
        if (linalg::unitarity_error(matrix) > 1e-8) throw NumericError("unitary attack: matrix is not unitary");
    } else {
        spec.validate();
        if (params.size() != spec.param_count()) throw ShapeError("unitary attack: parameter count mismatch");
    }
}

UnitaryTrainConfig UnitaryTrainConfig::classical_defaults() { return {}; }

UnitaryTrainConfig UnitaryTrainConfig::pqc_defaults(bool ising) {
    UnitaryTrainConfig c;
    c.epochs = 10;
    c.batch = ising ? 50 : 64;
    c.decay = 1.0;
    c.decay_every = 1;
    return c;
}

void UnitaryTrainConfig::validate(int k) const {
    if (epochs < 0 || batch < 1 || !(lr > 0.0) || decay_every < 1 || !(decay > 0.0 && decay <= 1.0)) {
        throw ConfigError("unitary attack: invalid training settings");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("unitary attack: bad betas");
    if (mode.targeted && (mode.target < 0 || mode.target >= k)) throw ConfigError("unitary attack: bad target");
}

nlohmann::json UnitaryTrainConfig::to_json() const {
    return {{"epochs", epochs}, {"batch", batch},   {"lr", lr},           {"decay", decay},
            {"decay_every", decay_every}, {"beta1", beta1}, {"beta2", beta2}, {"adam_eps", adam_eps},
            {"seed", seed},     {"mode", mode.describe()}, {"param_shift", param_shift},
            {"init_spread", init_spread}, {"tangent_grad", tangent_grad}};
}

int default_generator_depth(std::size_t d) {
    if (d < 2) throw DomainError("default_generator_depth: need d >= 2");
    int q = 0;
    while ((std::size_t{1} << q) < d) ++q;
    const double need = static_cast<double>(d) * static_cast<double>(d) / (3.0 * q);
    return static_cast<int>(std::ceil(need - 1e-12));
}

namespace {

void check_data(const ClassProbMatrices& mc, const data::QuantumDataset& ds) {
    if (ds.dim() != mc.dim()) throw ShapeError("unitary attack: dataset dimension differs from classifier");
    ds.validate(mc.k);
}

// dL/d(conj phi) for one attacked state and the two loss parts.
struct SampleGrad {
    double fool = 0.0;
    double fid = 0.0;
    double dfid = 0.0;  // dL/dF including alpha
    classifier::RVector dp;
    CVector g;
};

SampleGrad sample_grad(const ClassProbMatrices& mc, std::span<const cplx> psi, std::span<const cplx> phi, int label,
                       double alpha, const attack::AttackMode& mode, bool want_g) {
    SampleGrad s;
    const auto p = classifier::outcome_probs_mc(mc, phi);
    auto fl = attack::fooling_loss(p, mc.k, label, mode);
    s.fool = fl.loss;
    const cplx ov = linalg::dot(psi, phi);
    const double f = std::norm(ov);
    s.fid = (1.0 - f) * (1.0 - f);
    s.dfid = -2.0 * alpha * (1.0 - f);
    s.dp = std::move(fl.grad);
    if (!want_g) return s;
    s.g.assign(phi.size(), cplx(0.0));
    for (std::size_t c = 0; c < s.dp.size(); ++c) {
        if (s.dp[c] != 0.0) classifier::add_mat_vec(mc.m[c], phi, s.dp[c], s.g);
    }
    // dF/d(conj phi) = psi (psi^dagger phi)
    if (s.dfid != 0.0) {
        for (std::size_t j = 0; j < phi.size(); ++j) s.g[j] += s.dfid * psi[j] * ov;
    }
    return s;
}

}  // namespace

LossParts matrix_batch_loss(const CMatrix& t, const ClassProbMatrices& mc, const data::QuantumDataset& ds,
                            std::span<const std::size_t> idx, double alpha, const attack::AttackMode& mode,
                            CMatrix* conj_grad) {
    if (t.rows() != mc.dim() || !t.square()) throw ShapeError("matrix attack: dimension mismatch");
    const std::size_t d = mc.dim();
    LossParts lp;
    if (conj_grad) *conj_grad = CMatrix(d, d);
    if (idx.empty()) return lp;
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (std::size_t i : idx) {
        const auto& psi = ds.states[i].amps();
        const CVector phi = t * std::span<const cplx>(psi);
        const auto s = sample_grad(mc, psi, phi, ds.labels[i], alpha, mode, conj_grad != nullptr);
        lp.fool += s.fool * inv;
        lp.fid += s.fid * inv;
        if (conj_grad) {
            // dL/d(conj T) = g psi^dagger
            for (std::size_t r = 0; r < d; ++r) {
                const cplx gr = s.g[r] * inv;
                if (gr == cplx(0.0)) continue;
                auto row = conj_grad->row(r);
                for (std::size_t c = 0; c < d; ++c) row[c] += gr * std::conj(psi[c]);
            }
        }
    }
    lp.total = lp.fool + alpha * lp.fid;
    return lp;
}

LossParts circuit_batch_loss(const CircuitSpec& spec, std::span<const double> params, const ClassProbMatrices& mc,
                             const data::QuantumDataset& ds, std::span<const std::size_t> idx, double alpha,
                             const attack::AttackMode& mode, std::vector<double>* grad, bool param_shift) {
    if (spec.qubits != mc.D) throw ShapeError("circuit attack: generator must act on the data qubits");
    LossParts lp;
    if (grad) grad->assign(params.size(), 0.0);
    if (idx.empty()) return lp;
    const double inv = 1.0 / static_cast<double>(idx.size());
    std::vector<double> g_one(params.size());
    for (std::size_t i : idx) {
        const auto& psi = ds.states[i];
        const StateVector phi = qsim::run_circuit(spec, params, psi);
        const bool adjoint = grad && !param_shift;
        auto s = sample_grad(mc, psi.amps(), phi.amps(), ds.labels[i], alpha, mode, adjoint);
        lp.fool += s.fool * inv;
        lp.fid += s.fid * inv;
        if (!grad) continue;
        if (adjoint) {
            std::fill(g_one.begin(), g_one.end(), 0.0);
            qsim::backprop(spec, params, phi.amps(), std::move(s.g), g_one);
        } else {
            const qsim::Measurement measure = [&](const StateVector& out) {
                auto m = classifier::outcome_probs_mc(mc, std::span<const cplx>(out.amps()));
                m.push_back(qsim::fidelity(psi, out));
                return m;
            };
            auto lg = s.dp;
            lg.push_back(s.dfid);
            g_one = qsim::param_shift_grad(spec, params, psi, measure, lg);
        }
        for (std::size_t j = 0; j < g_one.size(); ++j) (*grad)[j] += g_one[j] * inv;
    }
    lp.total = lp.fool + alpha * lp.fid;
    return lp;
}

UnitaryAttack train_unitary_classical(const ClassProbMatrices& mc, const data::QuantumDataset& ds, double alpha,
                                      const UnitaryTrainConfig& cfg) {
    cfg.validate(mc.k);
    if (!(alpha >= 0.0)) throw ConfigError("unitary attack: alpha must be non-negative");
    if (ds.empty()) throw InputError("unitary attack: empty dataset");
    check_data(mc, ds);
    const std::size_t d = mc.dim();

    Rng init(cfg.seed, "unitary-init");
    CMatrix t(d, d);
    for (auto& v : t.data()) v = cplx(init.normal(), init.normal()) * std::sqrt(0.5);
    if (cfg.init_spread >= 0.0) {
        const double s = cfg.init_spread / std::sqrt(static_cast<double>(d));
        for (auto& v : t.data()) v *= s;
        for (std::size_t i = 0; i < d; ++i) t(i, i) += 1.0;
    }
    t = linalg::polar_unitary(t);

    AdamState adam(2 * d * d, cfg.beta1, cfg.beta2, cfg.adam_eps);
    std::vector<double> flat_grad(2 * d * d);
    UnitaryAttack out;
    out.alpha = alpha;
    const std::size_t n = ds.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(cfg.lr, cfg.decay, cfg.decay_every, epoch);
        Rng sr(cfg.seed, "unitary-shuffle", static_cast<std::uint64_t>(epoch));
        const auto order = permutation(n, sr);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            t = linalg::polar_unitary(t);
            CMatrix g;
            total += matrix_batch_loss(t, mc, ds, std::span(order).subspan(start, stop - start), alpha, cfg.mode, &g)
                         .total;
            ++batches;
            if (cfg.tangent_grad) {
                // G - T herm(T^dagger G)
                const CMatrix h = t.adjoint() * g;
                CMatrix sym(d, d);
                for (std::size_t r = 0; r < d; ++r) {
                    for (std::size_t c = 0; c < d; ++c) sym(r, c) = 0.5 * (h(r, c) + std::conj(h(c, r)));
                }
                g = g - t * sym;
            }
            for (std::size_t j = 0; j < d * d; ++j) {
                flat_grad[2 * j] = 2.0 * g.data()[j].real();
                flat_grad[2 * j + 1] = 2.0 * g.data()[j].imag();
            }
            // std::complex<double> is layout-compatible with double[2]
            std::span<double> flat(reinterpret_cast<double*>(t.data().data()), 2 * d * d);
            adam_step(adam, flat, flat_grad, lr);
        }
        out.loss_trace.push_back(batches ? total / batches : 0.0);
    }
    out.matrix = linalg::polar_unitary(t);
    return out;
}

UnitaryAttack train_unitary_pqc(const CircuitSpec& gen, const ClassProbMatrices& mc, const data::QuantumDataset& ds,
                                double alpha, const UnitaryTrainConfig& cfg) {
    cfg.validate(mc.k);
    gen.validate();
    if (!(alpha >= 0.0)) throw ConfigError("unitary attack: alpha must be non-negative");
    if (ds.empty()) throw InputError("unitary attack: empty dataset");
    check_data(mc, ds);
    if (gen.qubits != mc.D) throw ShapeError("unitary attack: generator must act on the data qubits");

    UnitaryAttack out = UnitaryAttack::circuit(gen, qsim::ParamVector(gen.param_count(), 0.0));
    out.alpha = alpha;
    AdamState adam(out.params.size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    const std::size_t n = ds.size();
    std::vector<double> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(cfg.lr, cfg.decay, cfg.decay_every, epoch);
        Rng sr(cfg.seed, "unitary-shuffle", static_cast<std::uint64_t>(epoch));
        const auto order = permutation(n, sr);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            total += circuit_batch_loss(gen, out.params, mc, ds, std::span(order).subspan(start, stop - start), alpha,
                                        cfg.mode, &grad, cfg.param_shift)
                         .total;
            ++batches;
            adam_step(adam, out.params, grad, lr);
        }
        out.loss_trace.push_back(batches ? total / batches : 0.0);
    }
    return out;
}

void QbimConfig::validate(int k) const {
    if (!(clamp_eps >= 0.0) || layers < 1 || iters < 0) throw ConfigError("qbim: invalid settings");
    if (mode.targeted && (mode.target < 0 || mode.target >= k)) throw ConfigError("qbim: bad target");
}

nlohmann::json QbimConfig::to_json() const {
    return {{"clamp_eps", clamp_eps}, {"layers", layers}, {"iters", iters},
            {"lr", lr > 0.0 ? lr : clamp_eps / 10.0}, {"batch", batch}, {"seed", seed},
            {"mode", mode.describe()}};
}

CircuitSpec qbim_spec(int qubits, int layers) {
    CircuitSpec s;
    s.qubits = qubits;
    s.layers = layers;
    s.entangler = layers == 1 ? qsim::Entangler::None : qsim::Entangler::CZ;
    return s;
}

UnitaryAttack qbim_attack(const ClassProbMatrices& mc, const data::QuantumDataset& ds, const QbimConfig& cfg) {
    cfg.validate(mc.k);
    if (ds.empty()) throw InputError("qbim: empty dataset");
    check_data(mc, ds);
    const CircuitSpec spec = qbim_spec(mc.D, cfg.layers);
    UnitaryAttack out = UnitaryAttack::circuit(spec, qsim::ParamVector(spec.param_count(), 0.0));
    const double step = cfg.lr > 0.0 ? cfg.lr : cfg.clamp_eps / 10.0;
    if (cfg.clamp_eps == 0.0 || step == 0.0) return out;

    const std::size_t n = ds.size();
    const std::size_t b = cfg.batch > 0 ? std::min<std::size_t>(cfg.batch, n) : n;
    std::vector<std::size_t> order;
    std::size_t pos = n, pass = 0;
    std::vector<double> grad;
    for (int it = 0; it < cfg.iters; ++it) {
        if (pos + b > n) {
            Rng sr(cfg.seed, "qbim-shuffle", pass++);
            order = permutation(n, sr);
            pos = 0;
        }
        const auto lp = circuit_batch_loss(spec, out.params, mc, ds, std::span(order).subspan(pos, b), 0.0, cfg.mode,
                                           &grad);
        pos += b;
        out.loss_trace.push_back(lp.fool);
        for (std::size_t j = 0; j < grad.size(); ++j) {
            const double sg = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
            out.params[j] = std::clamp(out.params[j] - step * sg, -cfg.clamp_eps, cfg.clamp_eps);
        }
    }
    return out;
}

nlohmann::json FidelityStats::to_json(bool with_samples) const {
    nlohmann::json j{{"mean", mean}, {"min", min}, {"max", max}};
    if (with_samples) j["per_sample"] = per_sample;
    return j;
}

UnitaryEvaluation evaluate_unitary(const UnitaryAttack& atk, const ClassProbMatrices& mc,
                                   const data::QuantumDataset& ds, const attack::AttackMode& mode) {
    check_data(mc, ds);
    if (atk.dim() != mc.dim()) throw ShapeError("evaluate_unitary: attack dimension mismatch");
    UnitaryEvaluation ev;
    auto predict = [&](std::span<const cplx> x) {
        return classifier::argmax(classifier::renormalize(classifier::outcome_probs_mc(mc, x), mc.k));
    };
    double sum = 0.0, lo = 1.0, hi = 0.0;
    ev.fidelity.per_sample.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& psi = ds.states[i].amps();
        const CVector phi = atk.apply(std::span<const cplx>(psi));
        const double f = qsim::fidelity(psi, phi);
        ev.fidelity.per_sample.push_back(f);
        sum += f;
        lo = std::min(lo, f);
        hi = std::max(hi, f);
        attack::tally(ev.report, predict(psi), predict(phi), ds.labels[i], mode);
    }
    attack::finish(ev.report, mode);
    if (!ds.empty()) {
        ev.fidelity.mean = sum / static_cast<double>(ds.size());
        ev.fidelity.min = lo;
        ev.fidelity.max = hi;
    }
    ev.report.loss_trace = atk.loss_trace;
    return ev;
}

AttackSearch::AttackSearch(Trainer trainer, Evaluator evaluator)
    : trainer_(std::move(trainer)), evaluator_(std::move(evaluator)) {}

const AttackSearch::Entry& AttackSearch::run(double knob) {
    auto it = cache_.find(knob);
    if (it != cache_.end()) return it->second;
    Entry e{trainer_(knob), {}};
    e.eval = evaluator_(e.attack);
    return cache_.emplace(knob, std::move(e)).first->second;
}

std::vector<SearchPoint> AttackSearch::points() const {
    std::vector<SearchPoint> pts;
    for (const auto& [k, e] : cache_) pts.push_back({k, e.eval.report.rate, e.eval.fidelity.mean});
    return pts;
}

nlohmann::json SearchResult::to_json() const {
    nlohmann::json tr = nlohmann::json::array();
    for (const auto& p : trace) tr.push_back({{"knob", p.knob}, {"rate", p.rate}, {"mean_fidelity", p.mean_fidelity}});
    return {{"knob", knob},
            {"reachable", reachable},
            {"misclassification_rate", eval.report.rate},
            {"fidelity", eval.fidelity.to_json()},
            {"trace", tr}};
}

namespace {

SearchResult pick(AttackSearch& search, double constraint) {
    SearchResult r;
    r.trace = search.points();
    const SearchPoint* best = nullptr;
    for (const auto& p : r.trace) {
        if (p.mean_fidelity < constraint) continue;
        if (!best || p.rate > best->rate || (p.rate == best->rate && p.mean_fidelity > best->mean_fidelity)) best = &p;
    }
    if (!best) {
        r.reachable = false;
        for (const auto& p : r.trace) {
            if (!best || p.mean_fidelity > best->mean_fidelity) best = &p;
        }
    }
    r.knob = best->knob;
    const auto& e = search.run(best->knob);
    r.attack = e.attack;
    r.eval = e.eval;
    return r;
}

}  // namespace

SearchResult alpha_search_for_constraint(AttackSearch& search, double constraint, const AlphaSearchConfig& cfg) {
    if (!(constraint > 0.0 && constraint < 1.0)) throw DomainError("alpha search: constraint must be in (0, 1)");
    if (!(cfg.lo > 0.0 && cfg.hi > cfg.lo) || cfg.steps < 0) throw ConfigError("alpha search: bad range");
    auto ok = [&](double a) { return search.run(a).eval.fidelity.mean >= constraint; };
    if (ok(cfg.hi) && !ok(cfg.lo)) {
        double a = std::log(cfg.lo), b = std::log(cfg.hi);
        for (int s = 0; s < cfg.steps; ++s) {
            const double m = 0.5 * (a + b);
            (ok(std::exp(m)) ? b : a) = m;
        }
    }
    return pick(search, constraint);
}

SearchResult clamp_search_for_constraint(AttackSearch& search, double constraint, const ClampSearchConfig& cfg) {
    if (!(constraint > 0.0 && constraint < 1.0)) throw DomainError("clamp search: constraint must be in (0, 1)");
    if (!(cfg.lo >= 0.0 && cfg.hi > cfg.lo) || cfg.steps < 0) throw ConfigError("clamp search: bad range");
    auto ok = [&](double e) { return search.run(e).eval.fidelity.mean >= constraint; };
    if (ok(cfg.lo) && !ok(cfg.hi)) {
        double a = cfg.lo, b = cfg.hi;
        for (int s = 0; s < cfg.steps; ++s) {
            const double m = 0.5 * (a + b);
            (ok(m) ? a : b) = m;
        }
    }
    return pick(search, constraint);
}

}  // namespace quap::unitary
