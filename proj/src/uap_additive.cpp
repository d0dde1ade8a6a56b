#include "quap/uap_additive.hpp"

#include <algorithm>
#include <cmath>

#include "quap/error.hpp"
#include "quap/optim.hpp"
#include "quap/rng.hpp"

namespace quap::additive {

std::size_t GeneratorNet::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

void GeneratorNet::validate() const {
    if (sizes.size() < 2) throw ShapeError("generator: needs input and output sizes");
    if (weights.size() != sizes.size() - 1 || biases.size() != weights.size()) {
        throw ShapeError("generator: layer count mismatch");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw ShapeError("generator: non-positive layer size");
        if (weights[l].size() != static_cast<std::size_t>(sizes[l]) * sizes[l + 1] ||
            biases[l].size() != static_cast<std::size_t>(sizes[l + 1])) {
            throw ShapeError("generator: weight shape mismatch at layer " + std::to_string(l));
        }
    }
}

GeneratorNet make_generator(const std::vector<int>& sizes, double slope, std::uint64_t seed) {
    GeneratorNet g;
    g.sizes = sizes;
    g.slope = slope;
    if (sizes.size() < 2) throw ShapeError("generator: needs input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw ShapeError("generator: non-positive layer size");
        Rng rng(seed, "generator-init", l);
        const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        RVector w(static_cast<std::size_t>(sizes[l]) * sizes[l + 1]);
        RVector b(sizes[l + 1]);
        for (auto& v : w) v = rng.uniform(-bound, bound);
        for (auto& v : b) v = rng.uniform(-bound, bound);
        g.weights.push_back(std::move(w));
        g.biases.push_back(std::move(b));
    }
    return g;
}

RVector generator_forward(const GeneratorNet& gen, std::span<const double> z, GeneratorCache* cache) {
    gen.validate();
    if (z.size() != static_cast<std::size_t>(gen.input_dim())) throw ShapeError("generator: input dimension mismatch");
    RVector a(z.begin(), z.end());
    if (cache) {
        cache->inputs.clear();
        cache->pre.clear();
    }
    for (std::size_t l = 0; l < gen.layers(); ++l) {
        const int in = gen.sizes[l], out = gen.sizes[l + 1];
        RVector h(gen.biases[l]);
        const RVector& w = gen.weights[l];
        for (int r = 0; r < out; ++r) {
            const double* row = w.data() + static_cast<std::size_t>(r) * in;
            double acc = 0.0;
            for (int c = 0; c < in; ++c) acc += row[c] * a[c];
            h[r] += acc;
        }
        if (cache) {
            cache->inputs.push_back(a);
            cache->pre.push_back(h);
        }
        const bool last = l + 1 == gen.layers();
        for (auto& v : h) v = last ? std::tanh(v) : (v > 0.0 ? v : gen.slope * v);
        a = std::move(h);
    }
    if (cache) cache->output = a;
    return a;
}

GeneratorGrads generator_backward(const GeneratorNet& gen, const GeneratorCache& cache, std::span<const double> dout) {
    if (cache.pre.size() != gen.layers()) throw ShapeError("generator_backward: cache does not match network");
    if (dout.size() != static_cast<std::size_t>(gen.output_dim())) throw ShapeError("generator_backward: bad dout");
    GeneratorGrads g;
    g.weights.resize(gen.layers());
    g.biases.resize(gen.layers());
    RVector delta(dout.begin(), dout.end());
    for (std::size_t li = gen.layers(); li-- > 0;) {
        const int in = gen.sizes[li], out = gen.sizes[li + 1];
        const RVector& pre = cache.pre[li];
        const bool last = li + 1 == gen.layers();
        for (int r = 0; r < out; ++r) {
            if (last) {
                const double t = cache.output[r];
                delta[r] *= 1.0 - t * t;
            } else if (pre[r] <= 0.0) {
                delta[r] *= gen.slope;
            }
        }
        const RVector& a = cache.inputs[li];
        RVector& gw = g.weights[li];
        gw.assign(static_cast<std::size_t>(in) * out, 0.0);
        for (int r = 0; r < out; ++r) {
            double* row = gw.data() + static_cast<std::size_t>(r) * in;
            for (int c = 0; c < in; ++c) row[c] = delta[r] * a[c];
        }
        g.biases[li] = delta;
        if (li == 0) break;
        RVector next(in, 0.0);
        const RVector& w = gen.weights[li];
        for (int r = 0; r < out; ++r) {
            const double* row = w.data() + static_cast<std::size_t>(r) * in;
            for (int c = 0; c < in; ++c) next[c] += row[c] * delta[r];
        }
        delta = std::move(next);
    }
    return g;
}

std::string to_string(NormKind k) { return k == NormKind::Linf ? "Linf" : "L2"; }

NormKind norm_kind_from_string(const std::string& s) {
    if (s == "Linf" || s == "linf" || s == "inf") return NormKind::Linf;
    if (s == "L2" || s == "l2") return NormKind::L2;
    throw FormatError("unknown norm kind '" + s + "'");
}

namespace {

double l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

RVector scale_to_budget(std::span<const double> zp, double epsilon, NormKind kind) {
    if (!(epsilon >= 0.0)) throw DomainError("scale_to_budget: negative budget");
    RVector d(zp.begin(), zp.end());
    if (kind == NormKind::Linf) {
        for (auto& v : d) v *= epsilon;
        return d;
    }
    const double n = l2(zp);
    if (n > epsilon) {
        for (auto& v : d) v *= epsilon / n;
    }
    return d;
}

RVector scale_backward(std::span<const double> zp, double epsilon, NormKind kind, std::span<const double> dd) {
    RVector g(dd.begin(), dd.end());
    if (kind == NormKind::Linf) {
        for (auto& v : g) v *= epsilon;
        return g;
    }
    const double n = l2(zp);
    if (!(n > epsilon)) return g;
    // d/dz (eps z/|z|) = eps/|z| (I - z z^T/|z|^2)
    double zd = 0.0;
    for (std::size_t i = 0; i < zp.size(); ++i) zd += zp[i] * dd[i];
    for (std::size_t i = 0; i < zp.size(); ++i) g[i] = epsilon / n * (dd[i] - zp[i] * zd / (n * n));
    return g;
}

Projection project(std::span<const double> x, std::span<const double> delta) {
    if (x.size() != delta.size()) throw ShapeError("perturbation dimension differs from data");
    Projection p;
    const std::size_t d = x.size();
    p.u.resize(d);
    for (std::size_t i = 0; i < d; ++i) p.u[i] = x[i] + delta[i];
    p.v_norm = l2(p.u);
    if (!(p.v_norm > 1e-300)) {
        p.degenerate = true;
        return p;
    }
    for (auto& v : p.u) v /= p.v_norm;
    p.kept.resize(d);
    p.s.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        p.kept[i] = p.u[i] >= 0.0 && p.u[i] <= 1.0;
        p.s[i] = std::clamp(p.u[i], 0.0, 1.0);
    }
    p.w_norm = l2(p.s);
    if (!(p.w_norm > 1e-300)) {
        p.degenerate = true;
        return p;
    }
    for (auto& v : p.s) v /= p.w_norm;
    return p;
}

RVector project_backward(const Projection& p, std::span<const double> ds) {
    const std::size_t d = p.s.size();
    if (ds.size() != d) throw ShapeError("project_backward: gradient length mismatch");
    // s = w/|w|
    double sd = 0.0;
    for (std::size_t i = 0; i < d; ++i) sd += p.s[i] * ds[i];
    RVector du(d);
    for (std::size_t i = 0; i < d; ++i) du[i] = p.kept[i] ? (ds[i] - p.s[i] * sd) / p.w_norm : 0.0;
    // u = v/|v|
    double ud = 0.0;
    for (std::size_t i = 0; i < d; ++i) ud += p.u[i] * du[i];
    RVector dv(d);
    for (std::size_t i = 0; i < d; ++i) dv[i] = (du[i] - p.u[i] * ud) / p.v_norm;
    return dv;
}

qsim::StateVector perturb_project_encode(std::span<const double> x, std::span<const double> delta) {
    const auto p = project(x, delta);
    if (p.degenerate) throw DomainError("perturbed sample clips to the zero vector");
    return data::amplitude_encode(p.s);
}

void AdditiveConfig::validate(int k) const {
    if (!(epsilon > 0.0)) throw ConfigError("additive attack: epsilon must be positive");
    if (mode.targeted && (mode.target < 0 || mode.target >= k)) throw ConfigError("additive attack: bad target");
    if (z_dim < 1 || epochs < 0 || batch < 1 || !(lr > 0.0) || decay_every < 1 || !(decay > 0.0 && decay <= 1.0)) {
        throw ConfigError("additive attack: invalid training settings");
    }
    for (int h : hidden) {
        if (h < 1) throw ConfigError("additive attack: hidden sizes must be positive");
    }
}

nlohmann::json AdditiveConfig::to_json() const {
    return {{"epsilon", epsilon}, {"norm", to_string(norm)},  {"mode", mode.describe()},
            {"seed", seed},       {"z_dim", z_dim},           {"hidden", hidden},
            {"slope", slope},     {"epochs", epochs},         {"batch", batch},
            {"lr", lr},           {"decay", decay},           {"decay_every", decay_every},
            {"beta1", beta1},     {"beta2", beta2},           {"adam_eps", adam_eps}};
}

namespace {

// Real-input class probabilities and d(loss)/ds for one projected sample.
double sample_loss(const ClassProbMatrices& mc, std::span<const double> s, int label, const attack::AttackMode& mode,
                   RVector* ds) {
    const std::size_t n = mc.dim();
    std::vector<double> padded;
    std::span<const double> x = s;
    if (s.size() != n) {
        padded.assign(n, 0.0);
        std::copy(s.begin(), s.end(), padded.begin());
        x = padded;
    }
    const auto p = classifier::outcome_probs_mc(mc, x);
    const auto fl = attack::fooling_loss(p, mc.k, label, mode);
    if (ds) {
        ds->assign(s.size(), 0.0);
        for (std::size_t c = 0; c < p.size(); ++c) {
            if (fl.grad[c] == 0.0) continue;
            const RVector& re = mc.re[c];
            for (std::size_t i = 0; i < s.size(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += re[i * n + j] * x[j];
                (*ds)[i] += 2.0 * fl.grad[c] * acc;
            }
        }
    }
    return fl.loss;
}

}  // namespace

double batch_loss(std::span<const double> delta, const ClassProbMatrices& mc, const data::ClassicalDataset& ds,
                  std::span<const std::size_t> idx, const attack::AttackMode& mode, RVector* ddelta) {
    double total = 0.0;
    std::size_t used = 0;
    if (ddelta) ddelta->assign(delta.size(), 0.0);
    RVector grad_s;
    for (std::size_t i : idx) {
        const auto p = project(ds.samples[i], delta);
        if (p.degenerate) continue;
        ++used;
        total += sample_loss(mc, p.s, ds.labels[i], mode, ddelta ? &grad_s : nullptr);
        if (ddelta) {
            const auto g = project_backward(p, grad_s);
            for (std::size_t j = 0; j < g.size(); ++j) (*ddelta)[j] += g[j];
        }
    }
    if (used == 0) return 0.0;
    if (ddelta) {
        for (auto& v : *ddelta) v /= static_cast<double>(used);
    }
    return total / static_cast<double>(used);
}

AdditiveResult train_additive_uap(GeneratorNet gen, const ClassProbMatrices& mc, const data::ClassicalDataset& train,
                                  const AdditiveConfig& cfg) {
    cfg.validate(mc.k);
    gen.validate();
    if (train.empty()) throw InputError("train_additive_uap: empty dataset");
    train.validate(mc.k);
    if (data::qubits_for_dim(train.dim) != mc.D) throw ShapeError("train_additive_uap: data dimension vs classifier");
    if (gen.output_dim() != static_cast<int>(train.dim)) throw ShapeError("generator output must equal data dim");

    AdditiveResult res;
    Rng zr(cfg.seed, "additive-z");
    res.z.resize(gen.input_dim());
    for (auto& v : res.z) v = zr.normal();

    std::vector<AdamState> w_adam, b_adam;
    for (std::size_t l = 0; l < gen.layers(); ++l) {
        w_adam.emplace_back(gen.weights[l].size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
        b_adam.emplace_back(gen.biases[l].size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    }

    const std::size_t n = train.size();
    GeneratorCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(cfg.lr, cfg.decay, cfg.decay_every, epoch);
        Rng sr(cfg.seed, "additive-shuffle", static_cast<std::uint64_t>(epoch));
        const auto order = permutation(n, sr);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            const auto zp = generator_forward(gen, res.z, &cache);
            const auto delta = scale_to_budget(zp, cfg.epsilon, cfg.norm);
            RVector dd;
            epoch_loss += batch_loss(delta, mc, train, std::span(order).subspan(start, stop - start), cfg.mode, &dd);
            ++batches;
            const auto dzp = scale_backward(zp, cfg.epsilon, cfg.norm, dd);
            const auto g = generator_backward(gen, cache, dzp);
            for (std::size_t l = 0; l < gen.layers(); ++l) {
                adam_step(w_adam[l], gen.weights[l], g.weights[l], lr);
                adam_step(b_adam[l], gen.biases[l], g.biases[l], lr);
            }
        }
        res.train_report.loss_trace.push_back(batches ? epoch_loss / batches : 0.0);
    }

    res.perturbation = scale_to_budget(generator_forward(gen, res.z), cfg.epsilon, cfg.norm);
    auto trace = std::move(res.train_report.loss_trace);
    res.train_report = evaluate_attack(res.perturbation, mc, train, cfg.mode);
    res.train_report.loss_trace = std::move(trace);
    res.train_report.config = cfg.to_json();
    res.generator = std::move(gen);
    return res;
}

AdditiveResult train_additive_uap(const ClassProbMatrices& mc, const data::ClassicalDataset& train,
                                  const AdditiveConfig& cfg) {
    std::vector<int> sizes{cfg.z_dim};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(static_cast<int>(train.dim));
    return train_additive_uap(make_generator(sizes, cfg.slope, cfg.seed), mc, train, cfg);
}

attack::AttackReport evaluate_attack(std::span<const double> delta, const ClassProbMatrices& mc,
                                     const data::ClassicalDataset& ds, const attack::AttackMode& mode) {
    if (delta.size() != ds.dim) throw ShapeError("evaluate_attack: perturbation dimension mismatch");
    attack::AttackReport r;
    std::vector<double> pad(mc.dim(), 0.0);
    auto predict = [&](std::span<const double> s) {
        std::copy(s.begin(), s.end(), pad.begin());
        return classifier::argmax(classifier::renormalize(classifier::outcome_probs_mc(mc, pad), mc.k));
    };
    const std::vector<double> zero(ds.dim, 0.0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto clean = project(ds.samples[i], zero);
        if (clean.degenerate) continue;
        const int cp = predict(clean.s);
        if (cp != ds.labels[i]) continue;
        const auto adv = project(ds.samples[i], delta);
        if (adv.degenerate) {
            ++r.skipped;
            continue;
        }
        attack::tally(r, cp, predict(adv.s), ds.labels[i], mode);
    }
    attack::finish(r, mode);
    r.perturbation.assign(delta.begin(), delta.end());
    return r;
}

}  // namespace quap::additive
