#include "quap/classifier.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "quap/error.hpp"
#include "quap/optim.hpp"
#include "quap/rng.hpp"

namespace quap::classifier {

void ClassifierModel::validate() const {
    if (D < 0 || K < 1 || k < 1) throw ShapeError("classifier: invalid D/K/k");
    if (k > (1 << K)) throw ShapeError("classifier: more classes than ancilla outcomes");
    if (spec.qubits != D + K) throw ShapeError("classifier: circuit qubits must equal D + K");
    spec.validate();
    if (params.size() != spec.param_count()) throw ShapeError("classifier: parameter count mismatch");
}

int ancilla_for_classes(int k) {
    if (k < 1) throw InputError("class count must be positive");
    int K = 1;
    while ((1 << K) < k) ++K;
    return K;
}

ClassifierModel make_classifier(int D, int k, int layers, qsim::Entangler entangler) {
    ClassifierModel m;
    m.D = D;
    m.K = ancilla_for_classes(k);
    m.k = k;
    m.spec = {D + m.K, layers, entangler};
    m.params.assign(m.spec.param_count(), 0.0);
    m.validate();
    return m;
}

void randomize_params(ClassifierModel& model, std::uint64_t seed) {
    Rng rng(seed, "classifier-init");
    for (auto& p : model.params) p = rng.uniform(0.0, 2.0 * std::numbers::pi);
}

ClassProbMatrices extract_mc(const ClassifierModel& model) {
    model.validate();
    const CMatrix u = qsim::circuit_unitary(model.spec, model.params);
    const std::size_t d = model.data_dim();
    const std::size_t kp = model.outcomes();
    ClassProbMatrices mc;
    mc.D = model.D;
    mc.K = model.K;
    mc.k = model.k;
    for (std::size_t c = 0; c < kp; ++c) {
        CMatrix m(d, d);
        for (std::size_t t = 0; t < d; ++t) {
            const auto row = u.row(kp * t + c);
            for (std::size_t i = 0; i < d; ++i) {
                const cplx ui = std::conj(row[kp * i]);
                for (std::size_t j = 0; j < d; ++j) m(i, j) += ui * row[kp * j];
            }
        }
        RVector re(d * d);
        for (std::size_t i = 0; i < d * d; ++i) re[i] = m.data()[i].real();
        mc.m.push_back(std::move(m));
        mc.re.push_back(std::move(re));
    }
    return mc;
}

RVector outcome_probs_direct(const ClassifierModel& model, const StateVector& state) {
    if (state.qubits() != model.D) throw ShapeError("classifier: input qubit count mismatch");
    const StateVector y = qsim::run_circuit(model.spec, model.params, state.tensor_zeros(model.K));
    const std::size_t kp = model.outcomes();
    RVector p(kp, 0.0);
    for (std::size_t j = 0; j < y.dim(); ++j) p[j % kp] += std::norm(y[j]);
    return p;
}

RVector renormalize(std::span<const double> outcomes, int k) {
    if (k < 1 || static_cast<std::size_t>(k) > outcomes.size()) throw ShapeError("renormalize: bad class count");
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += outcomes[c];
    RVector q(k);
    for (int c = 0; c < k; ++c) q[c] = s > 0.0 ? outcomes[c] / s : 1.0 / k;
    return q;
}

RVector predict_probs_direct(const ClassifierModel& model, const StateVector& state) {
    return renormalize(outcome_probs_direct(model, state), model.k);
}

double quad_form(const CMatrix& m, std::span<const cplx> x) {
    const std::size_t n = x.size();
    cplx acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = m.row(i);
        cplx r = 0.0;
        for (std::size_t j = 0; j < n; ++j) r += row[j] * x[j];
        acc += std::conj(x[i]) * r;
    }
    return acc.real();
}

void add_mat_vec(const CMatrix& m, std::span<const cplx> x, cplx scale, std::span<cplx> out) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = m.row(i);
        cplx r = 0.0;
        for (std::size_t j = 0; j < n; ++j) r += row[j] * x[j];
        out[i] += scale * r;
    }
}

RVector outcome_probs_mc(const ClassProbMatrices& mc, std::span<const cplx> x) {
    if (x.size() != mc.dim()) throw ShapeError("classifier: input dimension mismatch");
    RVector p(mc.outcomes());
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = quad_form(mc.m[c], x);
    return p;
}

RVector outcome_probs_mc(const ClassProbMatrices& mc, std::span<const double> x) {
    const std::size_t n = mc.dim();
    if (x.size() != n) throw ShapeError("classifier: input dimension mismatch");
    RVector p(mc.outcomes());
    for (std::size_t c = 0; c < p.size(); ++c) {
        const RVector& re = mc.re[c];
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < n; ++j) r += re[i * n + j] * x[j];
            acc += x[i] * r;
        }
        p[c] = acc;
    }
    return p;
}

namespace {

template <typename T>
void require_unit(std::span<const T> x) {
    double s = 0.0;
    for (const auto& v : x) s += std::norm(v);
    if (std::abs(std::sqrt(s) - 1.0) > 1e-9) throw DomainError("classifier: input is not unit norm");
}

}  // namespace

RVector predict_probs_mc(const ClassProbMatrices& mc, std::span<const cplx> x) {
    require_unit(x);
    return renormalize(outcome_probs_mc(mc, x), mc.k);
}

RVector predict_probs_mc(const ClassProbMatrices& mc, std::span<const double> x) {
    require_unit(x);
    return renormalize(outcome_probs_mc(mc, x), mc.k);
}

CrossEntropy cross_entropy(std::span<const double> outcomes, int k, int label) {
    if (label < 0 || label >= k || static_cast<std::size_t>(k) > outcomes.size()) {
        throw InputError("cross_entropy: label out of range");
    }
    CrossEntropy out;
    out.grad.assign(outcomes.size(), 0.0);
    double s = 0.0;
    for (int c = 0; c < k; ++c) s += outcomes[c];
    const double q = s > 0.0 ? outcomes[label] / s : 0.0;
    if (!(q > kProbFloor)) {
        out.loss = -std::log(kProbFloor);
        return out;
    }
    out.loss = -std::log(q);
    for (int c = 0; c < k; ++c) out.grad[c] = 1.0 / s;
    out.grad[label] -= 1.0 / outcomes[label];
    return out;
}

int argmax(std::span<const double> probs) {
    int best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = static_cast<int>(i);
    }
    return best;
}

void TrainConfig::validate() const {
    if (epochs < 0 || batch < 1 || !(lr > 0.0) || decay_every < 1 || !(decay > 0.0 && decay <= 1.0)) {
        throw ConfigError("train config: epochs/batch/lr/decay must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0)) {
        throw ConfigError("train config: Adam betas must lie in [0,1)");
    }
}

TrainResult train_classifier(ClassifierModel model, const data::QuantumDataset& train, const TrainConfig& cfg) {
    model.validate();
    cfg.validate();
    if (train.empty()) throw InputError("train_classifier: empty dataset");
    if (train.qubits != model.D) throw ShapeError("train_classifier: dataset qubits differ from model D");
    train.validate(model.k);

    const std::size_t n = train.size();
    const std::size_t kp = model.outcomes();
    AdamState adam(model.params.size(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    std::vector<double> grad(model.params.size());
    TrainResult result;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_schedule(cfg.lr, cfg.decay, cfg.decay_every, epoch);
        Rng rng(cfg.seed, "classifier-shuffle", static_cast<std::uint64_t>(epoch));
        const auto order = permutation(n, rng);
        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t stop = std::min(n, start + cfg.batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                StateVector y = train.states[i].tensor_zeros(model.K);
                qsim::run_circuit_inplace(model.spec, model.params, y.mutable_amps());
                RVector p(kp, 0.0);
                for (std::size_t j = 0; j < y.dim(); ++j) p[j % kp] += std::norm(y[j]);
                const auto ce = cross_entropy(p, model.k, train.labels[i]);
                loss_sum += ce.loss;
                if (argmax(renormalize(p, model.k)) == train.labels[i]) ++correct;
                CVector g(y.dim());
                for (std::size_t j = 0; j < y.dim(); ++j) g[j] = ce.grad[j % kp] * y[j];
                qsim::backprop(model.spec, model.params, std::move(y.mutable_amps()), std::move(g), grad);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (auto& v : grad) v *= inv;
            adam_step(adam, model.params, grad, lr);
        }
        result.trace.epoch_loss.push_back(loss_sum / static_cast<double>(n));
        result.trace.epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    result.model = std::move(model);
    return result;
}

std::vector<int> predict_labels(const ClassProbMatrices& mc, const data::QuantumDataset& ds) {
    if (ds.qubits != mc.D) throw ShapeError("predict_labels: dataset qubits differ from model D");
    std::vector<int> out;
    out.reserve(ds.size());
    for (const auto& s : ds.states) out.push_back(argmax(renormalize(outcome_probs_mc(mc, s.amps()), mc.k)));
    return out;
}

double accuracy(const ClassProbMatrices& mc, const data::QuantumDataset& ds) {
    if (ds.empty()) throw InputError("accuracy: empty dataset");
    const auto pred = predict_labels(mc, ds);
    std::size_t ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == ds.labels[i];
    return static_cast<double>(ok) / static_cast<double>(pred.size());
}

double accuracy(const ClassifierModel& model, const data::QuantumDataset& ds) {
    if (ds.empty()) throw InputError("accuracy: empty dataset");
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ok += argmax(predict_probs_direct(model, ds.states[i])) == ds.labels[i];
    }
    return static_cast<double>(ok) / static_cast<double>(ds.size());
}

}  // namespace quap::classifier
