#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "quap/error.hpp"
#include "quap/uap_unitary.hpp"

using namespace quap;
using namespace quap::unitary;
using linalg::cplx;

namespace {

classifier::ClassProbMatrices small_classifier(int D, int k, std::uint64_t seed) {
    auto m = classifier::make_classifier(D, k, 4);
    classifier::randomize_params(m, seed);
    return classifier::extract_mc(m);
}

data::QuantumDataset random_states(int D, int k, std::size_t n, std::uint64_t seed) {
    data::QuantumDataset ds;
    ds.qubits = D;
    Rng rng(seed, "states");
    for (std::size_t i = 0; i < n; ++i) {
        ds.states.emplace_back(D, testutil::random_state(std::size_t{1} << D, rng));
        ds.labels.push_back(static_cast<int>(i % k));
    }
    return ds;
}

// Relabel each state with the clean prediction so every sample counts.
void label_by_prediction(data::QuantumDataset& ds, const classifier::ClassProbMatrices& mc) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ds.labels[i] = classifier::argmax(classifier::predict_probs_mc(mc, std::span<const cplx>(ds.states[i].amps())));
    }
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

TEST_CASE("fidelity loss values") {
    CHECK(fidelity_loss(1.0) == 0.0);
    CHECK(fidelity_loss(0.0) == 1.0);
    CHECK(fidelity_loss(0.9) == doctest::Approx(0.01));
    CHECK_THROWS_AS(fidelity_loss(1.5), DomainError);
    CHECK_THROWS_AS(fidelity_loss(-0.1), DomainError);
}

TEST_CASE("default generator depth reaches d^2 parameters") {
    for (std::size_t d : {4u, 16u, 64u, 256u}) {
        const int depth = default_generator_depth(d);
        int q = 0;
        while ((std::size_t{1} << q) < d) ++q;
        CHECK(3 * depth * q >= static_cast<int>(d * d));
        CHECK(3 * (depth - 1) * q < static_cast<int>(d * d));
    }
    CHECK(default_generator_depth(64) == 228);
}

TEST_CASE("matrix gradient matches finite differences along random directions") {
    const auto mc = small_classifier(3, 2, 4);
    const auto ds = random_states(3, 2, 10, 5);
    const auto idx = all_indices(ds.size());
    Rng rng(3, "dir");
    const auto t = testutil::random_unitary(8, rng);
    for (auto mode : {attack::AttackMode::untargeted(), attack::AttackMode::toward(0)}) {
        for (double alpha : {0.0, 0.7}) {
            CMatrix g;
            matrix_batch_loss(t, mc, ds, idx, alpha, mode, &g);
            for (int trial = 0; trial < 5; ++trial) {
                const auto dir = testutil::random_matrix(8, rng);
                // directional derivative along real direction (Re, Im) = (Re dir, Im dir)
                double analytic = 0.0;
                for (std::size_t j = 0; j < 64; ++j) {
                    analytic += 2.0 * (g.data()[j].real() * dir.data()[j].real() + g.data()[j].imag() * dir.data()[j].imag());
                }
                const double h = 1e-6;
                const auto lp = matrix_batch_loss(t + cplx(h) * dir, mc, ds, idx, alpha, mode).total;
                const auto lm = matrix_batch_loss(t - cplx(h) * dir, mc, ds, idx, alpha, mode).total;
                CHECK(analytic == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("alpha = 0 loss is the fooling loss alone") {
    const auto mc = small_classifier(2, 2, 8);
    const auto ds = random_states(2, 2, 12, 9);
    Rng rng(4, "u");
    const auto t = testutil::random_unitary(4, rng);
    const auto lp = matrix_batch_loss(t, mc, ds, all_indices(ds.size()), 0.0, {});
    CHECK(std::abs(lp.total - lp.fool) < 1e-12);
    CHECK(lp.fid > 0.0);
}

TEST_CASE("circuit gradients: adjoint, shift rule and finite differences agree") {
    const auto mc = small_classifier(2, 2, 11);
    const auto ds = random_states(2, 2, 6, 12);
    const auto idx = all_indices(ds.size());
    CircuitSpec spec{2, 3, qsim::Entangler::CZ};
    Rng rng(5, "p");
    std::vector<double> params(spec.param_count());
    for (auto& p : params) p = rng.uniform(-0.5, 0.5);
    const double alpha = 1.3;
    std::vector<double> ga, gs;
    circuit_batch_loss(spec, params, mc, ds, idx, alpha, {}, &ga);
    circuit_batch_loss(spec, params, mc, ds, idx, alpha, {}, &gs, true);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params, m = params;
        p[i] += 1e-6;
        m[i] -= 1e-6;
        const double fd = (circuit_batch_loss(spec, p, mc, ds, idx, alpha, {}).total -
                           circuit_batch_loss(spec, m, mc, ds, idx, alpha, {}).total) / 2e-6;
        CHECK(ga[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
        CHECK(std::abs(ga[i] - gs[i]) < 1e-6);
    }
}

TEST_CASE("matrix and circuit forms of the same unitary evaluate identically") {
    const auto mc = small_classifier(3, 2, 14);
    auto ds = random_states(3, 2, 40, 15);
    label_by_prediction(ds, mc);
    CircuitSpec spec{3, 4, qsim::Entangler::CZ};
    Rng rng(6, "p");
    std::vector<double> params(spec.param_count());
    for (auto& p : params) p = rng.uniform(-1.0, 1.0);
    const auto circ = UnitaryAttack::circuit(spec, params);
    UnitaryAttack mat;
    mat.matrix = circ.as_matrix();
    mat.validate();
    const auto a = evaluate_unitary(circ, mc, ds), b = evaluate_unitary(mat, mc, ds);
    CHECK(a.report.fooled == b.report.fooled);
    CHECK(a.report.evaluated == b.report.evaluated);
    CHECK(std::abs(a.fidelity.mean - b.fidelity.mean) < 1e-8);
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(std::abs(a.fidelity.per_sample[i] - b.fidelity.per_sample[i]) < 1e-8);
    // the circuit applied to each basis state reproduces its unitary
    for (std::size_t j = 0; j < 8; ++j) {
        const auto col = circ.apply(StateVector::basis(3, j));
        for (std::size_t r = 0; r < 8; ++r) CHECK(std::abs(col[r] - mat.matrix(r, j)) < 1e-9);
    }
}

TEST_CASE("identity attacks leave everything unchanged") {
    const auto mc = small_classifier(2, 2, 17);
    auto ds = random_states(2, 2, 30, 18);
    label_by_prediction(ds, mc);
    const auto ev = evaluate_unitary(UnitaryAttack::identity_matrix(4), mc, ds);
    CHECK(ev.report.rate == 0.0);
    CHECK(ev.report.evaluated == ds.size());
    CHECK(ev.fidelity.mean == doctest::Approx(1.0));

    auto cfg = UnitaryTrainConfig::pqc_defaults(true);
    cfg.epochs = 0;
    const auto zero = train_unitary_pqc(CircuitSpec{2, 4, qsim::Entangler::CZ}, mc, ds, 1.0, cfg);
    const auto ez = evaluate_unitary(zero, mc, ds);
    CHECK(ez.report.rate == 0.0);
    CHECK(ez.fidelity.min == doctest::Approx(1.0));

    QbimConfig q;
    q.clamp_eps = 0.0;
    const auto qz = evaluate_unitary(qbim_attack(mc, ds, q), mc, ds);
    CHECK(qz.report.rate == 0.0);
    CHECK(qz.fidelity.mean == doctest::Approx(1.0));
}

TEST_CASE("classical training: unitary output, large alpha stays near identity") {
    const auto mc = small_classifier(2, 2, 20);
    auto ds = random_states(2, 2, 64, 21);
    label_by_prediction(ds, mc);
    auto cfg = UnitaryTrainConfig::classical_defaults();
    cfg.epochs = 40;
    cfg.batch = 16;
    cfg.lr = 5e-2;
    cfg.decay = 0.3;
    cfg.decay_every = 40;
    cfg.seed = 3;
    const auto weak = train_unitary_classical(mc, ds, 0.0, cfg);
    CHECK(linalg::unitarity_error(weak.matrix) < 1e-8);
    const auto strong = train_unitary_classical(mc, ds, 1e6, cfg);
    CHECK(linalg::unitarity_error(strong.matrix) < 1e-8);
    const auto ew = evaluate_unitary(weak, mc, ds), es = evaluate_unitary(strong, mc, ds);
    CHECK(es.fidelity.mean > 0.99);
    CHECK(es.report.rate < 0.05);
    CHECK(ew.report.rate > es.report.rate);
    // determinism
    CHECK(linalg::max_abs_diff(train_unitary_classical(mc, ds, 0.0, cfg).matrix, weak.matrix) == 0.0);
}

TEST_CASE("qbim respects the clamp and uses a product circuit for one layer") {
    const auto mc = small_classifier(3, 2, 23);
    auto ds = random_states(3, 2, 50, 24);
    label_by_prediction(ds, mc);
    QbimConfig q;
    q.clamp_eps = 0.2;
    q.iters = 20;
    q.batch = 25;
    const auto a = qbim_attack(mc, ds, q);
    CHECK(a.spec.entangler == qsim::Entangler::None);
    for (double p : a.params) CHECK(std::abs(p) <= 0.2 + 1e-15);
    q.layers = 4;
    const auto b = qbim_attack(mc, ds, q);
    CHECK(b.spec.entangler == qsim::Entangler::CZ);
    CHECK(b.params.size() == 3u * 4 * 3);
    // untargeted steps lower the fooling loss (raise cross-entropy)
    CHECK(a.loss_trace.back() < a.loss_trace.front());
}

TEST_CASE("searches meet constraints and reuse cached runs") {
    const auto mc = small_classifier(2, 2, 26);
    auto ds = random_states(2, 2, 64, 27);
    label_by_prediction(ds, mc);
    auto cfg = UnitaryTrainConfig::classical_defaults();
    cfg.epochs = 8;
    cfg.batch = 16;
    cfg.lr = 5e-2;
    cfg.decay = 1.0;
    AttackSearch search([&](double a) { return train_unitary_classical(mc, ds, a, cfg); },
                        [&](const UnitaryAttack& u) { return evaluate_unitary(u, mc, ds); });
    AlphaSearchConfig ac;
    ac.steps = 6;
    const auto r = alpha_search_for_constraint(search, 0.9, ac);
    CHECK(r.reachable);
    CHECK(r.eval.fidelity.mean >= 0.9);
    for (const auto& p : r.trace) {
        if (p.mean_fidelity >= 0.9) CHECK(p.rate <= r.eval.report.rate);
    }
    const auto runs = search.runs();
    alpha_search_for_constraint(search, 0.9, ac);
    CHECK(search.runs() == runs);
    const auto strict = alpha_search_for_constraint(search, 0.999, ac);
    if (strict.reachable) CHECK(strict.eval.fidelity.mean >= 0.999);

    QbimConfig q;
    q.iters = 10;
    q.batch = 32;
    AttackSearch qs(
        [&](double e) {
            auto c = q;
            c.clamp_eps = e;
            return qbim_attack(mc, ds, c);
        },
        [&](const UnitaryAttack& u) { return evaluate_unitary(u, mc, ds); });
    ClampSearchConfig cc;
    cc.steps = 6;
    const auto qr = clamp_search_for_constraint(qs, 0.95, cc);
    CHECK(qr.reachable);
    CHECK(qr.eval.fidelity.mean >= 0.95);
    CHECK_THROWS_AS(alpha_search_for_constraint(search, 1.0), DomainError);
}
