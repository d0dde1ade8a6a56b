#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "quap/error.hpp"
#include "quap/uap_additive.hpp"

using namespace quap;
using namespace quap::additive;

namespace {

// Straightforward per-neuron loop, independent of the library's layout helpers.
std::vector<double> naive_forward(const GeneratorNet& g, std::vector<double> a) {
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        std::vector<double> h(g.sizes[l + 1]);
        for (int r = 0; r < g.sizes[l + 1]; ++r) {
            double s = g.biases[l][r];
            for (int c = 0; c < g.sizes[l]; ++c) s += g.weights[l][r * g.sizes[l] + c] * a[c];
            if (l + 1 == g.weights.size()) {
                h[r] = std::tanh(s);
            } else {
                h[r] = std::max(s, 0.0) + g.slope * std::min(s, 0.0);
            }
        }
        a = h;
    }
    return a;
}

classifier::ClassProbMatrices small_classifier(int D, int k, std::uint64_t seed) {
    auto m = classifier::make_classifier(D, k, 3);
    classifier::randomize_params(m, seed);
    return classifier::extract_mc(m);
}

data::ClassicalDataset random_images(int D, int k, std::size_t n, std::uint64_t seed) {
    data::ClassicalDataset ds;
    ds.dim = std::size_t{1} << D;
    ds.rows = 1;
    ds.cols = static_cast<int>(ds.dim);
    Rng rng(seed, "images");
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> x(ds.dim);
        for (auto& v : x) v = rng.uniform(0.05, 1.0);
        ds.samples.push_back(x);
        ds.labels.push_back(static_cast<int>(i % k));
    }
    return ds;
}

}  // namespace

TEST_CASE("generator forward matches a naive evaluation") {
    const auto g = make_generator({5, 7, 6, 4}, 0.01, 3);
    CHECK(g.param_count() == 5 * 7 + 7 + 7 * 6 + 6 + 6 * 4 + 4);
    for (const auto& w : g.weights) {
        for (double v : w) CHECK(std::abs(v) <= 1.0);
    }
    Rng rng(2, "gen-in");
    std::vector<double> z(5);
    for (auto& v : z) v = rng.normal();
    const auto a = generator_forward(g, z);
    const auto b = naive_forward(g, z);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-14);
    CHECK_THROWS_AS(generator_forward(g, std::vector<double>(4)), ShapeError);
}

TEST_CASE("generator backward matches finite differences") {
    auto g = make_generator({4, 6, 3}, 0.2, 11);
    const std::vector<double> z{0.3, -1.2, 0.7, 2.0};
    const std::vector<double> w{0.5, -1.0, 2.0};  // loss = w . out
    GeneratorCache cache;
    generator_forward(g, z, &cache);
    const auto grads = generator_backward(g, cache, w);
    auto loss = [&](const GeneratorNet& net) {
        const auto o = generator_forward(net, z);
        return w[0] * o[0] + w[1] * o[1] + w[2] * o[2];
    };
    const double h = 1e-6;
    for (std::size_t l = 0; l < g.layers(); ++l) {
        for (std::size_t i = 0; i < g.weights[l].size(); ++i) {
            auto p = g, m = g;
            p.weights[l][i] += h;
            m.weights[l][i] -= h;
            CHECK(grads.weights[l][i] == doctest::Approx((loss(p) - loss(m)) / (2 * h)).epsilon(1e-5));
        }
        for (std::size_t i = 0; i < g.biases[l].size(); ++i) {
            auto p = g, m = g;
            p.biases[l][i] += h;
            m.biases[l][i] -= h;
            CHECK(grads.biases[l][i] == doctest::Approx((loss(p) - loss(m)) / (2 * h)).epsilon(1e-5));
        }
    }
}

TEST_CASE("budget scaling") {
    const std::vector<double> zp{0.5, -1.0, 0.25};
    const auto li = scale_to_budget(zp, 0.2, NormKind::Linf);
    CHECK(li[1] == doctest::Approx(-0.2));
    double mx = 0.0;
    for (double v : li) mx = std::max(mx, std::abs(v));
    CHECK(mx <= 0.2 + 1e-15);

    const auto l2 = scale_to_budget(zp, 0.3, NormKind::L2);
    double n = 0.0;
    for (double v : l2) n += v * v;
    CHECK(std::sqrt(n) == doctest::Approx(0.3));
    // already inside the ball: untouched
    const auto in = scale_to_budget(std::vector<double>{0.1, 0.1}, 1.0, NormKind::L2);
    CHECK(in[0] == 0.1);

    // backward vs finite differences on loss = c . delta
    const std::vector<double> c{1.0, 2.0, -0.5};
    for (auto kind : {NormKind::Linf, NormKind::L2}) {
        const auto g = scale_backward(zp, 0.3, kind, c);
        for (std::size_t i = 0; i < zp.size(); ++i) {
            auto p = zp, m = zp;
            p[i] += 1e-6;
            m[i] -= 1e-6;
            const auto dp = scale_to_budget(p, 0.3, kind), dm = scale_to_budget(m, 0.3, kind);
            double fd = 0.0;
            for (std::size_t j = 0; j < c.size(); ++j) fd += c[j] * (dp[j] - dm[j]) / 2e-6;
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
    CHECK(to_string(norm_kind_from_string("l2")) == "L2");
    CHECK_THROWS_AS(norm_kind_from_string("l1"), FormatError);
}

TEST_CASE("projection pipeline") {
    // x=(1,0), delta=(0,-0.5): u=(2,-1)/sqrt5, clip -> (2/sqrt5, 0), renorm -> e0
    const auto p = project(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, -0.5});
    REQUIRE_FALSE(p.degenerate);
    CHECK(p.s[0] == doctest::Approx(1.0));
    CHECK(p.s[1] == doctest::Approx(0.0));
    CHECK(p.kept[1] == 0);
    const auto st = perturb_project_encode(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, -0.5});
    CHECK(std::abs(st.amps()[0] - 1.0) < 1e-12);

    CHECK(project(std::vector<double>{1.0, 0.0}, std::vector<double>{-2.0, 0.0}).degenerate);
    CHECK_THROWS_AS(perturb_project_encode(std::vector<double>{1.0, 0.0}, std::vector<double>{-2.0, 0.0}), DomainError);
    CHECK_THROWS_AS(project(std::vector<double>{1.0}, std::vector<double>{0.0, 0.0}), ShapeError);

    // zero perturbation reproduces plain amplitude encoding
    const std::vector<double> x{0.2, 0.4, 0.1, 0.8};
    const auto q = project(x, std::vector<double>(4, 0.0));
    const auto enc = data::amplitude_encode(x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(q.s[i] == doctest::Approx(enc.amps()[i].real()));
}

TEST_CASE("projection backward matches finite differences away from the clip boundary") {
    const std::vector<double> x{0.3, 0.9, 0.05, 0.6};
    const std::vector<double> delta{0.1, -0.2, -0.3, 0.05};  // third coordinate clipped to 0
    const std::vector<double> c{0.7, -1.1, 0.4, 2.0};
    const auto p = project(x, delta);
    CHECK(p.kept[2] == 0);
    const auto g = project_backward(p, c);
    for (std::size_t i = 0; i < 4; ++i) {
        auto dp = delta, dm = delta;
        dp[i] += 1e-7;
        dm[i] -= 1e-7;
        const auto sp = project(x, dp).s, sm = project(x, dm).s;
        double fd = 0.0;
        for (std::size_t j = 0; j < 4; ++j) fd += c[j] * (sp[j] - sm[j]) / 2e-7;
        CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("batch loss gradient matches finite differences") {
    const auto mc = small_classifier(2, 2, 5);
    const auto ds = random_images(2, 2, 8, 1);
    std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5, 6, 7};
    const std::vector<double> delta{0.03, -0.02, 0.05, 0.01};
    for (auto mode : {attack::AttackMode::untargeted(), attack::AttackMode::toward(1)}) {
        RVector g;
        batch_loss(delta, mc, ds, idx, mode, &g);
        for (std::size_t i = 0; i < delta.size(); ++i) {
            auto dp = delta, dm = delta;
            dp[i] += 1e-6;
            dm[i] -= 1e-6;
            const double fd = (batch_loss(dp, mc, ds, idx, mode) - batch_loss(dm, mc, ds, idx, mode)) / 2e-6;
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("full chain gradient through a tiny generator") {
    const auto mc = small_classifier(2, 2, 8);
    const auto ds = random_images(2, 2, 6, 2);
    std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
    auto g = make_generator({3, 5, 4}, 0.01, 4);
    const std::vector<double> z{0.4, -0.9, 1.3};
    const double eps = 0.15;
    auto loss = [&](const GeneratorNet& net, RVector* dd) {
        return batch_loss(scale_to_budget(generator_forward(net, z), eps, NormKind::L2), mc, ds, idx,
                          attack::AttackMode::untargeted(), dd);
    };
    GeneratorCache cache;
    const auto zp = generator_forward(g, z, &cache);
    RVector dd;
    batch_loss(scale_to_budget(zp, eps, NormKind::L2), mc, ds, idx, attack::AttackMode::untargeted(), &dd);
    const auto grads = generator_backward(g, cache, scale_backward(zp, eps, NormKind::L2, dd));
    for (std::size_t i = 0; i < g.weights[0].size(); ++i) {
        auto p = g, m = g;
        p.weights[0][i] += 1e-6;
        m.weights[0][i] -= 1e-6;
        const double fd = (loss(p, nullptr) - loss(m, nullptr)) / 2e-6;
        CHECK(grads.weights[0][i] == doctest::Approx(fd).epsilon(1e-4).scale(1e-8));
    }
}

TEST_CASE("tiny budget leaves predictions unchanged") {
    const auto mc = small_classifier(2, 2, 12);
    const auto ds = random_images(2, 2, 40, 3);
    const std::vector<double> delta(4, 1e-12);
    const auto r = evaluate_attack(delta, mc, ds);
    CHECK(r.fooled == 0);
    CHECK(r.rate == 0.0);
    CHECK(r.evaluated > 0);
}

TEST_CASE("training is deterministic and raises the fooling rate") {
    const auto mc = small_classifier(2, 2, 21);
    const auto ds = random_images(2, 2, 64, 4);
    AdditiveConfig cfg;
    cfg.epsilon = 0.5;
    cfg.z_dim = 8;
    cfg.hidden = {16};
    cfg.epochs = 6;
    cfg.batch = 16;
    cfg.lr = 1e-2;
    cfg.seed = 7;
    const auto a = train_additive_uap(mc, ds, cfg);
    const auto b = train_additive_uap(mc, ds, cfg);
    CHECK(a.perturbation == b.perturbation);
    CHECK(a.train_report.loss_trace.size() == 6);
    double mx = 0.0;
    for (double v : a.perturbation) mx = std::max(mx, std::abs(v));
    CHECK(mx <= cfg.epsilon);
    const auto zero = evaluate_attack(std::vector<double>(4, 0.0), mc, ds);
    CHECK(a.train_report.rate >= zero.rate);
    CHECK(a.train_report.loss_trace.back() <= a.train_report.loss_trace.front());
    CHECK(a.train_report.config["epsilon"] == 0.5);

    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(train_additive_uap(mc, ds, cfg), ConfigError);
}
