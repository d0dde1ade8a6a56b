#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <numbers>

#include "helpers.hpp"
#include "quap/error.hpp"
#include "quap/linalg.hpp"

using namespace quap;
using namespace quap::linalg;
using testutil::random_matrix;

namespace {

Eigen::MatrixXcd to_eigen(const CMatrix& m) {
    Eigen::MatrixXcd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

double max_identity_error_rows(const CMatrix& vh) { return unitarity_error(vh.adjoint()); }

}  // namespace

TEST_CASE("svd of identity") {
    const auto s = svd(CMatrix::identity(4));
    for (double v : s.sigma) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(max_abs_diff(s.w * s.vh, CMatrix::identity(4)) < 1e-12);
    CHECK(unitarity_error(s.w) < 1e-12);
}

TEST_CASE("svd of diag(3,0)") {
    CMatrix t(2, 2);
    t(0, 0) = 3.0;
    const auto s = svd(t);
    CHECK(s.sigma[0] == doctest::Approx(3.0));
    CHECK(std::abs(s.sigma[1]) < 1e-14);
    CHECK(unitarity_error(s.w) < 1e-9);
    CHECK(max_abs_diff(testutil::diag_times(s.w, s.sigma) * s.vh, t) < 1e-12);
}

TEST_CASE("svd reconstructs random matrices and matches an independent solver") {
    Rng rng(7, "svd-test");
    for (std::size_t n : {1u, 2u, 3u, 8u, 17u, 32u}) {
        const CMatrix t = random_matrix(n, rng);
        const auto s = svd(t);
        const CMatrix rec = testutil::diag_times(s.w, s.sigma) * s.vh;
        CHECK(frobenius_norm(rec - t) < 1e-10 * std::max(1.0, frobenius_norm(t)));
        CHECK(unitarity_error(s.w) < 1e-9);
        CHECK(max_identity_error_rows(s.vh) < 1e-9);
        CHECK(std::is_sorted(s.sigma.rbegin(), s.sigma.rend()));
        Eigen::JacobiSVD<Eigen::MatrixXcd> ref(to_eigen(t));
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ref.singularValues()(i) - s.sigma[i]) < 1e-10);
    }
}

TEST_CASE("svd handles rank deficiency") {
    Rng rng(3, "svd-rank");
    CMatrix a(6, 2), b(2, 6);
    for (auto& z : a.data()) z = cplx(rng.normal(), rng.normal());
    for (auto& z : b.data()) z = cplx(rng.normal(), rng.normal());
    const CMatrix t = a * b;
    const auto s = svd(t);
    CHECK(unitarity_error(s.w) < 1e-9);
    CHECK(s.sigma[2] < 1e-10);
    CHECK(frobenius_norm(testutil::diag_times(s.w, s.sigma) * s.vh - t) < 1e-10 * frobenius_norm(t));
}

TEST_CASE("svd phase convention: V columns start real-positive") {
    Rng rng(11, "svd-phase");
    const auto s = svd(random_matrix(5, rng));
    const CMatrix v = s.vh.adjoint();
    for (std::size_t c = 0; c < 5; ++c) {
        std::size_t r = 0;
        while (std::abs(v(r, c)) < 1e-12) ++r;
        CHECK(v(r, c).real() > 0.0);
        CHECK(std::abs(v(r, c).imag()) < 1e-12);
    }
}

TEST_CASE("svd rejects non-square input") {
    CHECK_THROWS_AS(svd(CMatrix(2, 3)), ShapeError);
}

TEST_CASE("polar_unitary basic cases") {
    Rng rng(5, "polar");
    const CMatrix q = testutil::random_unitary(6, rng);
    CHECK(max_abs_diff(polar_unitary(q), q) < 1e-10);
    CHECK(max_abs_diff(polar_unitary(cplx(2.0) * CMatrix::identity(4)), CMatrix::identity(4)) < 1e-12);
    CHECK_THROWS_AS(polar_unitary(CMatrix(3, 3)), NumericError);
}

TEST_CASE("polar_unitary is the closest sampled unitary and idempotent") {
    Rng rng(9, "polar-closest");
    const CMatrix t = random_matrix(4, rng);
    const CMatrix x = polar_unitary(t);
    CHECK(unitarity_error(x) < 1e-9);
    const double best = frobenius_norm(t - x);
    for (int i = 0; i < 1000; ++i) {
        const CMatrix q = testutil::random_unitary(4, rng);
        CHECK(best <= frobenius_norm(t - q) + 1e-12);
    }
    CHECK(max_abs_diff(polar_unitary(x), x) < 1e-9);
}

TEST_CASE("herm_eig small known spectra") {
    const std::vector<double> d{-1.0, 2.0};
    auto e = herm_eig(CMatrix::diagonal(d));
    CHECK(e.values[0] == doctest::Approx(-1.0));
    CHECK(e.values[1] == doctest::Approx(2.0));

    CMatrix x(2, 2);
    x(0, 1) = 1.0;
    x(1, 0) = 1.0;
    e = herm_eig(x);
    CHECK(e.values[0] == doctest::Approx(-1.0));
    CHECK(e.values[1] == doctest::Approx(1.0));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(std::abs(e.vectors(0, 0)) - r) < 1e-12);
    CHECK(std::abs(e.vectors(0, 0) + e.vectors(1, 0)) < 1e-12);
    CHECK(std::abs(e.vectors(0, 1) - e.vectors(1, 1)) < 1e-12);
}

TEST_CASE("herm_eig random Hermitian matrices") {
    Rng rng(13, "herm");
    for (std::size_t n : {3u, 8u, 20u}) {
        const CMatrix a = random_matrix(n, rng);
        const CMatrix h = a + a.adjoint();
        const auto e = herm_eig(h);
        CHECK(unitarity_error(e.vectors) < 1e-9);
        CHECK(std::is_sorted(e.values.begin(), e.values.end()));
        double sum = 0.0;
        for (double v : e.values) sum += v;
        CHECK(std::abs(sum - trace(h).real()) < 1e-8 * n);
        const CMatrix hv = h * e.vectors;
        for (std::size_t c = 0; c < n; ++c)
            for (std::size_t r = 0; r < n; ++r)
                CHECK(std::abs(hv(r, c) - e.values[c] * e.vectors(r, c)) < 1e-8 * frobenius_norm(h));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref(to_eigen(h));
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ref.eigenvalues()(i) - e.values[i]) < 1e-9);
    }
}

TEST_CASE("herm_eig rejects non-Hermitian input") {
    CMatrix m(2, 2);
    m(0, 1) = 1.0;
    CHECK_THROWS_AS(herm_eig(m), DomainError);
}

TEST_CASE("matrix helpers") {
    CMatrix a(2, 2, {1.0, 2.0, 3.0, 4.0});
    CHECK(trace(a).real() == 10.0 - 5.0);
    const CVector v{1.0, cplx(0, 1)};
    const CVector av = a * std::span<const cplx>(v);
    CHECK(std::abs(av[0] - cplx(1, 2)) < 1e-15);
    CHECK(std::abs(dot(v, v) - 2.0) < 1e-15);
    CHECK_THROWS_AS(CMatrix(2, 2, {1.0}), ShapeError);
    CHECK_THROWS_AS(a * CMatrix(3, 3), ShapeError);
}
