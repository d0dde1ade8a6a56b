#pragma once

#include <cmath>

#include "quap/linalg.hpp"
#include "quap/rng.hpp"

namespace testutil {

using quap::linalg::CMatrix;
using quap::linalg::cplx;
using quap::linalg::CVector;

inline CMatrix random_matrix(std::size_t n, quap::Rng& rng) {
    CMatrix m(n, n);
    for (auto& z : m.data()) z = cplx(rng.normal(), rng.normal());
    return m;
}

inline CVector random_state(std::size_t dim, quap::Rng& rng) {
    CVector v(dim);
    double s = 0.0;
    for (auto& z : v) {
        z = cplx(rng.normal(), rng.normal());
        s += std::norm(z);
    }
    for (auto& z : v) z /= std::sqrt(s);
    return v;
}

inline std::vector<double> random_real_unit(std::size_t dim, quap::Rng& rng) {
    std::vector<double> v(dim);
    double s = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        s += x * x;
    }
    for (auto& x : v) x /= std::sqrt(s);
    return v;
}

inline CMatrix random_unitary(std::size_t n, quap::Rng& rng) {
    return quap::linalg::polar_unitary(random_matrix(n, rng));
}

inline CMatrix diag_times(const CMatrix& w, const std::vector<double>& s) {
    CMatrix out = w;
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) out(r, c) *= s[c];
    return out;
}

}  // namespace testutil
