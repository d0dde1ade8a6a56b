#include "quap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "quap/error.hpp"

namespace quap::linalg {

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("CMatrix: entry count does not match rows*cols");
    }
}

CMatrix CMatrix::identity(std::size_t n) {
    CMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

CMatrix CMatrix::diagonal(std::span<const double> d) {
    CMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

CVector CMatrix::column(std::size_t c) const {
    CVector v(rows_);
    for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
    return v;
}

void CMatrix::set_column(std::size_t c, std::span<const cplx> v) {
    if (v.size() != rows_) throw ShapeError("set_column: length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

CMatrix CMatrix::adjoint() const {
    CMatrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
}

bool CMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

CMatrix operator*(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.rows()) throw ShapeError("matrix product: inner dimensions differ");
    CMatrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cplx aik = a(i, k);
            if (aik == cplx{}) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

CMatrix operator+(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix sum: shapes differ");
    CMatrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("matrix difference: shapes differ");
    CMatrix out = a;
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

CMatrix operator*(cplx s, const CMatrix& a) {
    CMatrix out = a;
    for (auto& z : out.data()) z *= s;
    return out;
}

CVector operator*(const CMatrix& a, std::span<const cplx> x) {
    if (a.cols() != x.size()) throw ShapeError("matrix-vector product: length mismatch");
    CVector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto r = a.row(i);
        cplx acc{};
        for (std::size_t j = 0; j < x.size(); ++j) acc += r[j] * x[j];
        y[i] = acc;
    }
    return y;
}

double frobenius_norm(const CMatrix& a) {
    double s = 0.0;
    for (const auto& z : a.data()) s += std::norm(z);
    return std::sqrt(s);
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff: shapes differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double unitarity_error(const CMatrix& x) {
    CMatrix g = x.adjoint() * x;
    return max_abs_diff(g, CMatrix::identity(g.rows()));
}

cplx trace(const CMatrix& a) {
    cplx t{};
    for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) t += a(i, i);
    return t;
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    cplx s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double norm(std::span<const cplx> a) {
    double s = 0.0;
    for (const auto& z : a) s += std::norm(z);
    return std::sqrt(s);
}

double norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

namespace {

// Phase that makes the first non-negligible entry of v real-positive.
cplx positive_phase(std::span<const cplx> v) {
    double scale = 0.0;
    for (const auto& z : v) scale = std::max(scale, std::abs(z));
    const double thresh = 1e-12 * std::max(scale, 1e-300);
    for (const auto& z : v) {
        double m = std::abs(z);
        if (m > thresh) return std::conj(z) / m;
    }
    return 1.0;
}

}  // namespace

Svd svd(const CMatrix& t) {
    if (!t.square()) throw ShapeError("svd: input must be square");
    if (!t.all_finite()) throw NumericError("svd: input has non-finite entries");
    const std::size_t n = t.rows();

    // Column-major working copies: a[j*n + i] = A(i, j).
    std::vector<cplx> a(n * n), v(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a[j * n + i] = t(i, j);
        v[i * n + i] = 1.0;
    }
    auto col = [n](std::vector<cplx>& m, std::size_t j) { return m.data() + j * n; };

    int sweeps = 0;
    bool converged = n < 2;
    while (!converged) {
        if (sweeps >= kMaxJacobiSweeps) {
            std::ostringstream msg;
            msg << "svd: no convergence after " << sweeps << " sweeps";
            throw NumericError(msg.str());
        }
        ++sweeps;
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                cplx* ap = col(a, p);
                cplx* aq = col(a, q);
                double alpha = 0.0, beta = 0.0;
                cplx gamma{};
                for (std::size_t i = 0; i < n; ++i) {
                    alpha += std::norm(ap[i]);
                    beta += std::norm(aq[i]);
                    gamma += std::conj(ap[i]) * aq[i];
                }
                const double g = std::abs(gamma);
                if (g == 0.0 || g <= kSvdOffTolerance * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const cplx phase = std::conj(gamma) / g;  // e^{-i arg gamma}
                const double zeta = (beta - alpha) / (2.0 * g);
                const double tt = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + tt * tt);
                const double s = c * tt;
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx x = ap[i];
                    const cplx y = phase * aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                cplx* vp = col(v, p);
                cplx* vq = col(v, q);
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx x = vp[i];
                    const cplx y = phase * vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        converged = !rotated;
    }

    RVector sig(n);
    for (std::size_t j = 0; j < n; ++j) sig[j] = norm(std::span<const cplx>(col(a, j), n));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sig[x] > sig[y]; });

    Svd out;
    out.sweeps = sweeps;
    out.sigma.resize(n);
    out.w = CMatrix(n, n);
    CMatrix vmat(n, n);
    const double smax = n ? sig[order[0]] : 0.0;
    const double zero_thresh = std::max(smax, 1e-300) * 1e-14 * static_cast<double>(n);
    std::vector<bool> have_w(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.sigma[k] = sig[j];
        for (std::size_t i = 0; i < n; ++i) vmat(i, k) = v[j * n + i];
        if (sig[j] > zero_thresh) {
            for (std::size_t i = 0; i < n; ++i) out.w(i, k) = a[j * n + i] / sig[j];
            have_w[k] = true;
        }
    }
    // Complete W for (numerically) zero singular values by Gram-Schmidt over
    // the standard basis.
    std::size_t basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (have_w[k]) continue;
        while (basis < n) {
            CVector cand(n);
            cand[basis++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t m = 0; m < n; ++m) {
                    if (!have_w[m]) continue;
                    cplx proj{};
                    for (std::size_t i = 0; i < n; ++i) proj += std::conj(out.w(i, m)) * cand[i];
                    for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * out.w(i, m);
                }
            }
            const double nm = norm(cand);
            if (nm > 1e-6) {
                for (std::size_t i = 0; i < n; ++i) out.w(i, k) = cand[i] / nm;
                have_w[k] = true;
                break;
            }
        }
        if (!have_w[k]) throw NumericError("svd: failed to complete left singular basis");
    }
    // Joint phase convention: first nonzero entry of each right singular
    // vector real-positive.
    for (std::size_t k = 0; k < n; ++k) {
        CVector vc = vmat.column(k);
        const cplx ph = positive_phase(vc);
        for (std::size_t i = 0; i < n; ++i) {
            vmat(i, k) *= ph;
            out.w(i, k) *= ph;
        }
    }
    out.vh = vmat.adjoint();
    return out;
}

CMatrix polar_unitary(const CMatrix& t) {
    Svd s = svd(t);
    if (!s.sigma.empty() && s.sigma.back() < kPolarMinSingular) {
        std::ostringstream msg;
        msg << "polar_unitary: degenerate projection, smallest singular value " << s.sigma.back();
        throw NumericError(msg.str());
    }
    return s.w * s.vh;
}

HermEig herm_eig(const CMatrix& h) {
    if (!h.square()) throw ShapeError("herm_eig: input must be square");
    if (!h.all_finite()) throw NumericError("herm_eig: input has non-finite entries");
    const std::size_t n = h.rows();
    double hnorm = frobenius_norm(h);
    if (max_abs_diff(h, h.adjoint()) > kHermitianTolerance * std::max(1.0, hnorm)) {
        throw DomainError("herm_eig: input is not Hermitian");
    }

    CMatrix a = h;
    for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();
    CMatrix v = CMatrix::identity(n);

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += std::norm(a(i, j));
        return std::sqrt(2.0 * s);
    };

    const double stop = 1e-15 * std::max(hnorm, 1e-300);
    int sweeps = 0;
    while (off_norm() > stop) {
        if (sweeps >= kMaxJacobiSweeps) {
            std::ostringstream msg;
            msg << "herm_eig: no convergence after " << sweeps << " sweeps";
            throw NumericError(msg.str());
        }
        ++sweeps;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx hpq = a(p, q);
                const double g = std::abs(hpq);
                if (g <= 1e-300) continue;
                const cplx ph = std::conj(hpq) / g;  // e^{-i phi}
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double zeta = (aqq - app) / (2.0 * g);
                const double tt = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + tt * tt);
                const double s = c * tt;
                // A <- A G, G = diag(1, e^{-i phi}) * real rotation.
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx x = a(k, p);
                    const cplx y = ph * a(k, q);
                    a(k, p) = c * x - s * y;
                    a(k, q) = s * x + c * y;
                }
                const cplx phc = std::conj(ph);
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx x = a(p, k);
                    const cplx y = phc * a(q, k);
                    a(p, k) = c * x - s * y;
                    a(q, k) = s * x + c * y;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx x = v(k, p);
                    const cplx y = ph * v(k, q);
                    v(k, p) = c * x - s * y;
                    v(k, q) = s * x + c * y;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x).real() < a(y, y).real(); });
    HermEig out;
    out.sweeps = sweeps;
    out.values.resize(n);
    out.vectors = CMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.values[k] = a(j, j).real();
        CVector col = v.column(j);
        const cplx ph = positive_phase(col);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = col[i] * ph;
    }
    return out;
}

}  // namespace quap::linalg
