#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace quap::linalg {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;
using RVector = std::vector<double>;

/// Dense complex matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    CMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data);

    static CMatrix identity(std::size_t n);
    static CMatrix diagonal(std::span<const double> d);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<cplx> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const cplx> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    CVector column(std::size_t c) const;
    void set_column(std::size_t c, std::span<const cplx> v);

    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    CMatrix adjoint() const;
    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

CMatrix operator*(const CMatrix& a, const CMatrix& b);
CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
CMatrix operator*(cplx s, const CMatrix& a);
CVector operator*(const CMatrix& a, std::span<const cplx> x);

double frobenius_norm(const CMatrix& a);
/// max |a_ij - b_ij|
double max_abs_diff(const CMatrix& a, const CMatrix& b);
/// max |(X^dagger X - I)_ij|
double unitarity_error(const CMatrix& x);
cplx trace(const CMatrix& a);

cplx dot(std::span<const cplx> a, std::span<const cplx> b);  // a^dagger b
double norm(std::span<const cplx> a);
double norm(std::span<const double> a);

struct Svd {
    CMatrix w;
    RVector sigma;  // non-negative, descending
    CMatrix vh;
    int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi SVD of a square matrix.
/// Each column of V has its first nonzero entry real-positive.
Svd svd(const CMatrix& t);

/// Closest unitary in Frobenius norm, W * Vh from the SVD.
/// Throws NumericError when the smallest singular value is below 1e-12.
CMatrix polar_unitary(const CMatrix& t);

struct HermEig {
    RVector values;   // ascending
    CMatrix vectors;  // eigenvectors as columns
    int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for Hermitian matrices (within 1e-10).
HermEig herm_eig(const CMatrix& h);

inline constexpr int kMaxJacobiSweeps = 100;
inline constexpr double kSvdOffTolerance = 1e-12;
inline constexpr double kPolarMinSingular = 1e-12;
inline constexpr double kHermitianTolerance = 1e-10;

}  // namespace quap::linalg
