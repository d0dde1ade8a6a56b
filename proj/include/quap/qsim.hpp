#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quap/linalg.hpp"

namespace quap::qsim {

using linalg::cplx;
using linalg::CMatrix;
using linalg::CVector;

// Qubit 0 is the most significant bit of the basis index, so
// |a> (x) |b> has index a * dim(b) + b.

enum class Entangler { CNOT, CZ, None };

std::string to_string(Entangler e);
Entangler entangler_from_string(const std::string& s);

using QubitPair = std::pair<int, int>;  // (control, target)

/// Layered ansatz: each layer is a Rot(omega, theta, phi) on every qubit
/// followed by an entangling unit.
///
/// Entangling schedules:
///  - CNOT: layer l uses range r = 1 + (l mod (n-1)) with pairs
///    (q, (q + r) mod n) for q = 0..n-1.
///  - CZ: layers are taken in pairs that share one CZ set, so the CZ part of
///    every layer pair cancels and the all-zero circuit is the identity.
///    Pair m uses range r = 1 + (m mod floor(n/2)); when 2r == n only the
///    first n/2 pairs are kept so each edge appears once. With an odd layer
///    count the final layer has no entangling unit.
///  - None: rotations only.
struct CircuitSpec {
    int qubits = 0;
    int layers = 0;
    Entangler entangler = Entangler::CNOT;

    std::size_t param_count() const { return 3u * static_cast<std::size_t>(layers) * qubits; }
    std::vector<QubitPair> layer_pairs(int layer) const;
    void validate() const;
    std::string schedule_description() const;
};

/// Flat angles, layer-major then qubit-major then (omega, theta, phi).
using ParamVector = std::vector<double>;

inline std::size_t param_index(int n_qubits, int layer, int qubit, int component) {
    return (static_cast<std::size_t>(layer) * n_qubits + qubit) * 3 + component;
}

class StateVector {
public:
    StateVector() = default;
    /// |0...0> on n qubits.
    explicit StateVector(int qubits);
    /// Takes ownership of amplitudes; length must be 2^qubits and norm 1 within 1e-9.
    StateVector(int qubits, CVector amps);

    static StateVector basis(int qubits, std::size_t index);
    /// Normalizes the given amplitudes (must be nonzero).
    static StateVector normalized(int qubits, CVector amps);

    int qubits() const { return qubits_; }
    std::size_t dim() const { return amps_.size(); }
    const CVector& amps() const { return amps_; }
    CVector& mutable_amps() { return amps_; }
    const cplx& operator[](std::size_t i) const { return amps_[i]; }

    /// state (x) |0>^k
    StateVector tensor_zeros(int k) const;

private:
    int qubits_ = 0;
    CVector amps_;
};

using Mat2 = std::array<cplx, 4>;  // row-major

Mat2 rot_matrix(double omega, double theta, double phi);

// In-place kernels on raw amplitude arrays of an n-qubit register.
void apply_mat2(std::span<cplx> amps, int n, int qubit, const Mat2& m);
void apply_cnot(std::span<cplx> amps, int n, int control, int target);
void apply_cz(std::span<cplx> amps, int n, int a, int b);

StateVector apply_rot(const StateVector& state, int qubit, double omega, double theta, double phi);
StateVector apply_entangler(const StateVector& state, QubitPair pair, Entangler kind);

StateVector run_circuit(const CircuitSpec& spec, std::span<const double> params, const StateVector& input);
void run_circuit_inplace(const CircuitSpec& spec, std::span<const double> params, std::span<cplx> amps);

CMatrix circuit_unitary(const CircuitSpec& spec, std::span<const double> params);

double fidelity(const StateVector& a, const StateVector& b);
double fidelity(std::span<const cplx> a, std::span<const cplx> b);

/// Adjoint-mode gradient.
///
/// `output` is the circuit output for some input and `adjoint` is dL/d(conj
/// output) for a real loss L. Adds dL/dparams into `grad` and returns
/// dL/d(conj input). Both vectors are consumed.
CVector backprop(const CircuitSpec& spec, std::span<const double> params, CVector output, CVector adjoint,
                 std::span<double> grad);

using StateObjective = std::function<double(const StateVector&)>;

/// Two-term shift rule on every component angle of every Rot gate,
/// grad_i = (f(p_i + pi/2) - f(p_i - pi/2)) / 2. Exact only when the
/// objective is an expectation value (linear in the density matrix).
std::vector<double> param_shift_grad(const CircuitSpec& spec, std::span<const double> params,
                                     const StateVector& input, const StateObjective& objective);

/// Expectation values read off a state, e.g. outcome probabilities.
using Measurement = std::function<std::vector<double>(const StateVector&)>;

/// Shift-rule Jacobian, jac[m][i] = d measure_m / d params_i.
std::vector<std::vector<double>> param_shift_jacobian(const CircuitSpec& spec, std::span<const double> params,
                                                      const StateVector& input, const Measurement& measure);

/// Gradient of a classical loss of the measured values: shift-rule Jacobian
/// contracted with `loss_grad` (dloss/dmeasure at the unshifted point).
std::vector<double> param_shift_grad(const CircuitSpec& spec, std::span<const double> params,
                                     const StateVector& input, const Measurement& measure,
                                     std::span<const double> loss_grad);

}  // namespace quap::qsim
