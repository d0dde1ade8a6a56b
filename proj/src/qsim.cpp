#include "quap/qsim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "quap/error.hpp"

namespace quap::qsim {

std::string to_string(Entangler e) {
    switch (e) {
        case Entangler::CNOT: return "CNOT";
        case Entangler::CZ: return "CZ";
        case Entangler::None: return "None";
    }
    return "?";
}

Entangler entangler_from_string(const std::string& s) {
    if (s == "CNOT" || s == "cnot") return Entangler::CNOT;
    if (s == "CZ" || s == "cz") return Entangler::CZ;
    if (s == "None" || s == "none") return Entangler::None;
    throw FormatError("unknown entangler '" + s + "'");
}

std::vector<QubitPair> CircuitSpec::layer_pairs(int layer) const {
    std::vector<QubitPair> pairs;
    const int n = qubits;
    if (n < 2 || entangler == Entangler::None) return pairs;
    if (entangler == Entangler::CNOT) {
        const int r = 1 + layer % (n - 1);
        for (int q = 0; q < n; ++q) pairs.emplace_back(q, (q + r) % n);
        return pairs;
    }
    // CZ
    if (layers % 2 == 1 && layer == layers - 1) return pairs;
    const int m = layer / 2;
    const int r = 1 + m % (n / 2);
    const int count = (2 * r == n) ? n / 2 : n;
    for (int q = 0; q < count; ++q) pairs.emplace_back(q, (q + r) % n);
    return pairs;
}

void CircuitSpec::validate() const {
    if (qubits < 1) throw ShapeError("circuit needs at least one qubit");
    if (layers < 0) throw ShapeError("circuit layer count must be non-negative");
    if (qubits > 14) throw ShapeError("circuit qubit count above simulator limit (14)");
}

std::string CircuitSpec::schedule_description() const {
    std::ostringstream os;
    switch (entangler) {
        case Entangler::CNOT:
            os << "CNOT ring, layer l range 1+(l mod (n-1)), pairs (q,(q+r) mod n)";
            break;
        case Entangler::CZ:
            os << "CZ ring shared by layer pairs, pair m range 1+(m mod floor(n/2)); odd final layer unentangled";
            break;
        case Entangler::None:
            os << "no entanglers";
            break;
    }
    return os.str();
}

StateVector::StateVector(int qubits) : qubits_(qubits), amps_(std::size_t{1} << qubits) {
    amps_[0] = 1.0;
}

StateVector::StateVector(int qubits, CVector amps) : qubits_(qubits), amps_(std::move(amps)) {
    if (qubits < 0 || amps_.size() != (std::size_t{1} << qubits)) {
        throw ShapeError("StateVector: amplitude count must be 2^qubits");
    }
    const double nrm = linalg::norm(amps_);
    if (std::abs(nrm - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "StateVector: amplitudes not unit norm (norm " << nrm << ")";
        throw DomainError(msg.str());
    }
}

StateVector StateVector::basis(int qubits, std::size_t index) {
    StateVector s(qubits);
    if (index >= s.dim()) throw IndexError("basis index out of range");
    s.amps_[0] = 0.0;
    s.amps_[index] = 1.0;
    return s;
}

StateVector StateVector::normalized(int qubits, CVector amps) {
    const double nrm = linalg::norm(amps);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DomainError("StateVector: cannot normalize zero vector");
    for (auto& z : amps) z /= nrm;
    return StateVector(qubits, std::move(amps));
}

StateVector StateVector::tensor_zeros(int k) const {
    const std::size_t stride = std::size_t{1} << k;
    CVector out(amps_.size() * stride);
    for (std::size_t i = 0; i < amps_.size(); ++i) out[i * stride] = amps_[i];
    StateVector s;
    s.qubits_ = qubits_ + k;
    s.amps_ = std::move(out);
    return s;
}

Mat2 rot_matrix(double omega, double theta, double phi) {
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    const cplx e_plus = std::polar(1.0, -(phi + omega) / 2.0);
    const cplx e_minus = std::polar(1.0, (phi - omega) / 2.0);
    // RZ(phi) RY(theta) RZ(omega)
    return {e_plus * c, -std::conj(e_minus) * s, e_minus * s, std::conj(e_plus) * c};
}

namespace {

inline std::size_t bit_of(int n, int qubit) { return std::size_t{1} << (n - 1 - qubit); }

void check_qubit(int n, int q) {
    if (q < 0 || q >= n) throw IndexError("qubit index out of range");
}

void check_params(const CircuitSpec& spec, std::size_t count) {
    spec.validate();
    if (count != spec.param_count()) {
        std::ostringstream msg;
        msg << "parameter count " << count << " does not match circuit (" << spec.param_count() << ")";
        throw ShapeError(msg.str());
    }
}

void apply_pair(std::span<cplx> amps, int n, QubitPair pr, Entangler kind) {
    if (kind == Entangler::CNOT) apply_cnot(amps, n, pr.first, pr.second);
    else if (kind == Entangler::CZ) apply_cz(amps, n, pr.first, pr.second);
}

}  // namespace

void apply_mat2(std::span<cplx> amps, int n, int qubit, const Mat2& m) {
    check_qubit(n, qubit);
    const std::size_t b = bit_of(n, qubit);
    const std::size_t dim = amps.size();
    for (std::size_t hi = 0; hi < dim; hi += 2 * b) {
        for (std::size_t lo = 0; lo < b; ++lo) {
            const std::size_t i0 = hi + lo;
            const std::size_t i1 = i0 + b;
            const cplx a0 = amps[i0];
            const cplx a1 = amps[i1];
            amps[i0] = m[0] * a0 + m[1] * a1;
            amps[i1] = m[2] * a0 + m[3] * a1;
        }
    }
}

void apply_cnot(std::span<cplx> amps, int n, int control, int target) {
    check_qubit(n, control);
    check_qubit(n, target);
    if (control == target) throw IndexError("entangler control and target must differ");
    const std::size_t cb = bit_of(n, control);
    const std::size_t tb = bit_of(n, target);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & cb) && !(i & tb)) std::swap(amps[i], amps[i | tb]);
    }
}

void apply_cz(std::span<cplx> amps, int n, int a, int b) {
    check_qubit(n, a);
    check_qubit(n, b);
    if (a == b) throw IndexError("entangler qubits must differ");
    const std::size_t mask = bit_of(n, a) | bit_of(n, b);
    for (std::size_t i = 0; i < amps.size(); ++i) {
        if ((i & mask) == mask) amps[i] = -amps[i];
    }
}

StateVector apply_rot(const StateVector& state, int qubit, double omega, double theta, double phi) {
    check_qubit(state.qubits(), qubit);
    StateVector out = state;
    apply_mat2(out.mutable_amps(), state.qubits(), qubit, rot_matrix(omega, theta, phi));
    return out;
}

StateVector apply_entangler(const StateVector& state, QubitPair pair, Entangler kind) {
    StateVector out = state;
    if (kind == Entangler::CNOT) apply_cnot(out.mutable_amps(), state.qubits(), pair.first, pair.second);
    else if (kind == Entangler::CZ) apply_cz(out.mutable_amps(), state.qubits(), pair.first, pair.second);
    else throw InputError("apply_entangler: no entangler kind given");
    return out;
}

void run_circuit_inplace(const CircuitSpec& spec, std::span<const double> params, std::span<cplx> amps) {
    check_params(spec, params.size());
    const int n = spec.qubits;
    if (amps.size() != (std::size_t{1} << n)) throw ShapeError("run_circuit: input qubit count mismatch");
    for (int l = 0; l < spec.layers; ++l) {
        for (int q = 0; q < n; ++q) {
            const std::size_t k = param_index(n, l, q, 0);
            apply_mat2(amps, n, q, rot_matrix(params[k], params[k + 1], params[k + 2]));
        }
        for (const auto& pr : spec.layer_pairs(l)) apply_pair(amps, n, pr, spec.entangler);
    }
}

StateVector run_circuit(const CircuitSpec& spec, std::span<const double> params, const StateVector& input) {
    if (input.qubits() != spec.qubits) throw ShapeError("run_circuit: input qubit count mismatch");
    StateVector out = input;
    run_circuit_inplace(spec, params, out.mutable_amps());
    return out;
}

CMatrix circuit_unitary(const CircuitSpec& spec, std::span<const double> params) {
    check_params(spec, params.size());
    const std::size_t dim = std::size_t{1} << spec.qubits;
    CMatrix u(dim, dim);
    CVector col(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        std::fill(col.begin(), col.end(), cplx{});
        col[j] = 1.0;
        run_circuit_inplace(spec, params, col);
        u.set_column(j, col);
    }
    return u;
}

double fidelity(std::span<const cplx> a, std::span<const cplx> b) {
    if (a.size() != b.size()) throw ShapeError("fidelity: dimension mismatch");
    const double f = std::norm(linalg::dot(a, b));
    return std::min(1.0, std::max(0.0, f));
}

double fidelity(const StateVector& a, const StateVector& b) {
    if (a.qubits() != b.qubits()) throw ShapeError("fidelity: qubit count mismatch");
    return fidelity(std::span<const cplx>(a.amps()), std::span<const cplx>(b.amps()));
}

CVector backprop(const CircuitSpec& spec, std::span<const double> params, CVector psi, CVector g,
                 std::span<double> grad) {
    check_params(spec, params.size());
    if (grad.size() != params.size()) throw ShapeError("backprop: gradient buffer size mismatch");
    const int n = spec.qubits;
    const std::size_t dim = std::size_t{1} << n;
    if (psi.size() != dim || g.size() != dim) throw ShapeError("backprop: state dimension mismatch");

    for (int l = spec.layers - 1; l >= 0; --l) {
        const auto pairs = spec.layer_pairs(l);
        for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
            apply_pair(psi, n, *it, spec.entangler);
            apply_pair(g, n, *it, spec.entangler);
        }
        for (int q = n - 1; q >= 0; --q) {
            const std::size_t k = param_index(n, l, q, 0);
            const double omega = params[k], theta = params[k + 1], phi = params[k + 2];
            const cplx zphi = std::polar(1.0, phi / 2.0);      // RZ(phi)^dagger diagonal entry 0
            const cplx zomega = std::polar(1.0, omega / 2.0);  // RZ(omega)^dagger diagonal entry 0
            const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
            const std::size_t b = bit_of(n, q);
            double g_phi = 0.0, g_theta = 0.0, g_omega = 0.0;
            for (std::size_t hi = 0; hi < dim; hi += 2 * b) {
                for (std::size_t lo = 0; lo < b; ++lo) {
                    const std::size_t i0 = hi + lo, i1 = i0 + b;
                    cplx a0 = psi[i0], a1 = psi[i1];
                    cplx b0 = g[i0], b1 = g[i1];
                    // d/dphi: Im(g^dagger Z psi)
                    g_phi += (std::conj(b0) * a0 - std::conj(b1) * a1).imag();
                    a0 *= zphi; a1 *= std::conj(zphi);
                    b0 *= zphi; b1 *= std::conj(zphi);
                    // d/dtheta: Im(g^dagger Y psi), Y psi = (-i a1, i a0)
                    g_theta += (std::conj(b0) * cplx(a1.imag(), -a1.real()) +
                                std::conj(b1) * cplx(-a0.imag(), a0.real())).imag();
                    cplx t0 = c * a0 + s * a1, t1 = -s * a0 + c * a1;
                    a0 = t0; a1 = t1;
                    t0 = c * b0 + s * b1; t1 = -s * b0 + c * b1;
                    b0 = t0; b1 = t1;
                    g_omega += (std::conj(b0) * a0 - std::conj(b1) * a1).imag();
                    a0 *= zomega; a1 *= std::conj(zomega);
                    b0 *= zomega; b1 *= std::conj(zomega);
                    psi[i0] = a0; psi[i1] = a1;
                    g[i0] = b0; g[i1] = b1;
                }
            }
            grad[k] += g_omega;
            grad[k + 1] += g_theta;
            grad[k + 2] += g_phi;
        }
    }
    return g;
}

std::vector<double> param_shift_grad(const CircuitSpec& spec, std::span<const double> params,
                                     const StateVector& input, const StateObjective& objective) {
    check_params(spec, params.size());
    if (input.qubits() != spec.qubits) throw ShapeError("param_shift_grad: input qubit count mismatch");
    std::vector<double> shifted(params.begin(), params.end());
    std::vector<double> grad(params.size());
    const double h = std::numbers::pi / 2.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = shifted[i];
        shifted[i] = orig + h;
        const double up = objective(run_circuit(spec, shifted, input));
        shifted[i] = orig - h;
        const double down = objective(run_circuit(spec, shifted, input));
        shifted[i] = orig;
        grad[i] = 0.5 * (up - down);
    }
    return grad;
}

std::vector<std::vector<double>> param_shift_jacobian(const CircuitSpec& spec, std::span<const double> params,
                                                      const StateVector& input, const Measurement& measure) {
    check_params(spec, params.size());
    if (input.qubits() != spec.qubits) throw ShapeError("param_shift_jacobian: input qubit count mismatch");
    std::vector<double> shifted(params.begin(), params.end());
    std::vector<std::vector<double>> jac;
    const double h = std::numbers::pi / 2.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = shifted[i];
        shifted[i] = orig + h;
        const auto up = measure(run_circuit(spec, shifted, input));
        shifted[i] = orig - h;
        const auto down = measure(run_circuit(spec, shifted, input));
        shifted[i] = orig;
        if (jac.empty()) jac.assign(up.size(), std::vector<double>(params.size(), 0.0));
        if (up.size() != jac.size() || down.size() != jac.size()) {
            throw ShapeError("param_shift_jacobian: measurement length changed");
        }
        for (std::size_t m = 0; m < up.size(); ++m) jac[m][i] = 0.5 * (up[m] - down[m]);
    }
    return jac;
}

std::vector<double> param_shift_grad(const CircuitSpec& spec, std::span<const double> params,
                                     const StateVector& input, const Measurement& measure,
                                     std::span<const double> loss_grad) {
    const auto jac = param_shift_jacobian(spec, params, input, measure);
    std::vector<double> grad(params.size(), 0.0);
    if (jac.empty()) return grad;
    if (loss_grad.size() != jac.size()) throw ShapeError("param_shift_grad: loss gradient length mismatch");
    for (std::size_t m = 0; m < jac.size(); ++m)
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += loss_grad[m] * jac[m][i];
    return grad;
}

}  // namespace quap::qsim
