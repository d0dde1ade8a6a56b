#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/attack.hpp"
#include "quap/classifier.hpp"
#include "quap/data.hpp"
#include "quap/qsim.hpp"

namespace quap::unitary {

using classifier::ClassProbMatrices;
using linalg::CMatrix;
using linalg::CVector;
using qsim::CircuitSpec;
using qsim::StateVector;

/// (1 - F)^2; DomainError outside [0, 1].
double fidelity_loss(double f);

struct UnitaryAttack {
    enum class Form { Matrix, Circuit };
    Form form = Form::Matrix;
    CMatrix matrix;           // Matrix form
    CircuitSpec spec;         // Circuit form
    qsim::ParamVector params;
    double alpha = 0.0;
    std::vector<double> loss_trace;  // mean loss per epoch

    static UnitaryAttack identity_matrix(std::size_t d);
    static UnitaryAttack circuit(CircuitSpec spec, qsim::ParamVector params);

    std::size_t dim() const;
    CVector apply(std::span<const linalg::cplx> psi) const;
    StateVector apply(const StateVector& psi) const;
    CMatrix as_matrix() const;
    void validate() const;
};

struct UnitaryTrainConfig {
    int epochs = 15;
    int batch = 64;
    double lr = 1e-3;
    double decay = 0.3;
    int decay_every = 5;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    attack::AttackMode mode;
    bool param_shift = false;  // PQC only: shift-rule gradients instead of adjoint
    /// Matrix form start: polar(I + spread * Z / sqrt(d)), Z complex Gaussian.
    /// A negative spread starts from polar(Z), a Haar-like random unitary.
    double init_spread = -1.0;
    /// Matrix form: drop the component of the gradient normal to the unitary group at T.
    bool tangent_grad = true;

    static UnitaryTrainConfig classical_defaults();
    /// 10 epochs, no decay; batch 64, or 50 for the Ising data.
    static UnitaryTrainConfig pqc_defaults(bool ising);

    void validate(int k) const;
    nlohmann::json to_json() const;
};

/// Smallest depth with 3 * depth * log2(d) >= d^2.
int default_generator_depth(std::size_t d);

struct LossParts {
    double fool = 0.0;   // mean fooling loss
    double fid = 0.0;    // mean (1 - F)^2
    double total = 0.0;  // fool + alpha * fid
};

/// Mean batch loss of the matrix attack T (not projected here) and, if requested,
/// dL/d(conj T). dL/dRe = 2 Re(G), dL/dIm = 2 Im(G).
LossParts matrix_batch_loss(const CMatrix& t, const ClassProbMatrices& mc, const data::QuantumDataset& ds,
                            std::span<const std::size_t> idx, double alpha, const attack::AttackMode& mode,
                            CMatrix* conj_grad = nullptr);

/// Mean batch loss of the circuit attack and, if requested, its parameter gradient.
LossParts circuit_batch_loss(const CircuitSpec& spec, std::span<const double> params, const ClassProbMatrices& mc,
                             const data::QuantumDataset& ds, std::span<const std::size_t> idx, double alpha,
                             const attack::AttackMode& mode, std::vector<double>* grad = nullptr,
                             bool param_shift = false);

/// Projected-gradient search over the unitary group, T random at start.
UnitaryAttack train_unitary_classical(const ClassProbMatrices& mc, const data::QuantumDataset& ds, double alpha,
                                      const UnitaryTrainConfig& cfg);

/// PQC generator on the data qubits, zero-initialized (the identity for CZ schedules).
UnitaryAttack train_unitary_pqc(const CircuitSpec& gen, const ClassProbMatrices& mc, const data::QuantumDataset& ds,
                                double alpha, const UnitaryTrainConfig& cfg);

struct QbimConfig {
    double clamp_eps = 0.1;
    int layers = 1;
    int iters = 100;
    double lr = 0.0;  // <= 0: clamp_eps / 10
    int batch = 64;   // <= 0: full dataset per step
    std::uint64_t seed = 0;
    attack::AttackMode mode;

    void validate(int k) const;
    nlohmann::json to_json() const;
};

/// One layer: rotations only. More layers: CZ schedule.
CircuitSpec qbim_spec(int qubits, int layers);

/// Sign-gradient steps on the fooling loss, parameters clamped to [-eps, eps] after each step.
UnitaryAttack qbim_attack(const ClassProbMatrices& mc, const data::QuantumDataset& ds, const QbimConfig& cfg);

struct FidelityStats {
    double mean = 1.0;
    double min = 1.0;
    double max = 1.0;
    std::vector<double> per_sample;

    nlohmann::json to_json(bool with_samples = false) const;
};

struct UnitaryEvaluation {
    attack::AttackReport report;
    FidelityStats fidelity;
};

/// Rate over clean-correct samples; fidelity over every sample.
UnitaryEvaluation evaluate_unitary(const UnitaryAttack& attack, const ClassProbMatrices& mc,
                                   const data::QuantumDataset& ds, const attack::AttackMode& mode = {});

inline const std::vector<double> kFidelityConstraints{0.95, 0.90, 0.85, 0.80, 0.75, 0.70};

struct SearchPoint {
    double knob = 0.0;  // alpha, or clamp_eps for qBIM
    double rate = 0.0;
    double mean_fidelity = 0.0;
};

/// Memoized trainer + evaluator keyed by the knob value.
class AttackSearch {
public:
    using Trainer = std::function<UnitaryAttack(double)>;
    using Evaluator = std::function<UnitaryEvaluation(const UnitaryAttack&)>;

    AttackSearch(Trainer trainer, Evaluator evaluator);

    struct Entry {
        UnitaryAttack attack;
        UnitaryEvaluation eval;
    };
    const Entry& run(double knob);
    std::size_t runs() const { return cache_.size(); }
    std::vector<SearchPoint> points() const;

private:
    Trainer trainer_;
    Evaluator evaluator_;
    std::map<double, Entry> cache_;
};

struct SearchResult {
    double knob = 0.0;
    UnitaryAttack attack;
    UnitaryEvaluation eval;
    bool reachable = true;  // false: no run met the constraint; best-fidelity run returned
    std::vector<SearchPoint> trace;

    nlohmann::json to_json() const;
};

struct AlphaSearchConfig {
    double lo = 1e-3;
    double hi = 1e3;
    int steps = 12;
};

/// Bisection over log(alpha) for the smallest alpha meeting the mean-fidelity
/// constraint; returns the highest-rate run among all evaluated runs meeting it.
SearchResult alpha_search_for_constraint(AttackSearch& search, double constraint, const AlphaSearchConfig& cfg = {});

struct ClampSearchConfig {
    double lo = 0.0;
    double hi = 3.14159265358979;
    int steps = 12;
};

/// Bisection over clamp_eps for the largest value meeting the constraint.
SearchResult clamp_search_for_constraint(AttackSearch& search, double constraint, const ClampSearchConfig& cfg = {});

}  // namespace quap::unitary
