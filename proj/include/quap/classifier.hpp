#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "quap/data.hpp"
#include "quap/linalg.hpp"
#include "quap/qsim.hpp"

namespace quap::classifier {

using linalg::CMatrix;
using linalg::cplx;
using linalg::CVector;
using linalg::RVector;
using qsim::StateVector;

/// Circuit over D data qubits followed by K ancilla qubits. Measuring the
/// ancillas gives the class, outcome a has global indices 2^K * t + a.
struct ClassifierModel {
    int D = 0;
    int K = 0;
    int k = 0;
    qsim::CircuitSpec spec;
    qsim::ParamVector params;

    std::size_t data_dim() const { return std::size_t{1} << D; }
    std::size_t outcomes() const { return std::size_t{1} << K; }
    void validate() const;
};

/// K = ceil(log2 k), at least 1.
int ancilla_for_classes(int k);

ClassifierModel make_classifier(int D, int k, int layers, qsim::Entangler entangler = qsim::Entangler::CNOT);
/// Angles uniform in [0, 2pi).
void randomize_params(ClassifierModel& model, std::uint64_t seed);

/// Per-outcome probability matrices, one for each of the 2^K ancilla outcomes.
struct ClassProbMatrices {
    int D = 0;
    int K = 0;
    int k = 0;
    std::vector<CMatrix> m;
    std::vector<RVector> re;  // Re(M^c), row-major; enough for real inputs

    std::size_t dim() const { return std::size_t{1} << D; }
    std::size_t outcomes() const { return m.size(); }
};

ClassProbMatrices extract_mc(const ClassifierModel& model);

/// All 2^K outcome probabilities from the simulated circuit on state (x) |0>^K.
RVector outcome_probs_direct(const ClassifierModel& model, const StateVector& state);
/// First k outcomes divided by their sum.
RVector renormalize(std::span<const double> outcomes, int k);
RVector predict_probs_direct(const ClassifierModel& model, const StateVector& state);

/// x^dagger M^a x for every outcome a.
RVector outcome_probs_mc(const ClassProbMatrices& mc, std::span<const cplx> x);
RVector outcome_probs_mc(const ClassProbMatrices& mc, std::span<const double> x);
/// Require unit-norm x (1e-9), renormalized over k classes.
RVector predict_probs_mc(const ClassProbMatrices& mc, std::span<const cplx> x);
RVector predict_probs_mc(const ClassProbMatrices& mc, std::span<const double> x);

double quad_form(const CMatrix& m, std::span<const cplx> x);
/// out += scale * M x
void add_mat_vec(const CMatrix& m, std::span<const cplx> x, cplx scale, std::span<cplx> out);

inline constexpr double kProbFloor = 1e-12;

/// Cross-entropy of the k-renormalized distribution at `label`, with its
/// gradient w.r.t. the raw outcome probabilities (zero where the floor is active).
struct CrossEntropy {
    double loss = 0.0;
    RVector grad;  // length = outcomes.size()
};
CrossEntropy cross_entropy(std::span<const double> outcomes, int k, int label);

/// Lowest index wins ties.
int argmax(std::span<const double> probs);

struct TrainConfig {
    int epochs = 10;
    int batch = 64;
    double lr = 1e-3;
    double decay = 0.1;
    int decay_every = 5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainTrace {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_accuracy;  // training-set accuracy after each epoch
};

struct TrainResult {
    ClassifierModel model;
    TrainTrace trace;
};

/// Mini-batch Adam on mean cross-entropy; gradients by adjoint backprop
/// through the circuit, one sample at a time.
TrainResult train_classifier(ClassifierModel model, const data::QuantumDataset& train, const TrainConfig& cfg);

std::vector<int> predict_labels(const ClassProbMatrices& mc, const data::QuantumDataset& ds);
double accuracy(const ClassProbMatrices& mc, const data::QuantumDataset& ds);
double accuracy(const ClassifierModel& model, const data::QuantumDataset& ds);

}  // namespace quap::classifier
