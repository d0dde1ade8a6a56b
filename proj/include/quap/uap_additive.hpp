#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/attack.hpp"
#include "quap/classifier.hpp"
#include "quap/data.hpp"

namespace quap::additive {

using classifier::ClassProbMatrices;
using linalg::RVector;

/// Fully connected net: LeakyReLU on hidden layers, tanh on the output.
struct GeneratorNet {
    std::vector<int> sizes;             // input, hidden..., output
    std::vector<RVector> weights;       // layer l: sizes[l+1] x sizes[l], row-major
    std::vector<RVector> biases;        // layer l: sizes[l+1]
    double slope = 0.01;

    std::size_t layers() const { return weights.size(); }
    int input_dim() const { return sizes.front(); }
    int output_dim() const { return sizes.back(); }
    std::size_t param_count() const;
    void validate() const;
};

/// Weights and biases uniform in +-1/sqrt(fan_in).
GeneratorNet make_generator(const std::vector<int>& sizes, double slope, std::uint64_t seed);

struct GeneratorCache {
    std::vector<RVector> inputs;  // input to each layer
    std::vector<RVector> pre;     // pre-activation of each layer
    RVector output;
};

struct GeneratorGrads {
    std::vector<RVector> weights;
    std::vector<RVector> biases;
};

RVector generator_forward(const GeneratorNet& gen, std::span<const double> z, GeneratorCache* cache = nullptr);
/// Gradients w.r.t. all weights and biases given dL/d(output).
GeneratorGrads generator_backward(const GeneratorNet& gen, const GeneratorCache& cache, std::span<const double> dout);

enum class NormKind { Linf, L2 };
std::string to_string(NormKind k);
NormKind norm_kind_from_string(const std::string& s);

/// Linf: eps * z'. L2: eps * z'/|z'| when |z'| > eps, else z'.
RVector scale_to_budget(std::span<const double> zp, double epsilon, NormKind kind);
/// Vector-Jacobian product of scale_to_budget at zp.
RVector scale_backward(std::span<const double> zp, double epsilon, NormKind kind, std::span<const double> ddelta);

/// add -> normalize -> clip to [0,1] -> renormalize, keeping what backprop needs.
struct Projection {
    bool degenerate = false;
    RVector u;                       // (x + delta)/|x + delta|
    double v_norm = 0.0;
    std::vector<unsigned char> kept;  // 1 where the clip was inactive
    double w_norm = 0.0;
    RVector s;                        // final unit vector, length dim(x)
};

Projection project(std::span<const double> x, std::span<const double> delta);
/// Straight-through on unclipped coordinates, zero on clipped ones.
RVector project_backward(const Projection& p, std::span<const double> ds);
/// Throws DomainError for a sample that clips to zero.
qsim::StateVector perturb_project_encode(std::span<const double> x, std::span<const double> delta);

struct AdditiveConfig {
    double epsilon = 0.3;
    NormKind norm = NormKind::Linf;
    attack::AttackMode mode;
    std::uint64_t seed = 0;
    int z_dim = 256;
    std::vector<int> hidden{512, 1024, 512};
    double slope = 0.01;
    int epochs = 10;
    int batch = 64;
    double lr = 1e-3;
    double decay = 0.3;
    int decay_every = 4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate(int k) const;
    nlohmann::json to_json() const;
};

struct AdditiveResult {
    GeneratorNet generator;
    RVector z;
    RVector perturbation;
    attack::AttackReport train_report;  // evaluated on the training split after the final epoch
};

/// Fixed z drawn once from the seed; the classifier stays frozen.
AdditiveResult train_additive_uap(GeneratorNet gen, const ClassProbMatrices& mc, const data::ClassicalDataset& train,
                                  const AdditiveConfig& cfg);
AdditiveResult train_additive_uap(const ClassProbMatrices& mc, const data::ClassicalDataset& train,
                                  const AdditiveConfig& cfg);

/// Misclassification over samples the clean classifier gets right.
attack::AttackReport evaluate_attack(std::span<const double> delta, const ClassProbMatrices& mc,
                                     const data::ClassicalDataset& ds, const attack::AttackMode& mode = {});

/// Mean batch fooling loss at delta; used by tests and for the loss trace.
double batch_loss(std::span<const double> delta, const ClassProbMatrices& mc, const data::ClassicalDataset& ds,
                  std::span<const std::size_t> idx, const attack::AttackMode& mode, RVector* ddelta = nullptr);

}  // namespace quap::additive
