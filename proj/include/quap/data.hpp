#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/linalg.hpp"
#include "quap/qsim.hpp"

namespace quap::data {

using linalg::CMatrix;
using linalg::RVector;
using qsim::StateVector;

struct ClassicalDataset {
    std::vector<RVector> samples;
    std::vector<int> labels;
    std::size_t dim = 0;
    int rows = 0;  // image shape when the samples are images, else 0
    int cols = 0;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    /// Throws ShapeError/InputError if lengths, dims or labels (< k) disagree.
    void validate(int k) const;
};

struct QuantumDataset {
    std::vector<StateVector> states;
    std::vector<int> labels;
    int qubits = 0;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t size() const { return states.size(); }
    bool empty() const { return states.empty(); }
    std::size_t dim() const { return std::size_t{1} << qubits; }
    void validate(int k) const;
};

/// Number of qubits needed for d amplitudes, ceil(log2 d) (0 for d = 1).
int qubits_for_dim(std::size_t d);

/// Zero-pads x to the next power of two and normalizes.
StateVector amplitude_encode(std::span<const double> x);

QuantumDataset encode_dataset(const ClassicalDataset& ds);

ClassicalDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// Block-average pooling of a row-major h x w image; th | h and tw | w.
RVector downsample(std::span<const double> image, int h, int w, int th, int tw);
/// Bilinear resize with half-pixel centres (sample point (i + 0.5) * h / th - 0.5).
RVector resize_bilinear(std::span<const double> image, int h, int w, int th, int tw);

enum class ResizeMethod { Bilinear, BlockAverage };
ClassicalDataset resize_dataset(const ClassicalDataset& ds, int th, int tw, ResizeMethod method);

/// Keeps the listed classes, relabels them to their position in `classes`,
/// then keeps every `subsample`-th retained sample.
ClassicalDataset filter_and_relabel(const ClassicalDataset& ds, const std::vector<int>& classes, int subsample = 1);

/// H = -J (sum_i Z_i Z_{i+1} + g sum_i X_i), open chain.
CMatrix tim_hamiltonian(int spins, double J, double g);
StateVector tim_ground_state(int spins, double J, double g);

struct TimConfig {
    int spins = 6;
    double J = 1.0;
    double g_min = 0.0;
    double g_max = 2.0;
    int train_count = 5000;
    int test_count = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TimSplit {
    QuantumDataset train;
    QuantumDataset test;
};

/// Label 1 for g < 1 (ordered), 0 for g > 1. Sample i gets class i % 2 and a
/// g drawn uniformly from that phase's part of [g_min, g_max], so the split is
/// balanced.
TimSplit synthesize_tim(const TimConfig& cfg);
QuantumDataset synthesize_tim_split(const TimConfig& cfg, int count, const std::string& purpose);

int xor_label(double x, double y);
/// Points uniform on the unit circle labelled s(x) xor s(y), s(v) = [v >= 0].
ClassicalDataset xor_dataset(int count, std::uint64_t seed);

}  // namespace quap::data
