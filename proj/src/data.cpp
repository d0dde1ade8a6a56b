#include "quap/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "quap/error.hpp"
#include "quap/rng.hpp"

namespace quap::data {

void ClassicalDataset::validate(int k) const {
    if (samples.size() != labels.size()) throw ShapeError("dataset: sample and label counts differ");
    for (const auto& s : samples) {
        if (s.size() != dim) throw ShapeError("dataset: sample dimension mismatch");
    }
    for (int y : labels) {
        if (y < 0 || y >= k) throw InputError("dataset: label out of range");
    }
}

void QuantumDataset::validate(int k) const {
    if (states.size() != labels.size()) throw ShapeError("dataset: state and label counts differ");
    for (const auto& s : states) {
        if (s.qubits() != qubits) throw ShapeError("dataset: qubit count mismatch");
    }
    for (int y : labels) {
        if (y < 0 || y >= k) throw InputError("dataset: label out of range");
    }
}

int qubits_for_dim(std::size_t d) {
    if (d == 0) throw ShapeError("zero-dimensional data");
    int q = 0;
    while ((std::size_t{1} << q) < d) ++q;
    return q;
}

StateVector amplitude_encode(std::span<const double> x) {
    const int n = qubits_for_dim(x.size());
    double sq = 0.0;
    for (double v : x) sq += v * v;
    const double nrm = std::sqrt(sq);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw DomainError("amplitude_encode: zero or non-finite vector");
    linalg::CVector amps(std::size_t{1} << n);
    for (std::size_t i = 0; i < x.size(); ++i) amps[i] = x[i] / nrm;
    return StateVector::normalized(n, std::move(amps));
}

QuantumDataset encode_dataset(const ClassicalDataset& ds) {
    QuantumDataset out;
    out.qubits = qubits_for_dim(ds.dim);
    out.states.reserve(ds.size());
    for (const auto& s : ds.samples) out.states.push_back(amplitude_encode(s));
    out.labels = ds.labels;
    out.metadata["encoding"] = "amplitude";
    out.metadata["source_dim"] = ds.dim;
    return out;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
    return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
           std::uint32_t{b[off + 3]};
}

}  // namespace

ClassicalDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    if (ib.size() < 16 || be32(ib, 0) != 0x00000803u) throw FormatError(images.string() + ": not an IDX image file");
    if (lb.size() < 8 || be32(lb, 0) != 0x00000801u) throw FormatError(labels.string() + ": not an IDX label file");
    const std::size_t count = be32(ib, 4);
    const std::size_t rows = be32(ib, 8);
    const std::size_t cols = be32(ib, 12);
    const std::size_t lcount = be32(lb, 4);
    if (ib.size() != 16 + count * rows * cols) throw FormatError(images.string() + ": payload size mismatch");
    if (lb.size() != 8 + lcount) throw FormatError(labels.string() + ": payload size mismatch");
    if (count != lcount) throw InputError("IDX image and label counts differ");

    ClassicalDataset ds;
    ds.dim = rows * cols;
    ds.rows = static_cast<int>(rows);
    ds.cols = static_cast<int>(cols);
    ds.samples.resize(count);
    ds.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        RVector& s = ds.samples[i];
        s.resize(ds.dim);
        const unsigned char* px = ib.data() + 16 + i * ds.dim;
        for (std::size_t j = 0; j < ds.dim; ++j) s[j] = px[j] / 255.0;
        ds.labels[i] = lb[8 + i];
    }
    return ds;
}

RVector downsample(std::span<const double> image, int h, int w, int th, int tw) {
    if (h <= 0 || w <= 0 || th <= 0 || tw <= 0) throw ShapeError("downsample: non-positive size");
    if (image.size() != static_cast<std::size_t>(h) * w) throw ShapeError("downsample: image size mismatch");
    if (h % th != 0 || w % tw != 0) throw ShapeError("downsample: target size must divide source size");
    const int bh = h / th, bw = w / tw;
    RVector out(static_cast<std::size_t>(th) * tw);
    for (int r = 0; r < th; ++r) {
        for (int c = 0; c < tw; ++c) {
            double acc = 0.0;
            for (int i = 0; i < bh; ++i)
                for (int j = 0; j < bw; ++j) acc += image[(r * bh + i) * w + c * bw + j];
            out[r * tw + c] = acc / (bh * bw);
        }
    }
    return out;
}

RVector resize_bilinear(std::span<const double> image, int h, int w, int th, int tw) {
    if (h <= 0 || w <= 0 || th <= 0 || tw <= 0) throw ShapeError("resize: non-positive size");
    if (image.size() != static_cast<std::size_t>(h) * w) throw ShapeError("resize: image size mismatch");
    auto coord = [](int i, int src, int dst, int& lo, int& hi, double& frac) {
        double s = (i + 0.5) * src / dst - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        lo = static_cast<int>(std::floor(s));
        hi = std::min(lo + 1, src - 1);
        frac = s - lo;
    };
    RVector out(static_cast<std::size_t>(th) * tw);
    for (int r = 0; r < th; ++r) {
        int r0, r1;
        double fr;
        coord(r, h, th, r0, r1, fr);
        for (int c = 0; c < tw; ++c) {
            int c0, c1;
            double fc;
            coord(c, w, tw, c0, c1, fc);
            const double top = (1 - fc) * image[r0 * w + c0] + fc * image[r0 * w + c1];
            const double bot = (1 - fc) * image[r1 * w + c0] + fc * image[r1 * w + c1];
            out[r * tw + c] = std::clamp((1 - fr) * top + fr * bot, 0.0, 1.0);
        }
    }
    return out;
}

ClassicalDataset resize_dataset(const ClassicalDataset& ds, int th, int tw, ResizeMethod method) {
    if (ds.rows <= 0 || ds.cols <= 0) throw ShapeError("resize_dataset: dataset has no image shape");
    ClassicalDataset out;
    out.rows = th;
    out.cols = tw;
    out.dim = static_cast<std::size_t>(th) * tw;
    out.labels = ds.labels;
    out.samples.reserve(ds.size());
    for (const auto& s : ds.samples) {
        out.samples.push_back(method == ResizeMethod::Bilinear ? resize_bilinear(s, ds.rows, ds.cols, th, tw)
                                                               : downsample(s, ds.rows, ds.cols, th, tw));
    }
    return out;
}

ClassicalDataset filter_and_relabel(const ClassicalDataset& ds, const std::vector<int>& classes, int subsample) {
    if (classes.empty()) throw InputError("filter_and_relabel: empty class list");
    if (subsample < 1) throw InputError("filter_and_relabel: subsample factor must be >= 1");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        for (std::size_t j = i + 1; j < classes.size(); ++j) {
            if (classes[i] == classes[j]) throw InputError("filter_and_relabel: duplicate class");
        }
        if (std::find(ds.labels.begin(), ds.labels.end(), classes[i]) == ds.labels.end()) {
            throw InputError("filter_and_relabel: class " + std::to_string(classes[i]) + " not present");
        }
    }
    ClassicalDataset out;
    out.dim = ds.dim;
    out.rows = ds.rows;
    out.cols = ds.cols;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto it = std::find(classes.begin(), classes.end(), ds.labels[i]);
        if (it == classes.end()) continue;
        if (kept++ % subsample != 0) continue;
        out.samples.push_back(ds.samples[i]);
        out.labels.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
}

CMatrix tim_hamiltonian(int spins, double J, double g) {
    if (spins < 2) throw ConfigError("TIM needs at least two spins");
    if (spins > 10) throw ConfigError("TIM spin count above eigensolver limit (10)");
    const std::size_t dim = std::size_t{1} << spins;
    CMatrix h(dim, dim);
    for (std::size_t s = 0; s < dim; ++s) {
        double zz = 0.0;
        for (int i = 0; i + 1 < spins; ++i) {
            const bool a = (s >> (spins - 1 - i)) & 1u;
            const bool b = (s >> (spins - 2 - i)) & 1u;
            zz += (a == b) ? 1.0 : -1.0;
        }
        h(s, s) = -J * zz;
        for (int i = 0; i < spins; ++i) {
            const std::size_t t = s ^ (std::size_t{1} << (spins - 1 - i));
            h(s, t) += -J * g;
        }
    }
    return h;
}

StateVector tim_ground_state(int spins, double J, double g) {
    const auto eig = linalg::herm_eig(tim_hamiltonian(spins, J, g));
    return StateVector::normalized(spins, eig.vectors.column(0));
}

void TimConfig::validate() const {
    if (spins < 2) throw ConfigError("tim: spins must be >= 2");
    if (train_count < 0 || test_count < 0 || train_count + test_count == 0) {
        throw ConfigError("tim: sample counts must be positive");
    }
    if (!(g_min >= 0.0 && g_max <= 2.0 && g_min < 1.0 && g_max > 1.0)) {
        throw ConfigError("tim: g range must lie in [0,2] and straddle 1");
    }
}

QuantumDataset synthesize_tim_split(const TimConfig& cfg, int count, const std::string& purpose) {
    cfg.validate();
    QuantumDataset out;
    out.qubits = cfg.spins;
    out.states.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(cfg.seed, purpose, static_cast<std::uint64_t>(i));
        const int label = i % 2;
        const double lo = label == 1 ? cfg.g_min : 1.0;
        const double hi = label == 1 ? 1.0 : cfg.g_max;
        double g = 1.0;
        while (std::abs(g - 1.0) < 1e-9) g = rng.uniform(lo, hi);
        out.states.push_back(tim_ground_state(cfg.spins, cfg.J, g));
        out.labels.push_back(label);
    }
    out.metadata = {{"source", "tim"},       {"spins", cfg.spins},  {"J", cfg.J},
                    {"g_range", {cfg.g_min, cfg.g_max}}, {"seed", cfg.seed}, {"boundary", "open"},
                    {"split", purpose}};
    return out;
}

TimSplit synthesize_tim(const TimConfig& cfg) {
    return {synthesize_tim_split(cfg, cfg.train_count, "tim-train"),
            synthesize_tim_split(cfg, cfg.test_count, "tim-test")};
}

int xor_label(double x, double y) {
    const int sx = x >= 0.0 ? 1 : 0;
    const int sy = y >= 0.0 ? 1 : 0;
    return sx ^ sy;
}

ClassicalDataset xor_dataset(int count, std::uint64_t seed) {
    if (count <= 0) throw InputError("xor_dataset: count must be positive");
    ClassicalDataset ds;
    ds.dim = 2;
    Rng rng(seed, "xor");
    for (int i = 0; i < count; ++i) {
        const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double x = std::cos(a), y = std::sin(a);
        ds.samples.push_back({x, y});
        ds.labels.push_back(xor_label(x, y));
    }
    return ds;
}

}  // namespace quap::data
