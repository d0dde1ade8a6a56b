#include "quap/io.hpp"

#include <fstream>
#include <sstream>

#include "quap/error.hpp"

namespace quap::io {

using nlohmann::json;

namespace {

template <typename T>
T get(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string(what) + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string(what) + ": bad field '" + key + "': " + e.what());
    }
}

void check_version(const json& j, const char* what) {
    const int v = get<int>(j, "version", what);
    if (v != kFormatVersion) throw FormatError(std::string(what) + ": unsupported version " + std::to_string(v));
}

json interleave(std::span<const linalg::cplx> v) {
    json a = json::array();
    for (const auto& z : v) {
        a.push_back(z.real());
        a.push_back(z.imag());
    }
    return a;
}

linalg::CVector deinterleave(const json& a, const char* what) {
    if (!a.is_array() || a.size() % 2 != 0) throw FormatError(std::string(what) + ": interleaved array expected");
    linalg::CVector v(a.size() / 2);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!a[2 * i].is_number() || !a[2 * i + 1].is_number()) throw FormatError(std::string(what) + ": non-numeric");
        v[i] = {a[2 * i].get<double>(), a[2 * i + 1].get<double>()};
    }
    return v;
}

json circuit_json(const qsim::CircuitSpec& s, std::span<const double> params, int K, int k) {
    return {{"version", kFormatVersion},
            {"D", s.qubits - K},
            {"K", K},
            {"k", k},
            {"layers", s.layers},
            {"entangler", qsim::to_string(s.entangler)},
            {"params", std::vector<double>(params.begin(), params.end())}};
}

}  // namespace

json model_to_json(const classifier::ClassifierModel& m) {
    m.validate();
    return circuit_json(m.spec, m.params, m.K, m.k);
}

classifier::ClassifierModel model_from_json(const json& j) {
    constexpr const char* what = "model file";
    check_version(j, what);
    classifier::ClassifierModel m;
    m.D = get<int>(j, "D", what);
    m.K = get<int>(j, "K", what);
    m.k = get<int>(j, "k", what);
    m.spec.qubits = m.D + m.K;
    m.spec.layers = get<int>(j, "layers", what);
    m.spec.entangler = qsim::entangler_from_string(get<std::string>(j, "entangler", what));
    m.params = get<std::vector<double>>(j, "params", what);
    m.validate();
    return m;
}

json generator_to_json(const additive::GeneratorNet& g) {
    g.validate();
    return {{"version", kFormatVersion},
            {"layer_sizes", g.sizes},
            {"weights", g.weights},
            {"biases", g.biases},
            {"slope", g.slope}};
}

additive::GeneratorNet generator_from_json(const json& j) {
    constexpr const char* what = "generator file";
    check_version(j, what);
    additive::GeneratorNet g;
    g.sizes = get<std::vector<int>>(j, "layer_sizes", what);
    g.weights = get<std::vector<std::vector<double>>>(j, "weights", what);
    g.biases = get<std::vector<std::vector<double>>>(j, "biases", what);
    g.slope = get<double>(j, "slope", what);
    g.validate();
    return g;
}

json attack_to_json(const unitary::UnitaryAttack& a) {
    a.validate();
    json j;
    if (a.form == unitary::UnitaryAttack::Form::Matrix) {
        j = {{"version", kFormatVersion},
             {"kind", "matrix_attack"},
             {"d", a.matrix.rows()},
             {"entries", interleave(a.matrix.data())}};
    } else {
        j = circuit_json(a.spec, a.params, 0, 0);
        j["kind"] = "circuit_attack";
    }
    j["alpha"] = a.alpha;
    j["loss_trace"] = a.loss_trace;
    return j;
}

unitary::UnitaryAttack attack_from_json(const json& j) {
    constexpr const char* what = "attack file";
    check_version(j, what);
    const auto kind = get<std::string>(j, "kind", what);
    unitary::UnitaryAttack a;
    if (kind == "matrix_attack") {
        const auto d = get<std::size_t>(j, "d", what);
        auto v = deinterleave(j.at("entries"), what);
        if (v.size() != d * d) throw FormatError("attack file: entry count does not match d");
        a.matrix = linalg::CMatrix(d, d, std::move(v));
    } else if (kind == "circuit_attack") {
        a.form = unitary::UnitaryAttack::Form::Circuit;
        a.spec.qubits = get<int>(j, "D", what);
        a.spec.layers = get<int>(j, "layers", what);
        a.spec.entangler = qsim::entangler_from_string(get<std::string>(j, "entangler", what));
        a.params = get<std::vector<double>>(j, "params", what);
    } else {
        throw FormatError("attack file: unknown kind '" + kind + "'");
    }
    a.alpha = get<double>(j, "alpha", what);
    if (j.contains("loss_trace")) a.loss_trace = get<std::vector<double>>(j, "loss_trace", what);
    a.validate();
    return a;
}

json dataset_to_json(const data::QuantumDataset& ds) {
    json states = json::array();
    for (const auto& s : ds.states) states.push_back(interleave(s.amps()));
    return {{"version", kFormatVersion},
            {"qubits", ds.qubits},
            {"labels", ds.labels},
            {"states", states},
            {"metadata", ds.metadata}};
}

data::QuantumDataset dataset_from_json(const json& j) {
    constexpr const char* what = "dataset file";
    check_version(j, what);
    data::QuantumDataset ds;
    ds.qubits = get<int>(j, "qubits", what);
    ds.labels = get<std::vector<int>>(j, "labels", what);
    const auto& states = j.at("states");
    if (!states.is_array() || states.size() != ds.labels.size()) {
        throw FormatError("dataset file: states and labels differ in length");
    }
    for (const auto& s : states) ds.states.emplace_back(ds.qubits, deinterleave(s, what));
    if (j.contains("metadata")) ds.metadata = j.at("metadata");
    return ds;
}

json read_json(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("'" + p.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

void write_json(const std::filesystem::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) { append(header); }

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw ShapeError("csv: row width differs from header");
    append(cells);
    ++rows_;
}

void CsvWriter::append(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ += ',';
        const auto& c = cells[i];
        if (c.find_first_of(",\"\n\r") == std::string::npos) {
            out_ += c;
            continue;
        }
        out_ += '"';
        for (char ch : c) {
            if (ch == '"') out_ += '"';
            out_ += ch;
        }
        out_ += '"';
    }
    out_ += '\n';
}

std::string CsvWriter::str() const { return out_; }

std::string fmt(double v) { return json(v).dump(); }

}  // namespace quap::io
