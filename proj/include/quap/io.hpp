#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/classifier.hpp"
#include "quap/data.hpp"
#include "quap/uap_additive.hpp"
#include "quap/uap_unitary.hpp"

namespace quap::io {

inline constexpr int kFormatVersion = 1;

nlohmann::json model_to_json(const classifier::ClassifierModel& m);
classifier::ClassifierModel model_from_json(const nlohmann::json& j);

nlohmann::json generator_to_json(const additive::GeneratorNet& g);
additive::GeneratorNet generator_from_json(const nlohmann::json& j);

/// Matrix form: {version, kind, d, alpha, entries: [re, im, ...] row-major}.
/// Circuit form: the classifier model schema with K = k = 0.
nlohmann::json attack_to_json(const unitary::UnitaryAttack& a);
unitary::UnitaryAttack attack_from_json(const nlohmann::json& j);

nlohmann::json dataset_to_json(const data::QuantumDataset& ds);
data::QuantumDataset dataset_from_json(const nlohmann::json& j);

/// IoError when unreadable, FormatError when not JSON.
nlohmann::json read_json(const std::filesystem::path& p);
/// Creates parent directories; pretty-printed with a trailing newline.
void write_json(const std::filesystem::path& p, const nlohmann::json& j);
void write_text(const std::filesystem::path& p, const std::string& text);

/// Minimal RFC 4180 writer.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);
    std::string str() const;
    std::size_t rows() const { return rows_; }

private:
    std::size_t width_;
    std::size_t rows_ = 0;
    std::string out_;
    void append(const std::vector<std::string>& cells);
};

/// Shortest round-trip decimal form of a double.
std::string fmt(double v);

}  // namespace quap::io
