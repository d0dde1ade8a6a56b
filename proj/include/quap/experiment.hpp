#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "quap/classifier.hpp"
#include "quap/data.hpp"

namespace toml {
inline namespace v3 {
class table;
}
}  // namespace toml

namespace quap::experiment {

enum class Task {
    TrainClassifier,
    AttackAdditive,
    AttackUnitaryClassical,
    AttackUnitaryPqc,
    AttackQbim,
    SynthTim,
    VerifyTheory,
    Sweep,
};

std::string to_string(Task t);
Task task_from_string(const std::string& s);
const std::vector<std::string>& task_names();

/// Resolved experiment configuration: built-in defaults overlaid with a TOML
/// file and dotted-key overrides. Unknown keys and type mismatches are
/// ConfigErrors.
class Config {
public:
    Config();
    Config(const Config& other);
    Config& operator=(const Config& other);
    ~Config();

    static Config from_toml(const std::string& text, const std::string& source = "<string>");
    static Config from_file(const std::filesystem::path& p);

    /// `value` is parsed as a TOML value; if that fails it is taken as a string.
    void set(const std::string& dotted_key, const std::string& value);
    bool has(const std::string& dotted_key) const;

    Task task() const;
    std::vector<std::uint64_t> seeds() const;

    double num(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    bool flag(const std::string& key) const;
    std::string str(const std::string& key) const;
    std::vector<double> nums(const std::string& key) const;
    std::vector<std::int64_t> integers(const std::string& key) const;

    /// Fills defaults that depend on other keys (generator depth, PQC batch size).
    void resolve();
    void validate() const;

    std::string to_toml() const;
    nlohmann::json to_json() const;

    /// The value at `key` rendered as TOML (used for sweep labels).
    std::string value_text(const std::string& key) const;

private:
    std::unique_ptr<toml::table> t_;
    std::vector<std::string> explicit_;  // keys set by the user
    void merge(const toml::table& user, const std::string& prefix);
};

/// Built-in defaults, as TOML text.
const std::string& default_config_text();

struct Split {
    std::string name;
    bool quantum = false;
    data::ClassicalDataset train_c, test_c;
    data::QuantumDataset train_q, test_q;
    nlohmann::json metadata;

    const data::QuantumDataset& eval_q(bool use_test) const { return use_test ? test_q : train_q; }
    const data::ClassicalDataset& eval_c(bool use_test) const { return use_test ? test_c : train_c; }
};

Split load_split(const Config& cfg);

/// Trains with `seed` or loads classifier.model when set.
classifier::ClassifierModel obtain_classifier(const Config& cfg, const Split& split, std::uint64_t seed,
                                              nlohmann::json* info = nullptr);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> labels;
    std::vector<std::pair<std::string, double>> metrics;
    nlohmann::json result;
    /// Extra files to write next to the report (file name, content).
    std::vector<std::pair<std::string, nlohmann::json>> artifacts;
};

/// Shared state across seeds of one run (data split, trained classifier).
class RunContext {
public:
    explicit RunContext(const Config& cfg);
    ~RunContext();
    const Split& split();
    const classifier::ClassifierModel& attack_classifier();
    const classifier::ClassProbMatrices& attack_mc();
    const nlohmann::json& classifier_info();

private:
    const Config& cfg_;
    std::optional<Split> split_;
    std::optional<classifier::ClassifierModel> model_;
    std::optional<classifier::ClassProbMatrices> mc_;
    nlohmann::json info_;
};

/// One seed of a non-sweep task.
SeedResult run_task(const Config& cfg, std::uint64_t seed, RunContext& ctx);

struct RunOutput {
    std::filesystem::path dir;
    std::vector<SeedResult> results;
    std::string aggregate_csv;
};

/// Output root: `output` key, else $QUAP_OUT, else ./runs.
std::filesystem::path output_root(const Config& cfg);

/// Writes <root>/<task>/<timestamp>/{config.toml, report_<seed>.json, aggregate.csv}.
RunOutput run_experiment(const Config& cfg);

/// Per-seed rows then mean and std rows per label group.
std::string aggregate_csv(const std::vector<SeedResult>& results);

/// Report JSON for one seed; `timestamp` only appears under "metadata".
nlohmann::json report_json(const Config& cfg, const SeedResult& r, const std::string& timestamp);

}  // namespace quap::experiment
