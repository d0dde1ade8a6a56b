#include "quap/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <cstdio>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "quap/error.hpp"
#include "quap/io.hpp"
#include "quap/theory.hpp"
#include "quap/uap_additive.hpp"
#include "quap/uap_unitary.hpp"

#ifndef QUAP_DEFAULT_MNIST_DIR
#define QUAP_DEFAULT_MNIST_DIR "data/mnist5k"
#endif

namespace quap::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<Task, std::string>>& task_table() {
    static const std::vector<std::pair<Task, std::string>> t{
        {Task::TrainClassifier, "train-classifier"},
        {Task::AttackAdditive, "attack-additive"},
        {Task::AttackUnitaryClassical, "attack-unitary-classical"},
        {Task::AttackUnitaryPqc, "attack-unitary-pqc"},
        {Task::AttackQbim, "attack-qbim"},
        {Task::SynthTim, "synth-tim"},
        {Task::VerifyTheory, "verify-theory"},
        {Task::Sweep, "sweep"},
    };
    return t;
}

std::vector<std::string> split_key(const std::string& key) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : key) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    for (const auto& p : parts) {
        if (p.empty()) throw ConfigError("malformed config key '" + key + "'");
    }
    return parts;
}

json node_to_json(const toml::node& n) {
    if (auto t = n.as_table()) {
        json j = json::object();
        for (const auto& [k, v] : *t) j[std::string(k.str())] = node_to_json(v);
        return j;
    }
    if (auto a = n.as_array()) {
        json j = json::array();
        for (const auto& v : *a) j.push_back(node_to_json(v));
        return j;
    }
    if (auto v = n.as_integer()) return v->get();
    if (auto v = n.as_floating_point()) return v->get();
    if (auto v = n.as_boolean()) return v->get();
    if (auto v = n.as_string()) return v->get();
    throw ConfigError("unsupported TOML value type");
}

std::string type_name(const toml::node& n) {
    switch (n.type()) {
        case toml::node_type::table: return "table";
        case toml::node_type::array: return "array";
        case toml::node_type::string: return "string";
        case toml::node_type::integer: return "integer";
        case toml::node_type::floating_point: return "float";
        case toml::node_type::boolean: return "boolean";
        default: return "date/time";
    }
}

// Same-typed copy of `val` shaped like `def`; ints widen to floats.
void assign(toml::table& parent, const std::string& key, const toml::node& def, const toml::node& val,
            const std::string& full) {
    auto mismatch = [&] {
        return ConfigError("config key '" + full + "' expects " + type_name(def) + ", got " + type_name(val));
    };
    switch (def.type()) {
        case toml::node_type::floating_point:
            if (auto f = val.as_floating_point()) {
                parent.insert_or_assign(key, f->get());
            } else if (auto i = val.as_integer()) {
                parent.insert_or_assign(key, static_cast<double>(i->get()));
            } else {
                throw mismatch();
            }
            return;
        case toml::node_type::integer:
            if (auto i = val.as_integer()) {
                parent.insert_or_assign(key, i->get());
                return;
            }
            throw mismatch();
        case toml::node_type::boolean:
            if (auto b = val.as_boolean()) {
                parent.insert_or_assign(key, b->get());
                return;
            }
            throw mismatch();
        case toml::node_type::string:
            if (auto s = val.as_string()) {
                parent.insert_or_assign(key, s->get());
                return;
            }
            throw mismatch();
        case toml::node_type::array: {
            const auto* a = val.as_array();
            if (!a) throw mismatch();
            const auto* da = def.as_array();
            toml::array out;
            for (const auto& e : *a) {
                const toml::node* proto = da->empty() ? nullptr : da->get(0);
                if (!proto) {
                    e.visit([&](auto&& v) {
                        if constexpr (toml::is_value<decltype(v)>) out.push_back(v.get());
                    });
                    continue;
                }
                if (proto->is_floating_point() && e.is_integer()) {
                    out.push_back(static_cast<double>(e.as_integer()->get()));
                } else if (proto->type() == e.type() && !e.is_table() && !e.is_array()) {
                    e.visit([&](auto&& v) {
                        if constexpr (toml::is_value<decltype(v)>) out.push_back(v.get());
                    });
                } else {
                    throw ConfigError("config key '" + full + "' expects an array of " + type_name(*proto));
                }
            }
            parent.insert_or_assign(key, std::move(out));
            return;
        }
        default:
            throw mismatch();
    }
}

std::string node_text(const toml::node& n) {
    if (auto f = n.as_floating_point()) return io::fmt(f->get());
    std::ostringstream os;
    n.visit([&](auto&& v) { os << v; });
    return os.str();
}

std::string fmt_metric(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return io::fmt(v);
}

const std::string kDefaults = R"(task = "train-classifier"
seeds = [0]
output = ""

[dataset]
kind = "mnist"
eval_split = "test"

[mnist]
dir = ")" QUAP_DEFAULT_MNIST_DIR R"("
classes = [0, 1]
image_size = 8
resize = "bilinear"
subsample = 1

[tim]
spins = 6
J = 1.0
g_min = 0.0
g_max = 2.0
train_count = 5000
test_count = 1000
seed = 0

[xor]
train_count = 400
test_count = 200
seed = 0

[classifier]
model = ""
layers = 10
entangler = "CNOT"
epochs = 10
batch = 64
lr = 0.001
decay = 0.1
decay_every = 5
seed = 0

[additive]
epsilon = 0.3
norm = "Linf"
target = -1
z_dim = 256
hidden = [512, 1024, 512]
slope = 0.01
epochs = 10
batch = 64
lr = 0.001
decay = 0.3
decay_every = 4
beta1 = 0.5
save_generator = false

[unitary]
alpha = 1.0
constraint = 0.0
alpha_lo = 0.001
alpha_hi = 1000.0
alpha_steps = 12
target = -1

[unitary_classical]
epochs = 15
batch = 64
lr = 0.001
decay = 0.3
decay_every = 5
beta1 = 0.5
init_spread = -1.0
tangent_grad = true

[unitary_pqc]
layers = 0
epochs = 10
batch = 64
lr = 0.001
decay = 1.0
decay_every = 1
beta1 = 0.5
param_shift = false

[qbim]
clamp_eps = 0.1
layers = 1
iters = 100
lr = 0.0
batch = 64
constraint = 0.0
clamp_hi = 1.0
clamp_steps = 12
target = -1

[theory]
class = 0
deltas = [1.5, 2.0, 5.0, 50.0]
samples = 10000

[sweep]
task = "attack-additive"
key = "additive.epsilon"
values = [0.05, 0.1, 0.2, 0.3]
)";

std::size_t data_dim(const Config& cfg) {
    const auto kind = cfg.str("dataset.kind");
    if (kind == "mnist") {
        const auto s = static_cast<std::size_t>(cfg.integer("mnist.image_size"));
        return std::size_t{1} << data::qubits_for_dim(s * s);
    }
    if (kind == "tim") return std::size_t{1} << cfg.integer("tim.spins");
    return 2;
}

int class_count(const Config& cfg) {
    return cfg.str("dataset.kind") == "mnist" ? static_cast<int>(cfg.integers("mnist.classes").size()) : 2;
}

attack::AttackMode mode_from(const Config& cfg, const std::string& key) {
    const auto t = cfg.integer(key);
    return t < 0 ? attack::AttackMode::untargeted() : attack::AttackMode::toward(static_cast<int>(t));
}

}  // namespace

std::string to_string(Task t) {
    for (const auto& [k, n] : task_table()) {
        if (k == t) return n;
    }
    return "unknown";
}

Task task_from_string(const std::string& s) {
    for (const auto& [k, n] : task_table()) {
        if (n == s) return k;
    }
    throw ConfigError("unknown task '" + s + "'");
}

const std::vector<std::string>& task_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, n] : task_table()) v.push_back(n);
        return v;
    }();
    return names;
}

const std::string& default_config_text() { return kDefaults; }

Config::Config() : t_(std::make_unique<toml::table>(toml::parse(std::string_view(kDefaults), std::string_view("<defaults>")))) {}
Config::Config(const Config& o) : t_(std::make_unique<toml::table>(*o.t_)), explicit_(o.explicit_) {}
Config& Config::operator=(const Config& o) {
    if (this != &o) {
        t_ = std::make_unique<toml::table>(*o.t_);
        explicit_ = o.explicit_;
    }
    return *this;
}
Config::~Config() = default;

void Config::merge(const toml::table& user, const std::string& prefix) {
    for (const auto& [k, v] : user) {
        const std::string key(k.str());
        const std::string full = prefix.empty() ? key : prefix + "." + key;
        toml::table* parent = t_.get();
        for (const auto& seg : prefix.empty() ? std::vector<std::string>{} : split_key(prefix)) {
            parent = (*parent)[seg].as_table();
        }
        const toml::node* def = parent->get(key);
        if (!def) throw ConfigError("unknown config key '" + full + "'");
        if (def->is_table()) {
            if (!v.is_table()) throw ConfigError("config key '" + full + "' must be a table");
            merge(*v.as_table(), full);
            continue;
        }
        assign(*parent, key, *def, v, full);
        explicit_.push_back(full);
    }
}

Config Config::from_toml(const std::string& text, const std::string& source) {
    Config c;
    try {
        const auto user = toml::parse(std::string_view(text), std::string_view(source));
        c.merge(user, "");
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " (" << e.source() << ")";
        throw ConfigError("invalid TOML: " + os.str());
    }
    return c;
}

Config Config::from_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open config '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_toml(ss.str(), p.string());
}

void Config::set(const std::string& dotted_key, const std::string& value) {
    const auto parts = split_key(dotted_key);
    toml::table* parent = t_.get();
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        auto* next = parent->get(parts[i]);
        if (!next || !next->is_table()) throw ConfigError("unknown config key '" + dotted_key + "'");
        parent = next->as_table();
    }
    const toml::node* def = parent->get(parts.back());
    if (!def || def->is_table()) throw ConfigError("unknown config key '" + dotted_key + "'");
    toml::table parsed;
    try {
        parsed = toml::parse(std::string_view("v = " + value));
    } catch (const toml::parse_error&) {
        parsed.insert_or_assign("v", value);
    }
    if (def->is_string() && !parsed.get("v")->is_string()) parsed.insert_or_assign("v", value);
    assign(*parent, parts.back(), *def, *parsed.get("v"), dotted_key);
    if (dotted_key == "task" || dotted_key == "sweep.task") task_from_string(str(dotted_key));
    explicit_.push_back(dotted_key);
}

bool Config::has(const std::string& key) const {
    return std::find(explicit_.begin(), explicit_.end(), key) != explicit_.end();
}

namespace {

const toml::node& lookup(const toml::table& t, const std::string& key) {
    const toml::node* n = t.at_path(key).node();
    if (!n) throw ConfigError("missing config key '" + key + "'");
    return *n;
}

}  // namespace

Task Config::task() const { return task_from_string(str("task")); }

std::vector<std::uint64_t> Config::seeds() const {
    std::vector<std::uint64_t> s;
    for (auto v : integers("seeds")) {
        if (v < 0) throw ConfigError("seeds must be non-negative");
        s.push_back(static_cast<std::uint64_t>(v));
    }
    return s;
}

double Config::num(const std::string& key) const {
    const auto v = lookup(*t_, key).value<double>();
    if (!v) throw ConfigError("config key '" + key + "' is not a number");
    return *v;
}

std::int64_t Config::integer(const std::string& key) const {
    const auto& n = lookup(*t_, key);
    if (!n.is_integer()) throw ConfigError("config key '" + key + "' is not an integer");
    return n.as_integer()->get();
}

bool Config::flag(const std::string& key) const {
    const auto& n = lookup(*t_, key);
    if (!n.is_boolean()) throw ConfigError("config key '" + key + "' is not a boolean");
    return n.as_boolean()->get();
}

std::string Config::str(const std::string& key) const {
    const auto& n = lookup(*t_, key);
    if (!n.is_string()) throw ConfigError("config key '" + key + "' is not a string");
    return n.as_string()->get();
}

std::vector<double> Config::nums(const std::string& key) const {
    const auto* a = lookup(*t_, key).as_array();
    if (!a) throw ConfigError("config key '" + key + "' is not an array");
    std::vector<double> out;
    for (const auto& e : *a) {
        const auto v = e.value<double>();
        if (!v) throw ConfigError("config key '" + key + "' must hold numbers");
        out.push_back(*v);
    }
    return out;
}

std::vector<std::int64_t> Config::integers(const std::string& key) const {
    const auto* a = lookup(*t_, key).as_array();
    if (!a) throw ConfigError("config key '" + key + "' is not an array");
    std::vector<std::int64_t> out;
    for (const auto& e : *a) {
        if (!e.is_integer()) throw ConfigError("config key '" + key + "' must hold integers");
        out.push_back(e.as_integer()->get());
    }
    return out;
}

std::string Config::value_text(const std::string& key) const { return node_text(lookup(*t_, key)); }

void Config::resolve() {
    const auto kind = str("dataset.kind");
    if (!has("unitary_pqc.batch") && kind == "tim") set("unitary_pqc.batch", "50");
    if (integer("unitary_pqc.layers") == 0) {
        set("unitary_pqc.layers", std::to_string(unitary::default_generator_depth(data_dim(*this))));
    }
    if (!(num("qbim.lr") > 0.0)) set("qbim.lr", io::fmt(num("qbim.clamp_eps") / 10.0));
}

void Config::validate() const {
    const Task t = task();
    if (seeds().empty()) throw ConfigError("seeds must be non-empty");
    const auto kind = str("dataset.kind");
    if (kind != "mnist" && kind != "tim" && kind != "xor") throw ConfigError("dataset.kind must be mnist, tim or xor");
    const auto split = str("dataset.eval_split");
    if (split != "test" && split != "train") throw ConfigError("dataset.eval_split must be test or train");
    if (kind == "mnist") {
        const fs::path dir = str("mnist.dir");
        for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte",
                              "t10k-labels-idx1-ubyte"}) {
            if (!fs::exists(dir / f)) throw IoError("missing MNIST file '" + (dir / f).string() + "'");
        }
        if (integers("mnist.classes").size() < 2) throw ConfigError("mnist.classes needs at least two classes");
        if (integer("mnist.image_size") < 1 || integer("mnist.image_size") > 28) {
            throw ConfigError("mnist.image_size must be in [1, 28]");
        }
        const auto r = str("mnist.resize");
        if (r != "bilinear" && r != "block") throw ConfigError("mnist.resize must be bilinear or block");
        if (integer("mnist.subsample") < 1) throw ConfigError("mnist.subsample must be >= 1");
    }
    const auto model = str("classifier.model");
    if (!model.empty() && !fs::exists(model)) throw IoError("classifier model '" + model + "' does not exist");
    qsim::entangler_from_string(str("classifier.entangler"));
    additive::norm_kind_from_string(str("additive.norm"));
    if (t == Task::Sweep) {
        const Task inner = task_from_string(str("sweep.task"));
        if (inner == Task::Sweep) throw ConfigError("sweep.task cannot be sweep");
        const auto key = str("sweep.key");
        lookup(*t_, key);
        const auto* a = lookup(*t_, "sweep.values").as_array();
        if (!a || a->empty()) throw ConfigError("sweep.values must be a non-empty array");
    }
}

std::string Config::to_toml() const {
    std::ostringstream os;
    os << *t_ << "\n";
    return os.str();
}

json Config::to_json() const { return node_to_json(*t_); }

// ---------------------------------------------------------------------------

Split load_split(const Config& cfg) {
    Split s;
    s.name = cfg.str("dataset.kind");
    if (s.name == "mnist") {
        const fs::path dir = cfg.str("mnist.dir");
        auto train = data::load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
        auto test = data::load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
        std::vector<int> classes;
        for (auto c : cfg.integers("mnist.classes")) classes.push_back(static_cast<int>(c));
        const int sub = static_cast<int>(cfg.integer("mnist.subsample"));
        train = data::filter_and_relabel(train, classes, sub);
        test = data::filter_and_relabel(test, classes, sub);
        const int size = static_cast<int>(cfg.integer("mnist.image_size"));
        const auto method =
            cfg.str("mnist.resize") == "block" ? data::ResizeMethod::BlockAverage : data::ResizeMethod::Bilinear;
        if (size != train.rows || size != train.cols) {
            train = data::resize_dataset(train, size, size, method);
            test = data::resize_dataset(test, size, size, method);
        }
        s.train_c = std::move(train);
        s.test_c = std::move(test);
        s.train_q = data::encode_dataset(s.train_c);
        s.test_q = data::encode_dataset(s.test_c);
        s.metadata = {{"source", dir.string()},
                      {"classes", classes},
                      {"image_size", size},
                      {"resize", cfg.str("mnist.resize")},
                      {"subsample", sub},
                      {"train_count", s.train_c.size()},
                      {"test_count", s.test_c.size()}};
    } else if (s.name == "tim") {
        s.quantum = true;
        data::TimConfig tc;
        tc.spins = static_cast<int>(cfg.integer("tim.spins"));
        tc.J = cfg.num("tim.J");
        tc.g_min = cfg.num("tim.g_min");
        tc.g_max = cfg.num("tim.g_max");
        tc.train_count = static_cast<int>(cfg.integer("tim.train_count"));
        tc.test_count = static_cast<int>(cfg.integer("tim.test_count"));
        tc.seed = static_cast<std::uint64_t>(cfg.integer("tim.seed"));
        auto split = data::synthesize_tim(tc);
        s.train_q = std::move(split.train);
        s.test_q = std::move(split.test);
        s.metadata = s.train_q.metadata;
        s.metadata["test_count"] = s.test_q.size();
    } else {
        const int ntr = static_cast<int>(cfg.integer("xor.train_count"));
        const int nte = static_cast<int>(cfg.integer("xor.test_count"));
        if (ntr < 1 || nte < 1) throw ConfigError("xor counts must be positive");
        const auto all = data::xor_dataset(ntr + nte, static_cast<std::uint64_t>(cfg.integer("xor.seed")));
        s.train_c = all;
        s.test_c = all;
        s.train_c.samples.resize(ntr);
        s.train_c.labels.resize(ntr);
        s.test_c.samples.erase(s.test_c.samples.begin(), s.test_c.samples.begin() + ntr);
        s.test_c.labels.erase(s.test_c.labels.begin(), s.test_c.labels.begin() + ntr);
        s.train_q = data::encode_dataset(s.train_c);
        s.test_q = data::encode_dataset(s.test_c);
        s.metadata = {{"source", "xor"}, {"train_count", ntr}, {"test_count", nte}, {"seed", cfg.integer("xor.seed")}};
    }
    return s;
}

classifier::ClassifierModel obtain_classifier(const Config& cfg, const Split& split, std::uint64_t seed, json* info) {
    const int k = class_count(cfg);
    const auto path = cfg.str("classifier.model");
    json meta;
    classifier::ClassifierModel m;
    if (!path.empty()) {
        m = io::model_from_json(io::read_json(path));
        if (m.D != split.train_q.qubits) throw ShapeError("classifier model qubit count does not match the dataset");
        if (m.k != k) throw ShapeError("classifier model class count does not match the dataset");
        meta["source"] = path;
    } else {
        m = classifier::make_classifier(split.train_q.qubits, k, static_cast<int>(cfg.integer("classifier.layers")),
                                        qsim::entangler_from_string(cfg.str("classifier.entangler")));
        classifier::randomize_params(m, seed);
        classifier::TrainConfig tc;
        tc.epochs = static_cast<int>(cfg.integer("classifier.epochs"));
        tc.batch = static_cast<int>(cfg.integer("classifier.batch"));
        tc.lr = cfg.num("classifier.lr");
        tc.decay = cfg.num("classifier.decay");
        tc.decay_every = static_cast<int>(cfg.integer("classifier.decay_every"));
        tc.seed = seed;
        auto r = classifier::train_classifier(m, split.train_q, tc);
        m = std::move(r.model);
        meta["source"] = "trained";
        meta["seed"] = seed;
        meta["epoch_loss"] = r.trace.epoch_loss;
        meta["epoch_accuracy"] = r.trace.epoch_accuracy;
    }
    const auto mc = classifier::extract_mc(m);
    meta["train_accuracy"] = classifier::accuracy(mc, split.train_q);
    meta["test_accuracy"] = classifier::accuracy(mc, split.test_q);
    if (info) *info = meta;
    return m;
}

RunContext::RunContext(const Config& cfg) : cfg_(cfg) {}
RunContext::~RunContext() = default;

const Split& RunContext::split() {
    if (!split_) split_ = load_split(cfg_);
    return *split_;
}

const classifier::ClassifierModel& RunContext::attack_classifier() {
    if (!model_) {
        model_ = obtain_classifier(cfg_, split(), static_cast<std::uint64_t>(cfg_.integer("classifier.seed")), &info_);
    }
    return *model_;
}

const classifier::ClassProbMatrices& RunContext::attack_mc() {
    if (!mc_) mc_ = classifier::extract_mc(attack_classifier());
    return *mc_;
}

const json& RunContext::classifier_info() {
    attack_classifier();
    return info_;
}

namespace {

std::string classifier_label(const Config& cfg) {
    const auto p = cfg.str("classifier.model");
    return p.empty() ? "trained:" + std::to_string(cfg.integer("classifier.seed")) : p;
}

SeedResult task_train_classifier(const Config& cfg, std::uint64_t seed, RunContext& ctx) {
    SeedResult r;
    json info;
    const auto m = obtain_classifier(cfg, ctx.split(), seed, &info);
    r.labels = {{"dataset", ctx.split().name},
                {"layers", std::to_string(m.spec.layers)},
                {"entangler", qsim::to_string(m.spec.entangler)}};
    const auto& loss = info.value("epoch_loss", json::array());
    r.metrics = {{"train_accuracy", info["train_accuracy"].get<double>()},
                 {"test_accuracy", info["test_accuracy"].get<double>()},
                 {"final_loss", loss.empty() ? std::nan("") : loss.back().get<double>()}};
    r.result = {{"classifier", info}, {"dataset", ctx.split().metadata}};
    r.artifacts.push_back({"model_" + std::to_string(seed) + ".json", io::model_to_json(m)});
    return r;
}

void require_classical(RunContext& ctx, const char* task) {
    if (ctx.split().quantum) throw ConfigError(std::string(task) + " needs a classical dataset (mnist or xor)");
}

SeedResult task_additive(const Config& cfg, std::uint64_t seed, RunContext& ctx) {
    require_classical(ctx, "attack-additive");
    const auto& split = ctx.split();
    const auto& mc = ctx.attack_mc();
    additive::AdditiveConfig ac;
    ac.epsilon = cfg.num("additive.epsilon");
    ac.norm = additive::norm_kind_from_string(cfg.str("additive.norm"));
    ac.mode = mode_from(cfg, "additive.target");
    ac.seed = seed;
    ac.z_dim = static_cast<int>(cfg.integer("additive.z_dim"));
    ac.hidden.clear();
    for (auto h : cfg.integers("additive.hidden")) ac.hidden.push_back(static_cast<int>(h));
    ac.slope = cfg.num("additive.slope");
    ac.epochs = static_cast<int>(cfg.integer("additive.epochs"));
    ac.batch = static_cast<int>(cfg.integer("additive.batch"));
    ac.lr = cfg.num("additive.lr");
    ac.decay = cfg.num("additive.decay");
    ac.decay_every = static_cast<int>(cfg.integer("additive.decay_every"));
    ac.beta1 = cfg.num("additive.beta1");

    auto res = additive::train_additive_uap(mc, split.train_c, ac);
    const bool use_test = cfg.str("dataset.eval_split") == "test";
    auto ev = additive::evaluate_attack(res.perturbation, mc, split.eval_c(use_test), ac.mode);
    ev.loss_trace = res.train_report.loss_trace;
    ev.config = ac.to_json();

    SeedResult r;
    r.labels = {{"dataset", split.name},
                {"classifier", classifier_label(cfg)},
                {"epsilon", io::fmt(ac.epsilon)},
                {"norm", additive::to_string(ac.norm)},
                {"mode", ac.mode.describe()}};
    r.metrics = {{"rate", ev.rate},
                 {"train_rate", res.train_report.rate},
                 {"evaluated", static_cast<double>(ev.evaluated)},
                 {"fooled", static_cast<double>(ev.fooled)},
                 {"skipped", static_cast<double>(ev.skipped)},
                 {"target_rate", ev.target_rate.value_or(std::nan(""))}};
    r.result = {{"classifier", ctx.classifier_info()},
                {"dataset", split.metadata},
                {"report", ev.to_json()},
                {"train_report", res.train_report.to_json()}};
    if (cfg.flag("additive.save_generator")) {
        r.artifacts.push_back({"generator_" + std::to_string(seed) + ".json", io::generator_to_json(res.generator)});
    }
    return r;
}

unitary::UnitaryTrainConfig unitary_cfg(const Config& cfg, const std::string& sec, std::uint64_t seed) {
    unitary::UnitaryTrainConfig u;
    u.epochs = static_cast<int>(cfg.integer(sec + ".epochs"));
    u.batch = static_cast<int>(cfg.integer(sec + ".batch"));
    u.lr = cfg.num(sec + ".lr");
    u.decay = cfg.num(sec + ".decay");
    u.decay_every = static_cast<int>(cfg.integer(sec + ".decay_every"));
    u.beta1 = cfg.num(sec + ".beta1");
    u.seed = seed;
    u.mode = mode_from(cfg, "unitary.target");
    if (sec == "unitary_classical") {
        u.init_spread = cfg.num(sec + ".init_spread");
        u.tangent_grad = cfg.flag(sec + ".tangent_grad");
    } else {
        u.param_shift = cfg.flag(sec + ".param_shift");
    }
    return u;
}

void fill_unitary_result(SeedResult& r, RunContext& ctx, const std::string& method, double constraint,
                         const unitary::UnitaryAttack& atk, const unitary::UnitaryEvaluation& ev, double knob,
                         const char* knob_name, std::optional<unitary::SearchResult> search, std::uint64_t seed) {
    r.labels = {{"dataset", ctx.split().name},
                {"method", method},
                {"fidelity_constraint", constraint > 0.0 ? io::fmt(constraint) : "none"}};
    r.metrics = {{"rate", ev.report.rate},
                 {"mean_fidelity", ev.fidelity.mean},
                 {"min_fidelity", ev.fidelity.min},
                 {knob_name, knob},
                 {"reachable", search ? (search->reachable ? 1.0 : 0.0) : 1.0},
                 {"target_rate", ev.report.target_rate.value_or(std::nan(""))}};
    r.result = {{"classifier", ctx.classifier_info()},
                {"dataset", ctx.split().metadata},
                {"report", ev.report.to_json()},
                {"fidelity", ev.fidelity.to_json()},
                {knob_name, knob}};
    if (search) r.result["search"] = search->to_json();
    r.artifacts.push_back({"attack_" + std::to_string(seed) + ".json", io::attack_to_json(atk)});
}

SeedResult task_unitary(const Config& cfg, std::uint64_t seed, RunContext& ctx, bool pqc) {
    const auto& split = ctx.split();
    const auto& mc = ctx.attack_mc();
    const bool use_test = cfg.str("dataset.eval_split") == "test";
    const auto& eval_ds = split.eval_q(use_test);
    const auto tc = unitary_cfg(cfg, pqc ? "unitary_pqc" : "unitary_classical", seed);
    qsim::CircuitSpec gen{mc.D, static_cast<int>(cfg.integer("unitary_pqc.layers")), qsim::Entangler::CZ};
    auto trainer = [&](double alpha) {
        return pqc ? unitary::train_unitary_pqc(gen, mc, split.train_q, alpha, tc)
                   : unitary::train_unitary_classical(mc, split.train_q, alpha, tc);
    };
    auto evaluator = [&](const unitary::UnitaryAttack& a) { return unitary::evaluate_unitary(a, mc, eval_ds, tc.mode); };
    const double constraint = cfg.num("unitary.constraint");
    SeedResult r;
    const std::string method = pqc ? "qugap-u-pqc" : "qugap-u-classical";
    if (constraint > 0.0) {
        unitary::AttackSearch search(trainer, evaluator);
        unitary::AlphaSearchConfig sc;
        sc.lo = cfg.num("unitary.alpha_lo");
        sc.hi = cfg.num("unitary.alpha_hi");
        sc.steps = static_cast<int>(cfg.integer("unitary.alpha_steps"));
        auto res = unitary::alpha_search_for_constraint(search, constraint, sc);
        fill_unitary_result(r, ctx, method, constraint, res.attack, res.eval, res.knob, "alpha", res, seed);
    } else {
        const double alpha = cfg.num("unitary.alpha");
        const auto atk = trainer(alpha);
        fill_unitary_result(r, ctx, method, 0.0, atk, evaluator(atk), alpha, "alpha", std::nullopt, seed);
    }
    if (pqc) r.labels.push_back({"generator_layers", std::to_string(gen.layers)});
    r.result["train_config"] = tc.to_json();
    return r;
}

SeedResult task_qbim(const Config& cfg, std::uint64_t seed, RunContext& ctx) {
    const auto& split = ctx.split();
    const auto& mc = ctx.attack_mc();
    const bool use_test = cfg.str("dataset.eval_split") == "test";
    const auto& eval_ds = split.eval_q(use_test);
    unitary::QbimConfig q;
    q.clamp_eps = cfg.num("qbim.clamp_eps");
    q.layers = static_cast<int>(cfg.integer("qbim.layers"));
    q.iters = static_cast<int>(cfg.integer("qbim.iters"));
    q.lr = cfg.num("qbim.lr");
    q.batch = static_cast<int>(cfg.integer("qbim.batch"));
    q.seed = seed;
    q.mode = mode_from(cfg, "qbim.target");
    const bool explicit_lr = cfg.has("qbim.lr");
    auto trainer = [&](double eps) {
        auto c = q;
        c.clamp_eps = eps;
        if (!explicit_lr) c.lr = eps / 10.0;
        return unitary::qbim_attack(mc, split.train_q, c);
    };
    auto evaluator = [&](const unitary::UnitaryAttack& a) { return unitary::evaluate_unitary(a, mc, eval_ds, q.mode); };
    const double constraint = cfg.num("qbim.constraint");
    SeedResult r;
    if (constraint > 0.0) {
        unitary::AttackSearch search(trainer, evaluator);
        unitary::ClampSearchConfig sc;
        sc.hi = cfg.num("qbim.clamp_hi");
        sc.steps = static_cast<int>(cfg.integer("qbim.clamp_steps"));
        auto res = unitary::clamp_search_for_constraint(search, constraint, sc);
        fill_unitary_result(r, ctx, "qbim", constraint, res.attack, res.eval, res.knob, "clamp_eps", res, seed);
    } else {
        const auto atk = trainer(q.clamp_eps);
        fill_unitary_result(r, ctx, "qbim", 0.0, atk, evaluator(atk), q.clamp_eps, "clamp_eps", std::nullopt, seed);
    }
    r.labels.push_back({"layers", std::to_string(q.layers)});
    r.result["qbim_config"] = q.to_json();
    return r;
}

SeedResult task_synth_tim(const Config& cfg, std::uint64_t seed) {
    data::TimConfig tc;
    tc.spins = static_cast<int>(cfg.integer("tim.spins"));
    tc.J = cfg.num("tim.J");
    tc.g_min = cfg.num("tim.g_min");
    tc.g_max = cfg.num("tim.g_max");
    tc.train_count = static_cast<int>(cfg.integer("tim.train_count"));
    tc.test_count = static_cast<int>(cfg.integer("tim.test_count"));
    tc.seed = seed;
    const auto split = data::synthesize_tim(tc);
    auto ones = [](const data::QuantumDataset& d) {
        return static_cast<double>(std::count(d.labels.begin(), d.labels.end(), 1));
    };
    SeedResult r;
    r.labels = {{"spins", std::to_string(tc.spins)}};
    r.metrics = {{"train_count", static_cast<double>(split.train.size())},
                 {"test_count", static_cast<double>(split.test.size())},
                 {"train_ordered", ones(split.train)},
                 {"test_ordered", ones(split.test)}};
    r.result = {{"train_metadata", split.train.metadata}, {"test_metadata", split.test.metadata}};
    r.artifacts.push_back({"tim_train_" + std::to_string(seed) + ".json", io::dataset_to_json(split.train)});
    r.artifacts.push_back({"tim_test_" + std::to_string(seed) + ".json", io::dataset_to_json(split.test)});
    return r;
}

SeedResult task_verify_theory(const Config& cfg, std::uint64_t seed, RunContext& ctx) {
    require_classical(ctx, "verify-theory");
    const auto& split = ctx.split();
    const auto& mc = ctx.attack_mc();
    const int c = static_cast<int>(cfg.integer("theory.class"));
    if (c < 0 || c >= mc.k) throw ConfigError("theory.class out of range");
    const auto samples = static_cast<std::size_t>(cfg.integer("theory.samples"));
    const bool use_test = cfg.str("dataset.eval_split") == "test";
    const auto& ds = split.eval_c(use_test);
    // first sample of class c that the classifier gets right
    std::vector<double> phat;
    std::size_t index = 0;
    for (; index < ds.size(); ++index) {
        if (ds.labels[index] != c) continue;
        const auto st = data::amplitude_encode(ds.samples[index]);
        std::vector<double> x(st.dim());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = st[i].real();
        if (classifier::argmax(classifier::predict_probs_mc(mc, x)) == c) {
            phat = std::move(x);
            break;
        }
    }
    if (phat.empty()) throw InputError("verify-theory: no correctly classified sample of the requested class");
    const double eps = theory::epsilon_c(mc, phat, c);
    const auto min_norm = theory::theorem1_min_norm(eps);
    json reports = json::array();
    double t1_rate = std::nan("");
    if (!min_norm.is_unbounded()) {
        t1_rate = theory::verify_theorem1(mc, phat, c, min_norm.value(), samples, seed).rate();
    }
    double worst = 1.0;
    for (double delta : cfg.nums("theory.deltas")) {
        try {
            auto rep = theory::theorem2_region(delta, eps);
            const auto s = theory::verify_theorem2(mc, phat, c, rep, samples, seed);
            rep.empirical_rate = s.rate();
            rep.samples = s.samples;
            rep.satisfying = s.satisfying;
            rep.seed = seed;
            worst = std::min(worst, s.rate());
            reports.push_back(theory::to_json(rep));
        } catch (const Error& e) {
            reports.push_back({{"delta", delta}, {"error", e.what()}, {"kind", to_string(e.kind())}});
        }
    }
    SeedResult r;
    r.labels = {{"dataset", split.name}, {"class", std::to_string(c)}};
    r.metrics = {{"epsilon_c", eps},
                 {"min_norm", min_norm.is_unbounded() ? INFINITY : min_norm.value()},
                 {"min_norm_rate", t1_rate},
                 {"worst_region_rate", worst}};
    r.result = {{"classifier", ctx.classifier_info()}, {"sample_index", index}, {"bound_reports", reports}};
    return r;
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void log_result(const std::string& task, const SeedResult& r, double secs) {
    std::string line = "[quap] " + task + " seed " + std::to_string(r.seed);
    for (const auto& [k, v] : r.labels) line += " " + k + "=" + v;
    for (std::size_t i = 0; i < std::min<std::size_t>(r.metrics.size(), 3); ++i) {
        line += " " + r.metrics[i].first + "=" + fmt_metric(r.metrics[i].second);
    }
    char tail[32];
    std::snprintf(tail, sizeof tail, " (%.1fs)", secs);
    std::fprintf(stderr, "%s%s\n", line.c_str(), tail);
}

}  // namespace

SeedResult run_task(const Config& cfg, std::uint64_t seed, RunContext& ctx) {
    SeedResult r;
    switch (cfg.task()) {
        case Task::TrainClassifier: r = task_train_classifier(cfg, seed, ctx); break;
        case Task::AttackAdditive: r = task_additive(cfg, seed, ctx); break;
        case Task::AttackUnitaryClassical: r = task_unitary(cfg, seed, ctx, false); break;
        case Task::AttackUnitaryPqc: r = task_unitary(cfg, seed, ctx, true); break;
        case Task::AttackQbim: r = task_qbim(cfg, seed, ctx); break;
        case Task::SynthTim: r = task_synth_tim(cfg, seed); break;
        case Task::VerifyTheory: r = task_verify_theory(cfg, seed, ctx); break;
        case Task::Sweep: throw ConfigError("run_task: sweep is handled by run_experiment");
    }
    r.seed = seed;
    return r;
}

fs::path output_root(const Config& cfg) {
    const auto o = cfg.str("output");
    if (!o.empty()) return o;
    if (const char* env = std::getenv("QUAP_OUT"); env && *env) return env;
    return "runs";
}

std::string aggregate_csv(const std::vector<SeedResult>& results) {
    if (results.empty()) return "";
    std::vector<std::string> header;
    for (const auto& [k, v] : results.front().labels) header.push_back(k);
    header.push_back("seed");
    for (const auto& [k, v] : results.front().metrics) header.push_back(k);
    io::CsvWriter w(header);

    std::vector<std::vector<std::string>> group_keys;
    std::map<std::vector<std::string>, std::vector<const SeedResult*>> groups;
    for (const auto& r : results) {
        if (r.labels.size() != results.front().labels.size() || r.metrics.size() != results.front().metrics.size()) {
            throw ShapeError("aggregate: results have differing columns");
        }
        std::vector<std::string> key;
        std::vector<std::string> cells;
        for (const auto& [k, v] : r.labels) {
            key.push_back(v);
            cells.push_back(v);
        }
        cells.push_back(std::to_string(r.seed));
        for (const auto& [k, v] : r.metrics) cells.push_back(fmt_metric(v));
        w.row(cells);
        if (!groups.count(key)) group_keys.push_back(key);
        groups[key].push_back(&r);
    }
    for (const auto& key : group_keys) {
        const auto& g = groups[key];
        const std::size_t m = results.front().metrics.size();
        std::vector<std::string> mean_row = key, std_row = key;
        mean_row.push_back("mean");
        std_row.push_back("std");
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (const auto* r : g) s += r->metrics[j].second;
            const double mean = s / static_cast<double>(g.size());
            double ss = 0.0;
            for (const auto* r : g) ss += (r->metrics[j].second - mean) * (r->metrics[j].second - mean);
            const double sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0.0;
            mean_row.push_back(fmt_metric(mean));
            std_row.push_back(fmt_metric(sd));
        }
        w.row(mean_row);
        w.row(std_row);
    }
    return w.str();
}

json report_json(const Config& cfg, const SeedResult& r, const std::string& timestamp) {
    json labels = json::object(), metrics = json::object();
    for (const auto& [k, v] : r.labels) labels[k] = v;
    for (const auto& [k, v] : r.metrics) metrics[k] = std::isfinite(v) ? json(v) : json(fmt_metric(v));
    return {{"task", cfg.str("task")},
            {"seed", r.seed},
            {"config", cfg.to_json()},
            {"labels", labels},
            {"metrics", metrics},
            {"result", r.result},
            {"metadata", {{"timestamp", timestamp}, {"format_version", io::kFormatVersion}}}};
}

RunOutput run_experiment(const Config& input) {
    Config cfg = input;
    cfg.resolve();
    cfg.validate();
    const std::string stamp = timestamp_now();
    RunOutput out;
    const auto base = output_root(cfg) / cfg.str("task");
    out.dir = base / stamp;
    for (int i = 1; fs::exists(out.dir); ++i) out.dir = base / (stamp + "-" + std::to_string(i));
    fs::create_directories(out.dir);
    io::write_text(out.dir / "config.toml", cfg.to_toml());

    auto write_seed = [&](const Config& c, const SeedResult& r, const std::string& suffix) {
        io::write_json(out.dir / ("report_" + std::to_string(r.seed) + suffix + ".json"), report_json(c, r, stamp));
        for (const auto& [name, j] : r.artifacts) io::write_json(out.dir / name, j);
    };

    if (cfg.task() == Task::Sweep) {
        const auto key = cfg.str("sweep.key");
        const auto inner = cfg.str("sweep.task");
        const auto echo = toml::parse(std::string_view(cfg.to_toml()));
        const auto* values = echo.at_path("sweep.values").as_array();
        const bool shared = key.rfind("additive.", 0) == 0 || key.rfind("unitary", 0) == 0 ||
                            key.rfind("qbim.", 0) == 0 || key.rfind("theory.", 0) == 0;
        std::optional<Config> first;
        std::unique_ptr<RunContext> ctx;
        std::size_t vi = 0;
        for (const auto& v : *values) {
            Config c = cfg;
            c.set("task", "\"" + inner + "\"");
            c.set(key, node_text(v));
            c.resolve();
            c.validate();
            if (!ctx || !shared) {
                first = c;
                ctx = std::make_unique<RunContext>(*first);
            }
            for (auto seed : c.seeds()) {
                const auto t0 = std::chrono::steady_clock::now();
                auto r = run_task(c, seed, *ctx);
                r.labels.insert(r.labels.begin(), {key, c.value_text(key)});
                log_result(inner, r, elapsed(t0));
                write_seed(c, r, "_v" + std::to_string(vi));
                out.results.push_back(std::move(r));
            }
            ++vi;
        }
    } else {
        RunContext ctx(cfg);
        for (auto seed : cfg.seeds()) {
            const auto t0 = std::chrono::steady_clock::now();
            auto r = run_task(cfg, seed, ctx);
            log_result(cfg.str("task"), r, elapsed(t0));
            write_seed(cfg, r, "");
            out.results.push_back(std::move(r));
        }
    }
    out.aggregate_csv = aggregate_csv(out.results);
    io::write_text(out.dir / "aggregate.csv", out.aggregate_csv);
    return out;
}

}  // namespace quap::experiment
