#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quap/error.hpp"
#include "quap/experiment.hpp"

namespace {

using quap::ErrorKind;

int exit_code(ErrorKind k) {
    switch (k) {
        case ErrorKind::Numeric: return 3;
        case ErrorKind::Io:
        case ErrorKind::Format: return 4;
        default: return 2;
    }
}

int fail(const std::string& kind, const std::string& message, int code) {
    nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    std::cerr << j.dump() << "\n";
    return code;
}

struct SplitArgs {
    std::vector<std::string> known;  // for CLI11, program name first
    std::vector<std::pair<std::string, std::string>> overrides;
};

// Everything that is not a built-in option is a "--a.b value" or "--a.b=value" override.
SplitArgs split_args(int argc, char** argv) {
    SplitArgs out;
    out.known.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        const std::string tok = argv[i];
        if (tok == "-c" || tok == "--config") {
            out.known.push_back(tok);
            if (i + 1 < argc) out.known.push_back(argv[++i]);
            continue;
        }
        if (tok.rfind("--config=", 0) == 0 || tok == "-h" || tok == "--help" || tok == "--print-defaults" ||
            tok.rfind("--", 0) != 0) {
            out.known.push_back(tok);
            continue;
        }
        const auto body = tok.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.overrides.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else if (i + 1 < argc) {
            out.overrides.emplace_back(body, argv[++i]);
        } else {
            throw quap::ConfigError("override '" + tok + "' has no value");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Universal adversarial perturbations against quantum classifiers", "quap"};
    std::string task;
    std::string config_path;
    bool print_defaults = false;
    std::string tasks_help;
    for (const auto& n : quap::experiment::task_names()) tasks_help += (tasks_help.empty() ? "" : ", ") + n;
    app.add_option("task", task, "Task to run: " + tasks_help);
    app.add_option("-c,--config", config_path, "TOML config file");
    app.add_flag("--print-defaults", print_defaults, "Print the default config and exit");
    app.footer("Any other --section.key value pair overrides the config, e.g. --additive.epsilon 0.2");
    SplitArgs args;
    try {
        args = split_args(argc, argv);
        std::vector<std::string> rev(args.known.rbegin(), args.known.rend() - 1);
        app.parse(rev);
    } catch (const quap::Error& e) {
        return fail("config", e.what(), 2);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail("config", e.what(), 2);
    }
    if (print_defaults) {
        std::cout << quap::experiment::default_config_text();
        return 0;
    }
    try {
        auto cfg = config_path.empty() ? quap::experiment::Config{} : quap::experiment::Config::from_file(config_path);
        if (!task.empty()) cfg.set("task", "\"" + task + "\"");
        for (const auto& [k, v] : args.overrides) cfg.set(k, v);
        const auto out = quap::experiment::run_experiment(cfg);
        nlohmann::json summary = {{"output", out.dir.string()}, {"reports", out.results.size()}};
        std::cout << summary.dump() << "\n";
        return 0;
    } catch (const quap::Error& e) {
        return fail(quap::to_string(e.kind()), e.what(), exit_code(e.kind()));
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
}
