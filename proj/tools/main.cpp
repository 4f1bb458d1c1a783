#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "varpost/runner.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct Flags {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string experiment;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON experiment configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory (default: config 'output' or ./out)");
    sub->add_option("--seed", f.seed, "base seed, overrides the config");
    sub->add_option("--threads", f.threads, "worker threads for grid points")->check(CLI::PositiveNumber);
}

std::optional<nlohmann::json> load(const std::string& path) {
    std::ifstream in(path);
    auto config = nlohmann::json::parse(in, nullptr, false);
    if (config.is_discarded()) {
        std::cerr << "<root>: " << path << " is not valid JSON\n";
        return std::nullopt;
    }
    return config;
}

varpost::RunOptions options_from(const Flags& f, const nlohmann::json& config) {
    varpost::RunOptions o;
    if (!f.out.empty()) o.out_dir = f.out;
    else if (config.is_object() && config.contains("output") && config["output"].is_string())
        o.out_dir = config["output"].get<std::string>();
    o.seed = f.seed;
    o.threads = f.threads;
    return o;
}

int print_diagnostics(const std::vector<varpost::Diagnostic>& diagnostics) {
    for (const auto& d : diagnostics) std::cerr << varpost::format_diagnostic(d) << '\n';
    return diagnostics.empty() ? 0 : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generalized posterior consistency experiments"};
    app.require_subcommand(1);
    Flags flags;

    std::vector<std::pair<CLI::App*, varpost::ExperimentKind>> runners;
    for (auto kind : {varpost::ExperimentKind::Pressure, varpost::ExperimentKind::EntropyRate,
                      varpost::ExperimentKind::Partition, varpost::ExperimentKind::Posterior,
                      varpost::ExperimentKind::Variational, varpost::ExperimentKind::Hypermix,
                      varpost::ExperimentKind::Simulate, varpost::ExperimentKind::Consistency}) {
        auto* sub = app.add_subcommand(varpost::to_string(kind), std::string("run the ") + varpost::to_string(kind) +
                                                                     " experiment");
        add_common(sub, flags);
        runners.emplace_back(sub, kind);
    }
    auto* validate = app.add_subcommand("validate", "check a configuration without running it");
    add_common(validate, flags);
    validate->add_option("--experiment", flags.experiment, "experiment kind (default: config 'experiment')");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    const auto config = load(flags.config);
    if (!config) return kExitValidation;
    const varpost::RunOptions options = options_from(flags, *config);

    if (validate->parsed()) {
        std::string name = flags.experiment;
        if (name.empty() && config->is_object() && config->contains("experiment") && (*config)["experiment"].is_string())
            name = (*config)["experiment"].get<std::string>();
        const auto kind = varpost::parse_experiment_kind(name);
        if (!kind) return print_diagnostics({{"experiment", "unknown or missing experiment kind '" + name + "'"}});
        return print_diagnostics(varpost::validate(*config, *kind, options));
    }

    for (const auto& [sub, kind] : runners) {
        if (!sub->parsed()) continue;
        try {
            const auto manifest = varpost::run(*config, kind, options);
            for (const auto& out : manifest.outputs) std::cout << (options.out_dir / out).string() << '\n';
            return 0;
        } catch (const varpost::ConfigError& e) {
            return print_diagnostics(e.diagnostics());
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitRuntime;
        }
    }
    return kExitRuntime;
}
