#pragma once

// JSON experiment configuration. Parsing never throws on bad input; every
// problem becomes a diagnostic naming the JSON path of the offending field.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "varpost/core.hpp"
#include "varpost/gibbs.hpp"
#include "varpost/posterior.hpp"
#include "varpost/simulate.hpp"

namespace varpost {

enum class ExperimentKind { Pressure, EntropyRate, Partition, Posterior, Variational, Hypermix, Simulate, Consistency };

const char* to_string(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_experiment_kind(std::string_view name);

struct Diagnostic {
    std::string path;
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

struct LangevinConfig {
    std::vector<double> rho;  // diagonal of the quadratic potential's Hessian
    double dt = 1e-3;
    std::size_t steps = 0;
    std::vector<double> x0;
};

struct HypermixConfig {
    std::vector<double> cls_values;
    std::optional<double> cap;
    std::vector<double> ell_multipliers;
};

struct Experiment {
    ExperimentKind kind = ExperimentKind::Consistency;
    std::uint64_t seed = 1;
    std::size_t replicates = 1;
    std::size_t probes = 1000;
    std::size_t certify_depth = 8;
    double radius = 0.25;
    std::vector<std::size_t> t_values;
    std::vector<std::size_t> m_values;

    std::optional<ThetaGrid> grid;
    std::optional<Alphabet> model_alphabet;
    std::vector<MarkovMeasure> family;
    std::vector<GibbsModel> gibbs_family;  // empty for Markov families
    std::vector<LossSpec> losses;
    std::optional<ObservedSystemSpec> observed;

    std::optional<MarkovMeasure> entropy_lambda;
    std::optional<MarkovMeasure> entropy_mu;
    std::optional<GibbsModel> entropy_mu_gibbs;

    std::optional<HypermixConfig> hypermix;
    std::optional<LangevinConfig> langevin;

    // Observation seeds seed, seed + 1, ..., one per replicate.
    std::vector<std::uint64_t> observation_seeds() const;
    std::size_t max_loss_range() const;
};

struct ParseResult {
    std::optional<Experiment> experiment;
    std::vector<Diagnostic> diagnostics;
};

// Builds every object the experiment needs and runs the module invariant
// checks, the loss assumption probe and the state-space guards.
ParseResult parse_experiment(const nlohmann::json& config, ExperimentKind kind);

}  // namespace varpost
