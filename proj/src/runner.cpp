#include "varpost/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>

#include <openssl/evp.h>

#include "varpost/csv.hpp"
#include "varpost/entropy.hpp"
#include "varpost/error.hpp"
#include "varpost/hypermix.hpp"
#include "varpost/parallel.hpp"
#include "varpost/posterior.hpp"
#include "varpost/simulate.hpp"
#include "varpost/variational.hpp"

namespace varpost {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string join_messages(const std::vector<Diagnostic>& diagnostics) {
    std::string out = "configuration is invalid";
    for (const auto& d : diagnostics) out += "\n  " + format_diagnostic(d);
    return out;
}

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    std::ofstream open(const std::string& name) {
        names_.push_back(name);
        std::ofstream os(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!os) throw Error(ErrorKind::InvalidInput, "cannot write " + (dir_ / name).string());
        return os;
    }

    void remove_all() noexcept {
        for (const auto& n : names_) {
            std::error_code ec;
            fs::remove(dir_ / n, ec);
        }
        names_.clear();
    }

    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

class Stages {
public:
    explicit Stages(std::vector<StageTiming>& sink) : sink_(sink) {}

    template <class F>
    void run(const std::string& name, F&& f) {
        const auto start = std::chrono::steady_clock::now();
        f();
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
        sink_.push_back({name, elapsed.count()});
    }

private:
    std::vector<StageTiming>& sink_;
};

void write_manifest(const fs::path& dir, const json& manifest) {
    std::ofstream os(dir / kManifestName, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorKind::InvalidInput, "cannot write " + (dir / kManifestName).string());
    os << manifest.dump(2) << '\n';
}

struct Context {
    const Experiment& ex;
    std::size_t threads;
    Outputs& outputs;
    Stages& stages;
};

std::vector<PathSample> make_observations(Context& c) {
    std::vector<PathSample> ys;
    const std::size_t length = c.ex.t_values.back() + c.ex.max_loss_range() - 1;
    c.stages.run("observations", [&] {
        for (std::uint64_t seed : c.ex.observation_seeds())
            ys.push_back(generate_observation(*c.ex.observed, length, seed));
    });
    return ys;
}

// curves[s][i][k] = (1/t_k) log Z_{t_k}(theta_i | y_s)
using Curves = std::vector<std::vector<std::vector<double>>>;

Curves partition_stage(Context& c, const std::vector<PathSample>& ys) {
    const auto& ex = c.ex;
    const auto seeds = ex.observation_seeds();
    Curves curves(ys.size(), std::vector<std::vector<double>>(ex.grid->size()));
    c.stages.run("partition", [&] {
        for (std::size_t s = 0; s < ys.size(); ++s) {
            parallel_for(ex.grid->size(), c.threads, [&](std::size_t i) {
                curves[s][i] = log_partition_dp_curve(ex.family[i], loss_at(ex.losses, i), ys[s], ex.t_values);
            });
        }
        auto os = c.outputs.open("partition.csv");
        os << "seed,theta,t,log_partition\n";
        for (std::size_t s = 0; s < ys.size(); ++s)
            for (std::size_t i = 0; i < ex.grid->size(); ++i)
                for (std::size_t k = 0; k < ex.t_values.size(); ++k)
                    os << seeds[s] << ',' << format_number((*ex.grid)[i]) << ',' << ex.t_values[k] << ','
                       << format_number(curves[s][i][k]) << '\n';
    });
    return curves;
}

// posteriors[s][k]
std::vector<std::vector<PosteriorResult>> posterior_stage(Context& c, const Curves& curves) {
    const auto& ex = c.ex;
    const auto seeds = ex.observation_seeds();
    std::vector<std::vector<PosteriorResult>> out(curves.size());
    c.stages.run("posterior", [&] {
        for (std::size_t s = 0; s < curves.size(); ++s) {
            for (std::size_t k = 0; k < ex.t_values.size(); ++k) {
                std::vector<double> lp(ex.grid->size());
                for (std::size_t i = 0; i < lp.size(); ++i) lp[i] = curves[s][i][k];
                out[s].push_back(posterior_from_log_partitions(*ex.grid, std::move(lp), ex.t_values[k]));
            }
        }
        auto os = c.outputs.open("posterior.csv");
        os << "seed,t,theta,prior,log_partition,posterior_weight\n";
        for (std::size_t s = 0; s < out.size(); ++s)
            for (const auto& r : out[s])
                for (std::size_t i = 0; i < ex.grid->size(); ++i)
                    os << seeds[s] << ',' << r.t << ',' << format_number((*ex.grid)[i]) << ','
                       << format_number(ex.grid->prior()[i]) << ',' << format_number(r.log_partition_per_theta[i])
                       << ',' << format_number(r.weights[i]) << '\n';
    });
    return out;
}

std::vector<VariationalResult> solve_family(const Experiment& ex, std::size_t m, std::size_t threads) {
    const BlockMeasure nu_m = observation_block_marginal(*ex.observed, m);
    const NuSource source = ex.observed->channel ? NuSource::ChannelBlocks : NuSource::Markov;
    std::vector<std::optional<VariationalResult>> slots(ex.grid->size());
    parallel_for(ex.grid->size(), threads, [&](std::size_t i) {
        const LossSpec& loss = loss_at(ex.losses, i);
        slots[i] = ex.gibbs_family.empty() ? solve_V(ex.family[i], loss, nu_m, source)
                                           : solve_V(ex.gibbs_family[i], loss, nu_m, source);
    });
    std::vector<VariationalResult> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

void write_variational_rows(std::ostream& os, const ThetaGrid& grid, std::size_t m,
                            const std::vector<VariationalResult>& results) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& r = results[i];
        os << format_number(grid[i]) << ',' << m << ',' << to_string(r.nu_source) << ',' << format_number(r.v) << ','
           << r.iterations << ',' << format_number(r.gap) << '\n';
    }
}

constexpr const char* kVariationalHeader = "theta,m,nu_source,V_m,solver_iters,solver_gap\n";

void run_pressure(Context& c) {
    const auto& ex = c.ex;
    c.stages.run("pressure", [&] {
        auto os = c.outputs.open("pressure.csv");
        os << "theta,pressure,gibbs_constant,certified_depth\n";
        for (std::size_t i = 0; i < ex.grid->size(); ++i) {
            const GibbsModel& g = ex.gibbs_family[i];
            os << format_number((*ex.grid)[i]) << ',' << format_number(g.pressure) << ','
               << format_number(g.gibbs_constant) << ',' << g.certified_depth << '\n';
        }
    });
}

void run_entropy(Context& c) {
    const auto& ex = c.ex;
    c.stages.run("entropy-rate", [&] {
        const EntropyRateResult rate = ex.entropy_mu_gibbs ? entropy_rate_gibbs(*ex.entropy_lambda, *ex.entropy_mu_gibbs)
                                                           : entropy_rate_markov(*ex.entropy_mu, *ex.entropy_lambda);
        auto os = c.outputs.open("entropy_rate.csv");
        os << "formula,rate\n" << to_string(rate.formula) << ',' << format_number(rate.value) << '\n';
    });
    c.stages.run("entropy-curve", [&] {
        const auto curve = finite_horizon_entropy_curve(*ex.entropy_lambda, *ex.entropy_mu, ex.t_values);
        auto os = c.outputs.open("entropy_curve.csv");
        write_entropy_curve_csv(os, curve);
    });
}

void run_partition(Context& c, bool with_posterior) {
    const auto ys = make_observations(c);
    const Curves curves = partition_stage(c, ys);
    if (with_posterior) posterior_stage(c, curves);
}

void run_variational(Context& c) {
    const auto& ex = c.ex;
    c.stages.run("variational", [&] {
        auto os = c.outputs.open("variational.csv");
        os << kVariationalHeader;
        for (std::size_t m : ex.m_values) write_variational_rows(os, *ex.grid, m, solve_family(ex, m, c.threads));
    });
    if (ex.t_values.empty()) return;
    c.stages.run("comparison", [&] {
        const auto seeds = ex.observation_seeds();
        std::vector<ComparisonRow> rows;
        for (std::size_t m : ex.m_values) {
            auto part = compare_dp_vs_variational(ex.family, ex.gibbs_family, ex.losses, *ex.observed, *ex.grid,
                                                  ex.t_values.back(), m, seeds, c.threads);
            rows.insert(rows.end(), part.begin(), part.end());
        }
        auto os = c.outputs.open("comparison.csv");
        write_variational_report_csv(os, rows);
    });
}

void run_consistency(Context& c) {
    const auto& ex = c.ex;
    const auto seeds = ex.observation_seeds();
    const auto ys = make_observations(c);
    const Curves curves = partition_stage(c, ys);
    const auto posteriors = posterior_stage(c, curves);

    const std::size_t m = ex.m_values.back();
    std::vector<VariationalResult> v;
    c.stages.run("variational", [&] {
        v = solve_family(ex, m, c.threads);
        auto os = c.outputs.open("variational.csv");
        os << kVariationalHeader;
        write_variational_rows(os, *ex.grid, m, v);
    });

    c.stages.run("consistency", [&] {
        std::vector<double> values;
        for (const auto& r : v) values.push_back(r.v);
        const auto minimizers = theta_min(values);
        const auto inside = grid_neighbourhood(*ex.grid, minimizers, ex.radius);
        std::vector<bool> in_min(ex.grid->size(), false), in_u(ex.grid->size(), false);
        for (std::size_t i : minimizers) in_min[i] = true;
        for (std::size_t i : inside) in_u[i] = true;
        {
            auto os = c.outputs.open("neighbourhood.csv");
            os << "theta,V_m,in_theta_min,in_neighbourhood\n";
            for (std::size_t i = 0; i < ex.grid->size(); ++i)
                os << format_number((*ex.grid)[i]) << ',' << format_number(values[i]) << ',' << int(in_min[i]) << ','
                   << int(in_u[i]) << '\n';
        }
        auto os = c.outputs.open("consistency.csv");
        os << "seed,t,mass_outside\n";
        for (std::size_t s = 0; s < posteriors.size(); ++s) {
            for (const auto& r : posteriors[s]) {
                double outside = 0.0;
                for (std::size_t i = 0; i < ex.grid->size(); ++i)
                    if (!in_u[i]) outside += r.weights[i];
                os << seeds[s] << ',' << r.t << ',' << format_number(outside) << '\n';
            }
        }
    });
}

void run_hypermix(Context& c) {
    const auto& h = *c.ex.hypermix;
    c.stages.run("hypermix", [&] {
        const RegularFamilyCheck family = check_regular_family(h.cls_values, h.cap);
        {
            auto os = c.outputs.open("hypermix_family.csv");
            os << "cls,t0,ell0,alpha0,alpha_ell0\n";
            for (double cls : h.cls_values) {
                const auto p = hypermixing_profile(cls);
                os << format_number(cls) << ',' << format_number(p.t0) << ',' << format_number(p.ell0) << ','
                   << format_number(p.alpha0) << ',' << format_number(p.alpha(p.ell0)) << '\n';
            }
        }
        {
            auto os = c.outputs.open("hypermix_summary.csv");
            os << "sup_cls,ell0_uniform,alpha_bound,regular\n"
               << format_number(family.sup_cls) << ',' << format_number(family.ell0_uniform) << ','
               << format_number(family.alpha_bound) << ',' << int(family.regular) << '\n';
        }
        const auto profile = hypermixing_profile(family.sup_cls);
        std::vector<double> ells;
        for (double k : h.ell_multipliers) ells.push_back(k * profile.ell0);
        auto os = c.outputs.open("hypermix.csv");
        write_profile_csv(os, profile, ells);
    });
}

void run_simulate(Context& c) {
    const auto& ex = c.ex;
    const auto seeds = ex.observation_seeds();
    if (ex.observed) {
        c.stages.run("paths", [&] {
            for (std::uint64_t seed : seeds) {
                const PathSample y = generate_observation(*ex.observed, ex.t_values.back(), seed);
                auto os = c.outputs.open("path_seed" + std::to_string(seed) + ".csv");
                write_path_csv(os, y);
            }
        });
    }
    if (ex.langevin) {
        c.stages.run("langevin", [&] {
            const auto& l = *ex.langevin;
            const Eigen::VectorXd rho = Eigen::Map<const Eigen::VectorXd>(l.rho.data(), l.rho.size());
            LangevinSpec spec;
            spec.gradient = [rho](const Eigen::VectorXd& x) -> Eigen::VectorXd { return rho.cwiseProduct(x); };
            spec.dt = l.dt;
            spec.x0 = Eigen::Map<const Eigen::VectorXd>(l.x0.data(), l.x0.size());
            for (std::uint64_t seed : seeds) {
                const Eigen::MatrixXd path = sample_langevin(spec, l.steps, seed);
                auto os = c.outputs.open("langevin_seed" + std::to_string(seed) + ".csv");
                write_langevin_csv(os, path);
            }
        });
    }
}

bool uses_seeds(const Experiment& ex) {
    switch (ex.kind) {
        case ExperimentKind::Partition:
        case ExperimentKind::Posterior:
        case ExperimentKind::Consistency:
        case ExperimentKind::Simulate: return true;
        case ExperimentKind::Variational: return !ex.t_values.empty();
        default: return false;
    }
}

}  // namespace

std::string canonical_json(const json& config) { return config.dump(); }

std::string config_hash(const json& config) {
    const std::string text = canonical_json(config);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::InvalidInput, "SHA-256 computation failed");
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(join_messages(diagnostics)), diagnostics_(std::move(diagnostics)) {}

json RunManifest::to_json() const {
    json stage_list = json::array();
    for (const auto& s : stages) stage_list.push_back({{"name", s.name}, {"wall_seconds", s.seconds}});
    return {{"config_hash", config_hash},
            {"version", version},
            {"experiment", experiment},
            {"status", status},
            {"seeds", seeds},
            {"stages", stage_list},
            {"outputs", outputs},
            {"notes", notes}};
}

json effective_config(const json& config, const RunOptions& options) {
    json out = config;
    if (out.is_object()) {
        out.erase("output");
        if (options.seed) out["seed"] = *options.seed;
    }
    return out;
}

std::vector<Diagnostic> validate(const json& config, ExperimentKind kind, const RunOptions& options) {
    auto diagnostics = parse_experiment(effective_config(config, options), kind).diagnostics;
    if (options.threads == 0) diagnostics.push_back({"--threads", "must be at least 1"});
    return diagnostics;
}

RunManifest run(const json& config, ExperimentKind kind, const RunOptions& options) {
    const json effective = effective_config(config, options);
    ParseResult parsed = parse_experiment(effective, kind);
    if (options.threads == 0) parsed.diagnostics.push_back({"--threads", "must be at least 1"});
    if (!parsed.diagnostics.empty()) throw ConfigError(std::move(parsed.diagnostics));
    const Experiment& ex = *parsed.experiment;

    std::error_code ec;
    fs::create_directories(options.out_dir, ec);
    if (ec) throw Error(ErrorKind::InvalidInput, "cannot create " + options.out_dir.string() + ": " + ec.message());

    RunManifest manifest;
    manifest.config_hash = config_hash(effective);
    manifest.experiment = to_string(kind);
    manifest.status = "running";
    if (uses_seeds(ex)) manifest.seeds = ex.observation_seeds();
    if (kind == ExperimentKind::Variational || kind == ExperimentKind::Consistency)
        manifest.notes.push_back("V_m constrains the joining's m-block Y-marginal only; agreement with the full "
                                 "Y-marginal of a Markov extension is not established");
    write_manifest(options.out_dir, manifest.to_json());

    Outputs outputs(options.out_dir);
    Stages stages(manifest.stages);
    Context c{ex, options.threads, outputs, stages};
    try {
        switch (kind) {
            case ExperimentKind::Pressure: run_pressure(c); break;
            case ExperimentKind::EntropyRate: run_entropy(c); break;
            case ExperimentKind::Partition: run_partition(c, false); break;
            case ExperimentKind::Posterior: run_partition(c, true); break;
            case ExperimentKind::Variational: run_variational(c); break;
            case ExperimentKind::Hypermix: run_hypermix(c); break;
            case ExperimentKind::Simulate: run_simulate(c); break;
            case ExperimentKind::Consistency: run_consistency(c); break;
        }
    } catch (const std::exception& e) {
        outputs.remove_all();
        manifest.status = "failed";
        json failed = manifest.to_json();
        failed["error"] = e.what();
        write_manifest(options.out_dir, failed);
        throw;
    }
    manifest.status = "complete";
    manifest.outputs = outputs.names();
    write_manifest(options.out_dir, manifest.to_json());
    return manifest;
}

}  // namespace varpost
