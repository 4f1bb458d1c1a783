// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "varpost/entropy.hpp"
#include "varpost/gibbs.hpp"
#include "varpost/hypermix.hpp"
#include "varpost/posterior.hpp"
#include "varpost/runner.hpp"
#include "varpost/simulate.hpp"
#include "varpost/variational.hpp"

using namespace varpost;
namespace fs = std::filesystem;

namespace {

const Alphabet kBinary = Alphabet::numeric(2);
constexpr double kThetaStar = 0.8;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
    std::printf("[%s] criterion %d: %s | %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Shared reference family: phi_theta = theta * 1{x0 = x1} on a 41-point grid.
struct Reference {
    ThetaGrid grid = ThetaGrid::linspace(-2.0, 2.0, 41);
    std::vector<GibbsModel> gibbs;
    std::vector<MarkovMeasure> family;
    std::vector<LossSpec> losses{LossSpec::hamming(2)};
    GibbsModel truth = make_gibbs_model(kBinary, equal_neighbour_potential(2, kThetaStar));
    ObservedSystemSpec observed = ObservedSystemSpec::from_gibbs(truth);
    std::vector<PathSample> ys;

    Reference() {
        for (double theta : grid.points()) {
            gibbs.push_back(make_gibbs_model(kBinary, equal_neighbour_potential(2, theta)));
            family.push_back(gibbs.back().markov);
        }
        for (auto seed : kSeeds) ys.push_back(generate_observation(observed, 8192, seed));
    }
};

// Stationary path probability from pi and the kernel, not from block marginals.
double path_probability(const MarkovMeasure& m, const Word& w) {
    const std::size_t n = m.alphabet_size(), k = m.order();
    double p = m.stationary()[encode_word(std::span<const Symbol>(w).first(k), n)];
    for (std::size_t s = k; s < w.size(); ++s)
        p *= m.transition(encode_word(std::span<const Symbol>(w).subspan(s - k, k), n), w[s]);
    return p;
}

Outcome criterion1() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.05, 1.0), lu(0.0, 2.0);
    const std::size_t t = 8;
    double worst = 0.0;
    for (int instance = 0; instance < 50; ++instance) {
        const std::size_t n = 2 + instance % 2, k = 1 + instance % 3 / 2, r = 1 + instance % 2, ny = 2;
        const std::size_t rows = checked_power(n, k);
        std::vector<double> kernel;
        for (std::size_t c = 0; c < rows; ++c) {
            std::vector<double> row(n);
            double sum = 0;
            for (auto& v : row) sum += (v = u(rng));
            for (auto v : row) kernel.push_back(v / sum);
        }
        const auto model = MarkovMeasure::from_kernel(Alphabet::numeric(n), k, kernel);
        std::vector<double> table(checked_power(n, r) * checked_power(ny, r));
        for (auto& v : table) v = lu(rng);
        table[0] = 0.0;
        const auto loss = LossSpec::create(n, ny, r, table);
        std::vector<Symbol> ysym(t + r - 1);
        for (auto& s : ysym) s = static_cast<Symbol>(rng() % ny);
        const PathSample y = make_path(Alphabet::numeric(ny), ysym);

        const std::size_t length = t + r - 1;
        double z = 0.0;
        for (std::size_t code = 0; code < checked_power(n, length); ++code) {
            const Word w = decode_word(code, length, n);
            double total = 0.0;
            for (std::size_t s = 0; s < t; ++s) {
                std::size_t xc = 0, yc = 0;
                for (std::size_t j = 0; j < r; ++j) {
                    xc = xc * n + w[s + j];
                    yc = yc * ny + ysym[s + j];
                }
                total += table[xc * checked_power(ny, r) + yc];
            }
            z += path_probability(model, w) * std::exp(-total);
        }
        worst = std::max(worst, std::abs(log_partition_dp(model, loss, y, t) - std::log(z) / t));
    }
    const double elapsed = seconds_since(start);
    return {worst < 1e-10 && elapsed < 5.0,
            "max gap " + fmt("%.3g", worst) + " (< 1e-10), " + fmt("%.2f", elapsed) + " s (< 5 s)"};
}

// f[s][i] at t = 4096 and t = 8192.
struct QuenchedValues {
    std::vector<std::vector<double>> f4096, f8192;
};

Outcome criterion2(const Reference& ref, QuenchedValues& q) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::size_t> ts{4096, 8192};
    q.f4096.assign(kSeeds.size(), std::vector<double>(ref.grid.size()));
    q.f8192 = q.f4096;
    double worst_step = 0.0, worst_spread = 0.0;
    for (std::size_t s = 0; s < kSeeds.size(); ++s) {
        for (std::size_t i = 0; i < ref.grid.size(); ++i) {
            const auto curve = log_partition_dp_curve(ref.family[i], ref.losses[0], ref.ys[s], ts);
            q.f4096[s][i] = -curve[0];
            q.f8192[s][i] = -curve[1];
            worst_step = std::max(worst_step, std::abs(q.f8192[s][i] - q.f4096[s][i]));
        }
    }
    for (std::size_t i = 0; i < ref.grid.size(); ++i) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t s = 0; s < kSeeds.size(); ++s) {
            lo = std::min(lo, q.f8192[s][i]);
            hi = std::max(hi, q.f8192[s][i]);
        }
        worst_spread = std::max(worst_spread, hi - lo);
    }
    const double elapsed = seconds_since(start);
    return {worst_step < 0.02 && worst_spread < 0.05 && elapsed < 60.0,
            "max |f(8192)-f(4096)| " + fmt("%.4g", worst_step) + " (< 0.02), max seed spread " +
                fmt("%.4g", worst_spread) + " (< 0.05), " + fmt("%.2f", elapsed) + " s (< 60 s)"};
}

Outcome criterion3(const Reference& ref, const QuenchedValues& q, std::vector<double>& v_all) {
    const auto start = std::chrono::steady_clock::now();
    v_all.assign(ref.grid.size(), 0.0);
    std::vector<double> gaps(ref.grid.size(), 0.0);
    for (std::size_t i = 0; i < ref.grid.size(); ++i) {
        const auto r = solve_V(ref.gibbs[i], ref.losses[0], ref.truth.markov, 4);
        v_all[i] = r.v;
        gaps[i] = r.gap;
    }
    double worst = 0.0, worst_diag = 0.0;
    for (std::size_t i = 0; i < ref.grid.size(); i += 5) {
        double mean = 0.0;
        for (std::size_t s = 0; s < kSeeds.size(); ++s) mean += q.f8192[s][i];
        mean /= static_cast<double>(kSeeds.size());
        worst = std::max(worst, std::abs(v_all[i] - mean));
        worst_diag = std::max(worst_diag, gaps[i]);
    }
    const double elapsed = seconds_since(start);
    return {worst < 0.05 && worst_diag <= 1e-6 && elapsed < 120.0,
            "9-point max |V_4 - mean f(8192)| " + fmt("%.4g", worst) + " (< 0.05), solver gap " +
                fmt("%.3g", worst_diag) + " (<= 1e-6), " + fmt("%.2f", elapsed) + " s (< 120 s)"};
}

Outcome criterion4(const Reference& ref, const std::vector<double>& v_all) {
    const auto minimizers = theta_min(v_all);
    const auto inside = grid_neighbourhood(ref.grid, minimizers, 0.25);
    const std::vector<std::size_t> ts{512, 2048, 8192};
    bool pass = true;
    std::string detail = "Theta_min = {";
    for (std::size_t i = 0; i < minimizers.size(); ++i)
        detail += (i ? ", " : "") + fmt("%g", ref.grid[minimizers[i]]);
    detail += "}, |U| = " + std::to_string(inside.size()) + ";";
    for (std::size_t s = 0; s < kSeeds.size(); ++s) {
        const auto curve = consistency_curve(ref.family, ref.grid, ref.losses, ref.ys[s], ts, inside, 8);
        detail += " seed " + std::to_string(kSeeds[s]) + ":";
        for (const auto& p : curve) detail += " " + fmt("%.4f", p.mass_outside);
        if (!(curve.back().mass_outside < 0.05)) pass = false;
        for (std::size_t k = 1; k < curve.size(); ++k)
            if (curve[k].mass_outside > curve[k - 1].mass_outside + 0.02) pass = false;
    }
    return {pass, detail + " (t = 512, 2048, 8192; final < 0.05, nonincreasing up to 0.02)"};
}

Outcome criterion5(const Reference& ref) {
    // Point-mass models on each symbol; the loss is L_a(y) = 1{a != y}.
    std::vector<MarkovMeasure> deltas;
    for (std::size_t a = 0; a < 2; ++a) {
        std::vector<double> p(2, 0.0);
        p[a] = 1.0;
        deltas.push_back(MarkovMeasure::iid(kBinary, p));
    }
    const std::vector<std::size_t> ts{1, 2, 10, 100, 512, 2048, 4096, 8192};
    double worst_exact = 0.0, worst_limit = 0.0;
    for (const auto& y : ref.ys) {
        for (std::size_t a = 0; a < 2; ++a) {
            const auto curve = log_partition_dp_curve(deltas[a], ref.losses[0], y, ts);
            for (std::size_t k = 0; k < ts.size(); ++k) {
                double mismatches = 0.0;
                for (std::size_t s = 0; s < ts[k]; ++s) mismatches += (y.symbols[s] != a);
                worst_exact = std::max(worst_exact, std::abs(-curve[k] - mismatches / ts[k]));
            }
            // nu-bar of the symmetric observation chain is uniform.
            const BlockMeasure nu1 = block_marginal(ref.truth.markov, 1);
            const double expected = nu1[1 - a];
            worst_limit = std::max(worst_limit, std::abs(-curve.back() - expected));
        }
    }
    return {worst_exact < 1e-12 && worst_limit < 0.02,
            "max exactness gap " + fmt("%.3g", worst_exact) + " (< 1e-12), max |value(8192) - sum nu L| " +
                fmt("%.4g", worst_limit) + " (< 0.02)"};
}

Outcome criterion6(const Reference& ref) {
    const auto p = MarkovMeasure::from_kernel(kBinary, 1, {0.9, 0.1, 0.1, 0.9});
    const auto q = MarkovMeasure::from_kernel(kBinary, 1, {0.5, 0.5, 0.5, 0.5});
    const std::size_t ts[] = {1000};
    const auto curve = finite_horizon_entropy_curve(q, p, ts);
    const double gap = std::abs(curve[0].k_t_over_t - std::log(5.0 / 3.0));
    double self = 0.0;
    for (const auto& g : ref.gibbs) self = std::max(self, std::abs(entropy_rate_gibbs(g.markov, g).value));
    return {gap < 1e-3 && self < 1e-9,
            "|K_1000/1000 - ln(5/3)| " + fmt("%.3g", gap) + " (< 1e-3), max Gibbs self rate " + fmt("%.3g", self) +
                " (< 1e-9)"};
}

Outcome criterion7() {
    const double p0 = pressure(FiniteRangePotential::zero(2, 2));
    bool pass = p0 == std::log(2.0);
    double worst_p = 0.0, worst_escape = 0.0;
    for (double beta : {-2.0, -0.5, 0.8, 2.0}) {
        const auto phi = equal_neighbour_potential(2, beta);
        worst_p = std::max(worst_p, std::abs(pressure(phi) - std::log(std::exp(beta) + 1.0)));
        const auto model = make_gibbs_model(kBinary, phi);
        const double n_hat = verify_gibbs_property(model, 10).n_hat;
        const std::size_t t = 12;
        const double lo = 1.0 / n_hat * (1 - 1e-9), hi = n_hat * (1 + 1e-9);
        for (std::size_t code = 0; code < checked_power(2, t); ++code) {
            const Word w = decode_word(code, t, 2);
            double birkhoff = 0.0;
            for (std::size_t s = 0; s < t; ++s) birkhoff += beta * (w[s] == w[(s + 1) % t]);
            const double ratio = path_probability(model.markov, w) / std::exp(-model.pressure * t + birkhoff);
            if (ratio < lo) worst_escape = std::max(worst_escape, lo / ratio - 1);
            if (ratio > hi) worst_escape = std::max(worst_escape, ratio / hi - 1);
        }
    }
    pass = pass && worst_p < 1e-10 && worst_escape == 0.0;
    return {pass, "P(0) - ln 2 = " + fmt("%.3g", p0 - std::log(2.0)) + ", max |P(beta) - ln(e^beta + 1)| " +
                      fmt("%.3g", worst_p) + " (< 1e-10), depth-12 escape " + fmt("%.3g", worst_escape) + " (= 0)"};
}

Outcome criterion8() {
    const auto profile = hypermixing_profile(1.0);
    // Independent evaluation of the quotient at C_LS = 1.
    const double t0 = std::log(3.0) / 2.0, ell0 = 12.0 * t0, a = std::log(1.5) / (8.0 * t0) * ell0;
    const double oracle = (1 + std::exp(a)) * (1 + std::exp(-a)) / (std::exp(a) - std::exp(-a));
    const double value = profile.alpha(profile.ell0);
    const double gap = std::abs(value - oracle);
    double worst_coth = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double ell = profile.ell0 * (1.0 + 99.0 * i / 1000.0);
        worst_coth = std::max(worst_coth, std::abs(profile.alpha(ell) - 1.0 / std::tanh(0.5 * profile.alpha0 * ell)));
    }
    // Two-state chain with flip rate 1: P_t = 1/2 + (1{i=j} - 1/2) e^{-2t}, C_LS = 1/2.
    const double rate = 1.0;
    const auto chain_profile = hypermixing_profile(1.0 / (2.0 * rate));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    int held = 0;
    for (int pair = 0; pair < 100; ++pair) {
        const double f[2] = {u(rng), u(rng)}, g[2] = {u(rng), u(rng)};
        const double ell = chain_profile.ell0 * (1.0 + pair % 4);
        const double alpha = chain_profile.alpha(ell);
        double lhs = 0.0, nf = 0.0, ng = 0.0;
        for (int i = 0; i < 2; ++i) {
            nf += 0.5 * std::pow(f[i], alpha);
            ng += 0.5 * std::pow(g[i], alpha);
            for (int j = 0; j < 2; ++j)
                lhs += 0.5 * f[i] * (0.5 + ((i == j) ? 0.5 : -0.5) * std::exp(-2.0 * rate * ell)) * g[j];
        }
        held += lhs <= std::pow(nf, 1 / alpha) * std::pow(ng, 1 / alpha) * (1 + 1e-12);
    }
    return {gap < 1e-4 && worst_coth < 1e-12 && held == 100,
            "alpha(ell0) = " + fmt("%.6f", value) + ", |alpha - re-evaluation| " + fmt("%.3g", gap) +
                " (< 1e-4), coth identity " + fmt("%.3g", worst_coth) + " (< 1e-12), (H-1) held " +
                std::to_string(held) + "/100"};
}

Outcome criterion9() {
    bool pass = true;
    std::string detail;
    const std::size_t kept = 100000;
    for (double rho : {0.5, 1.0, 2.0}) {
        const std::size_t burn_in = static_cast<std::size_t>(10.0 / rho / 1e-3);
        LangevinSpec spec{[rho](const Eigen::VectorXd& x) -> Eigen::VectorXd { return rho * x; }, 1e-3,
                          Eigen::VectorXd::Zero(1)};
        const auto path = sample_langevin(spec, burn_in + kept, 9);
        std::vector<double> series(path.col(0).data() + burn_in + 1, path.col(0).data() + burn_in + 1 + kept);
        const auto est = batch_means_variance(series, 20);
        const double z = std::abs(est.variance - 1.0 / rho) / est.std_error;
        pass = pass && z < 3.0;
        detail += "rho " + fmt("%g", rho) + ": var " + fmt("%.4f", est.variance) + " z " + fmt("%.2f", z) + "; ";
    }
    for (double rho2 : {0.5, 2.0}) {
        const double rho = 1.0;
        DriftPair pair;
        pair.drift_a = [rho](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -rho * x; };
        pair.drift_b = [rho2](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -rho2 * x; };
        pair.diffusion = Eigen::MatrixXd::Constant(1, 1, 2.0);
        pair.sample_source = [rho](Rng& rng) {
            std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(rho));
            return Eigen::VectorXd::Constant(1, g(rng));
        };
        const auto est = entropy_rate_diffusion_mc(pair, 100000, 9);
        const double expected = (rho - rho2) * (rho - rho2) / (4.0 * rho);
        const double z = std::abs(est.estimate - expected) / est.std_error;
        pass = pass && z < 3.0;
        detail += "rho' " + fmt("%g", rho2) + ": h " + fmt("%.5f", est.estimate) + " z " + fmt("%.2f", z) + "; ";
    }
    return {pass, detail + "(all z < 3)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion10() {
    const fs::path configs = VARPOST_CONFIG_DIR;
    const fs::path root = fs::temp_directory_path() / "varpost_acceptance";
    fs::remove_all(root);
    const std::pair<const char*, ExperimentKind> pipelines[] = {{"partition.json", ExperimentKind::Partition},
                                                                {"variational.json", ExperimentKind::Variational},
                                                                {"consistency.json", ExperimentKind::Consistency}};
    std::size_t compared = 0, identical = 0;
    for (const auto& [file, kind] : pipelines) {
        std::ifstream in(configs / file);
        const auto config = nlohmann::json::parse(in);
        const std::string stem = fs::path(file).stem().string();
        const auto a = run(config, kind, {root / (stem + "_t1a"), {}, 1});
        run(config, kind, {root / (stem + "_t1b"), {}, 1});
        run(config, kind, {root / (stem + "_t8"), {}, 8});
        for (const auto& out : a.outputs) {
            const std::string body = slurp(root / (stem + "_t1a") / out);
            compared += 2;
            identical += body == slurp(root / (stem + "_t1b") / out);
            identical += body == slurp(root / (stem + "_t8") / out);
        }
    }
    fs::remove_all(root);
    return {compared > 0 && identical == compared,
            std::to_string(identical) + "/" + std::to_string(compared) +
                " CSV comparisons byte-identical (rerun and --threads 1 vs 8)"};
}

}  // namespace

int main() {
    report(1, "exact DP vs brute force", criterion1());
    Reference ref;
    QuenchedValues q;
    report(2, "quenched limit of the partition function", criterion2(ref, q));
    std::vector<double> v_all;
    report(3, "variational agreement", criterion3(ref, q, v_all));
    report(4, "posterior consistency", criterion4(ref, v_all));
    report(5, "degenerate family exactness", criterion5(ref));
    report(6, "entropy-rate oracles", criterion6(ref));
    report(7, "pressure and Gibbs property", criterion7());
    report(8, "hypermixing profile", criterion8());
    report(9, "Langevin variance and diffusion entropy rate", criterion9());
    report(10, "reproducibility", criterion10());
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
