#pragma once

// V(theta) as a finite convex program over shift-consistent m-block joinings
// of (X, Y) with prescribed Y-marginal, and its comparison against the
// partition-function limit.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "varpost/core.hpp"
#include "varpost/gibbs.hpp"
#include "varpost/posterior.hpp"
#include "varpost/simulate.hpp"

namespace varpost {

// Weights on m-words over the joint alphabet S x A. The joint symbol of
// (x, a) is x * |A| + a.
struct JoiningBlockMeasure {
    std::size_t x_alphabet_size = 0;
    std::size_t y_alphabet_size = 0;
    std::size_t depth = 0;
    std::vector<double> weights;

    std::size_t joint_alphabet_size() const noexcept { return x_alphabet_size * y_alphabet_size; }
    BlockMeasure joint() const;
    BlockMeasure x_marginal() const;
    BlockMeasure y_marginal() const;
};

inline constexpr double kJoiningSumTol = 1e-10;
inline constexpr double kJoiningConstraintTol = 1e-8;

// Throws InvalidInput when a joining invariant fails against the target nu_m.
void validate_joining(const JoiningBlockMeasure& lambda, const BlockMeasure& nu_m);

// Product joining mu_m (x) nu_m.
JoiningBlockMeasure product_joining(const BlockMeasure& mu_m, const BlockMeasure& nu_m);

// [H(lambda_m) - H(lambda_{m-1})] - [H(nu_m) - H(nu_{m-1})].
double fibre_entropy_block(const JoiningBlockMeasure& lambda, const BlockMeasure& nu_m,
                           const BlockMeasure& nu_m_minus_1);

enum class NuSource { Markov, ChannelBlocks, Empirical };

const char* to_string(NuSource source) noexcept;

inline constexpr std::size_t kMaxJoiningWords = 1'000'000;
// The Newton solver is dense in the free coordinates.
inline constexpr std::size_t kMaxDenseVariables = 4096;
inline constexpr double kVariationalGapTol = 1e-6;

struct VariationalResult {
    double v = 0.0;
    JoiningBlockMeasure argmin;
    std::size_t depth = 0;
    std::size_t iterations = 0;
    double gap = 0.0;  // Newton-decrement estimate of F(argmin) - min F
    NuSource nu_source = NuSource::Markov;
};

// The depth-m program. The objective is
//   F(lambda) = <lambda, c> + sum_w lambda(w) log(lambda(w) / lambda_{m-1}(w without last))
//               + H(nu_m) - H(nu_{m-1})
// with c = L - phi + P in the Gibbs form and c = L - log kappa(last transition)
// in the Markov form. Words outside the support of mu_m (x) nu_m are fixed at 0.
class VariationalProblem {
public:
    static VariationalProblem gibbs(const GibbsModel& model, const LossSpec& loss, const BlockMeasure& nu_m);
    static VariationalProblem markov(const MarkovMeasure& model, const LossSpec& loss, const BlockMeasure& nu_m);

    std::size_t depth() const noexcept { return depth_; }
    std::size_t word_count() const noexcept { return coefficients_.size(); }
    const BlockMeasure& nu() const noexcept { return nu_m_; }
    std::span<const double> coefficients() const noexcept { return coefficients_; }
    std::size_t x_alphabet_size() const noexcept { return nx_; }
    std::size_t y_alphabet_size() const noexcept { return ny_; }

    // +infinity when lambda charges an excluded word.
    double objective(std::span<const double> lambda) const;
    JoiningBlockMeasure start() const;

    VariationalResult solve(std::size_t max_iterations = 200) const;

private:
    VariationalProblem(const LossSpec& loss, const BlockMeasure& nu_m, const BlockMeasure& mu_m);

    std::size_t nx_ = 0, ny_ = 0, depth_ = 0;
    BlockMeasure nu_m_;
    BlockMeasure mu_m_;
    std::vector<double> coefficients_;  // +infinity marks an excluded word
    double nu_entropy_rate_ = 0.0;
};

VariationalResult solve_V(const GibbsModel& model, const LossSpec& loss, const MarkovMeasure& nu, std::size_t m);
VariationalResult solve_V(const MarkovMeasure& model, const LossSpec& loss, const MarkovMeasure& nu, std::size_t m);
// Y-marginal given directly as an m-block measure (channel output or periodic
// empirical blocks); the entropy correction uses the same blocks.
VariationalResult solve_V(const GibbsModel& model, const LossSpec& loss, const BlockMeasure& nu_m,
                          NuSource source);
VariationalResult solve_V(const MarkovMeasure& model, const LossSpec& loss, const BlockMeasure& nu_m,
                          NuSource source);

// Exact m-block law of the observation process of `spec`.
BlockMeasure observation_block_marginal(const ObservedSystemSpec& spec, std::size_t m);

// Grid indices with V <= min V + tol.
std::vector<std::size_t> theta_min(std::span<const double> v_values, double tol = 1e-9);

struct ComparisonRow {
    double theta = 0.0;
    std::size_t m = 0;
    double v_m = 0.0;
    double dp_mean = 0.0;
    double dp_spread = 0.0;
    double gap = 0.0;
    std::size_t solver_iters = 0;
    double solver_gap = 0.0;
    std::vector<double> dp_values;  // -(1/t) log Z_t for each observation seed
};

// For each theta: V_m and -log_partition_dp at horizon t for each y seed.
// Observations are shared across theta. `gibbs_family` may be empty, in which
// case V_m uses the Markov form of `family`.
std::vector<ComparisonRow> compare_dp_vs_variational(std::span<const MarkovMeasure> family,
                                                     std::span<const GibbsModel> gibbs_family,
                                                     std::span<const LossSpec> loss_family,
                                                     const ObservedSystemSpec& nu_source, const ThetaGrid& grid,
                                                     std::size_t t, std::size_t m,
                                                     std::span<const std::uint64_t> y_seeds, std::size_t threads = 1);

struct SweepPoint {
    std::size_t m = 0;
    VariationalResult result;
    // |V_{m+1} - V_m| grew compared with the previous increment.
    bool non_cauchy = false;
};

std::vector<SweepPoint> v_sweep(const MarkovMeasure& model, const LossSpec& loss, const MarkovMeasure& nu,
                                std::size_t m_lo, std::size_t m_hi);

// Columns theta, m, V_m, dp_mean, dp_spread, gap, solver_iters.
void write_variational_report_csv(std::ostream& os, std::span<const ComparisonRow> rows);

}  // namespace varpost
