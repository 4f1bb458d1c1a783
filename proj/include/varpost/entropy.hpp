#pragma once

// Relative entropy, Kolmogorov-Sinai entropy, and closed-form relative
// entropy rates for i.i.d., Markov, uniform-product, Gibbs and diffusion
// reference laws. All values are in nats; an infinite divergence is reported
// as +infinity, never as a large finite sentinel.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "varpost/core.hpp"
#include "varpost/gibbs.hpp"
#include "varpost/rng.hpp"

namespace varpost {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class RateFormula { Iid, Markov, UniformProduct, Gibbs };

const char* to_string(RateFormula formula) noexcept;

struct EntropyRateResult {
    double value = 0.0;
    RateFormula formula = RateFormula::Iid;
    bool finite = true;
};

// K(p || q) = sum p log(p / q) with 0 log 0 = 0; +infinity when p charges a
// q-null word. Throws ShapeMismatch on differing depth or alphabet.
double relative_entropy(const BlockMeasure& p, const BlockMeasure& q);

// Shannon entropy of a block measure.
double shannon_entropy(const BlockMeasure& p);

// -sum_w pi(w) sum_s kappa(w, s) log kappa(w, s).
double ks_entropy(const MarkovMeasure& model);

EntropyRateResult entropy_rate_iid(const BlockMeasure& mu0, const BlockMeasure& eta0);

// h(eta || mu) for stationary Markov laws of any orders: the expected
// one-step conditional divergence under eta, lifted to the common order.
// Infinite when eta's initial law or a transition is not absolutely
// continuous with respect to mu.
EntropyRateResult entropy_rate_markov(const MarkovMeasure& mu, const MarkovMeasure& eta);

// K(eta_0 (x) q || mu_0 (x) p) on S x S for order-1 laws, the joint
// two-step divergence. Agrees with entropy_rate_markov when eta_0 = mu_0.
double pair_measure_divergence(const MarkovMeasure& mu, const MarkovMeasure& eta);

EntropyRateResult entropy_rate_vs_uniform_product(const MarkovMeasure& eta,
                                                  std::size_t alphabet_size);

// P - int phi d eta - h(eta).
EntropyRateResult entropy_rate_gibbs(const MarkovMeasure& eta, const GibbsModel& model);

// Drift pair for two diffusions sharing the diffusion matrix Sigma.
struct DriftPair {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift_a;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift_b;
    Eigen::MatrixXd diffusion;
    std::function<Eigen::VectorXd(Rng&)> sample_source;  // draws from eta_0
};

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

inline constexpr double kPseudoInverseCutoff = 1e-10;
inline constexpr double kRangeTol = 1e-8;

// Moore-Penrose inverse of a symmetric PSD matrix; eigenvalues below
// kPseudoInverseCutoff * (largest eigenvalue) are treated as zero.
Eigen::MatrixXd pseudo_inverse_psd(const Eigen::MatrixXd& sigma);

// (1/2) E_{x ~ eta_0} (a - b)^T Sigma^+ (a - b) by Monte Carlo.
McEstimate entropy_rate_diffusion_mc(const DriftPair& pair, std::size_t n_samples,
                                     std::uint64_t seed);

struct EntropyCurvePoint {
    std::size_t t = 0;
    double k_t = 0.0;
    double k_t_over_t = 0.0;
};

// K_t = K(lambda|F_t || mu|F_t) via the Markov telescoping identity
// K_t = K_K + (t - K) c, with K the larger order and c the stationary
// conditional divergence.
std::vector<EntropyCurvePoint> finite_horizon_entropy_curve(const MarkovMeasure& lambda,
                                                            const MarkovMeasure& mu,
                                                            std::span<const std::size_t> t_values);

// Columns t, K_t, K_t_over_t with a header row, 15 significant digits.
void write_entropy_curve_csv(std::ostream& os, std::span<const EntropyCurvePoint> curve);

}  // namespace varpost
