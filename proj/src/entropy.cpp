#include "varpost/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "varpost/csv.hpp"
#include "varpost/error.hpp"

namespace varpost {

const char* to_string(RateFormula formula) noexcept {
    switch (formula) {
        case RateFormula::Iid: return "iid";
        case RateFormula::Markov: return "markov";
        case RateFormula::UniformProduct: return "uniform-product";
        case RateFormula::Gibbs: return "gibbs";
    }
    return "unknown";
}

namespace {

EntropyRateResult make_result(double value, RateFormula formula) {
    return EntropyRateResult{value, formula, std::isfinite(value)};
}

void require_same_shape(const BlockMeasure& p, const BlockMeasure& q) {
    if (p.depth() != q.depth() || p.alphabet_size() != q.alphabet_size())
        throw Error(ErrorKind::ShapeMismatch,
                    "relative entropy needs equal depth and alphabet (depths " +
                        std::to_string(p.depth()) + " and " + std::to_string(q.depth()) + ")");
}

// sum_s q_s log(q_s / p_s) for one kernel row.
double row_divergence(std::span<const double> q, std::span<const double> p) {
    double out = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) {
        if (q[s] <= 0.0) continue;
        if (p[s] <= 0.0) return kInfinity;
        out += q[s] * std::log(q[s] / p[s]);
    }
    return out;
}

struct Telescoped {
    std::size_t order = 0;
    double initial = 0.0;      // K at the common order
    double conditional = 0.0;  // per-step divergence
};

Telescoped telescope(const MarkovMeasure& lambda, const MarkovMeasure& mu) {
    if (!(lambda.alphabet() == mu.alphabet()))
        throw Error(ErrorKind::ShapeMismatch, "measures live on different alphabets");
    Telescoped out;
    out.order = std::max(lambda.order(), mu.order());
    const MarkovMeasure l = lambda.lifted(out.order);
    const MarkovMeasure m = mu.lifted(out.order);
    out.initial = relative_entropy(l.stationary(), m.stationary());
    for (std::size_t c = 0; c < l.context_count(); ++c) {
        const double w = l.stationary()[c];
        if (w <= 0.0) continue;
        const double d = row_divergence(l.row(c), m.row(c));
        if (!std::isfinite(d)) {
            out.conditional = kInfinity;
            break;
        }
        out.conditional += w * d;
    }
    return out;
}

}  // namespace

double relative_entropy(const BlockMeasure& p, const BlockMeasure& q) {
    require_same_shape(p, q);
    double out = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) {
        if (p[c] <= 0.0) continue;
        if (q[c] <= 0.0) return kInfinity;
        out += p[c] * std::log(p[c] / q[c]);
    }
    // Rounding can leave tiny negative values for p ~ q.
    return std::max(out, 0.0);
}

double shannon_entropy(const BlockMeasure& p) {
    double out = 0.0;
    for (double w : p.weights()) {
        if (w > 0.0) out -= w * std::log(w);
    }
    return out;
}

double ks_entropy(const MarkovMeasure& model) {
    double out = 0.0;
    for (std::size_t c = 0; c < model.context_count(); ++c) {
        const double w = model.stationary()[c];
        if (w <= 0.0) continue;
        double row = 0.0;
        for (double p : model.row(c)) {
            if (p > 0.0) row -= p * std::log(p);
        }
        out += w * row;
    }
    return out;
}

EntropyRateResult entropy_rate_iid(const BlockMeasure& mu0, const BlockMeasure& eta0) {
    return make_result(relative_entropy(eta0, mu0), RateFormula::Iid);
}

EntropyRateResult entropy_rate_markov(const MarkovMeasure& mu, const MarkovMeasure& eta) {
    const Telescoped tel = telescope(eta, mu);
    if (!std::isfinite(tel.initial)) return make_result(kInfinity, RateFormula::Markov);
    return make_result(tel.conditional, RateFormula::Markov);
}

double pair_measure_divergence(const MarkovMeasure& mu, const MarkovMeasure& eta) {
    if (mu.order() != 1 || eta.order() != 1)
        throw Error(ErrorKind::InvalidParameter, "pair-measure divergence needs order-1 laws");
    return relative_entropy(block_marginal(eta, 2), block_marginal(mu, 2));
}

EntropyRateResult entropy_rate_vs_uniform_product(const MarkovMeasure& eta,
                                                  std::size_t alphabet_size) {
    if (eta.alphabet_size() != alphabet_size)
        throw Error(ErrorKind::ShapeMismatch, "eta is not defined on the given alphabet");
    return make_result(std::log(static_cast<double>(alphabet_size)) - ks_entropy(eta),
                       RateFormula::UniformProduct);
}

EntropyRateResult entropy_rate_gibbs(const MarkovMeasure& eta, const GibbsModel& model) {
    if (!(eta.alphabet() == model.markov.alphabet()))
        throw Error(ErrorKind::ShapeMismatch, "eta and the Gibbs model use different alphabets");
    const double value = model.pressure - expectation(model.potential, eta) - ks_entropy(eta);
    return make_result(value, RateFormula::Gibbs);
}

// ---------------------------------------------------------------------------
// Diffusions

Eigen::MatrixXd pseudo_inverse_psd(const Eigen::MatrixXd& sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw Error(ErrorKind::ShapeMismatch, "diffusion matrix must be square and nonempty");
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw Error(ErrorKind::InvalidInput, "diffusion matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::VectorXd& values = eig.eigenvalues();
    if (values.minCoeff() < -1e-10 * std::max(1.0, std::abs(values.maxCoeff())))
        throw Error(ErrorKind::InvalidInput, "diffusion matrix must be positive semidefinite");
    const double cutoff = kPseudoInverseCutoff * values.maxCoeff();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] > cutoff) inv[i] = 1.0 / values[i];
    }
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

McEstimate entropy_rate_diffusion_mc(const DriftPair& pair, std::size_t n_samples,
                                     std::uint64_t seed) {
    if (n_samples < 2)
        throw Error(ErrorKind::InsufficientSamples, "diffusion estimate needs at least 2 samples");
    if (!pair.drift_a || !pair.drift_b || !pair.sample_source)
        throw Error(ErrorKind::InvalidInput, "drift pair is missing a callable");
    const Eigen::MatrixXd pinv = pseudo_inverse_psd(pair.diffusion);
    const Eigen::MatrixXd projector = pair.diffusion * pinv;
    Rng rng = make_rng(seed);

    // Welford running mean / variance.
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const Eigen::VectorXd x = pair.sample_source(rng);
        const Eigen::VectorXd d = pair.drift_a(x) - pair.drift_b(x);
        const double residual = (d - projector * d).norm();
        if (residual > kRangeTol * std::max(1.0, d.norm()))
            throw Error(ErrorKind::RangeViolation,
                        "drift difference leaves the range of sigma at sample " + std::to_string(i));
        const double value = 0.5 * d.dot(pinv * d);
        const double delta = value - mean;
        mean += delta / static_cast<double>(i + 1);
        m2 += delta * (value - mean);
    }
    const double variance = m2 / static_cast<double>(n_samples - 1);
    return McEstimate{mean, std::sqrt(variance / static_cast<double>(n_samples))};
}

// ---------------------------------------------------------------------------
// Finite-horizon curve

std::vector<EntropyCurvePoint> finite_horizon_entropy_curve(const MarkovMeasure& lambda,
                                                            const MarkovMeasure& mu,
                                                            std::span<const std::size_t> t_values) {
    for (std::size_t i = 0; i < t_values.size(); ++i) {
        if (t_values[i] == 0) throw Error(ErrorKind::InvalidParameter, "horizons must be positive");
        if (i > 0 && t_values[i] <= t_values[i - 1])
            throw Error(ErrorKind::InvalidParameter, "horizons must be increasing");
    }
    const Telescoped tel = telescope(lambda, mu);
    std::vector<EntropyCurvePoint> out;
    out.reserve(t_values.size());
    for (std::size_t t : t_values) {
        double k_t = 0.0;
        if (t <= tel.order) {
            k_t = relative_entropy(block_marginal(lambda, t), block_marginal(mu, t));
        } else if (!std::isfinite(tel.initial) || !std::isfinite(tel.conditional)) {
            k_t = kInfinity;
        } else {
            k_t = tel.initial + static_cast<double>(t - tel.order) * tel.conditional;
        }
        out.push_back({t, k_t, k_t / static_cast<double>(t)});
    }
    return out;
}

void write_entropy_curve_csv(std::ostream& os, std::span<const EntropyCurvePoint> curve) {
    os << "t,K_t,K_t_over_t\n";
    for (const auto& p : curve)
        os << p.t << ',' << format_number(p.k_t) << ',' << format_number(p.k_t_over_t) << '\n';
}

}  // namespace varpost
