#include "varpost/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <Eigen/Dense>

#include "varpost/csv.hpp"
#include "varpost/entropy.hpp"
#include "varpost/error.hpp"
#include "varpost/parallel.hpp"

namespace varpost {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNullSpaceThreshold = 1e-10;
constexpr double kStartResidualTol = 1e-9;
constexpr double kNewtonStopGap = 1e-13;

std::size_t x_of(std::size_t joint_code, std::size_t m, std::size_t nx, std::size_t ny) {
    const std::size_t j = nx * ny;
    std::size_t out = 0;
    std::size_t scale = 1;
    for (std::size_t i = 0; i < m; ++i) {
        out += (joint_code % j) / ny * scale;
        joint_code /= j;
        scale *= nx;
    }
    return out;
}

std::size_t y_of(std::size_t joint_code, std::size_t m, std::size_t nx, std::size_t ny) {
    const std::size_t j = nx * ny;
    std::size_t out = 0;
    std::size_t scale = 1;
    for (std::size_t i = 0; i < m; ++i) {
        out += (joint_code % j) % ny * scale;
        joint_code /= j;
        scale *= ny;
    }
    return out;
}

// sum_w lambda(w) log(lambda(w) / lambda_{m-1}(w / J)), with 0 log 0 = 0.
double negative_conditional_entropy(std::span<const double> lambda, std::size_t joint_size) {
    std::vector<double> head(lambda.size() / joint_size, 0.0);
    for (std::size_t w = 0; w < lambda.size(); ++w) head[w / joint_size] += lambda[w];
    double acc = 0.0;
    for (std::size_t w = 0; w < lambda.size(); ++w)
        if (lambda[w] > 0.0) acc += lambda[w] * std::log(lambda[w] / head[w / joint_size]);
    return acc;
}

void check_consistent(const BlockMeasure& nu_m) {
    const BlockMeasure a = nu_m.drop_first(), b = nu_m.drop_last();
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    if (worst > kJoiningConstraintTol)
        throw Error(ErrorKind::Infeasible, "target Y-blocks are not shift consistent (max marginal gap " +
                                               std::to_string(worst) + ")");
}

}  // namespace

// ---------------------------------------------------------------------------
// Joinings

BlockMeasure JoiningBlockMeasure::joint() const {
    return BlockMeasure::create(joint_alphabet_size(), depth, weights);
}

BlockMeasure JoiningBlockMeasure::x_marginal() const {
    std::vector<double> out(checked_power(x_alphabet_size, depth), 0.0);
    for (std::size_t w = 0; w < weights.size(); ++w)
        out[x_of(w, depth, x_alphabet_size, y_alphabet_size)] += weights[w];
    return BlockMeasure::create(x_alphabet_size, depth, std::move(out));
}

BlockMeasure JoiningBlockMeasure::y_marginal() const {
    std::vector<double> out(checked_power(y_alphabet_size, depth), 0.0);
    for (std::size_t w = 0; w < weights.size(); ++w)
        out[y_of(w, depth, x_alphabet_size, y_alphabet_size)] += weights[w];
    return BlockMeasure::create(y_alphabet_size, depth, std::move(out));
}

void validate_joining(const JoiningBlockMeasure& lambda, const BlockMeasure& nu_m) {
    if (lambda.depth < 1 || lambda.weights.size() != checked_power(lambda.joint_alphabet_size(), lambda.depth))
        throw Error(ErrorKind::ShapeMismatch, "joining weights do not match its depth");
    if (nu_m.depth() != lambda.depth || nu_m.alphabet_size() != lambda.y_alphabet_size)
        throw Error(ErrorKind::ShapeMismatch, "target Y-blocks do not match the joining");
    double total = 0.0;
    for (double w : lambda.weights) {
        if (!(w >= 0.0)) throw Error(ErrorKind::InvalidInput, "joining weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > kJoiningSumTol) throw Error(ErrorKind::InvalidInput, "joining weights must sum to 1");
    const std::size_t j = lambda.joint_alphabet_size();
    const std::size_t shorter = lambda.weights.size() / j;
    std::vector<double> first(shorter, 0.0), last(shorter, 0.0);
    for (std::size_t w = 0; w < lambda.weights.size(); ++w) {
        first[w % shorter] += lambda.weights[w];
        last[w / j] += lambda.weights[w];
    }
    for (std::size_t u = 0; u < shorter; ++u)
        if (std::abs(first[u] - last[u]) > kJoiningConstraintTol)
            throw Error(ErrorKind::InvalidInput, "joining is not shift consistent");
    const BlockMeasure y = lambda.y_marginal();
    for (std::size_t i = 0; i < y.size(); ++i)
        if (std::abs(y[i] - nu_m[i]) > kJoiningConstraintTol)
            throw Error(ErrorKind::InvalidInput, "joining Y-marginal differs from the target");
}

JoiningBlockMeasure product_joining(const BlockMeasure& mu_m, const BlockMeasure& nu_m) {
    if (mu_m.depth() != nu_m.depth()) throw Error(ErrorKind::ShapeMismatch, "product needs equal depths");
    const std::size_t nx = mu_m.alphabet_size(), ny = nu_m.alphabet_size(), m = mu_m.depth();
    JoiningBlockMeasure out{nx, ny, m, std::vector<double>(checked_power(nx * ny, m, kMaxJoiningWords))};
    for (std::size_t w = 0; w < out.weights.size(); ++w)
        out.weights[w] = mu_m[x_of(w, m, nx, ny)] * nu_m[y_of(w, m, nx, ny)];
    return out;
}

double fibre_entropy_block(const JoiningBlockMeasure& lambda, const BlockMeasure& nu_m,
                           const BlockMeasure& nu_m_minus_1) {
    if (lambda.depth < 2) throw Error(ErrorKind::DepthTooSmall, "fibre entropy needs depth m >= 2");
    if (nu_m.depth() != lambda.depth || nu_m_minus_1.depth() + 1 != lambda.depth)
        throw Error(ErrorKind::ShapeMismatch, "Y-block depths do not align with the joining");
    const double h_lambda = -negative_conditional_entropy(lambda.weights, lambda.joint_alphabet_size());
    return h_lambda - (shannon_entropy(nu_m) - shannon_entropy(nu_m_minus_1));
}

const char* to_string(NuSource source) noexcept {
    switch (source) {
        case NuSource::Markov: return "markov";
        case NuSource::ChannelBlocks: return "channel-blocks";
        case NuSource::Empirical: return "empirical-nu";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Problem construction

VariationalProblem::VariationalProblem(const LossSpec& loss, const BlockMeasure& nu_m, const BlockMeasure& mu_m)
    : nx_(mu_m.alphabet_size()), ny_(nu_m.alphabet_size()), depth_(nu_m.depth()), nu_m_(nu_m), mu_m_(mu_m) {
    if (depth_ < 2) throw Error(ErrorKind::DepthTooSmall, "variational depth m must be >= 2");
    if (mu_m.depth() != depth_) throw Error(ErrorKind::ShapeMismatch, "model and Y-blocks differ in depth");
    if (loss.x_alphabet_size() != nx_ || loss.y_alphabet_size() != ny_)
        throw Error(ErrorKind::ShapeMismatch, "loss alphabets differ from the model and observation alphabets");
    if (depth_ < loss.range())
        throw Error(ErrorKind::DepthTooSmall, "depth m = " + std::to_string(depth_) + " is below the loss range " +
                                                  std::to_string(loss.range()));
    check_consistent(nu_m);
    const std::size_t words = checked_power(nx_ * ny_, depth_, kMaxJoiningWords);
    const std::size_t x_tail = checked_power(nx_, depth_ - loss.range());
    const std::size_t y_tail = checked_power(ny_, depth_ - loss.range());
    coefficients_.resize(words);
    for (std::size_t w = 0; w < words; ++w) {
        const std::size_t x = x_of(w, depth_, nx_, ny_), y = y_of(w, depth_, nx_, ny_);
        coefficients_[w] = (mu_m[x] > 0.0 && nu_m[y] > 0.0) ? loss(x / x_tail, y / y_tail) : kInf;
    }
    nu_entropy_rate_ = shannon_entropy(nu_m) - shannon_entropy(nu_m.drop_last());
}

VariationalProblem VariationalProblem::gibbs(const GibbsModel& model, const LossSpec& loss, const BlockMeasure& nu_m) {
    const std::size_t m = nu_m.depth();
    const std::size_t r = model.potential.range();
    if (m < r)
        throw Error(ErrorKind::DepthTooSmall, "depth m is below the potential range " + std::to_string(r));
    VariationalProblem out(loss, nu_m, block_marginal(model.markov, m));
    const std::size_t tail = checked_power(out.nx_, m - r);
    for (std::size_t w = 0; w < out.coefficients_.size(); ++w) {
        if (std::isinf(out.coefficients_[w])) continue;
        const std::size_t x = x_of(w, m, out.nx_, out.ny_);
        out.coefficients_[w] += model.pressure - model.potential[x / tail];
    }
    return out;
}

VariationalProblem VariationalProblem::markov(const MarkovMeasure& model, const LossSpec& loss,
                                              const BlockMeasure& nu_m) {
    const std::size_t m = nu_m.depth();
    const std::size_t k = model.order();
    if (m < k + 1)
        throw Error(ErrorKind::DepthTooSmall, "depth m must exceed the model order " + std::to_string(k));
    VariationalProblem out(loss, nu_m, block_marginal(model, m));
    const std::size_t n = out.nx_;
    const std::size_t contexts = model.context_count();
    for (std::size_t w = 0; w < out.coefficients_.size(); ++w) {
        if (std::isinf(out.coefficients_[w])) continue;
        const std::size_t x = x_of(w, m, n, out.ny_);
        out.coefficients_[w] -= std::log(model.transition((x / n) % contexts, static_cast<Symbol>(x % n)));
    }
    return out;
}

double VariationalProblem::objective(std::span<const double> lambda) const {
    if (lambda.size() != coefficients_.size())
        throw Error(ErrorKind::ShapeMismatch, "joining weights do not match the problem size");
    double linear = 0.0;
    for (std::size_t w = 0; w < lambda.size(); ++w) {
        if (lambda[w] < 0.0) return kInf;
        if (lambda[w] == 0.0) continue;
        if (std::isinf(coefficients_[w])) return kInf;
        linear += lambda[w] * coefficients_[w];
    }
    return linear + negative_conditional_entropy(lambda, nx_ * ny_) + nu_entropy_rate_;
}

JoiningBlockMeasure VariationalProblem::start() const { return product_joining(mu_m_, nu_m_); }

// ---------------------------------------------------------------------------
// Damped Newton on the affine hull of the constraints

VariationalResult VariationalProblem::solve(std::size_t max_iterations) const {
    const std::size_t joint = nx_ * ny_;
    const std::size_t words = coefficients_.size();
    const std::size_t heads = words / joint;

    std::vector<std::size_t> vars;
    for (std::size_t w = 0; w < words; ++w)
        if (!std::isinf(coefficients_[w])) vars.push_back(w);
    const auto nv = static_cast<Eigen::Index>(vars.size());
    if (vars.size() > kMaxDenseVariables)
        throw Error(ErrorKind::TooLarge, std::to_string(vars.size()) + " free joining weights exceed the dense solver limit " +
                                             std::to_string(kMaxDenseVariables));

    // Constraint rows: shift consistency per (m-1)-word, Y-marginal per charged y-word, total mass.
    std::vector<std::size_t> y_rows(nu_m_.size(), static_cast<std::size_t>(-1));
    std::size_t row_count = heads;
    for (std::size_t y = 0; y < nu_m_.size(); ++y)
        if (nu_m_[y] > 0.0) y_rows[y] = row_count++;
    const std::size_t sum_row = row_count++;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(row_count), nv);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(row_count));
    for (std::size_t y = 0; y < nu_m_.size(); ++y)
        if (y_rows[y] != static_cast<std::size_t>(-1)) b[static_cast<Eigen::Index>(y_rows[y])] = nu_m_[y];
    b[static_cast<Eigen::Index>(sum_row)] = 1.0;
    for (Eigen::Index i = 0; i < nv; ++i) {
        const std::size_t w = vars[static_cast<std::size_t>(i)];
        a(static_cast<Eigen::Index>(w % heads), i) += 1.0;
        a(static_cast<Eigen::Index>(w / joint), i) -= 1.0;
        a(static_cast<Eigen::Index>(y_rows[y_of(w, depth_, nx_, ny_)]), i) = 1.0;
        a(static_cast<Eigen::Index>(sum_row), i) = 1.0;
    }

    const JoiningBlockMeasure initial = start();
    Eigen::VectorXd lam(nv);
    for (Eigen::Index i = 0; i < nv; ++i) lam[i] = initial.weights[vars[static_cast<std::size_t>(i)]];
    const double residual = (a * lam - b).lpNorm<Eigen::Infinity>();
    if (residual > kStartResidualTol)
        throw Error(ErrorKind::Infeasible, "product joining violates the constraints by " + std::to_string(residual));

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a.transpose());
    qr.setThreshold(kNullSpaceThreshold);
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(nv, nv);
    const Eigen::MatrixXd basis = q.rightCols(nv - rank);

    std::vector<double> full(words, 0.0);
    auto scatter = [&](const Eigen::VectorXd& v) {
        for (Eigen::Index i = 0; i < nv; ++i) full[vars[static_cast<std::size_t>(i)]] = v[i];
    };
    auto value_at = [&](const Eigen::VectorXd& v) {
        scatter(v);
        return objective(full);
    };

    VariationalResult result;
    result.depth = depth_;
    double f = value_at(lam);
    double gap = 0.0;
    std::size_t it = 0;
    if (basis.cols() > 0) {
        Eigen::VectorXd grad(nv), head_mass(static_cast<Eigen::Index>(heads));
        Eigen::MatrixXd head_basis(static_cast<Eigen::Index>(heads), basis.cols());
        bool converged = false;
        for (; it < max_iterations; ++it) {
            head_mass.setZero();
            for (Eigen::Index i = 0; i < nv; ++i) head_mass[static_cast<Eigen::Index>(vars[static_cast<std::size_t>(i)] / joint)] += lam[i];
            head_basis.setZero();
            for (Eigen::Index i = 0; i < nv; ++i) {
                const auto h = static_cast<Eigen::Index>(vars[static_cast<std::size_t>(i)] / joint);
                grad[i] = coefficients_[vars[static_cast<std::size_t>(i)]] + std::log(lam[i] / head_mass[h]);
                head_basis.row(h) += basis.row(i);
            }
            const Eigen::VectorXd g = basis.transpose() * grad;
            Eigen::MatrixXd hess = basis.transpose() * lam.cwiseInverse().asDiagonal() * basis;
            Eigen::VectorXd inv_head = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(heads));
            for (Eigen::Index h = 0; h < inv_head.size(); ++h)
                if (head_mass[h] > 0.0) inv_head[h] = 1.0 / head_mass[h];
            hess -= head_basis.transpose() * inv_head.asDiagonal() * head_basis;
            const double ridge = 1e-12 * std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
            hess.diagonal().array() += ridge;
            const Eigen::VectorXd dz = hess.ldlt().solve(-g);
            const double decrement = -g.dot(dz);
            gap = 0.5 * std::max(decrement, 0.0);
            if (!dz.allFinite()) break;
            if (gap < kNewtonStopGap) {
                converged = true;
                break;
            }
            const Eigen::VectorXd dl = basis * dz;
            double step = 1.0;
            for (Eigen::Index i = 0; i < nv; ++i)
                if (dl[i] < 0.0) step = std::min(step, -0.99 * lam[i] / dl[i]);
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                const Eigen::VectorXd trial = lam + step * dl;
                if ((trial.array() > 0.0).all()) {
                    const double ft = value_at(trial);
                    if (ft <= f - 0.25 * step * decrement) {
                        lam = trial;
                        f = ft;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if (!accepted) {
                // No representable descent left: the iterate is optimal to rounding.
                converged = gap <= kVariationalGapTol;
                break;
            }
        }
        if (!converged && gap > kVariationalGapTol)
            throw Error(ErrorKind::SolverStall, "variational Newton solver stopped after " + std::to_string(it) +
                                                    " iterations with gap estimate " + std::to_string(gap));
    }
    scatter(lam);
    result.v = objective(full);
    result.argmin = JoiningBlockMeasure{nx_, ny_, depth_, full};
    result.iterations = it;
    result.gap = gap;
    return result;
}

// ---------------------------------------------------------------------------
// Entry points

VariationalResult solve_V(const GibbsModel& model, const LossSpec& loss, const MarkovMeasure& nu, std::size_t m) {
    if (m < nu.order() + 1) throw Error(ErrorKind::DepthTooSmall, "depth m must exceed the order of nu");
    return solve_V(model, loss, block_marginal(nu, m), NuSource::Markov);
}

VariationalResult solve_V(const MarkovMeasure& model, const LossSpec& loss, const MarkovMeasure& nu, std::size_t m) {
    if (m < nu.order() + 1) throw Error(ErrorKind::DepthTooSmall, "depth m must exceed the order of nu");
    return solve_V(model, loss, block_marginal(nu, m), NuSource::Markov);
}

VariationalResult solve_V(const GibbsModel& model, const LossSpec& loss, const BlockMeasure& nu_m, NuSource source) {
    auto result = VariationalProblem::gibbs(model, loss, nu_m).solve();
    result.nu_source = source;
    return result;
}

VariationalResult solve_V(const MarkovMeasure& model, const LossSpec& loss, const BlockMeasure& nu_m,
                          NuSource source) {
    auto result = VariationalProblem::markov(model, loss, nu_m).solve();
    result.nu_source = source;
    return result;
}

BlockMeasure observation_block_marginal(const ObservedSystemSpec& spec, std::size_t m) {
    spec.validate();
    const BlockMeasure hidden = block_marginal(spec.source, m);
    if (!spec.channel) return hidden;
    const std::size_t nh = spec.source.alphabet_size();
    const std::size_t no = spec.observation_alphabet->size();
    const std::vector<double>& c = *spec.channel;
    std::vector<double> out(checked_power(no, m), 0.0);
    for (std::size_t x = 0; x < hidden.size(); ++x) {
        if (hidden[x] == 0.0) continue;
        const Word xw = decode_word(x, m, nh);
        for (std::size_t y = 0; y < out.size(); ++y) {
            const Word yw = decode_word(y, m, no);
            double p = hidden[x];
            for (std::size_t i = 0; i < m && p > 0.0; ++i) p *= c[xw[i] * no + yw[i]];
            out[y] += p;
        }
    }
    return BlockMeasure::create(no, m, std::move(out));
}

std::vector<std::size_t> theta_min(std::span<const double> v_values, double tol) { return argmin_set(v_values, tol); }

std::vector<ComparisonRow> compare_dp_vs_variational(std::span<const MarkovMeasure> family,
                                                     std::span<const GibbsModel> gibbs_family,
                                                     std::span<const LossSpec> loss_family,
                                                     const ObservedSystemSpec& nu_source, const ThetaGrid& grid,
                                                     std::size_t t, std::size_t m,
                                                     std::span<const std::uint64_t> y_seeds, std::size_t threads) {
    if (family.size() != grid.size()) throw Error(ErrorKind::ShapeMismatch, "model family and grid differ in length");
    if (!gibbs_family.empty() && gibbs_family.size() != grid.size())
        throw Error(ErrorKind::ShapeMismatch, "Gibbs family and grid differ in length");
    if (y_seeds.empty()) throw Error(ErrorKind::InsufficientSamples, "at least one observation seed is required");
    std::size_t max_range = 1;
    for (std::size_t i = 0; i < grid.size(); ++i) max_range = std::max(max_range, loss_at(loss_family, i).range());
    std::vector<PathSample> observations;
    for (std::uint64_t seed : y_seeds) observations.push_back(generate_observation(nu_source, t + max_range - 1, seed));
    const BlockMeasure nu_m = observation_block_marginal(nu_source, m);
    const NuSource source = nu_source.channel ? NuSource::ChannelBlocks : NuSource::Markov;

    std::vector<ComparisonRow> rows(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const LossSpec& loss = loss_at(loss_family, i);
        const VariationalResult v = gibbs_family.empty() ? solve_V(family[i], loss, nu_m, source)
                                                         : solve_V(gibbs_family[i], loss, nu_m, source);
        ComparisonRow row;
        row.theta = grid[i];
        row.m = m;
        row.v_m = v.v;
        row.solver_iters = v.iterations;
        row.solver_gap = v.gap;
        double lo = kInf, hi = -kInf, sum = 0.0;
        for (const PathSample& y : observations) {
            const double value = -log_partition_dp(family[i], loss, y, t);
            row.dp_values.push_back(value);
            lo = std::min(lo, value);
            hi = std::max(hi, value);
            sum += value;
        }
        row.dp_mean = sum / static_cast<double>(observations.size());
        row.dp_spread = hi - lo;
        row.gap = std::abs(row.v_m - row.dp_mean);
        rows[i] = std::move(row);
    });
    return rows;
}

std::vector<SweepPoint> v_sweep(const MarkovMeasure& model, const LossSpec& loss, const MarkovMeasure& nu,
                                std::size_t m_lo, std::size_t m_hi) {
    if (m_hi < m_lo) throw Error(ErrorKind::InvalidParameter, "depth range is empty");
    std::vector<SweepPoint> out;
    for (std::size_t m = m_lo; m <= m_hi; ++m) out.push_back({m, solve_V(model, loss, nu, m), false});
    for (std::size_t i = 2; i < out.size(); ++i) {
        const double prev = std::abs(out[i - 1].result.v - out[i - 2].result.v);
        const double cur = std::abs(out[i].result.v - out[i - 1].result.v);
        out[i].non_cauchy = cur > prev;
    }
    return out;
}

void write_variational_report_csv(std::ostream& os, std::span<const ComparisonRow> rows) {
    os << "theta,m,V_m,dp_mean,dp_spread,gap,solver_iters\n";
    for (const auto& r : rows)
        os << format_number(r.theta) << ',' << r.m << ',' << format_number(r.v_m) << ',' << format_number(r.dp_mean)
           << ',' << format_number(r.dp_spread) << ',' << format_number(r.gap) << ',' << r.solver_iters << '\n';
}

}  // namespace varpost
