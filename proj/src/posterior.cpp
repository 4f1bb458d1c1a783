#include "varpost/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "varpost/csv.hpp"
#include "varpost/error.hpp"
#include "varpost/parallel.hpp"
#include "varpost/rng.hpp"
#include "varpost/simulate.hpp"

namespace varpost {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxLipschitzWork = 200'000'000;

double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf) return kNegInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

std::size_t window_code(std::span<const Symbol> symbols, std::size_t start, std::size_t r, std::size_t n) {
    return encode_word(symbols.subspan(start, r), n);
}

// Log-space forward recursion for the partition function. State = last D
// symbols of the x-word, D = max(k, r - 1).
class ForwardDp {
public:
    ForwardDp(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y, std::size_t t_max)
        : model_(model), loss_(loss) {
        if (t_max == 0) throw Error(ErrorKind::InvalidParameter, "horizon t must be >= 1");
        if (loss.x_alphabet_size() != model.alphabet_size())
            throw Error(ErrorKind::ShapeMismatch, "loss x-alphabet differs from the model alphabet");
        if (loss.y_alphabet_size() != y.alphabet.size())
            throw Error(ErrorKind::ShapeMismatch, "loss y-alphabet differs from the observation alphabet");
        n_ = model.alphabet_size();
        k_ = model.order();
        r_ = loss.range();
        depth_ = std::max(k_, r_ - 1);
        states_ = checked_power(n_, depth_, kMaxDpStates);
        contexts_ = model.context_count();
        const std::size_t length = t_max + r_ - 1;
        if (y.size() < length)
            throw Error(ErrorKind::InsufficientLength, "observation of length " + std::to_string(y.size()) +
                                                           " is shorter than t + r - 1 = " + std::to_string(length));
        ycodes_.resize(t_max);
        for (std::size_t s = 0; s < t_max; ++s) ycodes_[s] = window_code(y.symbols, s, r_, y.alphabet.size());
        log_kernel_.resize(model.kernel().size());
        for (std::size_t i = 0; i < log_kernel_.size(); ++i) log_kernel_[i] = std::log(model.kernel()[i]);
    }

    std::size_t depth() const { return depth_; }

    // Initial log weights over D-blocks, charging the windows s < t_limit
    // that fit entirely inside the block.
    std::vector<double> initial(std::size_t t_limit) const {
        const BlockMeasure block = block_marginal(model_, depth_);
        std::vector<double> lv(states_);
        const std::size_t inner = depth_ + 1 >= r_ ? depth_ + 1 - r_ : 0;  // windows s = 0..D-r
        const std::size_t charged = std::min(inner, t_limit);
        const std::size_t x_words = loss_.x_words();
        for (std::size_t b = 0; b < states_; ++b) {
            const double w = block[b];
            if (w <= 0.0) {
                lv[b] = kNegInf;
                continue;
            }
            double acc = std::log(w);
            std::size_t divisor = charged > 0 ? checked_power(n_, depth_ - r_) : 1;
            for (std::size_t s = 0; s < charged; ++s) {
                const std::size_t xcode = (b / divisor) % x_words;
                acc -= loss_(xcode, ycodes_[s]);
                divisor /= n_;
            }
            lv[b] = acc;
        }
        return lv;
    }

    // Appends position p (0-based) of the word, charging the window that ends at p.
    void step(std::vector<double>& lv, std::vector<double>& next, std::size_t p) const {
        const std::size_t s_window = p + 1 - r_;
        const std::size_t ycode = ycodes_[s_window];
        const std::size_t x_words = loss_.x_words();
        std::fill(next.begin(), next.end(), kNegInf);
        // Pass 1: per-target maximum.
        for (std::size_t u = 0; u < states_; ++u) {
            if (lv[u] == kNegInf) continue;
            const std::size_t ctx = u % contexts_;
            for (std::size_t s = 0; s < n_; ++s) {
                const double lk = log_kernel_[ctx * n_ + s];
                if (lk == kNegInf) continue;
                const std::size_t ext = u * n_ + s;
                const double c = lv[u] + lk - loss_(ext % x_words, ycode);
                double& slot = next[ext % states_];
                slot = std::max(slot, c);
            }
        }
        // Pass 2: shifted sums.
        sums_.assign(states_, 0.0);
        for (std::size_t u = 0; u < states_; ++u) {
            if (lv[u] == kNegInf) continue;
            const std::size_t ctx = u % contexts_;
            for (std::size_t s = 0; s < n_; ++s) {
                const double lk = log_kernel_[ctx * n_ + s];
                if (lk == kNegInf) continue;
                const std::size_t ext = u * n_ + s;
                const std::size_t v = ext % states_;
                sums_[v] += std::exp(lv[u] + lk - loss_(ext % x_words, ycode) - next[v]);
            }
        }
        for (std::size_t v = 0; v < states_; ++v)
            if (next[v] != kNegInf) next[v] += std::log(sums_[v]);
        lv.swap(next);
    }

    std::size_t states() const { return states_; }
    std::size_t range() const { return r_; }

private:
    const MarkovMeasure& model_;
    const LossSpec& loss_;
    std::size_t n_ = 0, k_ = 0, r_ = 0, depth_ = 0, states_ = 0, contexts_ = 0;
    std::vector<std::size_t> ycodes_;
    std::vector<double> log_kernel_;
    mutable std::vector<double> sums_;
};

}  // namespace

// ---------------------------------------------------------------------------
// LossSpec

LossSpec LossSpec::create(std::size_t nx, std::size_t ny, std::size_t range, std::vector<double> table,
                          Modulus modulus) {
    if (nx == 0 || ny == 0) throw Error(ErrorKind::InvalidInput, "loss alphabets must be nonempty");
    if (range == 0) throw Error(ErrorKind::InvalidParameter, "loss range must be >= 1");
    LossSpec out;
    out.nx_ = nx;
    out.ny_ = ny;
    out.range_ = range;
    out.x_words_ = checked_power(nx, range);
    out.y_words_ = checked_power(ny, range);
    if (table.size() != out.x_words_ * out.y_words_)
        throw Error(ErrorKind::ShapeMismatch, "loss table needs " + std::to_string(out.x_words_ * out.y_words_) +
                                                  " entries, got " + std::to_string(table.size()));
    for (double v : table) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "loss entries must be finite");
        out.bound_ = std::max(out.bound_, std::abs(v));
    }
    if (modulus && modulus(0.0) != 0.0) throw Error(ErrorKind::InvalidInput, "loss modulus must vanish at 0");
    out.table_ = std::move(table);
    out.modulus_ = std::move(modulus);
    return out;
}

LossSpec LossSpec::constant(std::size_t nx, std::size_t ny, std::size_t range, double value) {
    const std::size_t size = checked_power(nx, range) * checked_power(ny, range);
    return create(nx, ny, range, std::vector<double>(size, value));
}

LossSpec LossSpec::hamming(std::size_t n) {
    std::vector<double> table(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) table[i * n + i] = 0.0;
    return create(n, n, 1, std::move(table));
}

LossSpec LossSpec::shifted(double c) const {
    std::vector<double> table = table_;
    for (double& v : table) v += c;
    return create(nx_, ny_, range_, std::move(table), modulus_);
}

LossSpec LossSpec::with_modulus(Modulus modulus) const {
    return create(nx_, ny_, range_, table_, std::move(modulus));
}

// ---------------------------------------------------------------------------
// ThetaGrid

ThetaGrid ThetaGrid::create(std::vector<double> points, std::vector<double> prior) {
    if (points.empty()) throw Error(ErrorKind::EmptyFamily, "parameter grid is empty");
    if (prior.size() != points.size())
        throw Error(ErrorKind::ShapeMismatch, "prior length differs from the number of grid points");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(points[i])) throw Error(ErrorKind::InvalidInput, "grid points must be finite");
        for (std::size_t j = 0; j < i; ++j)
            if (points[j] == points[i]) throw Error(ErrorKind::InvalidInput, "grid points must be distinct");
    }
    double total = 0.0;
    for (double w : prior) {
        if (!(w > 0.0) || !std::isfinite(w))
            throw Error(ErrorKind::InvalidInput, "prior must give every grid point positive weight");
        total += w;
    }
    if (std::abs(total - 1.0) > kSimplexTol) throw Error(ErrorKind::InvalidInput, "prior must sum to 1");
    return ThetaGrid(std::move(points), std::move(prior));
}

ThetaGrid ThetaGrid::uniform(std::vector<double> points) {
    std::vector<double> prior(points.size(), points.empty() ? 0.0 : 1.0 / static_cast<double>(points.size()));
    return create(std::move(points), std::move(prior));
}

ThetaGrid ThetaGrid::linspace(double lo, double hi, std::size_t n) {
    if (n == 0) throw Error(ErrorKind::EmptyFamily, "parameter grid is empty");
    std::vector<double> points(n, lo);
    for (std::size_t i = 1; i < n; ++i)
        points[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return uniform(std::move(points));
}

double ThetaGrid::distance(std::size_t i, std::size_t j) const { return std::abs(points_.at(i) - points_.at(j)); }

// ---------------------------------------------------------------------------
// Losses and partition functions

double integrated_loss(const LossSpec& loss, const PathSample& x, const PathSample& y, std::size_t t) {
    const std::size_t r = loss.range();
    const std::size_t length = t + r - 1;
    if (x.size() < length || y.size() < length)
        throw Error(ErrorKind::InsufficientLength, "paths must have length >= t + r - 1 = " + std::to_string(length));
    if (x.alphabet.size() != loss.x_alphabet_size() || y.alphabet.size() != loss.y_alphabet_size())
        throw Error(ErrorKind::ShapeMismatch, "path alphabets do not match the loss");
    double total = 0.0;
    for (std::size_t s = 0; s < t; ++s)
        total += loss(window_code(x.symbols, s, r, loss.x_alphabet_size()),
                      window_code(y.symbols, s, r, loss.y_alphabet_size()));
    return total;
}

double log_partition_dp(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y, std::size_t t) {
    const std::size_t ts[] = {t};
    return log_partition_dp_curve(model, loss, y, ts).front();
}

std::vector<double> log_partition_dp_curve(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y,
                                           std::span<const std::size_t> t_values) {
    if (t_values.empty()) return {};
    for (std::size_t i = 0; i < t_values.size(); ++i) {
        if (t_values[i] == 0) throw Error(ErrorKind::InvalidParameter, "horizon t must be >= 1");
        if (i > 0 && t_values[i] <= t_values[i - 1])
            throw Error(ErrorKind::InvalidParameter, "horizons must be strictly increasing");
    }
    const ForwardDp dp(model, loss, y, t_values.back());
    const auto table = loss.table();
    if (std::all_of(table.begin(), table.end(), [&](double v) { return v == table.front(); }))
        return std::vector<double>(t_values.size(), -table.front());
    const std::size_t r = dp.range();
    const std::size_t depth = dp.depth();
    std::vector<double> out(t_values.size());

    // Horizons whose word fits inside the initial block are read off directly.
    std::size_t first_forward = 0;
    while (first_forward < t_values.size() && t_values[first_forward] + r - 1 <= depth) {
        const std::size_t t = t_values[first_forward];
        out[first_forward] = log_sum_exp(dp.initial(t)) / static_cast<double>(t);
        ++first_forward;
    }
    if (first_forward == t_values.size()) return out;

    std::vector<double> lv = dp.initial(t_values.back());
    std::vector<double> next(lv.size());
    std::size_t idx = first_forward;
    // After appending position p the word has length p + 1 and t = p + 2 - r windows.
    for (std::size_t p = depth; idx < t_values.size(); ++p) {
        dp.step(lv, next, p);
        if (p + 2 - r == t_values[idx]) {
            out[idx] = log_sum_exp(lv) / static_cast<double>(t_values[idx]);
            ++idx;
        }
    }
    return out;
}

LogPartitionEstimate log_partition_mc(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y,
                                      std::size_t t, std::size_t n_samples, std::uint64_t seed) {
    if (n_samples < 2) throw Error(ErrorKind::InsufficientSamples, "Monte Carlo needs n_samples >= 2");
    if (t == 0) throw Error(ErrorKind::InvalidParameter, "horizon t must be >= 1");
    const std::size_t length = t + loss.range() - 1;
    std::vector<double> exponents(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const PathSample x = sample_markov(model, std::max(length, model.order()), mix_seed(seed, i));
        exponents[i] = -integrated_loss(loss, x, y, t);
    }
    const double top = *std::max_element(exponents.begin(), exponents.end());
    double mean = 0.0;
    for (double a : exponents) mean += std::exp(a - top);
    mean /= static_cast<double>(n_samples);
    double var = 0.0;
    for (double a : exponents) {
        const double d = std::exp(a - top) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n_samples - 1);
    const double td = static_cast<double>(t);
    return LogPartitionEstimate{(top + std::log(mean)) / td,
                                std::sqrt(var / static_cast<double>(n_samples)) / mean / td};
}

// ---------------------------------------------------------------------------
// Posterior

const LossSpec& loss_at(std::span<const LossSpec> loss_family, std::size_t i) {
    if (loss_family.empty()) throw Error(ErrorKind::EmptyFamily, "loss family is empty");
    return loss_family.size() == 1 ? loss_family.front() : loss_family[i];
}

namespace {

void check_alignment(std::span<const MarkovMeasure> family, const ThetaGrid& grid,
                     std::span<const LossSpec> loss_family) {
    if (family.empty()) throw Error(ErrorKind::EmptyFamily, "model family is empty");
    if (family.size() != grid.size())
        throw Error(ErrorKind::ShapeMismatch, "model family and grid differ in length");
    if (loss_family.empty()) throw Error(ErrorKind::EmptyFamily, "loss family is empty");
    if (loss_family.size() != 1 && loss_family.size() != grid.size())
        throw Error(ErrorKind::ShapeMismatch, "loss family must have one entry or one per grid point");
}

}  // namespace

PosteriorResult posterior_from_log_partitions(const ThetaGrid& grid, std::vector<double> log_partitions,
                                              std::size_t t) {
    if (log_partitions.size() != grid.size())
        throw Error(ErrorKind::ShapeMismatch, "one log partition value per grid point is required");
    const double td = static_cast<double>(t);
    std::vector<double> a(grid.size());
    double top = kNegInf;
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::log(grid.prior()[i]) + td * log_partitions[i];
        top = std::max(top, a[i]);
    }
    PosteriorResult out;
    out.t = t;
    out.weights.resize(a.size());
    double total = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) total += out.weights[i] = std::exp(a[i] - top);
    for (double& w : out.weights) w /= total;
    out.log_z_pi = top + std::log(total);
    out.log_partition_per_theta = std::move(log_partitions);
    return out;
}

PosteriorResult posterior_over_grid(std::span<const MarkovMeasure> family, const ThetaGrid& grid,
                                    std::span<const LossSpec> loss_family, const PathSample& y, std::size_t t,
                                    std::size_t threads) {
    check_alignment(family, grid, loss_family);
    std::vector<double> ell(grid.size());
    parallel_for(grid.size(), threads,
                 [&](std::size_t i) { ell[i] = log_partition_dp(family[i], loss_at(loss_family, i), y, t); });
    return posterior_from_log_partitions(grid, std::move(ell), t);
}

std::vector<ConsistencyPoint> consistency_curve(std::span<const MarkovMeasure> family, const ThetaGrid& grid,
                                                std::span<const LossSpec> loss_family, const PathSample& y,
                                                std::span<const std::size_t> t_values,
                                                std::span<const std::size_t> neighbourhood, std::size_t threads) {
    check_alignment(family, grid, loss_family);
    if (neighbourhood.empty()) throw Error(ErrorKind::EmptyNeighborhood, "neighbourhood U is empty");
    std::vector<bool> inside(grid.size(), false);
    for (std::size_t i : neighbourhood) {
        if (i >= grid.size()) throw Error(ErrorKind::InvalidInput, "neighbourhood index outside the grid");
        inside[i] = true;
    }
    std::vector<std::vector<double>> curves(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        curves[i] = log_partition_dp_curve(family[i], loss_at(loss_family, i), y, t_values);
    });
    std::vector<ConsistencyPoint> out;
    out.reserve(t_values.size());
    for (std::size_t j = 0; j < t_values.size(); ++j) {
        std::vector<double> ell(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) ell[i] = curves[i][j];
        const PosteriorResult post = posterior_from_log_partitions(grid, std::move(ell), t_values[j]);
        double outside = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            if (!inside[i]) outside += post.weights[i];
        out.push_back({t_values[j], outside});
    }
    return out;
}

std::vector<std::size_t> argmin_set(std::span<const double> values, double tol) {
    if (values.empty()) throw Error(ErrorKind::EmptyFamily, "cannot minimize over an empty set");
    const double low = *std::min_element(values.begin(), values.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] <= low + tol) out.push_back(i);
    return out;
}

std::vector<std::size_t> grid_neighbourhood(const ThetaGrid& grid, std::span<const std::size_t> centres,
                                            double radius) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t c : centres) {
            if (grid.distance(i, c) <= radius) {
                out.push_back(i);
                break;
            }
        }
    }
    return out;
}

double window_distance(std::size_t a, std::size_t b, std::size_t n, std::size_t r) {
    if (a == b) return 0.0;
    const Word wa = decode_word(a, r, n), wb = decode_word(b, r, n);
    std::size_t i = 0;
    while (wa[i] == wb[i]) ++i;
    return std::ldexp(1.0, -static_cast<int>(i));
}

double check_loss_assumption(std::span<const LossSpec> loss_family, const ThetaGrid& grid, std::size_t n_probes,
                             std::uint64_t seed) {
    const LossSpec& first = loss_at(loss_family, 0);
    if (!first.modulus()) throw Error(ErrorKind::InvalidInput, "loss assumption check needs a modulus");
    if (loss_family.size() != 1 && loss_family.size() != grid.size())
        throw Error(ErrorKind::ShapeMismatch, "loss family must have one entry or one per grid point");
    const auto& omega = first.modulus();
    const std::size_t n = first.x_alphabet_size(), r = first.range();
    Rng rng = make_rng(seed);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        const std::size_t i = rng() % grid.size(), j = rng() % grid.size();
        const std::size_t x = rng() % first.x_words();
        // x' agrees with x on a random prefix so that small distances are probed too.
        Word xw = decode_word(x, r, n);
        const std::size_t keep = rng() % (r + 1);
        for (std::size_t p = keep; p < r; ++p) xw[p] = static_cast<Symbol>(rng() % n);
        const std::size_t x2 = encode_word(xw, n);
        const std::size_t y = rng() % first.y_words();
        const double gap = std::abs(loss_at(loss_family, i)(x, y) - loss_at(loss_family, j)(x2, y));
        worst = std::max(worst, gap - omega(grid.distance(i, j)) - omega(window_distance(x, x2, n, r)));
    }
    return worst;
}

double certify_lipschitz_constant(std::span<const LossSpec> loss_family, const ThetaGrid& grid) {
    const LossSpec& first = loss_at(loss_family, 0);
    const std::size_t xw = first.x_words(), yw = first.y_words();
    const std::size_t m = grid.size();
    if (m * m / 2 * xw * xw * yw > kMaxLipschitzWork)
        throw Error(ErrorKind::TooLarge, "Lipschitz certification exceeds the enumeration budget");
    std::vector<double> dx(xw * xw);
    for (std::size_t a = 0; a < xw; ++a)
        for (std::size_t b = 0; b < xw; ++b) dx[a * xw + b] = window_distance(a, b, first.x_alphabet_size(), first.range());
    double c = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            const LossSpec& li = loss_at(loss_family, i);
            const LossSpec& lj = loss_at(loss_family, j);
            const double dt = grid.distance(i, j);
            for (std::size_t a = 0; a < xw; ++a) {
                for (std::size_t b = 0; b < xw; ++b) {
                    const double d = dt + dx[a * xw + b];
                    if (d == 0.0) continue;
                    for (std::size_t y = 0; y < yw; ++y) c = std::max(c, std::abs(li(a, y) - lj(b, y)) / d);
                }
            }
        }
    }
    return c;
}

void write_posterior_csv(std::ostream& os, const ThetaGrid& grid, const PosteriorResult& result) {
    os << "theta,log_partition,posterior_weight\n";
    for (std::size_t i = 0; i < grid.size(); ++i)
        os << format_number(grid[i]) << ',' << format_number(result.log_partition_per_theta[i]) << ','
           << format_number(result.weights[i]) << '\n';
}

}  // namespace varpost
