#include "varpost/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varpost/error.hpp"
#include "varpost/rng.hpp"

namespace varpost {

FiniteRangePotential FiniteRangePotential::create(std::size_t alphabet_size, std::size_t range,
                                                  std::vector<double> table) {
    if (alphabet_size == 0) throw Error(ErrorKind::InvalidInput, "alphabet size must be positive");
    if (range == 0) throw Error(ErrorKind::InvalidParameter, "potential range must be positive");
    const std::size_t expected = checked_power(alphabet_size, range);
    if (table.size() != expected)
        throw Error(ErrorKind::ShapeMismatch, "potential table needs " + std::to_string(expected) +
                                                  " entries, got " + std::to_string(table.size()));
    for (double v : table) {
        if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "potential values must be finite");
    }
    return FiniteRangePotential(alphabet_size, range, std::move(table));
}

FiniteRangePotential FiniteRangePotential::zero(std::size_t alphabet_size, std::size_t range) {
    return create(alphabet_size, range,
                  std::vector<double>(checked_power(alphabet_size, range), 0.0));
}

FiniteRangePotential FiniteRangePotential::from_function(
    std::size_t alphabet_size, std::size_t range,
    const std::function<double(std::span<const Symbol>)>& fn) {
    const std::size_t size = checked_power(alphabet_size, range);
    std::vector<double> table(size);
    for (std::size_t c = 0; c < size; ++c) table[c] = fn(decode_word(c, range, alphabet_size));
    return create(alphabet_size, range, std::move(table));
}

double FiniteRangePotential::max_value() const {
    return *std::max_element(table_.begin(), table_.end());
}

FiniteRangePotential FiniteRangePotential::affine(const FiniteRangePotential& base, double scale,
                                                  const FiniteRangePotential& direction) {
    if (base.alphabet_size_ != direction.alphabet_size_ || base.range_ != direction.range_)
        throw Error(ErrorKind::ShapeMismatch, "affine potential needs matching shapes");
    std::vector<double> table(base.table_.size());
    for (std::size_t c = 0; c < table.size(); ++c)
        table[c] = base.table_[c] + scale * direction.table_[c];
    return create(base.alphabet_size_, base.range_, std::move(table));
}

FiniteRangePotential equal_neighbour_potential(std::size_t alphabet_size, double beta) {
    return FiniteRangePotential::from_function(
        alphabet_size, 2, [beta](std::span<const Symbol> w) { return w[0] == w[1] ? beta : 0.0; });
}

double sup_norm(const FiniteRangePotential& phi) {
    double out = 0.0;
    for (double v : phi.table()) out = std::max(out, std::abs(v));
    return out;
}

// ---------------------------------------------------------------------------
// Transfer operator

namespace {

// State reached from (r-1)-word u by appending s. With r = 1 there is a
// single (empty) state.
inline std::size_t successor(std::size_t u, std::size_t s, std::size_t n, std::size_t states) {
    return states == 1 ? 0 : (u % (states / n)) * n + s;
}

// One application of M (right action) with weights exp(phi - shift).
void apply_right(const std::vector<double>& weights, std::size_t n, std::size_t states,
                 const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t u = 0; u < states; ++u) {
        double acc = 0.0;
        for (std::size_t s = 0; s < n; ++s) acc += weights[u * n + s] * v[successor(u, s, n, states)];
        out[u] = acc;
    }
}

void apply_left(const std::vector<double>& weights, std::size_t n, std::size_t states,
                const std::vector<double>& v, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t u = 0; u < states; ++u) {
        for (std::size_t s = 0; s < n; ++s) out[successor(u, s, n, states)] += v[u] * weights[u * n + s];
    }
}

// Power iteration normalized in sup-norm. Stops when the Collatz-Wielandt
// bounds min_i (Mv)_i / v_i <= rho <= max_i (Mv)_i / v_i agree to kPressureTol.
template <class Apply>
double perron_iterate(Apply apply, std::size_t states, std::vector<double>& v,
                      std::size_t& iterations) {
    v.assign(states, 1.0);
    std::vector<double> mv(states);
    for (iterations = 1; iterations <= kPowerIterationCap; ++iterations) {
        apply(v, mv);
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        double norm = 0.0;
        for (std::size_t i = 0; i < states; ++i) {
            const double ratio = mv[i] / v[i];
            lo = std::min(lo, ratio);
            hi = std::max(hi, ratio);
            norm = std::max(norm, mv[i]);
        }
        for (std::size_t i = 0; i < states; ++i) v[i] = mv[i] / norm;
        if (hi - lo <= kPressureTol * hi) return 0.5 * (lo + hi);
    }
    throw Error(ErrorKind::SolverStall, "transfer-matrix power iteration did not converge");
}

}  // namespace

PerronData transfer_perron(const FiniteRangePotential& phi) {
    const std::size_t n = phi.alphabet_size();
    const std::size_t r = phi.range();
    const std::size_t states = checked_power(n, r - 1, kMaxTransferStates);
    const double shift = phi.max_value();
    std::vector<double> weights(phi.table().size());
    for (std::size_t c = 0; c < weights.size(); ++c) weights[c] = std::exp(phi[c] - shift);

    PerronData out;
    std::size_t iters_right = 0;
    std::size_t iters_left = 0;
    const double rho_right = perron_iterate(
        [&](const std::vector<double>& v, std::vector<double>& o) {
            apply_right(weights, n, states, v, o);
        },
        states, out.right, iters_right);
    perron_iterate(
        [&](const std::vector<double>& v, std::vector<double>& o) {
            apply_left(weights, n, states, v, o);
        },
        states, out.left, iters_left);
    out.log_radius = std::log(rho_right) + shift;
    out.iterations = std::max(iters_right, iters_left);
    return out;
}

double pressure(const FiniteRangePotential& phi) { return transfer_perron(phi).log_radius; }

MarkovMeasure gibbs_markov_measure(const Alphabet& alphabet, const FiniteRangePotential& phi) {
    const std::size_t n = phi.alphabet_size();
    if (alphabet.size() != n)
        throw Error(ErrorKind::ShapeMismatch, "potential and alphabet sizes differ");
    const PerronData perron = transfer_perron(phi);
    const std::size_t order = phi.range() - 1;
    const std::size_t states = perron.right.size();

    std::vector<double> kernel(states * n);
    for (std::size_t u = 0; u < states; ++u) {
        double row_total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double p = std::exp(phi[u * n + s] - perron.log_radius) *
                             perron.right[successor(u, s, n, states)] / perron.right[u];
            kernel[u * n + s] = p;
            row_total += p;
        }
        for (std::size_t s = 0; s < n; ++s) kernel[u * n + s] /= row_total;
    }
    std::vector<double> pi(states);
    double total = 0.0;
    for (std::size_t u = 0; u < states; ++u) {
        pi[u] = perron.left[u] * perron.right[u];
        total += pi[u];
    }
    for (double& p : pi) p /= total;
    return MarkovMeasure::create(alphabet, order, std::move(kernel),
                                 BlockMeasure::create(n, order, std::move(pi)));
}

GibbsModel make_gibbs_model(const Alphabet& alphabet, FiniteRangePotential phi,
                            std::size_t certify_depth) {
    const double p = pressure(phi);
    MarkovMeasure markov = gibbs_markov_measure(alphabet, phi);
    GibbsModel model{std::move(phi), p, std::move(markov), 1.0, 0};
    if (certify_depth > 0) {
        model.gibbs_constant = verify_gibbs_property(model, certify_depth).n_hat;
        model.certified_depth = certify_depth;
    }
    return model;
}

// ---------------------------------------------------------------------------
// Gibbs property

namespace {

// log mu([w]) + P t - phi^t(x_w) accumulated position by position, with x_w
// the t-periodic extension of w.
double periodic_log_ratio(const GibbsModel& model, std::span<const Symbol> w,
                          const BlockMeasure* short_marginal) {
    const MarkovMeasure& mu = model.markov;
    const std::size_t n = mu.alphabet_size();
    const std::size_t k = mu.order();
    const std::size_t r = model.potential.range();
    const std::size_t t = w.size();

    double lr = 0.0;
    if (t < k) {
        lr = std::log((*short_marginal)[encode_word(w, n)]);
    } else {
        lr = std::log(mu.stationary()[encode_word(w.subspan(0, k), n)]);
    }
    const std::size_t contexts = mu.context_count();
    std::size_t context = encode_word(w.subspan(0, std::min(k, t)), n);
    for (std::size_t s = 0; s < t; ++s) {
        std::size_t code = 0;
        for (std::size_t j = 0; j < r; ++j) code = code * n + w[(s + j) % t];
        double term = model.pressure - model.potential[code];
        if (s >= k && t >= k) {
            term += std::log(mu.transition(context, w[s]));
            context = (context * n + w[s]) % contexts;
        }
        lr += term;
    }
    return lr;
}

}  // namespace

GibbsCertificate gibbs_ratio_extremes(const GibbsModel& model, std::size_t t) {
    if (t == 0) throw Error(ErrorKind::InvalidParameter, "word length must be positive");
    const std::size_t n = model.markov.alphabet_size();
    const std::size_t words = checked_power(n, t, kMaxGibbsEnumeration);
    const BlockMeasure short_marginal =
        t < model.markov.order() ? block_marginal(model.markov, t) : model.markov.stationary();

    GibbsCertificate out;
    double worst = -1.0;
    for (std::size_t c = 0; c < words; ++c) {
        const Word w = decode_word(c, t, n);
        const double lr = std::abs(periodic_log_ratio(model, w, &short_marginal));
        if (lr > worst) {
            worst = lr;
            out.worst_word = w;
        }
    }
    out.n_hat = std::exp(worst);
    return out;
}

GibbsCertificate verify_gibbs_property(const GibbsModel& model, std::size_t t_max) {
    if (t_max == 0) throw Error(ErrorKind::InvalidParameter, "t_max must be >= 1");
    checked_power(model.markov.alphabet_size(), t_max, kMaxGibbsEnumeration);
    GibbsCertificate best;
    best.n_hat = 0.0;
    for (std::size_t t = 1; t <= t_max; ++t) {
        GibbsCertificate at = gibbs_ratio_extremes(model, t);
        if (at.n_hat > best.n_hat) best = std::move(at);
    }
    return best;
}

namespace {

double log_sum_exp(std::span<const double> xs) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double x : xs) hi = std::max(hi, x);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (double x : xs) acc += std::exp(x - hi);
    return hi + std::log(acc);
}

struct TiltingTables {
    std::vector<double> log_mass;     // log mu([w])
    std::vector<double> log_density;  // log (|S|^t * integral_[w] exp(-P t + phi^t) d sigma)
};

TiltingTables tilting_tables(const GibbsModel& model, std::size_t t) {
    const std::size_t n = model.markov.alphabet_size();
    const std::size_t r = model.potential.range();
    const std::size_t words = checked_power(n, t, kMaxTransferStates);
    const std::size_t tails = checked_power(n, r - 1, kMaxTransferStates);
    checked_power(n, t + r - 1, kMaxGibbsEnumeration);
    const BlockMeasure marginal = block_marginal(model.markov, t);

    TiltingTables out;
    out.log_mass.resize(words);
    out.log_density.resize(words);
    std::vector<double> per_tail(tails);
    for (std::size_t c = 0; c < words; ++c) {
        out.log_mass[c] = std::log(marginal[c]);
        // phi^t depends on t + r - 1 coordinates; average the trailing r - 1
        // under the uniform product measure.
        for (std::size_t v = 0; v < tails; ++v) {
            const std::size_t full = c * tails + v;
            const Word x = decode_word(full, t + r - 1, n);
            double sum = -model.pressure * static_cast<double>(t);
            for (std::size_t s = 0; s < t; ++s)
                sum += model.potential[encode_word(std::span<const Symbol>(x).subspan(s, r), n)];
            per_tail[v] = sum;
        }
        out.log_density[c] = log_sum_exp(per_tail) - std::log(static_cast<double>(tails));
    }
    return out;
}

double event_log_ratio(const TiltingTables& tables, std::span<const std::size_t> event) {
    std::vector<double> mass;
    std::vector<double> density;
    mass.reserve(event.size());
    density.reserve(event.size());
    for (std::size_t c : event) {
        mass.push_back(tables.log_mass.at(c));
        density.push_back(tables.log_density.at(c));
    }
    return log_sum_exp(mass) - log_sum_exp(density);
}

}  // namespace

double tilting_ratio(const GibbsModel& model, std::size_t t, std::span<const std::size_t> event) {
    if (event.empty()) throw Error(ErrorKind::InvalidInput, "tilting event must be nonempty");
    return std::exp(event_log_ratio(tilting_tables(model, t), event));
}

double check_exponential_tilting(const GibbsModel& model, std::size_t t, std::size_t n_events,
                                 std::uint64_t seed) {
    if (t == 0) throw Error(ErrorKind::InvalidParameter, "t must be positive");
    const TiltingTables tables = tilting_tables(model, t);
    const double log_n = std::log(model.gibbs_constant);
    Rng rng = make_rng(seed);
    const std::size_t words = tables.log_mass.size();
    double violation = 0.0;
    std::vector<std::size_t> event;
    for (std::size_t e = 0; e < n_events; ++e) {
        event.clear();
        while (event.empty()) {
            for (std::size_t c = 0; c < words; ++c) {
                if (uniform01(rng) < 0.5) event.push_back(c);
            }
        }
        const double lr = event_log_ratio(tables, event);
        violation = std::max(violation, std::abs(lr) - log_n);
    }
    return violation;
}

FamilyConstants uniform_family_constants(const Alphabet& alphabet,
                                         std::span<const FiniteRangePotential> potentials,
                                         std::size_t t_max) {
    if (potentials.empty()) throw Error(ErrorKind::EmptyFamily, "potential family is empty");
    for (const auto& phi : potentials) {
        if (phi.range() != potentials[0].range() ||
            phi.alphabet_size() != potentials[0].alphabet_size())
            throw Error(ErrorKind::ShapeMismatch, "family members must share alphabet and range");
    }
    FamilyConstants out;
    out.n_uniform = 0.0;
    for (const auto& phi : potentials) {
        const GibbsModel model = make_gibbs_model(alphabet, phi, 0);
        out.pressures.push_back(model.pressure);
        out.n_uniform = std::max(out.n_uniform, verify_gibbs_property(model, t_max).n_hat);
    }
    for (std::size_t i = 1; i < out.pressures.size(); ++i)
        out.max_adjacent_jump =
            std::max(out.max_adjacent_jump, std::abs(out.pressures[i] - out.pressures[i - 1]));
    return out;
}

double expectation(const FiniteRangePotential& phi, const MarkovMeasure& eta) {
    if (phi.alphabet_size() != eta.alphabet_size())
        throw Error(ErrorKind::ShapeMismatch, "potential and measure alphabets differ");
    const BlockMeasure blocks = block_marginal(eta, phi.range());
    double out = 0.0;
    for (std::size_t c = 0; c < blocks.size(); ++c) out += blocks[c] * phi[c];
    return out;
}

}  // namespace varpost
