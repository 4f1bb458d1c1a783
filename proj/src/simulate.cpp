#include "varpost/simulate.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "varpost/csv.hpp"
#include "varpost/error.hpp"
#include "varpost/rng.hpp"

namespace varpost {

namespace {

Symbol draw(std::span<const double> probabilities, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t s = 0; s < probabilities.size(); ++s) {
        acc += probabilities[s];
        if (u < acc) return static_cast<Symbol>(s);
    }
    // u landed in the rounding gap at the top; return the last charged symbol.
    for (std::size_t s = probabilities.size(); s-- > 0;) {
        if (probabilities[s] > 0.0) return static_cast<Symbol>(s);
    }
    return 0;
}

void extend_path(const MarkovMeasure& model, std::vector<Symbol>& symbols, std::size_t t, Rng& rng) {
    const std::size_t n = model.alphabet_size();
    const std::size_t k = model.order();
    const std::size_t contexts = model.context_count();
    std::size_t context = encode_word(std::span<const Symbol>(symbols).subspan(symbols.size() - k), n);
    while (symbols.size() < t) {
        const Symbol s = draw(model.row(context), rng);
        symbols.push_back(s);
        context = (context * n + s) % contexts;
    }
}

}  // namespace

void ObservedSystemSpec::validate() const {
    if (!channel) {
        if (observation_alphabet && !(*observation_alphabet == source.alphabet()))
            throw Error(ErrorKind::ShapeMismatch,
                        "without a channel the observation alphabet is the source alphabet");
        return;
    }
    if (!observation_alphabet)
        throw Error(ErrorKind::InvalidInput, "a channel needs an observation alphabet");
    const std::size_t hidden = source.alphabet_size();
    const std::size_t observed = observation_alphabet->size();
    if (channel->size() != hidden * observed)
        throw Error(ErrorKind::ShapeMismatch, "channel must have one row per hidden symbol");
    for (std::size_t h = 0; h < hidden; ++h) {
        double total = 0.0;
        for (std::size_t a = 0; a < observed; ++a) {
            const double p = (*channel)[h * observed + a];
            if (!(p >= 0.0)) throw Error(ErrorKind::InvalidInput, "channel entries must be >= 0");
            total += p;
        }
        if (std::abs(total - 1.0) > kSimplexTol)
            throw Error(ErrorKind::InvalidInput, "channel row " + std::to_string(h) + " must sum to 1");
    }
}

std::vector<double> symmetric_channel(std::size_t n, double flip) {
    if (n < 2 || flip < 0.0 || flip > 1.0)
        throw Error(ErrorKind::InvalidParameter, "symmetric channel needs n >= 2 and flip in [0,1]");
    std::vector<double> out(n * n, flip / static_cast<double>(n - 1));
    for (std::size_t i = 0; i < n; ++i) out[i * n + i] = 1.0 - flip;
    return out;
}

PathSample sample_markov(const MarkovMeasure& model, std::size_t t, std::uint64_t seed) {
    const std::size_t k = model.order();
    if (t < k || t == 0)
        throw Error(ErrorKind::InsufficientLength, "path length " + std::to_string(t) +
                                                       " is shorter than the model order");
    Rng rng = make_rng(seed);
    std::vector<Symbol> symbols;
    symbols.reserve(t);
    const Word initial = decode_word(draw(model.stationary().weights(), rng), k, model.alphabet_size());
    symbols.assign(initial.begin(), initial.end());
    extend_path(model, symbols, t, rng);
    return make_path(model.alphabet(), std::move(symbols), seed, "markov");
}

PathSample sample_markov_from(const MarkovMeasure& model, std::span<const Symbol> initial,
                              std::size_t t, std::uint64_t seed) {
    const std::size_t k = model.order();
    if (initial.size() != k)
        throw Error(ErrorKind::ShapeMismatch, "initial block must have the model order as length");
    if (t < k || t == 0)
        throw Error(ErrorKind::InsufficientLength, "path length is shorter than the model order");
    Rng rng = make_rng(seed);
    std::vector<Symbol> symbols(initial.begin(), initial.end());
    symbols.reserve(t);
    extend_path(model, symbols, t, rng);
    return make_path(model.alphabet(), std::move(symbols), seed, "markov");
}

PathSample sample_gibbs(const GibbsModel& model, std::size_t t, std::uint64_t seed) {
    PathSample out = sample_markov(model.markov, t, seed);
    out.origin = "gibbs";
    return out;
}

PathSample generate_observation(const ObservedSystemSpec& spec, std::size_t t, std::uint64_t seed) {
    spec.validate();
    if (t == 0) throw Error(ErrorKind::InsufficientLength, "observation length must be >= 1");
    PathSample hidden = sample_markov(spec.source, t, mix_seed(seed, 0));
    if (!spec.channel) {
        hidden.seed = seed;
        hidden.origin = "observation";
        return hidden;
    }
    const std::size_t observed = spec.observation_alphabet->size();
    const std::span<const double> channel(*spec.channel);
    Rng rng = make_rng(seed, 1);
    std::vector<Symbol> symbols(t);
    for (std::size_t i = 0; i < t; ++i)
        symbols[i] = draw(channel.subspan(hidden.symbols[i] * observed, observed), rng);
    return make_path(*spec.observation_alphabet, std::move(symbols), seed, "observation");
}

Eigen::MatrixXd sample_langevin(const LangevinSpec& spec, std::size_t t_steps, std::uint64_t seed) {
    if (!(spec.dt > 0.0)) throw Error(ErrorKind::InvalidParameter, "Langevin step dt must be > 0");
    if (t_steps == 0) throw Error(ErrorKind::InvalidParameter, "Langevin path needs t_steps >= 1");
    if (!spec.gradient) throw Error(ErrorKind::InvalidInput, "Langevin spec has no gradient");
    const Eigen::Index d = spec.x0.size();
    if (d == 0) throw Error(ErrorKind::InvalidInput, "Langevin initial point is empty");
    if (!spec.gradient(spec.x0).allFinite())
        throw Error(ErrorKind::InvalidParameter, "gradient is not finite at the initial point");

    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double noise_scale = std::sqrt(2.0 * spec.dt);
    Eigen::MatrixXd path(static_cast<Eigen::Index>(t_steps) + 1, d);
    Eigen::VectorXd x = spec.x0;
    Eigen::VectorXd xi(d);
    path.row(0) = x.transpose();
    for (std::size_t step = 1; step <= t_steps; ++step) {
        for (Eigen::Index i = 0; i < d; ++i) xi[i] = normal(rng);
        x = x - spec.gradient(x) * spec.dt + noise_scale * xi;
        if (!x.allFinite())
            throw Error(ErrorKind::Diverged, "non-finite Langevin state at step " + std::to_string(step));
        path.row(static_cast<Eigen::Index>(step)) = x.transpose();
    }
    return path;
}

VarianceEstimate batch_means_variance(std::span<const double> series, std::size_t n_batches) {
    if (n_batches < 2 || series.size() < 2 * n_batches)
        throw Error(ErrorKind::InsufficientSamples, "batch means need >= 2 batches of >= 2 points");
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(series.size());
    const std::size_t batch = series.size() / n_batches;
    std::vector<double> batch_values(n_batches);
    for (std::size_t b = 0; b < n_batches; ++b) {
        double acc = 0.0;
        for (std::size_t i = b * batch; i < (b + 1) * batch; ++i) {
            const double c = series[i] - mean;
            acc += c * c;
        }
        batch_values[b] = acc / static_cast<double>(batch);
    }
    double variance = 0.0;
    for (double v : batch_values) variance += v;
    variance /= static_cast<double>(n_batches);
    double spread = 0.0;
    for (double v : batch_values) spread += (v - variance) * (v - variance);
    spread /= static_cast<double>(n_batches - 1);
    return VarianceEstimate{variance, std::sqrt(spread / static_cast<double>(n_batches))};
}

void write_path_text(std::ostream& os, const PathSample& path) {
    for (Symbol s : path.symbols) os << path.alphabet.symbol(s) << '\n';
}

void write_path_csv(std::ostream& os, const PathSample& path) {
    os << "step,symbol\n";
    for (std::size_t i = 0; i < path.size(); ++i)
        os << i << ',' << path.alphabet.symbol(path.symbols[i]) << '\n';
}

void write_langevin_csv(std::ostream& os, const Eigen::MatrixXd& path) {
    os << "step";
    for (Eigen::Index j = 0; j < path.cols(); ++j) os << ",x_" << (j + 1);
    os << '\n';
    for (Eigen::Index i = 0; i < path.rows(); ++i) {
        os << i;
        for (Eigen::Index j = 0; j < path.cols(); ++j) os << ',' << format_number(path(i, j));
        os << '\n';
    }
}

}  // namespace varpost
