#include "varpost/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Dense>

#include "varpost/error.hpp"

namespace varpost {

Alphabet::Alphabet(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.empty()) throw Error(ErrorKind::InvalidInput, "alphabet must be nonempty");
    std::set<std::string> seen;
    for (const auto& s : symbols_) {
        if (s.empty()) throw Error(ErrorKind::InvalidInput, "alphabet symbols must be nonempty");
        if (!seen.insert(s).second)
            throw Error(ErrorKind::InvalidInput, "duplicate alphabet symbol '" + s + "'");
        if (s.size() != 1) single_char_ = false;
    }
    if (!single_char_) {
        for (const auto& s : symbols_) {
            if (s.find(',') != std::string::npos)
                throw Error(ErrorKind::InvalidInput, "multi-character symbols may not contain ','");
        }
    }
}

Alphabet Alphabet::numeric(std::size_t n) {
    std::vector<std::string> symbols;
    symbols.reserve(n);
    for (std::size_t i = 0; i < n; ++i) symbols.push_back(std::to_string(i));
    return Alphabet(std::move(symbols));
}

Symbol Alphabet::index_of(std::string_view name) const {
    auto it = std::find(symbols_.begin(), symbols_.end(), name);
    if (it == symbols_.end())
        throw Error(ErrorKind::InvalidInput, "unknown symbol '" + std::string(name) + "'");
    return static_cast<Symbol>(it - symbols_.begin());
}

std::string Alphabet::format_word(std::span<const Symbol> word) const {
    std::string out;
    for (std::size_t i = 0; i < word.size(); ++i) {
        if (!single_char_ && i > 0) out += ',';
        out += symbol(word[i]);
    }
    return out;
}

Word Alphabet::parse_word(std::string_view text) const {
    Word word;
    if (text.empty()) return word;
    if (single_char_) {
        for (char c : text) word.push_back(index_of(std::string_view(&c, 1)));
        return word;
    }
    std::size_t start = 0;
    while (true) {
        auto comma = text.find(',', start);
        word.push_back(index_of(text.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return word;
}

std::size_t checked_power(std::size_t n, std::size_t m, std::size_t limit) {
    std::size_t out = 1;
    for (std::size_t i = 0; i < m; ++i) {
        if (n != 0 && out > limit / n)
            throw Error(ErrorKind::TooLarge, std::to_string(n) + "^" + std::to_string(m) +
                                                 " exceeds table limit " + std::to_string(limit));
        out *= n;
    }
    if (out > limit)
        throw Error(ErrorKind::TooLarge, std::to_string(n) + "^" + std::to_string(m) +
                                             " exceeds table limit " + std::to_string(limit));
    return out;
}

std::size_t encode_word(std::span<const Symbol> word, std::size_t alphabet_size) {
    std::size_t code = 0;
    for (Symbol s : word) code = code * alphabet_size + s;
    return code;
}

Word decode_word(std::size_t code, std::size_t length, std::size_t alphabet_size) {
    Word word(length);
    for (std::size_t i = length; i-- > 0;) {
        word[i] = static_cast<Symbol>(code % alphabet_size);
        code /= alphabet_size;
    }
    return word;
}

// ---------------------------------------------------------------------------
// BlockMeasure

BlockMeasure BlockMeasure::create(std::size_t alphabet_size, std::size_t depth,
                                  std::vector<double> weights) {
    if (alphabet_size == 0) throw Error(ErrorKind::InvalidInput, "alphabet size must be positive");
    const std::size_t expected = checked_power(alphabet_size, depth);
    if (weights.size() != expected)
        throw Error(ErrorKind::ShapeMismatch, "block measure of depth " + std::to_string(depth) +
                                                  " needs " + std::to_string(expected) +
                                                  " weights, got " + std::to_string(weights.size()));
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw Error(ErrorKind::InvalidInput, "block weights must be finite and nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > kSimplexTol)
        throw Error(ErrorKind::InvalidInput,
                    "block weights sum to " + std::to_string(total) + ", expected 1");
    return BlockMeasure(alphabet_size, depth, std::move(weights));
}

BlockMeasure BlockMeasure::uniform(std::size_t alphabet_size, std::size_t depth) {
    const std::size_t size = checked_power(alphabet_size, depth);
    return BlockMeasure(alphabet_size, depth,
                        std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

double BlockMeasure::weight(std::span<const Symbol> word) const {
    if (word.size() != depth_) throw Error(ErrorKind::ShapeMismatch, "word length differs from depth");
    return weights_[encode_word(word, alphabet_size_)];
}

BlockMeasure BlockMeasure::drop_first() const {
    if (depth_ == 0) throw Error(ErrorKind::DepthTooSmall, "cannot marginalize a depth-0 measure");
    const std::size_t tail = weights_.size() / alphabet_size_;
    std::vector<double> out(tail, 0.0);
    for (std::size_t c = 0; c < weights_.size(); ++c) out[c % tail] += weights_[c];
    return BlockMeasure(alphabet_size_, depth_ - 1, std::move(out));
}

BlockMeasure BlockMeasure::drop_last() const {
    if (depth_ == 0) throw Error(ErrorKind::DepthTooSmall, "cannot marginalize a depth-0 measure");
    std::vector<double> out(weights_.size() / alphabet_size_, 0.0);
    for (std::size_t c = 0; c < weights_.size(); ++c) out[c / alphabet_size_] += weights_[c];
    return BlockMeasure(alphabet_size_, depth_ - 1, std::move(out));
}

double total_variation(const BlockMeasure& p, const BlockMeasure& q) {
    if (p.depth() != q.depth() || p.alphabet_size() != q.alphabet_size())
        throw Error(ErrorKind::ShapeMismatch, "total variation needs equal shapes");
    double sum = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c) sum += std::abs(p[c] - q[c]);
    return 0.5 * sum;
}

// ---------------------------------------------------------------------------
// Stationary distribution

namespace {

constexpr std::size_t kMaxDirectSolveStates = 2048;

void validate_kernel(std::size_t n, std::size_t order, std::span<const double> kernel) {
    const std::size_t contexts = checked_power(n, order);
    if (kernel.size() != contexts * n)
        throw Error(ErrorKind::ShapeMismatch, "kernel of order " + std::to_string(order) +
                                                  " needs " + std::to_string(contexts * n) +
                                                  " entries, got " + std::to_string(kernel.size()));
    for (std::size_t c = 0; c < contexts; ++c) {
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            const double p = kernel[c * n + s];
            if (!(p >= 0.0) || !std::isfinite(p))
                throw Error(ErrorKind::InvalidInput, "kernel entries must be finite and nonnegative");
            total += p;
        }
        if (std::abs(total - 1.0) > kSimplexTol)
            throw Error(ErrorKind::InvalidInput,
                        "kernel row " + std::to_string(c) + " sums to " + std::to_string(total));
    }
}

// Strongly connected components of the k-block transition graph (iterative
// Tarjan). Returns the component id of every state.
std::vector<std::size_t> block_chain_components(std::size_t n, std::size_t states,
                                                std::span<const double> kernel,
                                                std::size_t& component_count) {
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(states, kUnset), low(states, 0), comp(states, kUnset);
    std::vector<bool> on_stack(states, false);
    std::vector<std::size_t> stack;
    std::size_t counter = 0;
    component_count = 0;
    const std::size_t tail = states / n;

    struct Frame {
        std::size_t node;
        std::size_t next_symbol;
    };
    std::vector<Frame> frames;

    for (std::size_t root = 0; root < states; ++root) {
        if (index[root] != kUnset) continue;
        frames.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!frames.empty()) {
            Frame& f = frames.back();
            const std::size_t u = f.node;
            if (f.next_symbol < n) {
                const std::size_t s = f.next_symbol++;
                if (kernel[u * n + s] <= 0.0) continue;
                const std::size_t v = (u % tail) * n + s;
                if (index[v] == kUnset) {
                    index[v] = low[v] = counter++;
                    stack.push_back(v);
                    on_stack[v] = true;
                    frames.push_back({v, 0});
                } else if (on_stack[v]) {
                    low[u] = std::min(low[u], index[v]);
                }
                continue;
            }
            if (low[u] == index[u]) {
                while (true) {
                    const std::size_t w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = component_count;
                    if (w == u) break;
                }
                ++component_count;
            }
            frames.pop_back();
            if (!frames.empty()) {
                const std::size_t parent = frames.back().node;
                low[parent] = std::min(low[parent], low[u]);
            }
        }
    }
    return comp;
}

// Direct solve of pi (P - I) = 0 with one balance equation replaced by the
// normalization; slowly mixing chains then need only a few power steps.
std::vector<double> stationary_warm_start(std::size_t n, std::size_t states,
                                          std::span<const double> kernel) {
    std::vector<double> uniform(states, 1.0 / static_cast<double>(states));
    if (states > kMaxDirectSolveStates) return uniform;
    const std::size_t tail = states / n;
    const auto size = static_cast<Eigen::Index>(states);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
    for (std::size_t u = 0; u < states; ++u) {
        a(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u)) -= 1.0;
        for (std::size_t s = 0; s < n; ++s)
            a(static_cast<Eigen::Index>((u % tail) * n + s), static_cast<Eigen::Index>(u)) +=
                kernel[u * n + s];
    }
    a.row(0).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(size);
    b[0] = 1.0;
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    if (!x.allFinite()) return uniform;
    std::vector<double> pi(states);
    double total = 0.0;
    for (std::size_t u = 0; u < states; ++u) total += pi[u] = std::max(0.0, x[static_cast<Eigen::Index>(u)]);
    if (!(total > 0.0)) return uniform;
    for (double& v : pi) v /= total;
    return pi;
}

}  // namespace

BlockMeasure stationary_distribution(std::size_t n, std::size_t order,
                                     std::span<const double> kernel) {
    validate_kernel(n, order, kernel);
    if (order == 0) return BlockMeasure::create(n, 0, {1.0});

    const std::size_t states = checked_power(n, order);
    const std::size_t tail = states / n;

    std::size_t component_count = 0;
    const auto comp = block_chain_components(n, states, kernel, component_count);
    std::vector<bool> closed(component_count, true);
    for (std::size_t u = 0; u < states; ++u) {
        for (std::size_t s = 0; s < n; ++s) {
            if (kernel[u * n + s] <= 0.0) continue;
            const std::size_t v = (u % tail) * n + s;
            if (comp[v] != comp[u]) closed[comp[u]] = false;
        }
    }
    const auto closed_count =
        static_cast<std::size_t>(std::count(closed.begin(), closed.end(), true));
    if (closed_count != 1)
        throw Error(ErrorKind::NonErgodic,
                    "block chain is reducible: " + std::to_string(closed_count) +
                        " closed communicating classes among " + std::to_string(component_count) +
                        " components");
    const auto recurrent = static_cast<std::size_t>(
        std::find(closed.begin(), closed.end(), true) - closed.begin());

    // Period of the closed class: gcd of level differences along its edges.
    constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> level(states, kUnset);
    std::size_t start = 0;
    while (comp[start] != recurrent) ++start;
    std::vector<std::size_t> queue{start};
    level[start] = 0;
    std::size_t period = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t u = queue[head];
        for (std::size_t s = 0; s < n; ++s) {
            if (kernel[u * n + s] <= 0.0) continue;
            const std::size_t v = (u % tail) * n + s;
            if (level[v] == kUnset) {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                const auto diff =
                    static_cast<long long>(level[u] + 1) - static_cast<long long>(level[v]);
                period = std::gcd(period, static_cast<std::size_t>(diff < 0 ? -diff : diff));
            }
        }
    }
    if (period != 1)
        throw Error(ErrorKind::NonErgodic, "closed class of " + std::to_string(queue.size()) +
                                               " block states is periodic with period " +
                                               std::to_string(period));

    std::vector<double> pi = stationary_warm_start(n, states, kernel);
    std::vector<double> next(states);
    bool converged = false;
    for (std::size_t it = 0; it < kPowerIterationCap; ++it) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t u = 0; u < states; ++u) {
            if (pi[u] == 0.0) continue;
            const std::size_t base = (u % tail) * n;
            for (std::size_t s = 0; s < n; ++s) next[base + s] += pi[u] * kernel[u * n + s];
        }
        double total = 0.0;
        for (double v : next) total += v;
        double diff = 0.0;
        for (std::size_t u = 0; u < states; ++u) {
            next[u] /= total;
            diff += std::abs(next[u] - pi[u]);
        }
        pi.swap(next);
        if (diff < kPowerIterationTol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorKind::SolverStall, "stationary power iteration hit the iteration cap");
    return BlockMeasure::create(n, order, std::move(pi));
}

// ---------------------------------------------------------------------------
// MarkovMeasure

namespace {

void check_invariance(std::size_t n, std::size_t order, std::span<const double> kernel,
                      const BlockMeasure& stationary) {
    if (stationary.alphabet_size() != n || stationary.depth() != order)
        throw Error(ErrorKind::ShapeMismatch, "stationary field must have depth equal to the order");
    if (order == 0) return;
    const std::size_t states = stationary.size();
    const std::size_t tail = states / n;
    std::vector<double> image(states, 0.0);
    for (std::size_t u = 0; u < states; ++u) {
        const std::size_t base = (u % tail) * n;
        for (std::size_t s = 0; s < n; ++s) image[base + s] += stationary[u] * kernel[u * n + s];
    }
    for (std::size_t u = 0; u < states; ++u) {
        if (std::abs(image[u] - stationary[u]) > kInvarianceTol)
            throw Error(ErrorKind::InvalidInput,
                        "stationary field is not invariant under the kernel at block " +
                            std::to_string(u));
    }
}

}  // namespace

MarkovMeasure MarkovMeasure::from_kernel(Alphabet alphabet, std::size_t order,
                                         std::vector<double> kernel) {
    auto stationary = stationary_distribution(alphabet.size(), order, kernel);
    return MarkovMeasure(std::move(alphabet), order, std::move(kernel), std::move(stationary));
}

MarkovMeasure MarkovMeasure::create(Alphabet alphabet, std::size_t order,
                                    std::vector<double> kernel, BlockMeasure stationary) {
    validate_kernel(alphabet.size(), order, kernel);
    check_invariance(alphabet.size(), order, kernel, stationary);
    return MarkovMeasure(std::move(alphabet), order, std::move(kernel), std::move(stationary));
}

MarkovMeasure MarkovMeasure::iid(Alphabet alphabet, std::vector<double> probabilities) {
    return from_kernel(std::move(alphabet), 0, std::move(probabilities));
}

MarkovMeasure MarkovMeasure::lifted(std::size_t order) const {
    if (order < order_)
        throw Error(ErrorKind::InvalidParameter, "cannot lower the order of a Markov measure");
    if (order == order_) return *this;
    const std::size_t n = alphabet_.size();
    const std::size_t contexts = checked_power(n, order);
    const std::size_t own = context_count();
    std::vector<double> kernel(contexts * n);
    for (std::size_t c = 0; c < contexts; ++c) {
        const auto src = row(c % own);
        std::copy(src.begin(), src.end(), kernel.begin() + static_cast<std::ptrdiff_t>(c * n));
    }
    return MarkovMeasure(alphabet_, order, std::move(kernel), block_marginal(*this, order));
}

BlockMeasure block_marginal(const MarkovMeasure& model, std::size_t m) {
    const std::size_t n = model.alphabet_size();
    const std::size_t k = model.order();
    if (m == k) return model.stationary();
    checked_power(n, m);
    if (m < k) {
        BlockMeasure out = model.stationary();
        while (out.depth() > m) out = out.drop_last();
        return out;
    }
    // Extend the stationary k-blocks one symbol at a time.
    const std::size_t contexts = model.context_count();
    std::vector<double> current(model.stationary().weights().begin(),
                                model.stationary().weights().end());
    for (std::size_t depth = k; depth < m; ++depth) {
        std::vector<double> next(current.size() * n);
        for (std::size_t c = 0; c < current.size(); ++c) {
            const auto r = model.row(c % contexts);
            for (std::size_t s = 0; s < n; ++s) next[c * n + s] = current[c] * r[s];
        }
        current.swap(next);
    }
    double total = 0.0;
    for (double w : current) total += w;
    for (double& w : current) w /= total;
    return BlockMeasure::create(n, m, std::move(current));
}

// ---------------------------------------------------------------------------
// Paths

PathSample make_path(Alphabet alphabet, std::vector<Symbol> symbols, std::uint64_t seed,
                     std::string origin) {
    if (symbols.empty()) throw Error(ErrorKind::InsufficientLength, "path must have length >= 1");
    for (Symbol s : symbols) {
        if (s >= alphabet.size())
            throw Error(ErrorKind::InvalidInput, "path symbol " + std::to_string(s) +
                                                     " outside alphabet of size " +
                                                     std::to_string(alphabet.size()));
    }
    return PathSample{std::move(alphabet), std::move(symbols), seed, std::move(origin)};
}

BlockMeasure empirical_block_measure(const PathSample& path, std::size_t m, bool periodic) {
    if (m == 0) throw Error(ErrorKind::InvalidParameter, "block depth must be positive");
    const std::size_t n = path.alphabet.size();
    const std::size_t t = path.size();
    if (t == 0 || (!periodic && t < m))
        throw Error(ErrorKind::InsufficientLength, "path of length " + std::to_string(t) +
                                                       " has no " + std::to_string(m) + "-blocks");
    const std::size_t size = checked_power(n, m);
    const std::size_t blocks = periodic ? t : t - m + 1;
    std::vector<double> counts(size, 0.0);
    // Rolling code: drop the first symbol, append the next one.
    std::size_t code = 0;
    for (std::size_t i = 0; i < m; ++i) code = code * n + path.symbols[i % t];
    const std::size_t tail = size / n;
    for (std::size_t start = 0; start < blocks; ++start) {
        counts[code] += 1.0;
        if (start + 1 < blocks) code = (code % tail) * n + path.symbols[(start + m) % t];
    }
    for (double& c : counts) c /= static_cast<double>(blocks);
    return BlockMeasure::create(n, m, std::move(counts));
}

}  // namespace varpost
