#pragma once

// Finite-alphabet words, block measures and stationary Markov laws.
//
// Words of length m over an alphabet of size n are encoded as base-n integers
// with the first symbol most significant, so dropping the first symbol is
// `code % n^(m-1)` and dropping the last is `code / n`.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace varpost {

using Symbol = std::uint32_t;
using Word = std::vector<Symbol>;

inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kInvarianceTol = 1e-10;
inline constexpr double kPowerIterationTol = 1e-14;
inline constexpr std::size_t kPowerIterationCap = 1'000'000;
// Upper bound on any dense table indexed by words.
inline constexpr std::size_t kMaxTableEntries = 10'000'000;

class Alphabet {
public:
    explicit Alphabet(std::vector<std::string> symbols);

    // Symbols "0", "1", ..., "n-1".
    static Alphabet numeric(std::size_t n);

    std::size_t size() const noexcept { return symbols_.size(); }
    const std::vector<std::string>& symbols() const noexcept { return symbols_; }
    const std::string& symbol(Symbol s) const { return symbols_.at(s); }
    Symbol index_of(std::string_view name) const;

    // Words are written by concatenation when every symbol is one character,
    // and comma-separated otherwise.
    std::string format_word(std::span<const Symbol> word) const;
    Word parse_word(std::string_view text) const;

    bool operator==(const Alphabet& other) const noexcept { return symbols_ == other.symbols_; }

private:
    std::vector<std::string> symbols_;
    bool single_char_ = true;
};

// n^m, throwing TooLarge when the result exceeds `limit`.
std::size_t checked_power(std::size_t n, std::size_t m, std::size_t limit = kMaxTableEntries);

std::size_t encode_word(std::span<const Symbol> word, std::size_t alphabet_size);
Word decode_word(std::size_t code, std::size_t length, std::size_t alphabet_size);

// Probability weights on the n^m words of length m. Depth 0 is allowed and
// holds the single weight of the empty word; it is the stationary field of an
// order-0 (i.i.d.) law.
class BlockMeasure {
public:
    static BlockMeasure create(std::size_t alphabet_size, std::size_t depth,
                               std::vector<double> weights);
    static BlockMeasure uniform(std::size_t alphabet_size, std::size_t depth);

    std::size_t alphabet_size() const noexcept { return alphabet_size_; }
    std::size_t depth() const noexcept { return depth_; }
    std::size_t size() const noexcept { return weights_.size(); }
    std::span<const double> weights() const noexcept { return weights_; }
    double operator[](std::size_t code) const { return weights_[code]; }
    double weight(std::span<const Symbol> word) const;

    // (m-1)-block marginals obtained by summing out the first / last symbol.
    BlockMeasure drop_first() const;
    BlockMeasure drop_last() const;

private:
    BlockMeasure(std::size_t n, std::size_t m, std::vector<double> w)
        : alphabet_size_(n), depth_(m), weights_(std::move(w)) {}

    std::size_t alphabet_size_ = 0;
    std::size_t depth_ = 0;
    std::vector<double> weights_;
};

// Stationary order-k Markov law. The kernel is stored row-major: row `c` is
// the next-symbol distribution after the k-word with code `c`.
class MarkovMeasure {
public:
    // Computes the stationary k-block distribution by power iteration.
    static MarkovMeasure from_kernel(Alphabet alphabet, std::size_t order,
                                     std::vector<double> kernel);
    // Uses the supplied stationary field after checking its invariance.
    static MarkovMeasure create(Alphabet alphabet, std::size_t order, std::vector<double> kernel,
                                BlockMeasure stationary);
    static MarkovMeasure iid(Alphabet alphabet, std::vector<double> probabilities);

    const Alphabet& alphabet() const noexcept { return alphabet_; }
    std::size_t alphabet_size() const noexcept { return alphabet_.size(); }
    std::size_t order() const noexcept { return order_; }
    std::size_t context_count() const noexcept { return kernel_.size() / alphabet_.size(); }
    std::span<const double> kernel() const noexcept { return kernel_; }
    std::span<const double> row(std::size_t context) const {
        return std::span<const double>(kernel_).subspan(context * alphabet_.size(),
                                                        alphabet_.size());
    }
    double transition(std::size_t context, Symbol next) const {
        return kernel_[context * alphabet_.size() + next];
    }
    const BlockMeasure& stationary() const noexcept { return stationary_; }

    // The same law presented with a longer context (order >= this->order()).
    MarkovMeasure lifted(std::size_t order) const;

private:
    MarkovMeasure(Alphabet a, std::size_t k, std::vector<double> kernel, BlockMeasure st)
        : alphabet_(std::move(a)), order_(k), kernel_(std::move(kernel)), stationary_(std::move(st)) {}

    Alphabet alphabet_;
    std::size_t order_ = 0;
    std::vector<double> kernel_;
    BlockMeasure stationary_;
};

// Validates kernel rows and returns the unique stationary distribution of the
// induced k-block chain. Throws NonErgodic unless the chain has exactly one
// closed communicating class and that class is aperiodic.
BlockMeasure stationary_distribution(std::size_t alphabet_size, std::size_t order,
                                     std::span<const double> kernel);

// Exact m-block marginal of a stationary Markov law.
BlockMeasure block_marginal(const MarkovMeasure& model, std::size_t m);

struct PathSample {
    Alphabet alphabet;
    std::vector<Symbol> symbols;
    std::uint64_t seed = 0;
    std::string origin;

    std::size_t size() const noexcept { return symbols.size(); }
};

// Validates symbols against the alphabet and length >= 1.
PathSample make_path(Alphabet alphabet, std::vector<Symbol> symbols, std::uint64_t seed = 0,
                     std::string origin = {});

// Overlapping m-block frequencies. The periodic variant reads the t blocks of
// the t-periodic extension of the path.
BlockMeasure empirical_block_measure(const PathSample& path, std::size_t m, bool periodic);

// Half the L1 distance between two block measures of the same shape.
double total_variation(const BlockMeasure& p, const BlockMeasure& q);

}  // namespace varpost
