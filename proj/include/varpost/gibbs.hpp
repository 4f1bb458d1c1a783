#pragma once

// Thermodynamic formalism for finite-range potentials on the one-sided full
// shift. A potential of range r reads the first r coordinates; its transfer
// matrix acts on (r-1)-words, and its Gibbs measure is an exact Markov law of
// order r-1.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "varpost/core.hpp"

namespace varpost {

class FiniteRangePotential {
public:
    static FiniteRangePotential create(std::size_t alphabet_size, std::size_t range,
                                       std::vector<double> table);
    static FiniteRangePotential zero(std::size_t alphabet_size, std::size_t range);
    static FiniteRangePotential from_function(
        std::size_t alphabet_size, std::size_t range,
        const std::function<double(std::span<const Symbol>)>& fn);

    std::size_t alphabet_size() const noexcept { return alphabet_size_; }
    std::size_t range() const noexcept { return range_; }
    std::span<const double> table() const noexcept { return table_; }
    double operator[](std::size_t code) const { return table_[code]; }
    double max_value() const;

    // base + scale * direction, tables combined entrywise.
    static FiniteRangePotential affine(const FiniteRangePotential& base, double scale,
                                       const FiniteRangePotential& direction);

private:
    FiniteRangePotential(std::size_t n, std::size_t r, std::vector<double> t)
        : alphabet_size_(n), range_(r), table_(std::move(t)) {}

    std::size_t alphabet_size_ = 0;
    std::size_t range_ = 0;
    std::vector<double> table_;
};

// phi(x) = beta * 1{x_0 == x_1}, range 2.
FiniteRangePotential equal_neighbour_potential(std::size_t alphabet_size, double beta);

// Sup-norm of a potential table.
double sup_norm(const FiniteRangePotential& phi);

// Principal eigendata of the transfer matrix on (r-1)-words:
// M[u, v] = exp(phi(u s)) when v is u shifted left with s appended.
struct PerronData {
    double log_radius = 0.0;
    std::vector<double> right;  // M R = rho R, sup-normalized
    std::vector<double> left;   // L M = rho L, sup-normalized
    std::size_t iterations = 0;
};

inline constexpr std::size_t kMaxTransferStates = 1'000'000;
inline constexpr double kPressureTol = 1e-13;

PerronData transfer_perron(const FiniteRangePotential& phi);

double pressure(const FiniteRangePotential& phi);

// Order r-1 Markov law built from the Perron eigenvectors (order 0 for r = 1).
MarkovMeasure gibbs_markov_measure(const Alphabet& alphabet, const FiniteRangePotential& phi);

struct GibbsModel {
    FiniteRangePotential potential;
    double pressure = 0.0;
    MarkovMeasure markov;
    double gibbs_constant = 1.0;
    std::size_t certified_depth = 0;
};

// Builds (P, Markov law) and certifies N by enumeration up to `certify_depth`.
GibbsModel make_gibbs_model(const Alphabet& alphabet, FiniteRangePotential phi,
                            std::size_t certify_depth = 8);

inline constexpr std::size_t kMaxGibbsEnumeration = 10'000'000;

struct GibbsCertificate {
    double n_hat = 1.0;
    Word worst_word;
};

// Largest escape factor of mu([w]) / exp(-P t + phi^t(x_w)) over all words of
// length 1..t_max, with x_w the periodic extension of w.
GibbsCertificate verify_gibbs_property(const GibbsModel& model, std::size_t t_max);

// Same ratio restricted to the words of one length t.
GibbsCertificate gibbs_ratio_extremes(const GibbsModel& model, std::size_t t);

// mu(E) / (|S|^t * integral_E exp(-P t + phi^t) d sigma) for the event E given
// as a set of t-word codes; sigma is the uniform product measure.
double tilting_ratio(const GibbsModel& model, std::size_t t, std::span<const std::size_t> event);

// Largest amount (in log scale) by which the tilting ratio of a random
// cylinder-union event escapes [1/N, N]; 0 means every tested event complies.
double check_exponential_tilting(const GibbsModel& model, std::size_t t, std::size_t n_events,
                                 std::uint64_t seed);

struct FamilyConstants {
    double n_uniform = 1.0;
    std::vector<double> pressures;
    double max_adjacent_jump = 0.0;
};

FamilyConstants uniform_family_constants(const Alphabet& alphabet,
                                         std::span<const FiniteRangePotential> potentials,
                                         std::size_t t_max);

// Integral of phi against a stationary Markov law via its r-block marginal.
double expectation(const FiniteRangePotential& phi, const MarkovMeasure& eta);

}  // namespace varpost
