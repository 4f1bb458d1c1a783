#pragma once

// Finite-range losses, integrated losses, partition functions and the
// generalized posterior over a finite parameter grid.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "varpost/core.hpp"

namespace varpost {

// L(x, y) reading the first r symbols of x (alphabet S) and of y (alphabet A).
// The table is indexed by xcode * |A|^r + ycode.
class LossSpec {
public:
    using Modulus = std::function<double(double)>;

    static LossSpec create(std::size_t x_alphabet_size, std::size_t y_alphabet_size, std::size_t range,
                           std::vector<double> table, Modulus modulus = {});
    static LossSpec constant(std::size_t x_alphabet_size, std::size_t y_alphabet_size, std::size_t range,
                             double value);
    // 1{x_0 != y_0} on a shared alphabet.
    static LossSpec hamming(std::size_t alphabet_size);

    std::size_t range() const noexcept { return range_; }
    std::size_t x_alphabet_size() const noexcept { return nx_; }
    std::size_t y_alphabet_size() const noexcept { return ny_; }
    std::size_t x_words() const noexcept { return x_words_; }
    std::size_t y_words() const noexcept { return y_words_; }
    std::span<const double> table() const noexcept { return table_; }
    double operator()(std::size_t xcode, std::size_t ycode) const { return table_[xcode * y_words_ + ycode]; }
    double bound() const noexcept { return bound_; }
    const Modulus& modulus() const noexcept { return modulus_; }

    LossSpec shifted(double c) const;
    LossSpec with_modulus(Modulus modulus) const;

private:
    LossSpec() = default;

    std::size_t nx_ = 0, ny_ = 0, range_ = 0, x_words_ = 0, y_words_ = 0;
    std::vector<double> table_;
    double bound_ = 0.0;
    Modulus modulus_;
};

// Finite parameter set on the real line with d(a, b) = |a - b| and a fully
// supported prior.
class ThetaGrid {
public:
    static ThetaGrid create(std::vector<double> points, std::vector<double> prior);
    static ThetaGrid uniform(std::vector<double> points);
    // n equally spaced points from lo to hi inclusive.
    static ThetaGrid linspace(double lo, double hi, std::size_t n);

    std::size_t size() const noexcept { return points_.size(); }
    std::span<const double> points() const noexcept { return points_; }
    std::span<const double> prior() const noexcept { return prior_; }
    double operator[](std::size_t i) const { return points_[i]; }
    double distance(std::size_t i, std::size_t j) const;

private:
    ThetaGrid(std::vector<double> p, std::vector<double> w) : points_(std::move(p)), prior_(std::move(w)) {}
    std::vector<double> points_;
    std::vector<double> prior_;
};

struct PosteriorResult {
    std::size_t t = 0;
    std::vector<double> log_partition_per_theta;  // (1/t) log Z_t(theta)
    std::vector<double> weights;
    // log sum_theta pi_0(theta) exp(t * log_partition(theta)).
    double log_z_pi = 0.0;
};

double integrated_loss(const LossSpec& loss, const PathSample& x, const PathSample& y, std::size_t t);

inline constexpr std::size_t kMaxDpStates = 1'000'000;

// (1/t) log E_mu exp(-sum_{s<t} L(sigma^s X, sigma^s y)) by a forward
// recursion over windows of width max(k, r - 1), in log space.
double log_partition_dp(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y, std::size_t t);

// The same quantity at several horizons from a single forward pass.
std::vector<double> log_partition_dp_curve(const MarkovMeasure& model, const LossSpec& loss,
                                           const PathSample& y, std::span<const std::size_t> t_values);

struct LogPartitionEstimate {
    double estimate = 0.0;
    double std_error = 0.0;  // delta-method error of the returned (1/t) log value
};

LogPartitionEstimate log_partition_mc(const MarkovMeasure& model, const LossSpec& loss, const PathSample& y,
                                      std::size_t t, std::size_t n_samples, std::uint64_t seed);

// A loss family holds either one loss per grid point or a single loss shared
// by every point.
const LossSpec& loss_at(std::span<const LossSpec> loss_family, std::size_t i);

// Normalizes pi_0(theta) exp(t * ell(theta)) with a max shift; the final sum
// runs in grid order.
PosteriorResult posterior_from_log_partitions(const ThetaGrid& grid, std::vector<double> log_partitions,
                                              std::size_t t);

PosteriorResult posterior_over_grid(std::span<const MarkovMeasure> family, const ThetaGrid& grid,
                                    std::span<const LossSpec> loss_family, const PathSample& y, std::size_t t,
                                    std::size_t threads = 1);

struct ConsistencyPoint {
    std::size_t t = 0;
    double mass_outside = 0.0;
};

// Posterior mass outside the grid subset U (indices) at each horizon.
std::vector<ConsistencyPoint> consistency_curve(std::span<const MarkovMeasure> family, const ThetaGrid& grid,
                                                std::span<const LossSpec> loss_family, const PathSample& y,
                                                std::span<const std::size_t> t_values,
                                                std::span<const std::size_t> neighbourhood,
                                                std::size_t threads = 1);

// Indices whose value is within `tol` of the minimum.
std::vector<std::size_t> argmin_set(std::span<const double> values, double tol = 1e-9);

// Grid indices within `radius` of the set `centres`.
std::vector<std::size_t> grid_neighbourhood(const ThetaGrid& grid, std::span<const std::size_t> centres,
                                            double radius);

// Shift metric on r-windows: 2^-i with i the first differing position, 0 for equal windows.
double window_distance(std::size_t a, std::size_t b, std::size_t alphabet_size, std::size_t range);

// Largest |L_theta(x,y) - L_theta'(x',y)| - w(d(theta,theta')) - w(d(x,x')) over
// random probes, with w the modulus of the first loss of the family.
double check_loss_assumption(std::span<const LossSpec> loss_family, const ThetaGrid& grid, std::size_t n_probes,
                             std::uint64_t seed);

// Smallest C with |L_theta(x,y) - L_theta'(x',y)| <= C (d(theta,theta') + d(x,x'))
// over the whole grid and every window, by exhaustive search.
double certify_lipschitz_constant(std::span<const LossSpec> loss_family, const ThetaGrid& grid);

// Columns theta, log_partition, posterior_weight.
void write_posterior_csv(std::ostream& os, const ThetaGrid& grid, const PosteriorResult& result);

}  // namespace varpost
