#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "varpost/core.hpp"
#include "varpost/gibbs.hpp"

namespace varpost {

// Observed ergodic system: a source law, optionally pushed through a
// memoryless channel (row h = distribution of the observed symbol given the
// hidden symbol h).
struct ObservedSystemSpec {
    MarkovMeasure source;
    std::optional<std::vector<double>> channel;
    std::optional<Alphabet> observation_alphabet;  // required with a channel

    static ObservedSystemSpec from_gibbs(const GibbsModel& model) { return {model.markov, {}, {}}; }

    const Alphabet& output_alphabet() const {
        return observation_alphabet ? *observation_alphabet : source.alphabet();
    }
    void validate() const;
};

// Symmetric channel on n symbols that keeps the input with probability
// 1 - flip and otherwise moves to one of the other symbols uniformly.
std::vector<double> symmetric_channel(std::size_t n, double flip);

PathSample sample_markov(const MarkovMeasure& model, std::size_t t, std::uint64_t seed);

// Starts from a given order-k block instead of a stationary draw.
PathSample sample_markov_from(const MarkovMeasure& model, std::span<const Symbol> initial,
                              std::size_t t, std::uint64_t seed);

PathSample sample_gibbs(const GibbsModel& model, std::size_t t, std::uint64_t seed);

PathSample generate_observation(const ObservedSystemSpec& spec, std::size_t t, std::uint64_t seed);

// Overdamped Langevin dynamics dX = -grad W(X) dt + sqrt(2) dB.
struct LangevinSpec {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    double dt = 1e-3;
    Eigen::VectorXd x0;
};

// Euler-Maruyama path with t_steps + 1 rows (row 0 is x0), one column per
// coordinate. Throws Diverged on the first non-finite state.
Eigen::MatrixXd sample_langevin(const LangevinSpec& spec, std::size_t t_steps, std::uint64_t seed);

struct VarianceEstimate {
    double variance = 0.0;
    double std_error = 0.0;
};

// Sample variance of a correlated stationary series with a batch-means
// standard error.
VarianceEstimate batch_means_variance(std::span<const double> series, std::size_t n_batches);

void write_path_text(std::ostream& os, const PathSample& path);
void write_path_csv(std::ostream& os, const PathSample& path);
void write_langevin_csv(std::ostream& os, const Eigen::MatrixXd& path);

}  // namespace varpost
