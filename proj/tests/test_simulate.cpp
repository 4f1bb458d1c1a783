#include "doctest.h"

#include <cmath>
#include <sstream>

#include "varpost/error.hpp"
#include "varpost/rng.hpp"
#include "varpost/simulate.hpp"

using namespace varpost;

namespace {

const Alphabet kBinary = Alphabet::numeric(2);

MarkovMeasure sticky(double stay) {
    return MarkovMeasure::from_kernel(kBinary, 1, {stay, 1 - stay, 1 - stay, stay});
}

double stay_frequency(const PathSample& path) {
    std::size_t stays = 0;
    for (std::size_t i = 1; i < path.size(); ++i) stays += path.symbols[i] == path.symbols[i - 1];
    return static_cast<double>(stays) / static_cast<double>(path.size() - 1);
}

}  // namespace

TEST_CASE("deterministic kernel from an explicit block") {
    // Order 2, always emits 1: the block chain collapses onto "11".
    auto model = MarkovMeasure::from_kernel(kBinary, 2, {0, 1, 0, 1, 0, 1, 0, 1});
    auto path = sample_markov_from(model, kBinary.parse_word("01"), 6, 9);
    CHECK(kBinary.format_word(path.symbols) == "011111");
    CHECK_THROWS_AS(sample_markov_from(model, kBinary.parse_word("0"), 6, 9), Error);
}

TEST_CASE("Markov sampler reproduces block marginals") {
    auto model = sticky(0.9);
    const std::size_t t = 100000;
    auto path = sample_markov(model, t, 17);
    auto empirical = empirical_block_measure(path, 2, false);
    auto exact = block_marginal(model, 2);
    for (std::size_t w = 0; w < 4; ++w) {
        const double p = exact[w];
        CHECK(std::abs(empirical[w] - p) < 3 * std::sqrt(p * (1 - p) / t));
    }
}

TEST_CASE("samplers are reproducible") {
    auto model = sticky(0.7);
    CHECK(sample_markov(model, 500, 3).symbols == sample_markov(model, 500, 3).symbols);
    CHECK(sample_markov(model, 500, 3).symbols != sample_markov(model, 500, 4).symbols);
    auto gibbs = make_gibbs_model(kBinary, equal_neighbour_potential(2, 0.8), 2);
    CHECK(sample_gibbs(gibbs, 500, 5).symbols == sample_gibbs(gibbs, 500, 5).symbols);
    ObservedSystemSpec spec{model, symmetric_channel(2, 0.1), kBinary};
    CHECK(generate_observation(spec, 500, 6).symbols == generate_observation(spec, 500, 6).symbols);
    LangevinSpec lspec{[](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; }, 1e-2, Eigen::VectorXd::Zero(2)};
    CHECK(sample_langevin(lspec, 100, 7) == sample_langevin(lspec, 100, 7));
    CHECK_THROWS_AS(sample_markov(MarkovMeasure::from_kernel(kBinary, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}), 1, 1), Error);
}

TEST_CASE("Gibbs sampler") {
    auto flat = make_gibbs_model(kBinary, FiniteRangePotential::zero(2, 1), 2);
    auto path = sample_gibbs(flat, 100000, 2);
    std::size_t ones = 0;
    for (auto s : path.symbols) ones += s;
    CHECK(std::abs(ones / 1e5 - 0.5) < 3 * std::sqrt(0.25 / 1e5));
    CHECK(std::abs(stay_frequency(path) - 0.5) < 3 * std::sqrt(0.25 / 1e5));

    auto model = make_gibbs_model(kBinary, equal_neighbour_potential(2, 0.8), 2);
    const double stay = model.markov.transition(0, 0);
    CHECK(std::abs(stay - std::exp(0.8) / (std::exp(0.8) + 1)) < 1e-12);
    auto gpath = sample_gibbs(model, 100000, 8);
    // Stay indicators of a symmetric chain are i.i.d. Bernoulli(stay).
    CHECK(std::abs(stay_frequency(gpath) - stay) < 3 * std::sqrt(stay * (1 - stay) / 1e5));
}

TEST_CASE("observation channel") {
    auto model = sticky(0.8);
    ObservedSystemSpec identity{model, std::vector<double>{1, 0, 0, 1}, kBinary};
    auto source = sample_markov(model, 1000, mix_seed(4, 0));
    CHECK(generate_observation(identity, 1000, 4).symbols == source.symbols);
    CHECK(generate_observation(ObservedSystemSpec{model, {}, {}}, 1000, 4).symbols == source.symbols);

    ObservedSystemSpec noisy{model, symmetric_channel(2, 0.1), kBinary};
    const std::size_t t = 100000;
    auto hidden = sample_markov(model, t, mix_seed(5, 0));
    auto observed = generate_observation(noisy, t, 5);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < t; ++i) flips += hidden.symbols[i] != observed.symbols[i];
    CHECK(std::abs(flips / 1e5 - 0.1) < 3 * std::sqrt(0.09 / 1e5));

    ObservedSystemSpec bad{model, std::vector<double>{0.5, 0.6, 0, 1}, kBinary};
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("Langevin with zero drift is scaled Brownian motion") {
    LangevinSpec spec{[](const Eigen::VectorXd& x) -> Eigen::VectorXd { return Eigen::VectorXd::Zero(x.size()); },
                      1e-2, Eigen::VectorXd::Zero(1)};
    const std::size_t replicas = 10000, steps = 100;
    const double horizon = steps * spec.dt;
    double sum = 0, sum_sq = 0;
    for (std::size_t i = 0; i < replicas; ++i) {
        const double v = sample_langevin(spec, steps, i)(steps, 0);
        sum += v * v;
        sum_sq += v * v * v * v;
    }
    const double mean = sum / replicas;
    const double se = std::sqrt((sum_sq / replicas - mean * mean) / replicas);
    CHECK(std::abs(mean - 2 * horizon) < 3 * se);
}

TEST_CASE("Langevin stationary variance for a quadratic potential") {
    LangevinSpec spec{[](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; }, 1e-3, Eigen::VectorXd::Zero(1)};
    const std::size_t burn_in = 10000, kept = 200000;
    auto path = sample_langevin(spec, burn_in + kept, 11);
    std::vector<double> series(path.col(0).data() + burn_in + 1, path.col(0).data() + burn_in + 1 + kept);
    auto est = batch_means_variance(series, 20);
    CHECK(std::abs(est.variance - 1.0) < 3 * est.std_error);
}

TEST_CASE("Langevin preconditions and divergence") {
    LangevinSpec spec{[](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x; }, 0.0, Eigen::VectorXd::Zero(1)};
    try {
        sample_langevin(spec, 10, 1);
        FAIL("expected InvalidParameter");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidParameter);
    }
    LangevinSpec unstable{[](const Eigen::VectorXd& x) -> Eigen::VectorXd { return -x.array().cube().matrix() * 1e3; },
                          1.0, Eigen::VectorXd::Constant(1, 1.0)};
    try {
        sample_langevin(unstable, 1000, 1);
        FAIL("expected Diverged");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Diverged);
    }
}

TEST_CASE("Birkhoff averages of a 2-block function") {
    auto model = MarkovMeasure::from_kernel(Alphabet::numeric(3), 1, {0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2});
    const std::vector<double> f{1.0, -0.5, 0.2, 0.0, 0.7, -1.0, 0.3, 0.9, -0.2};
    auto exact = block_marginal(model, 2);
    double mean = 0;
    for (std::size_t w = 0; w < 9; ++w) mean += f[w] * exact[w];
    const double t = 100000;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto path = sample_markov(model, 100000, seed);
        double avg = 0;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) avg += f[path.symbols[i] * 3 + path.symbols[i + 1]];
        avg /= (path.size() - 1);
        CHECK(std::abs(avg - mean) < 5 * 1.0 / std::sqrt(t));
    }
}

TEST_CASE("path writers") {
    auto path = make_path(Alphabet({"a", "b"}), {0, 1, 1});
    std::ostringstream text, csv, lcsv;
    write_path_text(text, path);
    write_path_csv(csv, path);
    CHECK(text.str() == "a\nb\nb\n");
    CHECK(csv.str() == "step,symbol\n0,a\n1,b\n2,b\n");
    Eigen::MatrixXd lp(2, 2);
    lp << 0, 1, 0.5, -0.25;
    write_langevin_csv(lcsv, lp);
    CHECK(lcsv.str() == "step,x_1,x_2\n0,0,1\n1,0.5,-0.25\n");
}
