#include "doctest.h"

#include <cmath>
#include <random>

#include "varpost/entropy.hpp"
#include "varpost/error.hpp"
#include "varpost/gibbs.hpp"

using namespace varpost;

namespace {

const Alphabet kBinary = Alphabet::numeric(2);

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidInput;
}

// Largest eigenvalue of a symmetric 2x2 matrix [[a, b], [b, d]].
double top_eigenvalue(double a, double b, double d) {
    return 0.5 * (a + d) + std::sqrt(0.25 * (a - d) * (a - d) + b * b);
}

MarkovMeasure random_chain(std::size_t n, std::size_t k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.02, 1.0);
    const std::size_t rows = checked_power(n, k);
    std::vector<double> kernel(rows * n);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += kernel[r * n + j] = std::pow(u(rng), 3);
        for (std::size_t j = 0; j < n; ++j) kernel[r * n + j] /= s;
    }
    return MarkovMeasure::from_kernel(Alphabet::numeric(n), k, kernel);
}

}  // namespace

TEST_CASE("pressure of the zero potential is log of the alphabet size") {
    CHECK(pressure(FiniteRangePotential::zero(2, 1)) == std::log(2.0));
    CHECK(pressure(FiniteRangePotential::zero(2, 3)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(pressure(FiniteRangePotential::zero(5, 2)) == doctest::Approx(std::log(5.0)).epsilon(1e-15));
}

TEST_CASE("pressure of the equal-neighbour potential matches the 2x2 eigenvalue") {
    for (double beta : {-2.0, -0.5, 0.0, 0.8, 2.0, 7.5}) {
        const double expected = std::log(top_eigenvalue(std::exp(beta), 1.0, std::exp(beta)));
        CHECK(std::abs(pressure(equal_neighbour_potential(2, beta)) - expected) < 1e-10);
    }
}

TEST_CASE("pressure of a general range-2 potential matches the 2x2 characteristic polynomial") {
    // M = [[e^a, e^b], [e^c, e^d]]; rho solves rho^2 - tr rho + det = 0.
    const double a = 0.3, b = -1.1, c = 0.7, d = 1.4;
    auto phi = FiniteRangePotential::create(2, 2, {a, b, c, d});
    const double tr = std::exp(a) + std::exp(d);
    const double det = std::exp(a + d) - std::exp(b + c);
    const double rho = 0.5 * (tr + std::sqrt(tr * tr - 4 * det));
    CHECK(std::abs(pressure(phi) - std::log(rho)) < 1e-12);
}

TEST_CASE("pressure survives large potentials without overflow") {
    CHECK(std::abs(pressure(equal_neighbour_potential(2, 50.0)) - (50.0 + std::log1p(std::exp(-50.0)))) < 1e-10);
    CHECK(std::abs(pressure(equal_neighbour_potential(2, -50.0)) - std::log1p(std::exp(-50.0))) < 1e-10);
}

TEST_CASE("state-space guard") {
    CHECK(kind_of([] { pressure(FiniteRangePotential::zero(2, 22)); }) == ErrorKind::TooLarge);
}

TEST_CASE("Gibbs Markov measure examples") {
    auto uniform = gibbs_markov_measure(kBinary, FiniteRangePotential::zero(2, 1));
    CHECK(uniform.order() == 0);
    CHECK(uniform.transition(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    auto ising = gibbs_markov_measure(kBinary, equal_neighbour_potential(2, std::log(2.0)));
    CHECK(ising.order() == 1);
    CHECK(std::abs(ising.transition(0, 0) - 2.0 / 3.0) < 1e-12);
    CHECK(std::abs(ising.transition(1, 1) - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("a Gibbs measure has zero entropy rate against its own model") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t r = 1; r <= 3; ++r) {
        std::vector<double> table(checked_power(3, r));
        for (auto& v : table) v = g(rng);
        auto model = make_gibbs_model(Alphabet::numeric(3), FiniteRangePotential::create(3, r, table), 4);
        auto result = entropy_rate_gibbs(model.markov, model);
        CHECK(std::abs(result.value) < 1e-9);
    }
}

TEST_CASE("Gibbs certificate examples") {
    auto flat = make_gibbs_model(kBinary, FiniteRangePotential::zero(2, 2), 6);
    CHECK(verify_gibbs_property(flat, 10).n_hat == doctest::Approx(1.0).epsilon(1e-14));
    auto model = make_gibbs_model(kBinary, equal_neighbour_potential(2, 0.8), 4);
    const double n6 = verify_gibbs_property(model, 6).n_hat;
    const double n10 = verify_gibbs_property(model, 10).n_hat;
    CHECK(n10 <= 1.05 * n6);
    CHECK(n10 >= n6);
    CHECK(kind_of([&] { verify_gibbs_property(model, 25); }) == ErrorKind::TooLarge);
}

TEST_CASE("Gibbs ratio by direct enumeration agrees with the certificate") {
    // Independent oracle: mu([w]) = pi(w_0) prod kappa, denominator from the periodic orbit.
    auto model = make_gibbs_model(kBinary, equal_neighbour_potential(2, 0.8), 2);
    const double p = model.pressure;
    double worst = 0;
    for (std::size_t t = 1; t <= 8; ++t) {
        for (std::size_t code = 0; code < (1u << t); ++code) {
            const Word w = decode_word(code, t, 2);
            double mu = model.markov.stationary()[w[0]];
            for (std::size_t i = 1; i < t; ++i) mu *= model.markov.transition(w[i - 1], w[i]);
            double phi_sum = 0;
            for (std::size_t i = 0; i < t; ++i) phi_sum += (w[i] == w[(i + 1) % t]) ? 0.8 : 0.0;
            worst = std::max(worst, std::abs(std::log(mu) + p * t - phi_sum));
        }
    }
    CHECK(verify_gibbs_property(model, 8).n_hat == doctest::Approx(std::exp(worst)).epsilon(1e-12));
}

TEST_CASE("Gibbs certificate is nondecreasing in depth") {
    auto phi = FiniteRangePotential::create(3, 2, {0.1, -0.4, 0.9, 1.2, 0.0, -0.7, 0.3, 0.5, -1.0});
    auto model = make_gibbs_model(Alphabet::numeric(3), phi, 2);
    double prev = 1.0;
    for (std::size_t t = 1; t <= 8; ++t) {
        const double n = verify_gibbs_property(model, t).n_hat;
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("exponential tilting examples") {
    auto flat = make_gibbs_model(kBinary, FiniteRangePotential::zero(2, 2), 8);
    CHECK(check_exponential_tilting(flat, 8, 50, 1) == 0.0);
    auto model = make_gibbs_model(kBinary, equal_neighbour_potential(2, 0.8), 8);
    CHECK(check_exponential_tilting(model, 8, 50, 1) == 0.0);
    std::vector<std::size_t> all(256);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const double ratio = tilting_ratio(model, 8, all);
    CHECK(ratio <= model.gibbs_constant);
    CHECK(ratio >= 1.0 / model.gibbs_constant);
}

TEST_CASE("uniform family constants") {
    auto single = std::vector<FiniteRangePotential>{equal_neighbour_potential(2, 0.8)};
    auto model = make_gibbs_model(kBinary, single[0], 2);
    CHECK(uniform_family_constants(kBinary, single, 8).n_uniform ==
          doctest::Approx(verify_gibbs_property(model, 8).n_hat).epsilon(1e-14));
    std::vector<FiniteRangePotential> family;
    for (double th : {-1.0, 0.0, 1.0}) family.push_back(equal_neighbour_potential(2, th));
    auto constants = uniform_family_constants(kBinary, family, 6);
    CHECK(std::abs(constants.pressures[0] - std::log1p(std::exp(-1.0))) < 1e-10);
    CHECK(std::abs(constants.pressures[1] - std::log(2.0)) < 1e-10);
    CHECK(std::abs(constants.pressures[2] - std::log1p(std::exp(1.0))) < 1e-10);
    CHECK(kind_of([] { uniform_family_constants(kBinary, {}, 4); }) == ErrorKind::EmptyFamily);
}

TEST_CASE("pressure is convex along a line") {
    auto g = FiniteRangePotential::create(2, 3, {0.3, -1.0, 0.5, 0.0, 1.2, -0.2, 0.7, 0.1});
    auto zero = FiniteRangePotential::zero(2, 3);
    const double h = 0.1;
    for (double beta = -3.0; beta <= 3.0; beta += 0.25) {
        const double second = pressure(FiniteRangePotential::affine(zero, beta + h, g)) -
                              2 * pressure(FiniteRangePotential::affine(zero, beta, g)) +
                              pressure(FiniteRangePotential::affine(zero, beta - h, g));
        CHECK(second >= -1e-9);
    }
}

TEST_CASE("pressure derivative equals the Gibbs expectation") {
    auto g = FiniteRangePotential::create(2, 2, {1.0, -0.5, 0.25, 0.0});
    auto zero = FiniteRangePotential::zero(2, 2);
    const double step = 1e-4;
    for (double beta : {-1.5, 0.0, 0.7, 2.0}) {
        const double fd = (pressure(FiniteRangePotential::affine(zero, beta + step, g)) -
                           pressure(FiniteRangePotential::affine(zero, beta - step, g))) /
                          (2 * step);
        auto mu = gibbs_markov_measure(kBinary, FiniteRangePotential::affine(zero, beta, g));
        CHECK(std::abs(fd - expectation(g, mu)) < 1e-6);
    }
}

TEST_CASE("the Gibbs measure attains the variational principle") {
    std::mt19937_64 rng(5);
    auto phi = FiniteRangePotential::create(2, 3, {0.4, -0.3, 1.1, 0.0, -0.8, 0.6, 0.2, 0.9});
    auto model = make_gibbs_model(kBinary, phi, 2);
    CHECK(std::abs(ks_entropy(model.markov) + expectation(phi, model.markov) - model.pressure) < 1e-10);
    for (int i = 0; i < 200; ++i) {
        auto eta = random_chain(2, 2, rng);
        CHECK(ks_entropy(eta) + expectation(phi, eta) <= model.pressure + 1e-9);
    }
}
