#include "doctest.h"

#include <cmath>
#include <random>

#include "varpost/error.hpp"
#include "varpost/hypermix.hpp"

using namespace varpost;

TEST_CASE("log-Sobolev constants") {
    CHECK(cls_strongly_convex(1.0) == 1.0);
    CHECK(cls_strongly_convex(2.0) == 0.5);
    CHECK_THROWS_AS(cls_strongly_convex(0.0), Error);
    CHECK(cls_locally_nonconvex(3.0, 4.0, 0.0) == 0.5);
    CHECK(std::abs(cls_locally_nonconvex(1.0, 1.0, 0.5) - 2.0 * 54.598150033144236) < 1e-9);
    CHECK(std::abs(cls_locally_nonconvex(1.0, 1.0, 0.5) - 109.1963) < 1e-4);
    CHECK_THROWS_AS(cls_locally_nonconvex(1.0, -1.0, 0.5), Error);
    CHECK_THROWS_AS(cls_locally_nonconvex(0.0, 1.0, 0.5), Error);
}

TEST_CASE("profile at unit constant") {
    auto p = hypermixing_profile(1.0);
    CHECK(std::abs(p.t0 - 0.549306) < 1e-6);
    CHECK(std::abs(p.ell0 - 6.591674) < 1e-6);
    CHECK(std::abs(p.alpha0 * p.ell0 - 0.608198) < 1e-6);
    // Direct evaluation of the quotient at a = alpha0 * ell0.
    const double a = std::log(1.5) / (8.0 * std::log(3.0) / 2.0) * 12.0 * std::log(3.0) / 2.0;
    const double direct = (1 + std::exp(a)) * (1 + std::exp(-a)) / (std::exp(a) - std::exp(-a));
    CHECK(std::abs(p.alpha(p.ell0) - direct) < 1e-14);
    CHECK(std::abs(p.alpha(p.ell0) - 3.389151) < 1e-6);
    CHECK(std::abs(p.alpha(100 * p.ell0) - 1.0) < 1e-6);
    CHECK_THROWS_AS(hypermixing_profile(0.0), Error);
    CHECK_THROWS_AS(p.alpha(0.5 * p.ell0), Error);
}

TEST_CASE("alpha equals coth of half its argument") {
    for (double cls : {0.1, 1.0, 7.0}) {
        auto p = hypermixing_profile(cls);
        for (int i = 0; i <= 200; ++i) {
            const double ell = p.ell0 * (1.0 + 99.0 * i / 200.0);
            CHECK(std::abs(p.alpha(ell) - 1.0 / std::tanh(0.5 * p.alpha0 * ell)) < 1e-12);
        }
    }
}

TEST_CASE("alpha is decreasing, at least one, and grows with the constant") {
    auto small = hypermixing_profile(0.5), large = hypermixing_profile(2.0);
    double prev = small.alpha(small.ell0);
    for (int i = 1; i < 500; ++i) {
        const double v = small.alpha(small.ell0 * (1.0 + 0.05 * i));
        CHECK(v < prev);
        CHECK(v >= 1.0);
        prev = v;
    }
    for (double ell = large.ell0; ell < 40 * large.ell0; ell *= 1.3) CHECK(large.alpha(ell) >= small.alpha(ell));
}

TEST_CASE("regular family") {
    const std::vector<double> constant(5, 1.0);
    auto c = check_regular_family(constant);
    CHECK(c.sup_cls == 1.0);
    CHECK(c.regular);
    std::vector<double> cls;
    for (int i = 0; i <= 15; ++i) cls.push_back(cls_strongly_convex(0.5 + 0.1 * i));
    auto r = check_regular_family(cls);
    CHECK(r.sup_cls == 2.0);
    auto p2 = hypermixing_profile(2.0);
    CHECK(std::abs(r.ell0_uniform - 24.0 * std::log(3.0) / 2.0 * 1.0) < 1e-12);
    CHECK(r.alpha_bound == p2.alpha(p2.ell0));
    CHECK_FALSE(check_regular_family(cls, 1.5).regular);
    CHECK_THROWS_AS(check_regular_family({}), Error);
}

TEST_CASE("two-state chain satisfies the separated Holder bound") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    for (double rate : {0.25, 1.0, 3.0}) {
        TwoStateChain chain{rate};
        auto p = hypermixing_profile(chain.cls());
        for (int i = 0; i < 100; ++i) {
            std::array<double, 2> f{u(rng), u(rng)}, g{u(rng), u(rng)};
            for (double ell : {p.ell0, 2 * p.ell0}) {
                auto h = two_state_h1_check(chain, ell, p.alpha(ell), f, g);
                CHECK(h.lhs <= h.rhs * (1 + 1e-12));
            }
        }
    }
}
