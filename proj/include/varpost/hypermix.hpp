#pragma once

// Log-Sobolev constants and the hypermixing profile they induce.

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace varpost {

double cls_strongly_convex(double rho);

// (2 / rho) exp(16 ell r^2).
double cls_locally_nonconvex(double ell, double rho, double r);

struct HypermixingProfile {
    double cls = 0.0;
    double t0 = 0.0;      // cls * ln 3 / 2
    double ell0 = 0.0;    // 12 t0
    double alpha0 = 0.0;  // ln(3/2) / (8 t0)

    // Defined for ell >= ell0; switches to coth(alpha0 ell / 2) once
    // alpha0 ell > 20, where the quotient form overflows.
    double alpha(double ell) const;
};

HypermixingProfile hypermixing_profile(double cls);

struct RegularFamilyCheck {
    double sup_cls = 0.0;
    double ell0_uniform = 0.0;
    double alpha_bound = 0.0;
    bool regular = false;
};

// `cap`, when given, is the largest admissible C_LS; without it every finite
// grid is regular.
RegularFamilyCheck check_regular_family(std::span<const double> cls_values, std::optional<double> cap = {});

// Symmetric two-state Markov chain that flips at rate `rate`; its
// stationary law is uniform and its log-Sobolev constant is 1 / (2 rate).
struct TwoStateChain {
    double rate = 1.0;

    double cls() const { return 1.0 / (2.0 * rate); }
    // P_t(i, j) = 1/2 + (1{i=j} - 1/2) exp(-2 rate t).
    double transition(int i, int j, double t) const;
};

struct HolderCheck {
    double lhs = 0.0;  // E |f(X_0) g(X_ell)|
    double rhs = 0.0;  // ||f||_alpha ||g||_alpha under the stationary law
};

HolderCheck two_state_h1_check(const TwoStateChain& chain, double ell, double alpha,
                               const std::array<double, 2>& f, const std::array<double, 2>& g);

// Columns ell, alpha.
void write_profile_csv(std::ostream& os, const HypermixingProfile& profile, std::span<const double> ells);

}  // namespace varpost
