#include "varpost/hypermix.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "varpost/csv.hpp"
#include "varpost/error.hpp"

namespace varpost {

namespace {

constexpr double kQuotientLimit = 20.0;

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorKind::InvalidParameter, std::string(name) + " must be a positive finite number");
}

}  // namespace

double cls_strongly_convex(double rho) {
    require_positive(rho, "rho");
    return 1.0 / rho;
}

double cls_locally_nonconvex(double ell, double rho, double r) {
    require_positive(ell, "ell");
    require_positive(rho, "rho");
    if (!(r >= 0.0) || !std::isfinite(r)) throw Error(ErrorKind::InvalidParameter, "r must be >= 0");
    return 2.0 / rho * std::exp(16.0 * ell * r * r);
}

double HypermixingProfile::alpha(double ell) const {
    if (!(ell >= ell0)) throw Error(ErrorKind::InvalidParameter, "alpha is defined for ell >= ell0 only");
    const double a = alpha0 * ell;
    if (a > kQuotientLimit) return 1.0 / std::tanh(0.5 * a);
    const double e = std::exp(a), ei = std::exp(-a);
    return (1.0 + e) * (1.0 + ei) / (e - ei);
}

HypermixingProfile hypermixing_profile(double cls) {
    require_positive(cls, "C_LS");
    HypermixingProfile p;
    p.cls = cls;
    p.t0 = cls * std::log(3.0) / 2.0;
    p.ell0 = 12.0 * p.t0;
    p.alpha0 = std::log(1.5) / (8.0 * p.t0);
    return p;
}

RegularFamilyCheck check_regular_family(std::span<const double> cls_values, std::optional<double> cap) {
    if (cls_values.empty()) throw Error(ErrorKind::EmptyFamily, "no log-Sobolev constants supplied");
    for (double c : cls_values) require_positive(c, "C_LS");
    RegularFamilyCheck out;
    out.sup_cls = *std::max_element(cls_values.begin(), cls_values.end());
    const HypermixingProfile profile = hypermixing_profile(out.sup_cls);
    out.ell0_uniform = profile.ell0;
    out.alpha_bound = profile.alpha(profile.ell0);
    out.regular = std::isfinite(out.sup_cls) && (!cap || out.sup_cls <= *cap);
    return out;
}

double TwoStateChain::transition(int i, int j, double t) const {
    return 0.5 + ((i == j) ? 0.5 : -0.5) * std::exp(-2.0 * rate * t);
}

HolderCheck two_state_h1_check(const TwoStateChain& chain, double ell, double alpha, const std::array<double, 2>& f,
                               const std::array<double, 2>& g) {
    HolderCheck out;
    double nf = 0.0, ng = 0.0;
    for (int i = 0; i < 2; ++i) {
        nf += 0.5 * std::pow(std::abs(f[i]), alpha);
        ng += 0.5 * std::pow(std::abs(g[i]), alpha);
        for (int j = 0; j < 2; ++j) out.lhs += 0.5 * std::abs(f[i]) * chain.transition(i, j, ell) * std::abs(g[j]);
    }
    out.rhs = std::pow(nf, 1.0 / alpha) * std::pow(ng, 1.0 / alpha);
    return out;
}

void write_profile_csv(std::ostream& os, const HypermixingProfile& profile, std::span<const double> ells) {
    os << "ell,alpha\n";
    for (double ell : ells) os << format_number(ell) << ',' << format_number(profile.alpha(ell)) << '\n';
}

}  // namespace varpost
