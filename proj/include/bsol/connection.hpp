#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bsol/control.hpp"
#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/fundamental.hpp"
#include "bsol/montecarlo.hpp"
#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"
#include "bsol/ratio.hpp"

namespace bsol {

// The associated diffusion dXhat = (mu + sigma sigma') dt + sigma dW with
// state-dependent (possibly signed) discount r - mu'.  When psi and phi are
// convex, (psi', -phi') is its fundamental pair.
struct HatProblem {
    DiffusionSpec hat_spec;
    FundamentalPair base_pair;
    Basis inc;  // psi'
    Basis dec;  // -phi'
    double max_basis_residual = 0.0;

    double increasing_value(double x) const { return std::exp(inc.log_value(x)); }
    double decreasing_value(double x) const { return std::exp(dec.log_value(x)); }
};

inline HatProblem build_hat(const DiffusionSpec& spec, const FundamentalPair& pair) {
    HatProblem h;
    h.base_pair = pair;

    const auto mu = spec.drift;
    const auto sg = spec.volatility;
    auto mu_d = [spec](double x) { return spec.drift_deriv(x); };
    auto sg_d = [spec](double x) { return spec.vol_deriv(x); };
    {
        const double probe = std::sqrt(spec.grid_lo() * spec.grid_hi());
        if (!std::isfinite(mu_d(probe)) || !std::isfinite(sg_d(probe)))
            throw DerivativeUnavailable("build_hat: mu' or sigma' not computable");
    }

    DiffusionSpec hs = spec;
    hs.family = Family::Custom;
    hs.drift = [mu, sg, sg_d](double x) { return mu(x) + sg(x) * sg_d(x); };
    hs.drift_derivative = std::nullopt;
    hs.volatility = sg;
    const Discount base_rate = spec.discount;
    auto hat_rate = [base_rate, mu_d](double x) { return base_rate(x) - mu_d(x); };
    hs.discount = Discount::state_dependent(hat_rate, 0.0);
    hs.discount.signed_ok = true;
    h.hat_spec = hs;

    h.inc = ratio_denominator(RatioKind::GOverPsiPrime, pair);
    h.dec = ratio_denominator(RatioKind::NegGOverPhiPrime, pair);

    // Validate the candidate pair against the hat ODE,
    //   (1/2) sigma^2 u'' + (mu + sigma sigma') u' - (r - mu') u = 0,
    // with u = psi' and u = -phi'.  u' is exact from the base ODE; u'' is a
    // finite difference of that exact expression.
    const auto grid = log_grid(spec.grid_lo() * 2.0, spec.grid_hi() / 2.0, 33);
    for (double x : grid) {
        auto resid = [&](bool inc_side) {
            auto u = [&](double y) {
                return inc_side ? pair.psi_prime(y) : -pair.phi_prime(y);
            };
            auto up = [&](double y) {
                return inc_side ? pair.psi_second(y) : -pair.phi_second(y);
            };
            const double upp = central_diff(up, x, 1e-6);
            const double s = sg(x);
            const double lhs = 0.5 * s * s * upp + hs.drift(x) * up(x) - hat_rate(x) * u(x);
            return std::abs(lhs) / (std::abs(hat_rate(x) * u(x)) + 1e-12);
        };
        h.max_basis_residual = std::max({h.max_basis_residual, resid(true), resid(false)});
    }
    return h;
}

inline HatProblem build_hat(const DiffusionSpec& spec) {
    return build_hat(spec, solve_fundamental(spec));
}

// Laplace-transform identity on the hat diffusion:
//   E_x[ exp(-int_0^{tau_b} (r - mu')(Xhat_s) ds) ] = psi'(x)/psi'(b), x <= b
// (phi' ratio for x > b).  Returns the analytic value next to an independent
// Monte Carlo estimate of the same functional.
struct LaplaceCheck {
    double analytic = kNaN;
    mc::Estimate montecarlo;
};

inline LaplaceCheck laplace_identity_check(const HatProblem& hat, double x, double b,
                                           const mc::SimConfig& cfg) {
    LaplaceCheck out;
    const auto& pair = hat.base_pair;
    out.analytic = x <= b ? pair.psi_prime(x) / pair.psi_prime(b)
                          : pair.phi_prime(x) / pair.phi_prime(b);
    out.montecarlo = mc::estimate_discount_functional(hat.hat_spec, x, b, cfg);
    return out;
}

struct ConvexityReport {
    bool psi_convex = false;
    std::string psi_reason;
    bool phi_convex = false;
    std::string phi_reason;
    bool concave_near_lower = false;
    bool concave_near_upper = false;
    bool transversality_holds = false;
    double transversality_estimate = kNaN;
    bool rate_dominates_mu_prime = false;  // r > mu' everywhere sampled
    bool drift_nonnegative = false;        // mu >= 0 everywhere sampled
    double max_integral_identity_error = kNaN;
    std::vector<std::string> conditions_checked;
};

// Sufficient-condition report for convexity of psi and phi, cross-checked
// against second-derivative signs and (for constant discounting with
// unattainable boundaries) the integral identity
//   sigma^2 psi''/S' = 2 r int_0^x psi (theta(x) - theta(y)) m' dy,
// theta(y) = r y - mu(y).
inline ConvexityReport convexity_report(const DiffusionSpec& spec,
                                        const FundamentalPair& pair,
                                        const mc::SimConfig& mc_cfg = {}) {
    ConvexityReport rep;
    const auto grid = log_grid(spec.grid_lo(), spec.grid_hi(), 129);

    rep.rate_dominates_mu_prime = true;
    rep.drift_nonnegative = true;
    bool mu_prime_above_r_near_lower = true, mu_prime_above_r_near_upper = true;
    for (double x : grid) {
        if (!(spec.discount(x) > spec.drift_deriv(x))) rep.rate_dominates_mu_prime = false;
        if (spec.drift(x) < 0.0) rep.drift_nonnegative = false;
    }
    for (int i = 0; i < 16; ++i) {
        if (spec.discount(grid[i]) > spec.drift_deriv(grid[i]))
            mu_prime_above_r_near_lower = false;
        const double xu = grid[grid.size() - 1 - i];
        if (spec.discount(xu) > spec.drift_deriv(xu)) mu_prime_above_r_near_upper = false;
    }
    rep.conditions_checked.push_back("r > mu' sampled on the working grid");
    rep.conditions_checked.push_back("mu >= 0 sampled on the working grid");

    // transversality: E[e^{-rT} X_T] at T = 50 / r, versus 1e-3 * x
    {
        mc::SimConfig cfg = mc_cfg;
        cfg.paths = std::clamp<std::size_t>(mc_cfg.paths, 100, 10000);
        const double x0 = pair.anchor();
        const double T = 50.0 / std::max(spec.rate_min(), 1e-6);
        cfg.step = std::max(mc_cfg.step, T / 4096.0);
        const double dt = cfg.step, sqdt = std::sqrt(dt);
        const std::size_t nsteps = std::size_t(T / dt);
        auto one_path = [&](std::uint64_t idx) -> mc::detail::PathOut {
            mc::detail::Xoshiro256pp rng(cfg.base_seed, idx);
            mc::detail::NormalSampler nd;
            double x = x0, D = 0.0;
            bool absorbed = false;
            for (std::size_t k = 0; k < nsteps; ++k) {
                double xn = x + spec.drift(x) * dt + spec.volatility(x) * sqdt * nd(rng);
                D += spec.discount(x) * dt;
                if (D > 700.0) { x = 0.0; break; }
                if (!mc::detail::apply_boundaries(spec, xn, absorbed)) { x = 0.0; break; }
                x = xn;
                if (absorbed) break;
            }
            mc::detail::PathOut o;
            o.value = std::exp(-D) * x;
            return o;
        };
        const mc::Estimate est = mc::detail::run_paths(cfg, one_path);
        rep.transversality_estimate = est.mean;
        rep.transversality_holds = std::abs(est.mean) < 1e-3 * x0;
        rep.conditions_checked.push_back("transversality via MC of e^{-rT} X_T");
    }

    const bool lower_unattainable = spec.lower_boundary == BoundaryKind::Natural ||
                                    spec.lower_boundary == BoundaryKind::Entrance;
    const bool upper_unattainable = spec.upper_boundary == BoundaryKind::Natural ||
                                    spec.upper_boundary == BoundaryKind::Entrance;
    rep.conditions_checked.push_back("boundary attainability from declared kinds");

    // numeric second-derivative signs
    bool psi_numeric_convex = true, phi_numeric_convex = true;
    bool psi_concave_low = true, phi_concave_high = true;
    for (double x : grid) {
        if (pair.psi_second(x) < -1e-10 * (1.0 + std::abs(pair.psi(x))))
            psi_numeric_convex = false;
        if (pair.phi_second(x) < -1e-10 * (1.0 + std::abs(pair.phi(x))))
            phi_numeric_convex = false;
    }
    for (int i = 0; i < 8; ++i) {
        if (pair.psi_second(grid[i]) > 0.0) psi_concave_low = false;
        if (pair.phi_second(grid[grid.size() - 1 - i]) > 0.0) phi_concave_high = false;
    }

    const bool lim_theta_ok = [&] {
        const double x = spec.grid_lo();
        return spec.discount(x) * x - spec.drift(x) >= -1e-9;
    }();
    if (rep.transversality_holds && rep.rate_dominates_mu_prime &&
        (lower_unattainable || lim_theta_ok)) {
        rep.psi_convex = true;
        rep.psi_reason = "transversality + r > mu' + lower-boundary condition";
    } else if (psi_numeric_convex) {
        rep.psi_convex = true;
        rep.psi_reason = "psi'' >= 0 sampled";
    } else {
        rep.psi_reason = "psi'' changes sign on the sampled grid";
    }
    if (rep.drift_nonnegative) {
        rep.phi_convex = true;
        rep.phi_reason = "mu >= 0";
    } else if (rep.transversality_holds && upper_unattainable &&
               rep.rate_dominates_mu_prime) {
        rep.phi_convex = true;
        rep.phi_reason = "transversality + unattainable upper boundary + r > mu'";
    } else if (phi_numeric_convex) {
        rep.phi_convex = true;
        rep.phi_reason = "phi'' >= 0 sampled";
    } else {
        rep.phi_reason = "phi'' changes sign on the sampled grid";
    }
    rep.concave_near_lower = mu_prime_above_r_near_lower && psi_concave_low;
    rep.concave_near_upper = mu_prime_above_r_near_upper && phi_concave_high;

    // integral identities (constant discounting, unattainable boundaries)
    if (spec.discount.is_constant && lower_unattainable && upper_unattainable) {
        const double r = spec.discount.rate;
        auto theta = [&](double y) { return r * y - spec.drift(y); };
        double worst = 0.0;
        for (double x : {grid[32], grid[64], grid[96]}) {
            {
                const double lhs = spec.volatility(x) * spec.volatility(x) *
                                   pair.psi_second(x) / pair.scale_density(x);
                const double rhs =
                    2.0 * r *
                    integrate(
                        [&](double s) {
                            const double y = std::exp(s);
                            return y * std::exp(pair.log_psi(y)) * (theta(x) - theta(y)) *
                                   pair.speed_density(y);
                        },
                        std::log(spec.grid_lo() * 1e-3), std::log(x), 1e-12);
                worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + 1e-12));
            }
            {
                const double lhs = spec.volatility(x) * spec.volatility(x) *
                                   pair.phi_second(x) / pair.scale_density(x);
                const double rhs =
                    2.0 * r *
                    integrate(
                        [&](double s) {
                            const double y = std::exp(s);
                            return y * std::exp(pair.log_phi(y)) * (theta(y) - theta(x)) *
                                   pair.speed_density(y);
                        },
                        std::log(x), std::log(spec.grid_hi() * 1e3), 1e-12);
                worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + 1e-12));
            }
        }
        rep.max_integral_identity_error = worst;
        rep.conditions_checked.push_back("second-derivative integral identities");
        if (!(worst < 1e-4))
            throw QuadratureFailure(
                "convexity_report: integral identity mismatch " + std::to_string(worst));
    }
    return rep;
}

// The derivative connection between one-sided singular control and the
// associated stopping problem.
struct ConnectionReport {
    HatProblem hat;
    ControlSolution down;  // W_Z near the lower boundary
    ControlSolution up;    // W_Y near the upper boundary
    MaxSet hat_M;          // == down.action_set by construction
    MaxSet hat_N;          // == up.action_set
    double z_prime = kNaN;
    double y_prime = kNaN;
    double max_dev_down = kNaN;  // |W_Z' - Vhat| on (0, z'*), relative
    double max_dev_up = kNaN;    // |W_Y' - Vhat| on (y'*, inf), relative
    bool connection_local_only = false;
    double split_point = kNaN;
    std::string notes;

    // The associated stopping value on its two solved regions.
    std::function<double(double)> hat_value;
    // Derivatives of the control values: W_Z' = coeff * psi'; the upward
    // derivative is reported with the positive sign convention
    // (coeff * (-phi')), the marginal value of the push.
    std::function<double(double)> wz_deriv;
    std::function<double(double)> wy_deriv;
};

// Solve the associated stopping problem on the basis pair (psi', -phi'),
// solve both one-sided control problems, and compare W' against Vhat on the
// regions where each is characterized.  The connection is local: it can hold
// globally for the downward problem only if y'* = inf (and for the upward
// problem only if z'* = 0).
inline ConnectionReport verify_connection(const PayoffFn& g, const DiffusionSpec& spec,
                                          double tol = 1e-9,
                                          bool override_assumption = false) {
    ConnectionReport rep;
    const FundamentalPair pair = solve_fundamental(spec);
    rep.hat = build_hat(spec, pair);
    if (!(rep.hat.max_basis_residual < 1e-5))
        throw NumericError("verify_connection: hat basis residual too large: " +
                           std::to_string(rep.hat.max_basis_residual));

    rep.down = solve_downward(g, spec, pair, tol, override_assumption);
    rep.up = solve_upward(g, spec, pair, tol, override_assumption);

    // The hat stopping problem's M and N are the control problems' action
    // sets: identical ratios, identical scans.
    rep.hat_M = rep.down.action_set;
    rep.hat_N = rep.up.action_set;
    rep.z_prime = rep.down.extremal;
    rep.y_prime = rep.up.extremal;

    const double coeff_down = rep.down.segment.valid ? rep.down.segment.coefficient : kNaN;
    const double coeff_up = rep.up.segment.valid ? rep.up.segment.coefficient : kNaN;
    const double zp = rep.z_prime, yp = rep.y_prime;
    const Basis inc = rep.hat.inc, dec = rep.hat.dec;

    rep.hat_value = [coeff_down, coeff_up, zp, yp, inc, dec](double x) {
        if (!std::isnan(coeff_down) && x <= zp) return coeff_down * std::exp(inc.log_value(x));
        if (!std::isnan(coeff_up) && x >= yp) return coeff_up * std::exp(dec.log_value(x));
        return kNaN;
    };
    rep.wz_deriv = [coeff_down, inc](double x) {
        return coeff_down * std::exp(inc.log_value(x));
    };
    rep.wy_deriv = [coeff_up, dec](double x) {
        return coeff_up * std::exp(dec.log_value(x));
    };

    // pointwise comparison on the characterized regions
    double dev_down = 0.0, dev_up = 0.0;
    if (rep.down.segment.valid && zp > spec.grid_lo()) {
        const auto grid = log_grid(spec.grid_lo(), std::min(zp, spec.grid_hi()), 257);
        for (double x : grid) {
            const double vhat = rep.hat_value(x);
            if (std::isnan(vhat)) continue;
            dev_down = std::max(dev_down, std::abs(rep.wz_deriv(x) - vhat) /
                                              (1.0 + std::abs(vhat)));
        }
        rep.max_dev_down = dev_down;
    }
    if (rep.up.segment.valid && yp < spec.grid_hi()) {
        const auto grid = log_grid(std::max(yp, spec.grid_lo()), spec.grid_hi(), 257);
        for (double x : grid) {
            const double vhat = rep.hat_value(x);
            if (std::isnan(vhat)) continue;
            dev_up = std::max(dev_up, std::abs(rep.wy_deriv(x) - vhat) /
                                          (1.0 + std::abs(vhat)));
        }
        rep.max_dev_up = dev_up;
    }

    // necessary condition for a global connection: W_Z' = Vhat everywhere
    // requires y'* = inf, and W_Y' = Vhat everywhere requires z'* = 0
    const bool down_can_be_global = (yp == kInf);
    const bool up_can_be_global = (zp == 0.0);
    rep.connection_local_only = !down_can_be_global && !up_can_be_global;
    if (rep.connection_local_only) {
        rep.split_point = std::min(zp, yp);
        rep.notes =
            "W_Z' = Vhat only below z'* and W_Y' = Vhat only above y'*: the derivative "
            "connection is local, split at the action thresholds";
    } else if (down_can_be_global) {
        rep.notes = "y'* = inf: no upper obstruction to a global downward connection";
    } else {
        rep.notes = "z'* = 0: no lower obstruction to a global upward connection";
    }
    return rep;
}

}  // namespace bsol
