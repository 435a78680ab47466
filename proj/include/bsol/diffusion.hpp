#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsol/errors.hpp"
#include "bsol/numeric.hpp"

namespace bsol {

enum class BoundaryKind { Natural, Exit, Entrance, Killing, Reflecting, Absorbing };

inline const char* to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::Natural: return "natural";
        case BoundaryKind::Exit: return "exit";
        case BoundaryKind::Entrance: return "entrance";
        case BoundaryKind::Killing: return "killing";
        case BoundaryKind::Reflecting: return "reflecting";
        case BoundaryKind::Absorbing: return "absorbing";
    }
    return "?";
}

// Discount rate: a constant r > 0 or a state-dependent r(x) bounded away
// from zero.  Associated (hat) problems use a signed rate r - mu', which is
// allowed to dip below zero; such specs set `signed_ok`.
struct Discount {
    bool is_constant = true;
    double rate = 0.0;
    std::function<double(double)> fn;
    double lower_bound = 0.0;  // declared delta with r(x) >= delta
    bool signed_ok = false;

    static Discount constant(double r) {
        Discount d;
        d.is_constant = true;
        d.rate = r;
        d.lower_bound = r;
        return d;
    }
    static Discount state_dependent(std::function<double(double)> r, double delta) {
        Discount d;
        d.is_constant = false;
        d.fn = std::move(r);
        d.lower_bound = delta;
        return d;
    }

    double operator()(double x) const { return is_constant ? rate : fn(x); }
};

// Working window for the desk-scale numerics: a log-spaced base grid that
// every scan, refinement, and extrapolation runs on.  User-overridable.
struct WorkingDomain {
    double lo = 1e-3;
    double hi = 1e3;
    std::size_t points = 4096;
};

// Closed-form families the fundamental-solution solver recognizes.
enum class Family { Custom, GeometricBM, ArithmeticBM };

// The diffusion dX = mu(X)dt + sigma(X)dW on an interval of the positive
// half line, together with its discounting and boundary declarations.
// Immutable after construction; all solver operations are pure functions
// of a spec.
struct DiffusionSpec {
    std::function<double(double)> drift;
    std::function<double(double)> volatility;
    std::optional<std::function<double(double)>> drift_derivative;
    std::optional<std::function<double(double)>> volatility_derivative;
    Discount discount;

    BoundaryKind lower_boundary = BoundaryKind::Natural;
    BoundaryKind upper_boundary = BoundaryKind::Natural;
    double state_lo = 0.0;
    double state_hi = kInf;

    WorkingDomain domain;

    Family family = Family::Custom;
    double family_mu = 0.0;     // GBM: drift = mu*x; ABM: drift = mu
    double family_sigma = 0.0;  // GBM: vol = sigma*x; ABM: vol = sigma

    static DiffusionSpec gbm(double mu, double sigma, double r) {
        DiffusionSpec s;
        s.family = Family::GeometricBM;
        s.family_mu = mu;
        s.family_sigma = sigma;
        s.drift = [mu](double x) { return mu * x; };
        s.volatility = [sigma](double x) { return sigma * x; };
        s.drift_derivative = [mu](double) { return mu; };
        s.volatility_derivative = [sigma](double) { return sigma; };
        s.discount = Discount::constant(r);
        return s;
    }

    static DiffusionSpec abm(double mu, double sigma, double r) {
        DiffusionSpec s;
        s.family = Family::ArithmeticBM;
        s.family_mu = mu;
        s.family_sigma = sigma;
        s.drift = [mu](double) { return mu; };
        s.volatility = [sigma](double) { return sigma; };
        s.drift_derivative = [](double) { return 0.0; };
        s.volatility_derivative = [](double) { return 0.0; };
        s.discount = Discount::constant(r);
        return s;
    }

    static DiffusionSpec custom(std::function<double(double)> mu,
                                std::function<double(double)> sigma,
                                Discount r) {
        DiffusionSpec s;
        s.drift = std::move(mu);
        s.volatility = std::move(sigma);
        s.discount = std::move(r);
        return s;
    }

    // mu' and sigma', falling back to central differences when no closed
    // form was supplied.
    double drift_deriv(double x) const {
        if (drift_derivative) return (*drift_derivative)(x);
        return central_diff(drift, x);
    }
    double vol_deriv(double x) const {
        if (volatility_derivative) return (*volatility_derivative)(x);
        return central_diff(volatility, x);
    }

    double rate_min() const { return discount.is_constant ? discount.rate : discount.lower_bound; }

    // Working window clipped to the state interval.  A reflecting or
    // absorbing finite endpoint is part of the state space and therefore of
    // the scan grid.
    double grid_lo() const { return std::max(domain.lo, state_lo > 0.0 ? state_lo : domain.lo); }
    double grid_hi() const { return std::min(domain.hi, state_hi); }
    bool lower_is_state_point() const {
        return state_lo > 0.0 && (lower_boundary == BoundaryKind::Reflecting ||
                                  lower_boundary == BoundaryKind::Absorbing);
    }
    bool upper_is_state_point() const {
        return std::isfinite(state_hi) && (upper_boundary == BoundaryKind::Reflecting ||
                                           upper_boundary == BoundaryKind::Absorbing);
    }

    void validate() const {
        if (!drift || !volatility) throw InvalidSpec("diffusion: drift/volatility missing");
        if (!(grid_lo() > 0.0) || !(grid_hi() > grid_lo()))
            throw InvalidSpec("diffusion: empty working domain");
        if (!discount.is_constant && !discount.fn)
            throw InvalidSpec("diffusion: state-dependent discount without a function");
        if (!discount.signed_ok && !(rate_min() > 0.0))
            throw InvalidSpec("diffusion: discount must be bounded away from zero");
        if ((lower_boundary == BoundaryKind::Reflecting ||
             lower_boundary == BoundaryKind::Absorbing) && !(state_lo > 0.0))
            throw InvalidSpec("diffusion: reflecting/absorbing lower boundary requires a finite positive endpoint");
        if ((upper_boundary == BoundaryKind::Reflecting ||
             upper_boundary == BoundaryKind::Absorbing) && !std::isfinite(state_hi))
            throw InvalidSpec("diffusion: reflecting/absorbing upper boundary requires a finite endpoint");

        const auto grid = log_grid(grid_lo(), grid_hi(), 257);
        for (double x : grid) {
            if (!(volatility(x) > 0.0))
                throw InvalidSpec("diffusion: sigma(x) <= 0 at x = " + std::to_string(x));
            const double r = discount(x);
            if (!std::isfinite(r)) throw InvalidSpec("diffusion: discount not finite");
            if (!discount.signed_ok && r < discount.lower_bound - 1e-12)
                throw InvalidSpec("diffusion: discount below its declared lower bound");
        }
        // Advisory integrability spot-check on a few compact subintervals:
        // the local weak-existence condition integral must be finite.
        for (double x : {grid_lo() * 2.0, std::sqrt(grid_lo() * grid_hi()), grid_hi() / 2.0}) {
            const double v = integrate(
                [&](double y) { return (1.0 + std::abs(drift(y))) / (volatility(y) * volatility(y)); },
                0.9 * x, 1.1 * x, 1e-8);
            if (!std::isfinite(v))
                throw InvalidSpec("diffusion: local integrability check failed near x = " +
                                  std::to_string(x));
        }
    }
};

}  // namespace bsol
