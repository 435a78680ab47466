#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/numeric.hpp"

namespace bsol {

// A positive monotone basis function exposed through its logarithm, so that
// ratios and hitting values stay finite even when the function itself spans
// hundreds of orders of magnitude.
struct Basis {
    std::function<double(double)> log_value;  // ln u(x)
    std::function<double(double)> dlog;       // u'(x)/u(x), signed

    double value(double x) const { return std::exp(log_value(x)); }
    double deriv(double x) const { return dlog(x) * value(x); }
};

namespace detail {

// Dense log-grid table of w = x u'/u and l = ln u for one solution branch.
// Values between nodes are recovered by re-integrating the same ODE from the
// nearest node, which keeps evaluation as accurate as the construction sweep.
struct RiccatiTable {
    double s0 = 0.0;
    double ds = 0.0;
    std::vector<double> w;  // x u'/u at node i
    std::vector<double> l;  // ln u at node i (shifted so l(anchor) = 0)
};

// dw/ds for w = x u'/u with (A - r)u = 0, s = ln x:
//   dw/ds = w + (2 x^2 / sigma^2) r - (2 x mu / sigma^2) w - w^2
template <class Mu, class Sig2, class Rate>
inline double riccati_rhs(double s, double wv, const Mu& mu, const Sig2& sigma2,
                          const Rate& rate) {
    const double x = std::exp(s);
    const double s2 = sigma2(x);
    return wv + (2.0 * x * x / s2) * rate(x) - (2.0 * x * mu(x) / s2) * wv - wv * wv;
}

constexpr double kWClamp = 1e8;

template <class Mu, class Sig2, class Rate>
inline void rk4_wl(double& s, double& wv, double& lv, double h, const Mu& mu,
                   const Sig2& sigma2, const Rate& rate) {
    const double k1w = riccati_rhs(s, wv, mu, sigma2, rate);
    const double k1l = wv;
    const double k2w = riccati_rhs(s + 0.5 * h, wv + 0.5 * h * k1w, mu, sigma2, rate);
    const double k2l = wv + 0.5 * h * k1w;
    const double k3w = riccati_rhs(s + 0.5 * h, wv + 0.5 * h * k2w, mu, sigma2, rate);
    const double k3l = wv + 0.5 * h * k2w;
    const double k4w = riccati_rhs(s + h, wv + h * k3w, mu, sigma2, rate);
    const double k4l = wv + h * k3w;
    wv += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
    lv += h / 6.0 * (k1l + 2.0 * k2l + 2.0 * k3l + k4l);
    s += h;
    if (wv > kWClamp) wv = kWClamp;
    if (wv < -kWClamp) wv = -kWClamp;
}

// Integrate (w, l) over one interval h, substepping when |w| makes the
// quadratic term stiff.
template <class Mu, class Sig2, class Rate>
inline void advance_wl(double& s, double& wv, double& lv, double h, const Mu& mu,
                       const Sig2& sigma2, const Rate& rate) {
    int m = 2 + int(std::min(62.0, 4.0 * std::abs(h) * (1.0 + std::abs(wv))));
    const double sub = h / m;
    for (int i = 0; i < m; ++i) rk4_wl(s, wv, lv, sub, mu, sigma2, rate);
}

struct NumericBranch {
    RiccatiTable table;

    // Evaluate (w, l) at arbitrary s by integrating from the nearest node on
    // the construction side.
    template <class Mu, class Sig2, class Rate>
    void eval(double s, const Mu& mu, const Sig2& sigma2, const Rate& rate,
              double& wv, double& lv) const {
        const auto& t = table;
        const std::ptrdiff_t n = std::ptrdiff_t(t.w.size());
        std::ptrdiff_t i = std::ptrdiff_t(std::floor((s - t.s0) / t.ds));
        if (i < 0) i = 0;
        if (i > n - 1) i = n - 1;
        double sc = t.s0 + double(i) * t.ds;
        wv = t.w[std::size_t(i)];
        lv = t.l[std::size_t(i)];
        if (s != sc) advance_wl(sc, wv, lv, s - sc, mu, sigma2, rate);
    }
};

}  // namespace detail

// The increasing solution psi and decreasing solution phi of (A - r)u = 0,
// together with their first derivatives, the scale and speed densities, and
// the Wronskian constant B = (psi' phi - psi phi') / S'.
//
// Normalization: only ratios of fundamental solutions are meaningful.  The
// closed-form families use their conventional normalizations; numeric pairs
// are pinned to psi(x0) = phi(x0) = 1 at the anchor x0 (geometric midpoint
// of the working domain).
class FundamentalPair {
public:
    enum class Source { ClosedForm, Numeric };

    Source source() const { return source_; }
    double anchor() const { return x0_; }

    double log_psi(double x) const { return log_psi_(x); }
    double log_phi(double x) const { return log_phi_(x); }
    double dlog_psi(double x) const { return dlog_psi_(x); }   // psi'/psi > 0
    double dlog_phi(double x) const { return dlog_phi_(x); }   // phi'/phi < 0

    double psi(double x) const { return std::exp(log_psi_(x)); }
    double phi(double x) const { return std::exp(log_phi_(x)); }
    double psi_prime(double x) const { return dlog_psi_(x) * psi(x); }
    double phi_prime(double x) const { return dlog_phi_(x) * phi(x); }

    // Second derivatives straight from the ODE, u'' = (2/sigma^2)(r u - mu u').
    double psi_second(double x) const {
        return 2.0 / sigma2_(x) * (rate_(x) * psi(x) - mu_(x) * psi_prime(x));
    }
    double phi_second(double x) const {
        return 2.0 / sigma2_(x) * (rate_(x) * phi(x) - mu_(x) * phi_prime(x));
    }

    double log_scale_density(double x) const { return log_scale_(x); }
    double scale_density(double x) const { return std::exp(log_scale_(x)); }
    double speed_density(double x) const {
        return 2.0 / (sigma2_(x) * scale_density(x));
    }
    double wronskian() const { return wronskian_; }

    Basis increasing() const { return Basis{log_psi_, dlog_psi_}; }
    Basis decreasing() const { return Basis{log_phi_, dlog_phi_}; }

    double rate(double x) const { return rate_(x); }
    double mu(double x) const { return mu_(x); }
    double sigma2(double x) const { return sigma2_(x); }

    // --- construction -----------------------------------------------------

    static FundamentalPair closed_form_power(double gamma_plus, double gamma_minus,
                                             const DiffusionSpec& spec) {
        FundamentalPair p = common(spec);
        p.source_ = Source::ClosedForm;
        const double expo = -2.0 * spec.family_mu / (spec.family_sigma * spec.family_sigma);
        p.log_psi_ = [gamma_plus](double x) { return gamma_plus * std::log(x); };
        p.dlog_psi_ = [gamma_plus](double x) { return gamma_plus / x; };
        p.log_phi_ = [gamma_minus](double x) { return gamma_minus * std::log(x); };
        p.dlog_phi_ = [gamma_minus](double x) { return gamma_minus / x; };
        p.log_scale_ = [expo](double x) { return expo * std::log(x); };
        p.wronskian_ = gamma_plus - gamma_minus;
        return p;
    }

    static FundamentalPair closed_form_exponential(double gamma_plus, double gamma_minus,
                                                   const DiffusionSpec& spec) {
        FundamentalPair p = common(spec);
        p.source_ = Source::ClosedForm;
        const double expo = -2.0 * spec.family_mu / (spec.family_sigma * spec.family_sigma);
        p.log_psi_ = [gamma_plus](double x) { return gamma_plus * x; };
        p.dlog_psi_ = [gamma_plus](double) { return gamma_plus; };
        p.log_phi_ = [gamma_minus](double x) { return gamma_minus * x; };
        p.dlog_phi_ = [gamma_minus](double) { return gamma_minus; };
        p.log_scale_ = [expo](double x) { return expo * x; };
        p.wronskian_ = gamma_plus - gamma_minus;
        return p;
    }

    static FundamentalPair numeric(const DiffusionSpec& spec);

private:
    static FundamentalPair common(const DiffusionSpec& spec) {
        FundamentalPair p;
        p.x0_ = std::sqrt(spec.grid_lo() * spec.grid_hi());
        auto sig = spec.volatility;
        p.mu_ = spec.drift;
        p.sigma2_ = [sig](double x) { double s = sig(x); return s * s; };
        auto d = spec.discount;
        p.rate_ = [d](double x) { return d(x); };
        return p;
    }

    Source source_ = Source::ClosedForm;
    double x0_ = 1.0;
    double wronskian_ = 0.0;
    std::function<double(double)> log_psi_, dlog_psi_, log_phi_, dlog_phi_, log_scale_;
    std::function<double(double)> mu_, sigma2_, rate_;
};

inline FundamentalPair FundamentalPair::numeric(const DiffusionSpec& spec) {
    FundamentalPair p = common(spec);
    p.source_ = Source::Numeric;

    const auto& mu = p.mu_;
    const auto& sigma2 = p.sigma2_;
    const auto& rate = p.rate_;

    const double s_lo = std::log(spec.grid_lo());
    const double s_hi = std::log(spec.grid_hi());
    const double s0 = std::log(p.x0_);
    // Stored table reaches 8.5 decades past the working window (resolvent
    // tails sample 8); the converging lead-in runs further out as needed.
    const double kTail = 8.5 * std::log(10.0);
    const double ds = std::max(1e-4, (s_hi - s_lo) / double(std::max<std::size_t>(spec.domain.points, 512)));
    const double table_lo = s_lo - kTail;
    const double table_hi = s_hi + kTail;
    const std::size_t n_nodes = std::size_t((table_hi - table_lo) / ds) + 2;

    // One converging sweep: start far outside the table with an arbitrary
    // start of the correct sign; the wanted branch attracts in the sweep
    // direction.  Two different starts must agree at the anchor, otherwise
    // the lead-in is doubled.
    auto sweep = [&](bool increasing) -> detail::RiccatiTable {
        const double dir = increasing ? +1.0 : -1.0;
        const double edge = increasing ? table_lo : table_hi;
        double lead = 4.0 * std::log(10.0);
        for (int attempt = 0; attempt < 6; ++attempt, lead *= 2.0) {
            double w_final[2];
            detail::RiccatiTable t;
            for (int pass = 0; pass < 2; ++pass) {
                const double w_init = dir * (pass == 0 ? 0.5 : 2.0);
                double s = edge - dir * lead;
                double wv = w_init, lv = 0.0;
                // lead-in (not stored)
                while (dir * (edge - s) > 1e-12) {
                    const double h = dir * std::min(ds, dir * (edge - s));
                    detail::advance_wl(s, wv, lv, h, mu, sigma2, rate);
                }
                // stored sweep across the table
                detail::RiccatiTable cur;
                cur.s0 = table_lo;
                cur.ds = ds;
                cur.w.assign(n_nodes, 0.0);
                cur.l.assign(n_nodes, 0.0);
                if (increasing) {
                    s = table_lo; lv = 0.0;
                    for (std::size_t i = 0; i < n_nodes; ++i) {
                        cur.w[i] = wv;
                        cur.l[i] = lv;
                        if (i + 1 < n_nodes) detail::advance_wl(s, wv, lv, ds, mu, sigma2, rate);
                    }
                } else {
                    s = table_lo + double(n_nodes - 1) * ds; lv = 0.0;
                    for (std::size_t i = n_nodes; i-- > 0;) {
                        cur.w[i] = wv;
                        cur.l[i] = lv;
                        if (i > 0) detail::advance_wl(s, wv, lv, -ds, mu, sigma2, rate);
                    }
                }
                // anchor value for the agreement test
                detail::NumericBranch b{cur};
                double wa, la;
                b.eval(s0, mu, sigma2, rate, wa, la);
                w_final[pass] = wa;
                t = std::move(cur);
            }
            if (std::abs(w_final[0] - w_final[1]) <=
                1e-10 * (1.0 + std::abs(w_final[0]))) {
                // shift l so that u(x0) = 1
                detail::NumericBranch b{t};
                double wa, la;
                b.eval(s0, mu, sigma2, rate, wa, la);
                for (double& lv : t.l) lv -= la;
                return t;
            }
        }
        throw NonConvergence(
            "fundamental: shooting failed to settle on a monotone branch");
    };

    auto psi_table = std::make_shared<detail::NumericBranch>();
    auto phi_table = std::make_shared<detail::NumericBranch>();
    psi_table->table = sweep(true);
    phi_table->table = sweep(false);

    p.log_psi_ = [psi_table, mu, sigma2, rate](double x) {
        double wv, lv;
        psi_table->eval(std::log(x), mu, sigma2, rate, wv, lv);
        return lv;
    };
    p.dlog_psi_ = [psi_table, mu, sigma2, rate](double x) {
        double wv, lv;
        psi_table->eval(std::log(x), mu, sigma2, rate, wv, lv);
        return wv / x;
    };
    p.log_phi_ = [phi_table, mu, sigma2, rate](double x) {
        double wv, lv;
        phi_table->eval(std::log(x), mu, sigma2, rate, wv, lv);
        return lv;
    };
    p.dlog_phi_ = [phi_table, mu, sigma2, rate](double x) {
        double wv, lv;
        phi_table->eval(std::log(x), mu, sigma2, rate, wv, lv);
        return wv / x;
    };

    // ln S'(x) = -int_{x0}^{x} 2 mu / sigma^2 dy, anchored at S'(x0) = 1.
    {
        const std::size_t n = n_nodes;
        auto q = std::make_shared<std::vector<double>>(n, 0.0);
        const double tlo = table_lo;
        auto integrand = [&](double s) {
            const double x = std::exp(s);
            return -2.0 * x * mu(x) / sigma2(x);
        };
        for (std::size_t i = 1; i < n; ++i) {
            const double a = tlo + double(i - 1) * ds;
            // Simpson on the node interval
            (*q)[i] = (*q)[i - 1] +
                      ds / 6.0 * (integrand(a) + 4.0 * integrand(a + 0.5 * ds) + integrand(a + ds));
        }
        // shift to the anchor
        const double frac0 = (s0 - tlo) / ds;
        const std::size_t i0 = std::size_t(frac0);
        const double q0 = (*q)[i0] + ((*q)[std::min(i0 + 1, n - 1)] - (*q)[i0]) * (frac0 - double(i0));
        for (double& v : *q) v -= q0;
        p.log_scale_ = [q, tlo, ds, n, integrand_mu = mu, integrand_s2 = sigma2](double x) {
            const double s = std::log(x);
            double pos = (s - tlo) / ds;
            if (pos < 0.0) pos = 0.0;
            if (pos > double(n - 1)) pos = double(n - 1);
            const std::size_t i = std::min(std::size_t(pos), n - 2);
            // linear interpolation plus a local correction keeps this smooth
            const double si = tlo + double(i) * ds;
            auto f = [&](double ss) {
                const double xx = std::exp(ss);
                return -2.0 * xx * integrand_mu(xx) / integrand_s2(xx);
            };
            const double h = s - si;
            return (*q)[i] + h / 6.0 * (f(si) + 4.0 * f(si + 0.5 * h) + f(si + h));
        };
    }

    // Wronskian at the anchor, where psi = phi = 1 and S' = 1:
    // B = (psi' phi - psi phi')/S' = (w_psi - w_phi)/x0.
    p.wronskian_ = (p.dlog_psi_(p.x0_) - p.dlog_phi_(p.x0_));

    return p;
}

// Solve (A - r)u = 0 for the increasing/decreasing fundamental pair.
// Registered closed-form families are recognized by their spec tags;
// everything else (including any state-dependent discount) goes through the
// numeric branch construction.
inline FundamentalPair solve_fundamental(const DiffusionSpec& spec) {
    spec.validate();
    if (spec.discount.is_constant && spec.family == Family::GeometricBM) {
        // roots of (sigma^2/2) g (g - 1) + mu g - r = 0
        const double a = 0.5 * spec.family_sigma * spec.family_sigma;
        const double b = spec.family_mu - a;
        const double r = spec.discount.rate;
        const double disc = std::sqrt(b * b + 4.0 * a * r);
        return FundamentalPair::closed_form_power((-b + disc) / (2.0 * a),
                                                  (-b - disc) / (2.0 * a), spec);
    }
    if (spec.discount.is_constant && spec.family == Family::ArithmeticBM) {
        // roots of (sigma^2/2) g^2 + mu g - r = 0
        const double a = 0.5 * spec.family_sigma * spec.family_sigma;
        const double b = spec.family_mu;
        const double r = spec.discount.rate;
        const double disc = std::sqrt(b * b + 4.0 * a * r);
        return FundamentalPair::closed_form_exponential((-b + disc) / (2.0 * a),
                                                        (-b - disc) / (2.0 * a), spec);
    }

    FundamentalPair p = FundamentalPair::numeric(spec);

    // Numeric pairs are accepted only if they behave like a fundamental
    // pair on the working window.
    const auto grid = log_grid(spec.grid_lo(), spec.grid_hi(), 129);
    double b_ref = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid[i];
        if (!(p.dlog_psi(x) > -1e-10) || !(p.dlog_phi(x) < 1e-10))
            throw NonConvergence("fundamental: numeric branch lost monotonicity");
        // B(x) in log space: (w_psi - w_phi)/x * psi * phi / S'
        const double bx = (p.dlog_psi(x) - p.dlog_phi(x)) *
                          std::exp(p.log_psi(x) + p.log_phi(x) - p.log_scale_density(x));
        if (i == 0) b_ref = bx;
        if (!nearly_equal(bx, b_ref, 1e-6))
            throw NonConvergence("fundamental: Wronskian drifts across the grid");
    }
    return p;
}

}  // namespace bsol
