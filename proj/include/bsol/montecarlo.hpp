#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "bsol/diffusion.hpp"
#include "bsol/errors.hpp"
#include "bsol/numeric.hpp"
#include "bsol/payoff.hpp"
#include "bsol/stopping.hpp"

namespace bsol::mc {

struct SimConfig {
    double step = 1e-3;
    double horizon = 0.0;  // 0: use 20 / r_min at call time
    std::size_t paths = 100000;
    std::uint64_t base_seed = 0x5eed5eed5eedULL;
    bool antithetic = false;

    void validate() const {
        if (!(step > 0.0)) throw ValidationError("mc: step must be positive");
        if (paths < 100) throw ValidationError("mc: need at least 100 paths");
    }
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t paths_used = 0;
    double truncated_fraction = 0.0;  // paths that reached the horizon first
    double truncation_bound = 0.0;    // discount bound on what a truncated path could add
};

// ---------------------------------------------------------------------------
// RNG: xoshiro256++ seeded per path through a splitmix64 stream.  The split
// is a pure function of (base_seed, path_index), which makes every estimate
// bit-identical no matter how paths are scheduled across threads.
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Xoshiro256pp {
public:
    Xoshiro256pp(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
        for (auto& w : s_) w = splitmix64(s);
    }
    using result_type = std::uint64_t;
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }
    inline std::uint64_t operator()() {
        const std::uint64_t r = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return r;
    }
    inline double uniform() { return ((*this)() >> 11) * 0x1.0p-53; }

private:
    static inline std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

// Marsaglia polar method with pair caching.
class NormalSampler {
public:
    inline double operator()(Xoshiro256pp& rng) {
        if (have_) {
            have_ = false;
            return spare_;
        }
        double u, v, q;
        do {
            u = 2.0 * rng.uniform() - 1.0;
            v = 2.0 * rng.uniform() - 1.0;
            q = u * u + v * v;
        } while (q >= 1.0 || q == 0.0);
        const double f = std::sqrt(-2.0 * std::log(q) / q);
        spare_ = v * f;
        have_ = true;
        return u * f;
    }

private:
    bool have_ = false;
    double spare_ = 0.0;
};

inline std::size_t max_threads() {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("BOUNDARY_SOLVER_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) n = std::size_t(v);
    }
    return n;
}

struct PathOut {
    double value = 0.0;
    bool truncated = false;
    bool discarded = false;
};

// Deterministic parallel driver: per-path results land in a slot indexed by
// the path, then mean and standard error are reduced with pairwise sums.
template <class PathFn>
Estimate run_paths(const SimConfig& cfg, PathFn&& path_fn) {
    cfg.validate();
    const std::size_t n = cfg.paths;
    std::vector<double> vals(n, 0.0);
    std::vector<std::uint8_t> trunc(n, 0), disc(n, 0);

    const std::size_t nthreads = std::min(max_threads(), n);
    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            PathOut o = path_fn(std::uint64_t(i));
            vals[i] = o.value;
            trunc[i] = o.truncated ? 1 : 0;
            disc[i] = o.discarded ? 1 : 0;
        }
    };
    if (nthreads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        const std::size_t chunk = (n + nthreads - 1) / nthreads;
        for (std::size_t t = 0; t < nthreads; ++t) {
            const std::size_t lo = t * chunk, hi = std::min(n, lo + chunk);
            if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
    }

    std::size_t used = 0, truncated = 0;
    std::vector<double> kept;
    kept.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (disc[i]) continue;
        kept.push_back(vals[i]);
        ++used;
        truncated += trunc[i];
    }
    if (used == 0) throw MCNonConvergence("mc: every path was discarded");

    Estimate e;
    e.paths_used = used;
    e.truncated_fraction = double(truncated) / double(used);
    e.mean = pairwise_sum(kept) / double(used);
    std::vector<double> sq(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const double d = kept[i] - e.mean;
        sq[i] = d * d;
    }
    e.std_error = used > 1 ? std::sqrt(pairwise_sum(sq) / (double(used) * double(used - 1)))
                           : 0.0;
    return e;
}

// Project a freshly stepped state onto the declared state interval; returns
// false when the path is killed (exit/killing boundary reached).
template <class Spec>
inline bool apply_boundaries(const Spec& spec, double& x, bool& absorbed) {
    if (x <= spec.state_lo || (spec.state_lo == 0.0 && x <= 0.0)) {
        switch (spec.lower_boundary) {
            case BoundaryKind::Reflecting: x = spec.state_lo; return true;
            case BoundaryKind::Absorbing: x = spec.state_lo; absorbed = true; return true;
            default: return false;  // killed / sent to the cemetery
        }
    }
    if (std::isfinite(spec.state_hi) && x >= spec.state_hi) {
        switch (spec.upper_boundary) {
            case BoundaryKind::Reflecting: x = spec.state_hi; return true;
            case BoundaryKind::Absorbing: x = spec.state_hi; absorbed = true; return true;
            default: return false;
        }
    }
    return true;
}

template <class F>
auto dispatch_coeffs(const DiffusionSpec& spec, F&& f) {
    if (spec.family == Family::GeometricBM) {
        const double m = spec.family_mu, s = spec.family_sigma;
        return f([m](double x) { return m * x; }, [s](double x) { return s * x; });
    }
    if (spec.family == Family::ArithmeticBM) {
        const double m = spec.family_mu, s = spec.family_sigma;
        return f([m](double) { return m; }, [s](double) { return s; });
    }
    const auto mu = spec.drift;
    const auto sg = spec.volatility;
    return f([mu](double x) { return mu(x); }, [sg](double x) { return sg(x); });
}

inline double default_horizon(const DiffusionSpec& spec, const SimConfig& cfg) {
    if (cfg.horizon > 0.0) return cfg.horizon;
    const double rmin = spec.rate_min();
    return rmin > 1e-9 ? 20.0 / rmin : 50.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

// Discounted stopping value E[e^{-int r} g(X_tau)] for a hitting rule.
// Single thresholds get a Brownian-bridge crossing correction; point/interval
// sets use plain first-grid-crossing.
inline Estimate estimate_stopping_value(const DiffusionSpec& spec, const PayoffFn& g,
                                        double x0, const RuleDescription& rule,
                                        const SimConfig& cfg) {
    using RK = RuleDescription::Kind;
    if (rule.kind != RK::HitPoint && rule.kind != RK::HitSet && rule.kind != RK::TwoPoint)
        throw ValidationError("estimate_stopping_value: rule must be a hitting rule");

    // immediate hits are exact
    auto on_target = [&](double x) {
        switch (rule.kind) {
            case RK::HitPoint: return x == rule.b;
            case RK::TwoPoint: return x == rule.a || x == rule.b;
            case RK::HitSet: {
                for (double t : rule.targets)
                    if (x == t) return true;
                return false;
            }
            default: return false;
        }
    };
    if (on_target(x0)) {
        Estimate e;
        e.mean = g(x0);
        e.std_error = 0.0;
        e.paths_used = cfg.paths;
        return e;
    }

    const double T = detail::default_horizon(spec, cfg);
    const double dt = cfg.step;
    const double sqdt = std::sqrt(dt);
    const std::size_t nsteps = std::size_t(T / dt);
    const Discount disc = spec.discount;
    const bool bridge = rule.kind == RK::HitPoint;

    // sorted crossing targets
    std::vector<double> pts;
    if (rule.kind == RK::HitPoint) pts = {rule.b};
    else if (rule.kind == RK::TwoPoint) pts = {rule.a, rule.b};
    else pts = rule.targets;
    std::sort(pts.begin(), pts.end());

    return detail::dispatch_coeffs(spec, [&](auto&& mu, auto&& sg) {
        auto one_path = [&](std::uint64_t idx) -> detail::PathOut {
            detail::PathOut best{};
            const int reps = cfg.antithetic ? 2 : 1;
            double acc = 0.0;
            bool any_trunc = false;
            for (int rep = 0; rep < reps; ++rep) {
                detail::Xoshiro256pp rng(cfg.base_seed, idx);
                detail::NormalSampler nd;
                const double sign = (rep == 0) ? 1.0 : -1.0;
                double x = x0, D = 0.0;
                double val = 0.0;
                bool hit = false, absorbed = false;
                for (std::size_t k = 0; k < nsteps; ++k) {
                    const double sx = sg(x);
                    const double z = sign * nd(rng);
                    double xn = x + mu(x) * dt + sx * sqdt * z;
                    const double r_here = disc(x);
                    bool killed = !detail::apply_boundaries(spec, xn, absorbed);
                    if (killed) break;
                    // crossing detection
                    double frac = 1.0;
                    double target = kNaN;
                    for (double b : pts) {
                        const bool crossed = (x < b && xn >= b) || (x > b && xn <= b);
                        if (crossed) {
                            target = b;
                            frac = std::abs(xn - x) > 0.0 ? (b - x) / (xn - x) : 1.0;
                            break;
                        }
                    }
                    if (std::isnan(target) && bridge) {
                        const double b = pts[0];
                        const double q = 2.0 * (b - x) * (b - xn) / (sx * sx * dt);
                        if (q < 30.0 && q > 0.0) {
                            if (rng.uniform() < std::exp(-q)) {
                                target = b;
                                frac = 0.5;
                            }
                        }
                    }
                    if (!std::isnan(target)) {
                        val = std::exp(-(D + r_here * frac * dt)) * g(target);
                        hit = true;
                        break;
                    }
                    if (absorbed) break;  // stuck off target: contributes nothing
                    D += r_here * dt;
                    x = xn;
                }
                acc += val;
                any_trunc |= !hit;
            }
            best.value = acc / reps;
            best.truncated = any_trunc;
            return best;
        };
        Estimate e = detail::run_paths(cfg, one_path);
        e.truncation_bound = std::exp(-spec.rate_min() * T);
        if (e.truncated_fraction > 0.5 &&
            e.truncation_bound > 1e-3 * (std::abs(e.mean) + 1e-300))
            throw HorizonExhausted("estimate_stopping_value: most paths exhausted the "
                                   "horizon with a non-negligible discount tail");
        return e;
    });
}

// Value of singular reflection at b (Down keeps X <= b, Up keeps X >= b)
// under the g o dZ convention: the continuous part accrues g(b) dZ at the
// barrier, and an initial jump from x past b accrues the jump integral.
enum class Direction { Down, Up };

inline Estimate estimate_reflected_value(const DiffusionSpec& spec, const PayoffFn& g,
                                         double x0, double b, const SimConfig& cfg,
                                         Direction direction) {
    const double T = detail::default_horizon(spec, cfg);
    const double dt = cfg.step;
    const double sqdt = std::sqrt(dt);
    const std::size_t nsteps = std::size_t(T / dt);
    const Discount disc = spec.discount;
    const double gb = g(b);

    // initial jump integral: int_0^{|x0-b|} g(x0 -/+ u) du
    double initial = 0.0;
    double start = x0;
    if (direction == Direction::Down && x0 > b) {
        initial = integrate([&](double v) { return g(v); }, b, x0, 1e-10);
        start = b;
    } else if (direction == Direction::Up && x0 < b) {
        initial = integrate([&](double v) { return g(v); }, x0, b, 1e-10);
        start = b;
    }

    return detail::dispatch_coeffs(spec, [&](auto&& mu, auto&& sg) {
        auto one_path = [&](std::uint64_t idx) -> detail::PathOut {
            const int reps = cfg.antithetic ? 2 : 1;
            double acc = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                detail::Xoshiro256pp rng(cfg.base_seed, idx);
                detail::NormalSampler nd;
                const double sign = (rep == 0) ? 1.0 : -1.0;
                double x = start, D = 0.0, val = initial;
                bool absorbed = false;
                for (std::size_t k = 0; k < nsteps; ++k) {
                    const double z = sign * nd(rng);
                    double xn = x + mu(x) * dt + sg(x) * sqdt * z;
                    D += disc(x) * dt;
                    if (direction == Direction::Down && xn > b) {
                        val += std::exp(-D) * gb * (xn - b);
                        xn = b;
                    } else if (direction == Direction::Up && xn < b) {
                        val += std::exp(-D) * gb * (b - xn);
                        xn = b;
                    }
                    if (!detail::apply_boundaries(spec, xn, absorbed)) break;
                    if (absorbed) break;
                    x = xn;
                }
                acc += val;
            }
            detail::PathOut o;
            o.value = acc / reps;
            o.truncated = true;  // reflected paths always run to the horizon
            return o;
        };
        Estimate e = detail::run_paths(cfg, one_path);
        const double scale = std::abs(gb) * (1.0 + std::abs(b)) / std::max(spec.rate_min(), 1e-9);
        e.truncation_bound = std::exp(-spec.rate_min() * T) * scale;
        if (e.truncation_bound > 1e-3 * (std::abs(e.mean) + 1e-300))
            throw HorizonExhausted(
                "estimate_reflected_value: discounted tail bound above 1e-3 of the mean");
        e.truncated_fraction = 0.0;  // truncation is inherent; the bound is reported
        return e;
    });
}

// Impulse control (tau_b; zeta): whenever X hits the trigger b from below it
// jumps to b - zeta, accruing the jump integral each time.
inline Estimate estimate_impulse_value(const DiffusionSpec& spec, const PayoffFn& g,
                                       double x0, double b, double zeta,
                                       const SimConfig& cfg) {
    if (!(b - zeta > 0.0))
        throw ValidationError("estimate_impulse_value: jump target must stay interior");
    const double T = detail::default_horizon(spec, cfg);
    const double dt = cfg.step;
    const double sqdt = std::sqrt(dt);
    const std::size_t nsteps = std::size_t(T / dt);
    const Discount disc = spec.discount;
    const double J =
        zeta > 0.0 ? integrate([&](double v) { return g(v); }, b - zeta, b, 1e-10) : 0.0;

    return detail::dispatch_coeffs(spec, [&](auto&& mu, auto&& sg) {
        auto one_path = [&](std::uint64_t idx) -> detail::PathOut {
            const int reps = cfg.antithetic ? 2 : 1;
            double acc = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                detail::Xoshiro256pp rng(cfg.base_seed, idx);
                detail::NormalSampler nd;
                const double sign = (rep == 0) ? 1.0 : -1.0;
                double x = x0 > b ? b - zeta : x0;
                double D = 0.0, val = x0 > b ? std::exp(0.0) * J : 0.0;
                bool absorbed = false;
                for (std::size_t k = 0; k < nsteps; ++k) {
                    const double sx = sg(x);
                    const double z = sign * nd(rng);
                    double xn = x + mu(x) * dt + sx * sqdt * z;
                    const double r_here = disc(x);
                    bool trigger = xn >= b;
                    double frac = trigger && std::abs(xn - x) > 0.0 ? (b - x) / (xn - x) : 1.0;
                    if (!trigger) {
                        // bridge correction for the single trigger threshold
                        const double q = 2.0 * (b - x) * (b - xn) / (sx * sx * dt);
                        if (q < 30.0 && q > 0.0 && rng.uniform() < std::exp(-q)) {
                            trigger = true;
                            frac = 0.5;
                        }
                    }
                    if (trigger) {
                        val += std::exp(-(D + r_here * frac * dt)) * J;
                        xn = b - zeta;
                    }
                    D += r_here * dt;
                    if (!detail::apply_boundaries(spec, xn, absorbed)) break;
                    if (absorbed) break;
                    x = xn;
                }
                acc += val;
            }
            detail::PathOut o;
            o.value = acc / reps;
            o.truncated = true;
            return o;
        };
        Estimate e = detail::run_paths(cfg, one_path);
        const double scale = std::abs(J) / std::max(spec.rate_min() * 0.1, 1e-9);
        e.truncation_bound = std::exp(-spec.rate_min() * T) * scale;
        if (e.truncation_bound > 1e-3 * (std::abs(e.mean) + 1e-300))
            throw HorizonExhausted(
                "estimate_impulse_value: discounted tail bound above 1e-3 of the mean");
        e.truncated_fraction = 0.0;
        return e;
    });
}

// E[exp(-int_0^{tau_b} rate(X) ds)] with a possibly signed rate (associated
// problems use r - mu').  Paths whose exponent leaves [-700, 700] are
// discarded and counted.
inline Estimate estimate_discount_functional(const DiffusionSpec& spec, double x0,
                                             double b, const SimConfig& cfg) {
    const double T = cfg.horizon > 0.0 ? cfg.horizon
                                       : (spec.rate_min() > 1e-9 ? 20.0 / spec.rate_min() : 50.0);
    const double dt = cfg.step;
    const double sqdt = std::sqrt(dt);
    const std::size_t nsteps = std::size_t(T / dt);
    const Discount disc = spec.discount;

    if (x0 == b) {
        Estimate e;
        e.mean = 1.0;
        e.std_error = 0.0;
        e.paths_used = cfg.paths;
        return e;
    }

    return detail::dispatch_coeffs(spec, [&](auto&& mu, auto&& sg) {
        auto one_path = [&](std::uint64_t idx) -> detail::PathOut {
            detail::PathOut o;
            const int reps = cfg.antithetic ? 2 : 1;
            double acc = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                detail::Xoshiro256pp rng(cfg.base_seed, idx);
                detail::NormalSampler nd;
                const double sign = (rep == 0) ? 1.0 : -1.0;
                double x = x0, E = 0.0, val = 0.0;
                bool hit = false, absorbed = false;
                for (std::size_t k = 0; k < nsteps; ++k) {
                    const double sx = sg(x);
                    const double z = sign * nd(rng);
                    double xn = x + mu(x) * dt + sx * sqdt * z;
                    const double r_here = disc(x);
                    bool crossed = (x < b && xn >= b) || (x > b && xn <= b);
                    double frac = crossed && std::abs(xn - x) > 0.0 ? (b - x) / (xn - x) : 1.0;
                    if (!crossed) {
                        const double q = 2.0 * (b - x) * (b - xn) / (sx * sx * dt);
                        if (q < 30.0 && q > 0.0 && rng.uniform() < std::exp(-q)) {
                            crossed = true;
                            frac = 0.5;
                        }
                    }
                    if (crossed) {
                        val = std::exp(-(E + r_here * frac * dt));
                        hit = true;
                        break;
                    }
                    E += r_here * dt;
                    if (std::abs(E) > 700.0) {
                        o.discarded = true;
                        return o;
                    }
                    if (!detail::apply_boundaries(spec, xn, absorbed)) break;
                    if (absorbed) break;
                    x = xn;
                }
                acc += val;
                o.truncated |= !hit;
            }
            o.value = acc / reps;
            return o;
        };
        Estimate e = detail::run_paths(cfg, one_path);
        e.truncation_bound = std::exp(-std::max(spec.rate_min(), 0.0) * T);
        if (e.truncated_fraction > 0.5 &&
            e.truncation_bound > 1e-3 * (std::abs(e.mean) + 1e-300))
            throw MCNonConvergence(
                "estimate_discount_functional: the hitting time was not reached on most "
                "paths and the remaining discount weight is not negligible");
        return e;
    });
}

// Time-integral estimator E[int e^{-int r} pi(X_s) ds], optionally along a
// reflected (controlled) path.
inline Estimate estimate_running_payoff(const DiffusionSpec& spec, const PayoffFn& pi,
                                        double x0, const SimConfig& cfg,
                                        const std::optional<std::pair<Direction, double>>&
                                            control = std::nullopt) {
    const double T = detail::default_horizon(spec, cfg);
    const double dt = cfg.step;
    const double sqdt = std::sqrt(dt);
    const std::size_t nsteps = std::size_t(T / dt);
    const Discount disc = spec.discount;

    return detail::dispatch_coeffs(spec, [&](auto&& mu, auto&& sg) {
        auto one_path = [&](std::uint64_t idx) -> detail::PathOut {
            const int reps = cfg.antithetic ? 2 : 1;
            double acc = 0.0;
            for (int rep = 0; rep < reps; ++rep) {
                detail::Xoshiro256pp rng(cfg.base_seed, idx);
                detail::NormalSampler nd;
                const double sign = (rep == 0) ? 1.0 : -1.0;
                double x = x0, D = 0.0, val = 0.0;
                if (control && control->first == Direction::Down && x > control->second)
                    x = control->second;
                if (control && control->first == Direction::Up && x < control->second)
                    x = control->second;
                bool absorbed = false;
                for (std::size_t k = 0; k < nsteps; ++k) {
                    val += std::exp(-D) * pi(x) * dt;
                    const double z = sign * nd(rng);
                    double xn = x + mu(x) * dt + sg(x) * sqdt * z;
                    D += disc(x) * dt;
                    if (control) {
                        if (control->first == Direction::Down && xn > control->second)
                            xn = control->second;
                        if (control->first == Direction::Up && xn < control->second)
                            xn = control->second;
                    }
                    if (!detail::apply_boundaries(spec, xn, absorbed)) break;
                    if (absorbed) break;
                    x = xn;
                }
                acc += val;
            }
            detail::PathOut o;
            o.value = acc / reps;
            o.truncated = true;
            return o;
        };
        Estimate e = detail::run_paths(cfg, one_path);
        e.truncated_fraction = 0.0;
        e.truncation_bound = std::exp(-spec.rate_min() * T) / std::max(spec.rate_min(), 1e-9);
        if (e.truncation_bound > 1e-3 * (std::abs(e.mean) + 1e-300))
            throw HorizonExhausted(
                "estimate_running_payoff: discounted tail bound above 1e-3 of the mean");
        return e;
    });
}

}  // namespace bsol::mc
