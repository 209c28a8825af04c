#ifndef JFDL_VE_HPP
#define JFDL_VE_HPP

#include <cmath>
#include <cstdint>

#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

/// Variance-exploding noise schedule sigma(t) = sigma_max * t on t in [0,1].
/// Everything downstream works with the dimensionless time t; sigma is derived.
struct VEScheme {
    double sigma_max = 80.0;
    double sigma_data = 1.0;

    VEScheme() = default;
    VEScheme(double smax, double sdata) : sigma_max(smax), sigma_data(sdata) {
        if (smax < 1.0) throw ConfigError("VEScheme: sigma_max must be >= 1");
        if (sdata <= 0.0) throw ConfigError("VEScheme: sigma_data must be > 0");
    }

    double sigma(double t) const {
        if (t < 0.0 || t > 1.0) throw DomainError("sigma: t must be in [0,1]");
        return sigma_max * t;
    }

    double t_of_sigma(double s) const { return s / sigma_max; }

    /// x_t = x0 + sigma(t) * z.
    Vec2 noisify(Vec2 x0, double t, Vec2 z) const { return x0 + sigma(t) * z; }

    /// Conditional vector field u_t(x_t | x0) = (x_t - x0) / t under VE
    /// (mu_t(x) = x, sigma_t' / sigma_t = 1/t). Equals sigma_max * z whenever
    /// x_t = x0 + sigma_t z.
    Vec2 cvf(Vec2 x_t, Vec2 x0, double t) const {
        if (t <= 0.0) throw DomainError("cvf: singular at t = 0");
        if (t > 1.0) throw DomainError("cvf: t must be in (0,1]");
        return (x_t - x0) / t;
    }

    /// Point on the probability path joining y_anchor (at tau=0) to the class
    /// path of x0c: mu_tau = y + (x0c - y) * tau / t, plus sigma_max*tau*z.
    /// At tau=t with the same z this is exactly noisify(x0c, t, z); at tau=1,
    /// z=0 it is the mixed-signal.
    Vec2 probability_path_point(Vec2 y_anchor, Vec2 x0c, double t, double tau, Vec2 z) const {
        if (t <= 0.0 || t > 1.0) throw DomainError("probability_path_point: t must be in (0,1]");
        if (tau < 0.0 || tau > 1.0) throw DomainError("probability_path_point: tau must be in [0,1]");
        Vec2 mu = y_anchor + (x0c - y_anchor) * (tau / t);
        return mu + (sigma_max * tau) * z;
    }
};

/// Classifier-free-guidance extrapolation of two denoising directions.
inline Vec2 cfg_extrapolate(Vec2 u_cls, Vec2 u_null, double omega) {
    if (omega < 1.0) throw DomainError("cfg_extrapolate: omega must be >= 1");
    return omega * u_cls + (1.0 - omega) * u_null;
}

/// Consecutive noise indices with r < t.
struct TimePair {
    double t = 0.0;
    double r = 0.0;
};

/// Consistency-training gap schedule: Delta = sigma_t / q^stage, shrinking by
/// a factor of q per stage until q^stage reaches final_factor (= 256).
struct StageSchedule {
    int q = 2;
    int stage = 0;
    int final_factor = 256;

    StageSchedule() = default;
    StageSchedule(int q_, int stage_, int final_factor_ = 256)
        : q(q_), stage(stage_), final_factor(final_factor_) {
        if (q < 2) throw ConfigError("StageSchedule: q must be >= 2");
        if (stage < 0) throw ConfigError("StageSchedule: stage must be >= 0");
    }

    double factor() const {
        double f = 1.0;
        for (int i = 0; i < stage; ++i) f *= q;
        return f;
    }

    int num_stages() const {
        // Smallest n with q^n >= final_factor; 256 is exact for q in {2,4,16}.
        int n = 0;
        double f = 1.0;
        while (f < final_factor) {
            f *= q;
            ++n;
        }
        return n;
    }
};

/// Draws sigma_t ~ Lognormal(P_mean, P_std) (resampled while above sigma_max,
/// keeping the distribution shape) and pairs it with sigma_r = sigma_t - Delta,
/// Delta = sigma_t / q^stage, clamped at zero. Returns (t, r) = sigmas/sigma_max.
inline TimePair sample_time_pair(double p_mean, double p_std, const StageSchedule& stage,
                                 const VEScheme& scheme, Rng& rng) {
    if (p_std <= 0.0) throw ConfigError("sample_time_pair: P_std must be > 0");
    double sigma_t = 0.0;
    do {
        sigma_t = std::exp(p_mean + p_std * rng.normal());
    } while (sigma_t > scheme.sigma_max);
    double sigma_r = sigma_t - sigma_t / stage.factor();
    if (sigma_r < 0.0) sigma_r = 0.0;
    return {sigma_t / scheme.sigma_max, sigma_r / scheme.sigma_max};
}

} // namespace jfdl

#endif
