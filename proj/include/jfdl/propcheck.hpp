#ifndef JFDL_PROPCHECK_HPP
#define JFDL_PROPCHECK_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/gmm.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/solver.hpp"
#include "jfdl/twosample.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

struct MarginalTestResult {
    double t = 0.0;
    double energy_distance = 0.0;
    double permutation_threshold = 0.0;
    bool pass = false;
    int n = 0;
};

/// Empirical check of the marginal-preservation property: the pooled hybrid
/// anchors y0 = Solver_{t->0}^null(Solver_{0->t}^c(x0)) over (c, x0) ~ p0 must
/// match a fresh data sample. With skip_null_transport the backward transport
/// is omitted (negative control: the noisy-level marginal is not the data).
inline MarginalTestResult check_prop1(const SolverHandle& oracle, const GaussianMixture& gm,
                                      double t, int n, Rng& rng, int rounds = 200,
                                      bool skip_null_transport = false) {
    if (n < 1000) throw DomainError("check_prop1: need n >= 1000");
    std::vector<Vec2> hybrid(static_cast<size_t>(n));
    std::vector<Vec2> fresh(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        LabeledPoint2D p = gm.sample(rng);
        Vec2 up = oracle.transport(p.x, 0.0, t, p.label);
        hybrid[static_cast<size_t>(i)] = skip_null_transport ? up : oracle.transport(up, t, 0.0, -1);
    }
    for (int i = 0; i < n; ++i) fresh[static_cast<size_t>(i)] = gm.sample(rng).x;
    auto perm = energy_permutation_test(hybrid, fresh, rounds, rng);
    return {t, perm.statistic, perm.threshold, perm.pass, n};
}

struct TaylorFitResult {
    std::vector<double> t_values;
    std::vector<double> residual_norms;
    std::vector<bool> used; // below-noise-floor points are excluded
    double fitted_slope = 0.0;
    double slope_ci_lo = 0.0, slope_ci_hi = 0.0;
    double noise_floor_max = 0.0;
    bool conclusive = false;
};

/// Compares the mixed-signal g(t) = y0_null_t + (x0c - y0_null_t)/t against
/// the second-order model m(t) = x0c + (sigma_max sigma_t / 2) grad log
/// p(c|x0c). Under the marginal-preserving transport dx/dsigma = -sigma grad
/// log p the hybrid flow satisfies f(t) = x0c - (sigma_t^2/2) grad log
/// p(c|x0c) + O(sigma_t^4), so the residual scales ~ t^2; with the sign of
/// the gradient term flipped it degrades to ~ t (first-order mismatch).
inline TaylorFitResult check_prop2(const SolverHandle& oracle, const GaussianMixture& gm, int cls,
                                   Vec2 x0c, const std::vector<double>& t_values,
                                   bool flip_sign = false) {
    if (t_values.size() < 3) throw DomainError("check_prop2: need >= 3 t values");
    for (size_t i = 1; i < t_values.size(); ++i)
        if (t_values[i] <= t_values[i - 1])
            throw DomainError("check_prop2: t values must be strictly increasing");

    double sigma_max = oracle.scheme().sigma_max;
    Vec2 grad = gm.class_posterior_grad(x0c, cls);
    double sign = flip_sign ? -1.0 : 1.0;

    TaylorFitResult res;
    res.t_values = t_values;
    for (double t : t_values) {
        Vec2 y = oracle.hybrid_anchor(x0c, t, cls);
        Vec2 g = y + (x0c - y) / t;
        Vec2 m = x0c + sign * (0.5 * sigma_max * oracle.scheme().sigma(t)) * grad;
        res.residual_norms.push_back((g - m).norm());

        // Integrator-noise floor: round-trip error of the class flow,
        // amplified the same way the anchor error enters g (factor 1 + 1/t).
        Vec2 rt = oracle.transport(oracle.transport(x0c, 0.0, t, cls), t, 0.0, cls);
        double floor = 10.0 * (rt - x0c).norm() * (1.0 + 1.0 / t);
        res.used.push_back(res.residual_norms.back() > floor);
        res.noise_floor_max = std::max(res.noise_floor_max, floor);
    }

    // Least-squares slope of log residual vs log t over usable points.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int k = 0;
    for (size_t i = 0; i < t_values.size(); ++i) {
        if (!res.used[i] || res.residual_norms[i] <= 0.0) continue;
        double x = std::log(t_values[i]), y = std::log(res.residual_norms[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++k;
    }
    if (k < 3) {
        res.conclusive = false; // residuals dominated by integrator error
        return res;
    }
    double denom = sxx - sx * sx / k;
    res.fitted_slope = (sxy - sx * sy / k) / denom;
    double intercept = (sy - res.fitted_slope * sx) / k;
    double sse = 0.0;
    for (size_t i = 0; i < t_values.size(); ++i) {
        if (!res.used[i] || res.residual_norms[i] <= 0.0) continue;
        double x = std::log(t_values[i]), y = std::log(res.residual_norms[i]);
        double e = y - (intercept + res.fitted_slope * x);
        sse += e * e;
    }
    double se = k > 2 ? std::sqrt(sse / (k - 2) / denom) : 0.0;
    res.slope_ci_lo = res.fitted_slope - 2.0 * se;
    res.slope_ci_hi = res.fitted_slope + 2.0 * se;
    res.conclusive = true;
    return res;
}

struct FirstDerivativeCheck {
    double t = 0.0, h = 0.0;
    Vec2 finite_difference;
    Vec2 analytic; // -sigma_t * grad log p(c | x_t) with J_t ~ I near t = 0
    double cosine = 0.0;
    double rel_err = 0.0;
    bool cancellation = false;
};

/// Central-difference derivative of the hybrid flow f(t) against the analytic
/// small-t expression -sigma_max sigma_t J_t grad log p(c|x_t), with the
/// Jacobian of the backward flow approximated by the identity.
inline FirstDerivativeCheck check_first_derivative(const SolverHandle& oracle,
                                                   const GaussianMixture& gm, Vec2 x0c, int cls,
                                                   double t, double h) {
    if (t - h <= 0.0) throw DomainError("check_first_derivative: need t - h > 0");
    FirstDerivativeCheck out;
    out.t = t;
    out.h = h;
    Vec2 fp = oracle.hybrid_anchor(x0c, t + h, cls);
    Vec2 fm = oracle.hybrid_anchor(x0c, t - h, cls);
    out.finite_difference = (fp - fm) / (2.0 * h);

    const VEScheme& scheme = oracle.scheme();
    Vec2 x_t = oracle.transport(x0c, 0.0, t, cls);
    Vec2 post_grad = gm.score_cond(x_t, t, cls, scheme) - gm.score_uncond(x_t, t, scheme);
    out.analytic = -scheme.sigma_max * scheme.sigma(t) * post_grad;

    double na = out.analytic.norm(), nf = out.finite_difference.norm();
    out.cosine = (na > 0.0 && nf > 0.0) ? out.finite_difference.dot(out.analytic) / (na * nf) : 0.0;
    out.rel_err = na > 0.0 ? (out.finite_difference - out.analytic).norm() / na : nf;

    // Flag when the difference quotient sits at the integrator-error scale.
    Vec2 rt = oracle.transport(oracle.transport(x0c, 0.0, t, cls), t, 0.0, cls);
    out.cancellation = nf < 10.0 * (rt - x0c).norm() / (2.0 * h);
    return out;
}

inline void write_prop1_csv(const std::string& path, const std::vector<MarginalTestResult>& rows,
                            const std::string& dataset, uint64_t seed) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write: " + path);
    f << "dataset,seed,t,energy_distance,permutation_threshold,pass,n\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%llu,%.10g,%.10g,%.10g,%d,%d\n", dataset.c_str(),
                      static_cast<unsigned long long>(seed), r.t, r.energy_distance,
                      r.permutation_threshold, r.pass ? 1 : 0, r.n);
        f << buf;
    }
}

inline void write_prop2_csv(const std::string& path, const TaylorFitResult& res,
                            const std::string& dataset, Vec2 x0c, int cls) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write: " + path);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "# dataset=%s x0=(%.10g,%.10g) class=%d slope=%.6g ci=[%.6g,%.6g] conclusive=%d\n",
                  dataset.c_str(), x0c.x, x0c.y, cls, res.fitted_slope, res.slope_ci_lo,
                  res.slope_ci_hi, res.conclusive ? 1 : 0);
    f << buf;
    f << "t,residual_norm,used\n";
    for (size_t i = 0; i < res.t_values.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%d\n", res.t_values[i],
                      res.residual_norms[i], res.used[i] ? 1 : 0);
        f << buf;
    }
}

} // namespace jfdl

#endif
