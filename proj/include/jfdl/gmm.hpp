#ifndef JFDL_GMM_HPP
#define JFDL_GMM_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "jfdl/dataset.hpp"
#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/ve.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

/// Isotropic Gaussian mixture with a class label per component. Under VE noise
/// at level sigma, every component variance widens to (sigma_k^2 + sigma^2) I,
/// so densities, scores and class posteriors stay closed-form at every t.
class GaussianMixture {
  public:
    struct Component {
        double weight = 1.0;
        Vec2 mean;
        double sigma = 1.0;
        int cls = 0;
    };

    GaussianMixture(std::vector<Component> comps, int n_classes)
        : comps_(std::move(comps)), n_classes_(n_classes) {
        if (comps_.empty()) throw ConfigError("GaussianMixture: no components");
        double total = 0.0;
        for (const auto& c : comps_) {
            if (c.weight <= 0.0) throw ConfigError("GaussianMixture: weights must be > 0");
            if (c.sigma <= 0.0) throw ConfigError("GaussianMixture: component sigma must be > 0");
            if (c.cls < 0 || c.cls >= n_classes_)
                throw ConfigError("GaussianMixture: component class out of range");
            total += c.weight;
        }
        for (auto& c : comps_) c.weight /= total;
        class_prior_.assign(static_cast<size_t>(n_classes_), 0.0);
        for (const auto& c : comps_) class_prior_[static_cast<size_t>(c.cls)] += c.weight;
        for (int c = 0; c < n_classes_; ++c)
            if (class_prior_[static_cast<size_t>(c)] <= 0.0)
                throw ConfigError("GaussianMixture: class with no components");
    }

    /// Exact 4-blob mixture of the Appendix-style Gaussian dataset.
    static GaussianMixture blobs(double sigma_k = 0.3) {
        std::vector<Component> cs;
        for (int c = 0; c < 4; ++c) cs.push_back({1.0, blob_center(c), sigma_k, c});
        return GaussianMixture(std::move(cs), 4);
    }

    /// KDE-style exact mixture of a point set: one component per point with
    /// bandwidth equal to the generation jitter. Keeps spiral/circle oracles
    /// closed-form.
    static GaussianMixture kde(const std::vector<LabeledPoint2D>& points, double bandwidth) {
        if (bandwidth <= 0.0) throw ConfigError("GaussianMixture::kde: bandwidth must be > 0");
        std::vector<Component> cs;
        cs.reserve(points.size());
        int n_classes = dataset_num_classes(points);
        for (const auto& p : points) cs.push_back({1.0, p.x, bandwidth, p.label});
        return GaussianMixture(std::move(cs), n_classes);
    }

    /// Canonical analytic oracle for a dataset kind: exact mixture for blobs,
    /// KDE fit of a generated sample for spiral/circle.
    static GaussianMixture oracle_for(DatasetKind kind, uint64_t seed, int kde_points = 1000) {
        if (kind == DatasetKind::Blobs) return blobs();
        auto spec = DatasetSpec::defaults(kind, kde_points, seed);
        return kde(generate(spec), spec.noise_sigma);
    }

    int num_classes() const { return n_classes_; }
    const std::vector<Component>& components() const { return comps_; }
    double class_prior(int c) const { return class_prior_.at(static_cast<size_t>(c)); }

    /// log p_sigma(x), the mixture density widened by noise level sigma.
    double log_density(Vec2 x, double sigma) const {
        return logsumexp_over(x, sigma, -1);
    }

    double log_density_cond(Vec2 x, double sigma, int cls) const {
        check_class(cls);
        // Conditional mixture renormalizes by the class prior.
        return logsumexp_over(x, sigma, cls) - std::log(class_prior(cls));
    }

    /// grad_x log p_t(x) with per-component variance sigma_k^2 + sigma(t)^2.
    Vec2 score_uncond(Vec2 x, double t, const VEScheme& scheme) const {
        return score_sigma(x, scheme.sigma(t), -1);
    }

    Vec2 score_cond(Vec2 x, double t, int cls, const VEScheme& scheme) const {
        check_class(cls);
        return score_sigma(x, scheme.sigma(t), cls);
    }

    /// grad_x log p(c|x) = grad log p0(x|c) - grad log p0(x) at the clean level.
    Vec2 class_posterior_grad(Vec2 x, int cls) const {
        check_class(cls);
        return score_sigma(x, 0.0, cls) - score_sigma(x, 0.0, -1);
    }

    /// Score at an explicit noise level sigma; cls < 0 means unconditional.
    Vec2 score_sigma(Vec2 x, double sigma, int cls) const {
        // Responsibility-weighted sum of per-component Gaussian scores,
        // computed with a shared log-sum-exp shift.
        double max_lp = -std::numeric_limits<double>::infinity();
        lp_.resize(comps_.size());
        for (size_t k = 0; k < comps_.size(); ++k) {
            const auto& c = comps_[k];
            if (cls >= 0 && c.cls != cls) {
                lp_[k] = -std::numeric_limits<double>::infinity();
                continue;
            }
            double var = c.sigma * c.sigma + sigma * sigma;
            double d2 = (x - c.mean).norm2();
            lp_[k] = std::log(c.weight) - 0.5 * d2 / var - std::log(var);
            max_lp = std::max(max_lp, lp_[k]);
        }
        double z = 0.0;
        Vec2 acc{0.0, 0.0};
        for (size_t k = 0; k < comps_.size(); ++k) {
            if (!(lp_[k] > -std::numeric_limits<double>::infinity())) continue;
            const auto& c = comps_[k];
            double var = c.sigma * c.sigma + sigma * sigma;
            double w = std::exp(lp_[k] - max_lp);
            z += w;
            acc += (w / var) * (c.mean - x);
        }
        return acc / z;
    }

    /// Draws (x, class) from the clean mixture.
    LabeledPoint2D sample(Rng& rng) const {
        double u = rng.uniform();
        double cum = 0.0;
        size_t pick = comps_.size() - 1;
        for (size_t k = 0; k < comps_.size(); ++k) {
            cum += comps_[k].weight;
            if (u < cum) {
                pick = k;
                break;
            }
        }
        const auto& c = comps_[pick];
        Vec2 x = c.mean + Vec2{rng.normal(0.0, c.sigma), rng.normal(0.0, c.sigma)};
        return {x, c.cls};
    }

    LabeledPoint2D sample_class(int cls, Rng& rng) const {
        check_class(cls);
        // Rejection over components of the class, proportional to weight.
        double total = class_prior(cls);
        double u = rng.uniform() * total;
        double cum = 0.0;
        const Component* pick = nullptr;
        for (const auto& c : comps_) {
            if (c.cls != cls) continue;
            cum += c.weight;
            pick = &c;
            if (u < cum) break;
        }
        Vec2 x = pick->mean + Vec2{rng.normal(0.0, pick->sigma), rng.normal(0.0, pick->sigma)};
        return {x, cls};
    }

  private:
    void check_class(int cls) const {
        if (cls < 0 || cls >= n_classes_) throw DomainError("GaussianMixture: unknown class");
    }

    double logsumexp_over(Vec2 x, double sigma, int cls) const {
        constexpr double kLog2Pi = 1.8378770664093454835606594728112;
        double max_lp = -std::numeric_limits<double>::infinity();
        lp_.resize(comps_.size());
        for (size_t k = 0; k < comps_.size(); ++k) {
            const auto& c = comps_[k];
            if (cls >= 0 && c.cls != cls) {
                lp_[k] = -std::numeric_limits<double>::infinity();
                continue;
            }
            double var = c.sigma * c.sigma + sigma * sigma;
            double d2 = (x - c.mean).norm2();
            lp_[k] = std::log(c.weight) - 0.5 * d2 / var - std::log(var) - kLog2Pi;
            max_lp = std::max(max_lp, lp_[k]);
        }
        double z = 0.0;
        for (double v : lp_)
            if (v > -std::numeric_limits<double>::infinity()) z += std::exp(v - max_lp);
        return max_lp + std::log(z);
    }

    std::vector<Component> comps_;
    int n_classes_ = 0;
    std::vector<double> class_prior_;
    mutable std::vector<double> lp_; // scratch, sized once
};

enum class Integrator { Heun, Rk4 };

/// Fixed-step integration of the PF-ODE dx/dsigma = -sigma * grad log
/// p_sigma(x | c) between noise levels, uniform steps in sigma. cls < 0 solves
/// the unconditional flow. Supports both directions.
inline Vec2 integrate_pf_ode(const GaussianMixture& gm, Vec2 x, double sigma_from, double sigma_to,
                             int cls, Integrator method, int n_steps) {
    if (n_steps < 1) throw ConfigError("integrate_pf_ode: n_steps must be >= 1");
    auto f = [&](Vec2 p, double sigma) { return -sigma * gm.score_sigma(p, sigma, cls); };
    double h = (sigma_to - sigma_from) / n_steps;
    double s = sigma_from;
    for (int i = 0; i < n_steps; ++i) {
        if (method == Integrator::Heun) {
            Vec2 k1 = f(x, s);
            Vec2 xe = x + h * k1;
            Vec2 k2 = f(xe, s + h);
            x = x + (h * 0.5) * (k1 + k2);
        } else {
            Vec2 k1 = f(x, s);
            Vec2 k2 = f(x + (h * 0.5) * k1, s + 0.5 * h);
            Vec2 k3 = f(x + (h * 0.5) * k2, s + 0.5 * h);
            Vec2 k4 = f(x + h * k3, s + h);
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        s += h;
        if (!x.finite()) throw NumericError("integrate_pf_ode: state diverged");
    }
    return x;
}

} // namespace jfdl

#endif
