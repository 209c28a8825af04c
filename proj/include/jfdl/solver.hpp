#ifndef JFDL_SOLVER_HPP
#define JFDL_SOLVER_HPP

#include <optional>
#include <utility>

#include "jfdl/errors.hpp"
#include "jfdl/gmm.hpp"
#include "jfdl/net.hpp"
#include "jfdl/ve.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

enum class SolverBackend { Analytic, DenoiserModel, ConsistencyModel };

inline const char* to_string(SolverBackend b) {
    switch (b) {
        case SolverBackend::Analytic: return "analytic";
        case SolverBackend::DenoiserModel: return "dm";
        case SolverBackend::ConsistencyModel: return "cm";
    }
    return "?";
}

/// Class-conditioned ODE transport (x, t -> s, c) -> x'. The class argument
/// uses -1 for the unconditional / null path. Analytic backends integrate the
/// exact mixture PF-ODE in either direction; trained backends only solve
/// towards data (s = 0): the denoiser drives dx/dsigma = (x - D)/sigma, the
/// consistency model maps in one evaluation.
class SolverHandle {
  public:
    static SolverHandle analytic(const GaussianMixture& gm, const VEScheme& scheme,
                                 Integrator integrator = Integrator::Heun, int n_steps = 128) {
        SolverHandle s;
        s.backend_ = SolverBackend::Analytic;
        s.gm_ = &gm;
        s.scheme_ = scheme;
        s.integrator_ = integrator;
        s.n_steps_ = n_steps;
        return s;
    }

    static SolverHandle denoiser(const Net& net, const ModelParams& params, const VEScheme& scheme,
                                 Integrator integrator = Integrator::Heun, int n_steps = 64) {
        SolverHandle s;
        s.backend_ = SolverBackend::DenoiserModel;
        s.net_ = &net;
        s.params_ = &params;
        s.scheme_ = scheme;
        s.integrator_ = integrator;
        s.n_steps_ = n_steps;
        return s;
    }

    static SolverHandle consistency(const Net& net, const ModelParams& params,
                                    const VEScheme& scheme) {
        SolverHandle s;
        s.backend_ = SolverBackend::ConsistencyModel;
        s.net_ = &net;
        s.params_ = &params;
        s.scheme_ = scheme;
        s.n_steps_ = 1;
        return s;
    }

    SolverBackend backend() const { return backend_; }
    int n_steps() const { return n_steps_; }
    void set_steps(Integrator integrator, int n_steps) {
        integrator_ = integrator;
        n_steps_ = n_steps;
    }
    const VEScheme& scheme() const { return scheme_; }

    /// Transports x from noise level t to level s along the class-c flow
    /// (c = -1: unconditional).
    Vec2 transport(Vec2 x, double t, double s, int cls) const {
        if (t < 0.0 || t > 1.0 || s < 0.0 || s > 1.0)
            throw DomainError("transport: t, s must be in [0,1]");
        if (s == t) return x;
        switch (backend_) {
            case SolverBackend::Analytic:
                return integrate_pf_ode(*gm_, x, scheme_.sigma(t), scheme_.sigma(s), cls,
                                        integrator_, n_steps_);
            case SolverBackend::DenoiserModel: {
                if (s != 0.0)
                    throw CapabilityError("transport: denoiser backend solves t -> 0 only");
                return integrate_denoiser(x, scheme_.sigma(t), model_class(cls));
            }
            case SolverBackend::ConsistencyModel: {
                if (s != 0.0)
                    throw CapabilityError("transport: consistency backend solves t -> 0 only");
                return net_->forward(params_->values, x, t, model_class(cls), model_omega());
            }
        }
        throw StateError("transport: bad backend");
    }

    /// Unconditional anchor of a clean sample: forward class transport to t,
    /// then backward unconditional transport to 0. Needs a forward-capable
    /// (analytic) backend.
    Vec2 hybrid_anchor(Vec2 x0c, double t, int cls) const {
        Vec2 up = transport(x0c, 0.0, t, cls);
        return transport(up, t, 0.0, -1);
    }

    /// Anchor pair from an already-noisy point: (class anchor, null anchor).
    /// This is the variant available to backward-only (trained) solvers.
    std::pair<Vec2, Vec2> hybrid_anchor_from_noisy(Vec2 x_t, double t, int cls) const {
        Vec2 y_c = transport(x_t, t, 0.0, cls);
        Vec2 y_null = transport(x_t, t, 0.0, -1);
        return {y_c, y_null};
    }

  private:
    int model_class(int cls) const {
        if (cls < 0) return net_->arch().null_class();
        if (cls >= net_->arch().null_class())
            throw DomainError("transport: class out of range for model");
        return cls;
    }

    // Guided models act as plain solvers at omega = 1.
    std::optional<double> model_omega() const {
        return net_->arch().guidance_embed ? std::optional<double>(1.0) : std::nullopt;
    }

    Vec2 integrate_denoiser(Vec2 x, double sigma_from, int model_cls) const {
        // dx/dsigma = (x - D(x, sigma)) / sigma, with the limit 0 at sigma = 0.
        auto f = [&](Vec2 p, double sigma) -> Vec2 {
            if (sigma <= 0.0) return {0.0, 0.0};
            Vec2 d = net_->forward(params_->values, p, scheme_.t_of_sigma(sigma), model_cls,
                                   model_omega());
            return (p - d) / sigma;
        };
        double h = -sigma_from / n_steps_;
        double s = sigma_from;
        for (int i = 0; i < n_steps_; ++i) {
            if (integrator_ == Integrator::Heun) {
                Vec2 k1 = f(x, s);
                Vec2 k2 = f(x + h * k1, s + h);
                x = x + (h * 0.5) * (k1 + k2);
            } else {
                Vec2 k1 = f(x, s);
                Vec2 k2 = f(x + (h * 0.5) * k1, s + 0.5 * h);
                Vec2 k3 = f(x + (h * 0.5) * k2, s + 0.5 * h);
                Vec2 k4 = f(x + h * k3, s + h);
                x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            s += h;
            if (!x.finite()) throw NumericError("transport: denoiser flow diverged");
        }
        return x;
    }

    SolverBackend backend_ = SolverBackend::Analytic;
    Integrator integrator_ = Integrator::Heun;
    int n_steps_ = 128;
    const GaussianMixture* gm_ = nullptr;
    const Net* net_ = nullptr;
    const ModelParams* params_ = nullptr;
    VEScheme scheme_;
};

} // namespace jfdl

#endif
