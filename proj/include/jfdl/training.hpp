#ifndef JFDL_TRAINING_HPP
#define JFDL_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "jfdl/dataset.hpp"
#include "jfdl/errors.hpp"
#include "jfdl/net.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/solver.hpp"
#include "jfdl/ve.hpp"

namespace jfdl {

enum class LossKind { Dm, Ect, JfdlNaive, JfdlRandom };

inline const char* to_string(LossKind k) {
    switch (k) {
        case LossKind::Dm: return "dm";
        case LossKind::Ect: return "ect";
        case LossKind::JfdlNaive: return "jfdl_naive";
        case LossKind::JfdlRandom: return "jfdl_random";
    }
    return "?";
}

enum class WMode { InverseGap, Uniform };

struct TrainConfig {
    double lr = 1e-3;
    int batch_size = 64;
    int total_iters = 10000;
    double p_mean = -1.1;
    double p_std = 2.0;
    int q = 2;
    std::vector<int> stage_boundaries; // derived geometrically when empty
    double null_mask_prob = 0.2;
    double omega_max = 2.0;
    double ema_decay = 0.9993;
    uint64_t seed = 0;
    LossKind loss_kind = LossKind::Ect;
    double distance_c = -1.0; // < 0: derived as 0.03 * sqrt(d) * sigma_data
    WMode w_mode = WMode::InverseGap;

    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    double gradnorm_eps = 1e-8;
    double lambda_min = 0.1, lambda_max = 10.0;
    int metrics_every = 0; // 0: ~200 rows over the run

    void validate() const {
        if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be > 0");
        if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
        if (total_iters < 0) throw ConfigError("TrainConfig: total_iters must be >= 0");
        if (null_mask_prob < 0.0 || null_mask_prob > 1.0)
            throw ConfigError("TrainConfig: null_mask_prob must be in [0,1]");
        if (omega_max < 1.0) throw ConfigError("TrainConfig: omega_max must be >= 1");
        if (ema_decay < 0.0 || ema_decay >= 1.0)
            throw ConfigError("TrainConfig: ema_decay must be in [0,1)");
        if (p_std <= 0.0) throw ConfigError("TrainConfig: P_std must be > 0");
        for (size_t i = 1; i < stage_boundaries.size(); ++i)
            if (stage_boundaries[i] <= stage_boundaries[i - 1])
                throw ConfigError("TrainConfig: stage_boundaries must be strictly increasing");
    }

    double pseudo_huber_c(const VEScheme& scheme, int data_dim) const {
        if (distance_c >= 0.0) return distance_c;
        return 0.03 * std::sqrt(static_cast<double>(data_dim)) * scheme.sigma_data;
    }
};

/// Pseudo-Huber distance: nonnegative, zero iff x = y, monotone in |x - y|.
inline double pseudo_huber(Vec2 a, Vec2 b, double c) {
    return std::sqrt((a - b).norm2() + c * c) - c;
}

inline Vec2 pseudo_huber_grad_a(Vec2 a, Vec2 b, double c) {
    return (a - b) / std::sqrt((a - b).norm2() + c * c);
}

inline double loss_weight(WMode mode, double sigma_t, double sigma_r) {
    if (mode == WMode::Uniform) return 1.0;
    double gap = sigma_t - sigma_r;
    return gap > 0.0 ? 1.0 / gap : 1.0;
}

/// GradNorm balancing weight, measured at the designated output-head layer and
/// treated as a constant (no gradient flows through it).
inline double gradnorm_lambda(std::span<const double> grad_ect_head,
                              std::span<const double> grad_jfdl_head, double eps,
                              double lambda_min = 0.1, double lambda_max = 10.0) {
    double n1 = 0.0, n2 = 0.0;
    for (double g : grad_ect_head) n1 += g * g;
    for (double g : grad_jfdl_head) n2 += g * g;
    double lambda = std::sqrt(n1) / (std::sqrt(n2) + eps);
    return std::clamp(lambda, lambda_min, lambda_max);
}

struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    explicit AdamState(size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: size mismatch");
    state.step += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

struct LossReport {
    double total = 0.0;
    double l_ect = 0.0;
    double l_jfdl = 0.0;
    double lambda_gn = 0.0;
    double grad_norm_ect = 0.0;
    double grad_norm_jfdl = 0.0;
};

namespace detail {

inline double head_norm(const Net& net, std::span<const double> grads) {
    auto [lo, hi] = net.head_range();
    double acc = 0.0;
    for (size_t i = lo; i < hi; ++i) acc += grads[i] * grads[i];
    return std::sqrt(acc);
}

inline void check_finite_loss(double loss, const char* who) {
    if (!std::isfinite(loss)) throw NumericError(std::string(who) + ": non-finite loss");
}

} // namespace detail

/// Denoising loss (mean over the batch of w(t) |D(x_t,t,c) - x0|^2) with
/// null-class masking; w is the EDM unit-variance weight 1/c_out(sigma)^2.
/// Gradients accumulate into `grads` (caller zeroes).
inline double dm_loss(const Net& net, std::span<const double> params,
                      std::span<const LabeledPoint2D> batch, const VEScheme& scheme,
                      const TrainConfig& cfg, Rng& rng, std::span<double> grads) {
    if (batch.empty()) throw DomainError("dm_loss: empty batch");
    Tape tape;
    double loss = 0.0;
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const auto& item : batch) {
        double sigma_t;
        do {
            sigma_t = std::exp(cfg.p_mean + cfg.p_std * rng.normal());
        } while (sigma_t > scheme.sigma_max);
        double t = sigma_t / scheme.sigma_max;
        Vec2 z{rng.normal(), rng.normal()};
        int cls = rng.uniform() < cfg.null_mask_prob ? net.arch().null_class() : item.label;
        Vec2 x_t = scheme.noisify(item.x, t, z);
        Vec2 pred = net.forward(params, x_t, t, cls, std::nullopt, &tape);
        double cout = net.precond().c_out(sigma_t);
        double w = 1.0 / (cout * cout);
        Vec2 err = pred - item.x;
        loss += inv_b * w * err.norm2();
        net.backward(params, tape, (inv_b * w * 2.0) * err, grads);
    }
    detail::check_finite_loss(loss, "dm_loss");
    return loss;
}

/// Consistency loss between the online prediction at t and the frozen-target
/// prediction at r, sharing one noise draw. Gradients flow only through the
/// online branch (the target parameters are plain values here, never
/// differentiated).
inline double ect_loss(const Net& net, std::span<const double> params_online,
                       std::span<const double> params_target,
                       std::span<const LabeledPoint2D> batch, const StageSchedule& stage,
                       const VEScheme& scheme, const TrainConfig& cfg, Rng& rng,
                       std::span<double> grads, bool pass_omega_one = false) {
    if (batch.empty()) throw DomainError("ect_loss: empty batch");
    Tape tape;
    const double c_ph = cfg.pseudo_huber_c(scheme, net.arch().data_dim);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    std::optional<double> omega = pass_omega_one ? std::optional<double>(1.0) : std::nullopt;
    double loss = 0.0;
    for (const auto& item : batch) {
        TimePair tp = sample_time_pair(cfg.p_mean, cfg.p_std, stage, scheme, rng);
        Vec2 z{rng.normal(), rng.normal()};
        int cls = rng.uniform() < cfg.null_mask_prob ? net.arch().null_class() : item.label;
        Vec2 x_t = scheme.noisify(item.x, tp.t, z);
        Vec2 x_r = scheme.noisify(item.x, tp.r, z);
        Vec2 online = net.forward(params_online, x_t, tp.t, cls, omega, &tape);
        Vec2 target = net.forward(params_target, x_r, tp.r, cls, omega);
        double w = loss_weight(cfg.w_mode, scheme.sigma(tp.t), scheme.sigma(tp.r));
        loss += inv_b * w * pseudo_huber(online, target, c_ph);
        net.backward(params_online, tape, (inv_b * w) * pseudo_huber_grad_a(online, target, c_ph),
                     grads);
    }
    detail::check_finite_loss(loss, "ect_loss");
    return loss;
}

/// One JFDL optimization step's loss and gradient (naive or random variant):
/// the ECT term at omega = 1 plus the guidance term built from frozen-solver
/// anchors and the omega-extrapolated consistency target, combined with the
/// GradNorm weight. Returns gradients on the online parameters in `grads`.
inline LossReport jfdl_losses(const Net& net, std::span<const double> params_online,
                              const SolverHandle& frozen, std::span<const LabeledPoint2D> batch,
                              std::span<const LabeledPoint2D> dataset, bool random_mode,
                              const StageSchedule& stage, const VEScheme& scheme,
                              const TrainConfig& cfg, Rng& rng, std::span<double> grads,
                              std::vector<double>& g_ect, std::vector<double>& g_jfdl) {
    if (batch.empty()) throw DomainError("jfdl_losses: empty batch");
    if (!net.arch().guidance_embed)
        throw CapabilityError("jfdl_losses: online model must have a guidance pathway");
    Tape tape;
    const double c_ph = cfg.pseudo_huber_c(scheme, net.arch().data_dim);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    g_ect.assign(net.param_count(), 0.0);
    g_jfdl.assign(net.param_count(), 0.0);

    LossReport rep;
    for (const auto& item : batch) {
        TimePair tp = sample_time_pair(cfg.p_mean, cfg.p_std, stage, scheme, rng);
        double sigma_t = scheme.sigma(tp.t), sigma_r = scheme.sigma(tp.r);
        double w = loss_weight(cfg.w_mode, sigma_t, sigma_r);

        // ECT component at omega = 1; null masking is off while tuning.
        Vec2 z{rng.normal(), rng.normal()};
        Vec2 x_t = scheme.noisify(item.x, tp.t, z);
        Vec2 x_r = scheme.noisify(item.x, tp.r, z);
        Vec2 online = net.forward(params_online, x_t, tp.t, item.label, 1.0, &tape);
        Vec2 target = net.forward(params_online, x_r, tp.r, item.label, 1.0);
        rep.l_ect += inv_b * w * pseudo_huber(online, target, c_ph);
        net.backward(params_online, tape, (inv_b * w) * pseudo_huber_grad_a(online, target, c_ph),
                     g_ect);

        // Anchors from the frozen pre-trained solver.
        Vec2 y0_c = frozen.transport(x_t, tp.t, 0.0, item.label);
        int anchor_cls = -1;
        if (random_mode)
            anchor_cls = dataset[static_cast<size_t>(rng.below(dataset.size()))].label;
        Vec2 y0_anchor = frozen.transport(x_t, tp.t, 0.0, anchor_cls);

        Vec2 z2{rng.normal(), rng.normal()};
        double omega = rng.uniform(1.0, cfg.omega_max);
        Vec2 y_t = y0_c + sigma_t * z2;
        Vec2 u_cls = (y_t - y0_c) / sigma_t;
        Vec2 u_anchor = (y_t - y0_anchor) / sigma_t;
        Vec2 u_omega = cfg_extrapolate(u_cls, u_anchor, omega);
        Vec2 y_r = y_t + (sigma_r - sigma_t) * u_omega;

        Vec2 online_j = net.forward(params_online, y_t, tp.t, item.label, omega, &tape);
        Vec2 target_j = net.forward(params_online, y_r, tp.r, item.label, omega);
        rep.l_jfdl += inv_b * w * pseudo_huber(online_j, target_j, c_ph);
        net.backward(params_online, tape,
                     (inv_b * w) * pseudo_huber_grad_a(online_j, target_j, c_ph), g_jfdl);
    }

    rep.grad_norm_ect = detail::head_norm(net, g_ect);
    rep.grad_norm_jfdl = detail::head_norm(net, g_jfdl);
    auto [lo, hi] = net.head_range();
    rep.lambda_gn = gradnorm_lambda(std::span(g_ect).subspan(lo, hi - lo),
                                    std::span(g_jfdl).subspan(lo, hi - lo), cfg.gradnorm_eps,
                                    cfg.lambda_min, cfg.lambda_max);
    rep.total = rep.l_ect + rep.lambda_gn * rep.l_jfdl;
    detail::check_finite_loss(rep.total, "jfdl_losses");
    for (size_t i = 0; i < grads.size(); ++i) grads[i] = g_ect[i] + rep.lambda_gn * g_jfdl[i];
    return rep;
}

struct MetricsRow {
    int iter = 0;
    double loss_total = 0.0, l_ect = 0.0, l_jfdl = 0.0, lambda_gn = 0.0;
    double grad_ect = 0.0, grad_jfdl = 0.0;
    int stage = 0;
};

struct TrainResult {
    ModelParams params;
    ModelParams ema;
    std::vector<MetricsRow> metrics;
};

/// Stage k starts at total/2^(n-k): stage lengths double, the final factor
/// q^n = 256 governs the last half of the run.
inline std::vector<int> derive_stage_boundaries(int total_iters, int q) {
    StageSchedule probe(q, 0);
    int n = probe.num_stages();
    std::vector<int> b;
    for (int k = 1; k <= n; ++k) {
        int at = static_cast<int>(static_cast<long>(total_iters) >> (n - k + 1));
        b.push_back(at);
    }
    // Degenerate short runs: keep boundaries strictly increasing.
    for (size_t i = 1; i < b.size(); ++i)
        if (b[i] <= b[i - 1]) b[i] = b[i - 1] + 1;
    return b;
}

/// The full optimization loop: stage curriculum, EMA tracking, metric rows.
/// For the JFDL kinds `frozen` must point at the pre-trained solver snapshot.
inline TrainResult run_training(const TrainConfig& cfg, const std::vector<LabeledPoint2D>& data,
                                const VEScheme& scheme, const ModelParams& init,
                                const SolverHandle* frozen = nullptr) {
    cfg.validate();
    if (data.empty()) throw ConfigError("run_training: empty dataset");
    bool is_jfdl = cfg.loss_kind == LossKind::JfdlNaive || cfg.loss_kind == LossKind::JfdlRandom;
    if (is_jfdl && frozen == nullptr)
        throw ConfigError("run_training: JFDL requires a frozen solver");
    if (dataset_num_classes(data) > init.arch.null_class())
        throw ConfigError("run_training: dataset has more classes than the architecture");

    Net net(init.arch, Preconditioner(scheme.sigma_data, scheme.sigma_max));
    TrainResult out;
    out.params = init;
    out.ema = init;
    if (cfg.total_iters == 0) return out;

    std::vector<int> boundaries =
        cfg.stage_boundaries.empty() ? derive_stage_boundaries(cfg.total_iters, cfg.q)
                                     : cfg.stage_boundaries;

    AdamState adam(net.param_count());
    std::vector<double> grads(net.param_count(), 0.0);
    std::vector<double> g_ect, g_jfdl;
    std::vector<LabeledPoint2D> batch(static_cast<size_t>(cfg.batch_size));
    Rng rng = substream(cfg.seed, "train-loop");
    int metrics_every = cfg.metrics_every > 0 ? cfg.metrics_every
                                              : std::max(1, cfg.total_iters / 200);

    for (int iter = 0; iter < cfg.total_iters; ++iter) {
        int stage_idx = 0;
        for (int b : boundaries)
            if (iter >= b) ++stage_idx;
        StageSchedule stage(cfg.q, stage_idx);

        for (auto& slot : batch) slot = data[static_cast<size_t>(rng.below(data.size()))];

        std::fill(grads.begin(), grads.end(), 0.0);
        MetricsRow row;
        row.iter = iter;
        row.stage = stage_idx;
        try {
            switch (cfg.loss_kind) {
                case LossKind::Dm:
                    row.loss_total = dm_loss(net, out.params.values, batch, scheme, cfg, rng, grads);
                    break;
                case LossKind::Ect:
                    row.loss_total = ect_loss(net, out.params.values, out.params.values, batch,
                                              stage, scheme, cfg, rng, grads,
                                              init.arch.guidance_embed);
                    row.l_ect = row.loss_total;
                    break;
                case LossKind::JfdlNaive:
                case LossKind::JfdlRandom: {
                    LossReport rep = jfdl_losses(net, out.params.values, *frozen, batch, data,
                                                 cfg.loss_kind == LossKind::JfdlRandom, stage,
                                                 scheme, cfg, rng, grads, g_ect, g_jfdl);
                    row.loss_total = rep.total;
                    row.l_ect = rep.l_ect;
                    row.l_jfdl = rep.l_jfdl;
                    row.lambda_gn = rep.lambda_gn;
                    row.grad_ect = rep.grad_norm_ect;
                    row.grad_jfdl = rep.grad_norm_jfdl;
                    break;
                }
            }
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at iteration " + std::to_string(iter));
        }

        adam_step(out.params.values, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
        out.ema = ema_update(out.ema, out.params, cfg.ema_decay);

        if (iter % metrics_every == 0 || iter == cfg.total_iters - 1) out.metrics.push_back(row);
    }
    out.params.version += 1;
    out.ema.version = out.params.version;
    if (cfg.null_mask_prob > 0.0 &&
        (cfg.loss_kind == LossKind::Dm || cfg.loss_kind == LossKind::Ect)) {
        out.params.null_trained = true;
        out.ema.null_trained = true;
    }
    return out;
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write metrics: " + path);
    f << "iter,loss_total,l_ect,l_jfdl,lambda_gn,grad_ect,grad_jfdl,stage\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", r.iter,
                      r.loss_total, r.l_ect, r.l_jfdl, r.lambda_gn, r.grad_ect, r.grad_jfdl,
                      r.stage);
        f << buf;
    }
}

} // namespace jfdl

#endif
