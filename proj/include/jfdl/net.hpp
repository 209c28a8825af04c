#ifndef JFDL_NET_HPP
#define JFDL_NET_HPP

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "jfdl/errors.hpp"
#include "jfdl/rng.hpp"
#include "jfdl/vec2.hpp"

namespace jfdl {

/// Architecture of the small conditioned network: Fourier time embedding,
/// class embedding (with a reserved null slot at row num_classes-1), optional
/// guidance-scale pathway, input projection, residual MLP blocks, linear head.
struct ArchSpec {
    int hidden_dim = 64;
    int n_blocks = 2;
    int fourier_dim = 32; // even; half cosine, half sine features
    double fourier_scale = 1.0;
    int num_classes = 5; // data classes + the null slot
    bool guidance_embed = false;
    int data_dim = 2;

    void validate() const {
        if (hidden_dim < 1 || n_blocks < 1 || fourier_dim < 1 || num_classes < 1 || data_dim < 1)
            throw ConfigError("ArchSpec: all counts must be >= 1");
        if (fourier_dim % 2 != 0) throw ConfigError("ArchSpec: fourier_dim must be even");
    }

    int null_class() const { return num_classes - 1; }
    bool operator==(const ArchSpec&) const = default;
};

struct ModelParams {
    ArchSpec arch;
    std::vector<double> values;
    int version = 1;
    // Checkpoint metadata: how the model was trained (dm/cm) and whether the
    // null class was exercised during training (required by naive JFDL).
    std::string trained_as;
    bool null_trained = false;
};

/// EDM preconditioning coefficients. c_in normalizes the input to unit
/// variance, c_skip/c_out blend the raw input with the network output so the
/// denoiser is identity at sigma = 0.
struct Preconditioner {
    double sigma_data = 1.0;
    double sigma_max = 80.0;

    Preconditioner() = default;
    Preconditioner(double sdata, double smax) : sigma_data(sdata), sigma_max(smax) {
        if (sdata <= 0.0) throw ConfigError("Preconditioner: sigma_data must be > 0");
    }

    double c_skip(double sigma) const {
        double sd2 = sigma_data * sigma_data;
        return sd2 / (sigma * sigma + sd2);
    }
    double c_out(double sigma) const {
        double sd2 = sigma_data * sigma_data;
        return sigma * sigma_data / std::sqrt(sigma * sigma + sd2);
    }
    double c_in(double sigma) const {
        double sd2 = sigma_data * sigma_data;
        return 1.0 / std::sqrt(sigma * sigma + sd2);
    }
    double c_noise(double sigma) const { return 0.25 * std::log(sigma); }
};

namespace detail {

inline double silu(double v) { return v / (1.0 + std::exp(-v)); }
inline double silu_grad(double v) {
    double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
}

} // namespace detail

/// Per-sample activation record for the backward pass.
struct Tape {
    bool boundary = false; // sigma == 0 short-circuit
    double sigma = 0.0;
    double c_out = 0.0;
    double u_time = 0.0;
    double u_omega = 0.0;
    int cls = 0;
    bool used_guidance = false;
    Vec2 x;
    std::vector<double> four_t;
    std::vector<double> g_four, g_pre1, g_act1, g_pre2, g_act2, g_out;
    std::vector<double> in_vec;
    std::vector<double> in_pre;
    std::vector<double> h; // (n_blocks + 1) * hidden: h0 and each block output
    std::vector<double> blk_pre, blk_act; // n_blocks * hidden each
};

/// The conditioned denoiser D(x, sigma, c, omega) with exact hand-derived
/// parameter gradients. Parameters live in one flat vector whose layout is a
/// pure function of the ArchSpec.
class Net {
  public:
    Net(const ArchSpec& arch, const Preconditioner& precond) : arch_(arch), pre_(precond) {
        arch_.validate();
        compute_layout();
    }

    const ArchSpec& arch() const { return arch_; }
    const Preconditioner& precond() const { return pre_; }
    size_t param_count() const { return total_; }

    /// Flat-vector range of the output head (the "out_conv" layer used for
    /// GradNorm measurements).
    std::pair<size_t, size_t> head_range() const { return {w_out_, w_out_ + head_size_}; }

    std::vector<double> init_params(uint64_t seed) const {
        std::vector<double> p(total_, 0.0);
        Rng rng = substream(seed, "net-init");
        const int fh = arch_.fourier_dim / 2;
        for (int i = 0; i < fh; ++i) p[f_time_ + i] = rng.normal(0.0, arch_.fourier_scale);
        for (int i = 0; i < arch_.num_classes * arch_.fourier_dim; ++i)
            p[e_cls_ + i] = rng.normal();
        init_linear(p, w_in_, arch_.hidden_dim, in_dim_, rng);
        for (int b = 0; b < arch_.n_blocks; ++b) {
            size_t base = blocks_ + static_cast<size_t>(b) * block_stride_;
            init_linear(p, base, arch_.hidden_dim, arch_.hidden_dim, rng);
            init_linear(p, base + lin_size_(arch_.hidden_dim, arch_.hidden_dim), arch_.hidden_dim,
                        arch_.hidden_dim, rng);
        }
        // Output head starts at zero so D(x, sigma) = c_skip * x initially.
        if (arch_.guidance_embed) init_guidance(p, rng);
        return p;
    }

    Vec2 forward(std::span<const double> p, Vec2 x, double t, int cls, std::optional<double> omega,
                 Tape* tape = nullptr) const {
        check_params(p);
        if (cls < 0 || cls >= arch_.num_classes) throw DomainError("Net::forward: class out of range");
        if (omega.has_value() && !arch_.guidance_embed)
            throw CapabilityError("Net::forward: omega given but model has no guidance pathway");
        if (!omega.has_value() && arch_.guidance_embed)
            throw CapabilityError("Net::forward: guidance model requires omega");
        if (omega.has_value() && *omega <= 0.0)
            throw DomainError("Net::forward: omega must be > 0");
        double sigma = pre_.sigma_max * t;
        if (t < 0.0 || t > 1.0) throw DomainError("Net::forward: t must be in [0,1]");

        if (sigma == 0.0) {
            // Preconditioning boundary: c_skip -> 1, c_out -> 0.
            if (tape) {
                tape->boundary = true;
                tape->sigma = 0.0;
            }
            return x;
        }

        Tape local;
        Tape& tp = tape ? *tape : local;
        tp.boundary = false;
        tp.sigma = sigma;
        tp.cls = cls;
        tp.x = x;
        tp.used_guidance = arch_.guidance_embed;

        const int fd = arch_.fourier_dim;
        const int fh = fd / 2;
        const int hd = arch_.hidden_dim;

        tp.u_time = pre_.c_noise(sigma);
        tp.four_t.resize(static_cast<size_t>(fd));
        fourier_features(p.data() + f_time_, tp.u_time, fh, tp.four_t.data());

        tp.in_vec.assign(static_cast<size_t>(in_dim_), 0.0);
        double cin = pre_.c_in(sigma);
        tp.in_vec[0] = cin * x.x;
        tp.in_vec[1] = cin * x.y;
        for (int i = 0; i < fd; ++i) tp.in_vec[static_cast<size_t>(2 + i)] = tp.four_t[static_cast<size_t>(i)];
        const double* erow = p.data() + e_cls_ + static_cast<size_t>(cls) * fd;
        for (int i = 0; i < fd; ++i) tp.in_vec[static_cast<size_t>(2 + fd + i)] = erow[i];

        if (arch_.guidance_embed) {
            // Guidance pathway joins the class embedding additively; its final
            // layer is zero-initialized so a fresh pathway is a no-op.
            tp.u_omega = std::log(*omega);
            tp.g_four.resize(static_cast<size_t>(fd));
            fourier_features(p.data() + g_f_, tp.u_omega, fh, tp.g_four.data());
            tp.g_pre1.resize(static_cast<size_t>(fd));
            tp.g_act1.resize(static_cast<size_t>(fd));
            linear(p, g_w1_, fd, fd, tp.g_four.data(), tp.g_pre1.data());
            for (int i = 0; i < fd; ++i) tp.g_act1[static_cast<size_t>(i)] = detail::silu(tp.g_pre1[static_cast<size_t>(i)]);
            tp.g_pre2.resize(static_cast<size_t>(fd));
            tp.g_act2.resize(static_cast<size_t>(fd));
            linear(p, g_w2_, fd, fd, tp.g_act1.data(), tp.g_pre2.data());
            for (int i = 0; i < fd; ++i) tp.g_act2[static_cast<size_t>(i)] = detail::silu(tp.g_pre2[static_cast<size_t>(i)]);
            tp.g_out.resize(static_cast<size_t>(fd));
            linear(p, g_w3_, fd, fd, tp.g_act2.data(), tp.g_out.data());
            for (int i = 0; i < fd; ++i) tp.in_vec[static_cast<size_t>(2 + fd + i)] += tp.g_out[static_cast<size_t>(i)];
        }

        tp.in_pre.resize(static_cast<size_t>(hd));
        linear(p, w_in_, hd, in_dim_, tp.in_vec.data(), tp.in_pre.data());
        tp.h.resize(static_cast<size_t>((arch_.n_blocks + 1) * hd));
        for (int i = 0; i < hd; ++i) tp.h[static_cast<size_t>(i)] = detail::silu(tp.in_pre[static_cast<size_t>(i)]);

        tp.blk_pre.resize(static_cast<size_t>(arch_.n_blocks * hd));
        tp.blk_act.resize(static_cast<size_t>(arch_.n_blocks * hd));
        for (int b = 0; b < arch_.n_blocks; ++b) {
            const double* hin = tp.h.data() + static_cast<size_t>(b) * hd;
            double* hout = tp.h.data() + static_cast<size_t>(b + 1) * hd;
            double* pre = tp.blk_pre.data() + static_cast<size_t>(b) * hd;
            double* act = tp.blk_act.data() + static_cast<size_t>(b) * hd;
            size_t base = blocks_ + static_cast<size_t>(b) * block_stride_;
            linear(p, base, hd, hd, hin, pre);
            for (int i = 0; i < hd; ++i) act[i] = detail::silu(pre[i]);
            linear(p, base + lin_size_(hd, hd), hd, hd, act, hout);
            for (int i = 0; i < hd; ++i) hout[i] += hin[i];
        }

        const double* hlast = tp.h.data() + static_cast<size_t>(arch_.n_blocks) * hd;
        double raw[2];
        linear(p, w_out_, arch_.data_dim, hd, hlast, raw);

        double cskip = pre_.c_skip(sigma);
        double cout = pre_.c_out(sigma);
        tp.c_out = cout;
        Vec2 out{cskip * x.x + cout * raw[0], cskip * x.y + cout * raw[1]};
        if (!out.finite()) throw NumericError("Net::forward: non-finite output");
        return out;
    }

    /// Accumulates dL/dparams into grads given dL/d(output). The tape must
    /// come from a forward() over the same parameter values.
    void backward(std::span<const double> p, const Tape& tp, Vec2 d_out,
                  std::span<double> grads) const {
        check_params(p);
        if (grads.size() != total_) throw ShapeError("Net::backward: bad gradient buffer size");
        if (tp.boundary) return; // output was x itself; no parameter dependence

        const int fd = arch_.fourier_dim;
        const int fh = fd / 2;
        const int hd = arch_.hidden_dim;

        double d_raw[2] = {tp.c_out * d_out.x, tp.c_out * d_out.y};

        scratch_.assign(static_cast<size_t>(hd) * 2, 0.0);
        double* dh = scratch_.data();
        double* dtmp = scratch_.data() + hd;

        // Head.
        const double* hlast = tp.h.data() + static_cast<size_t>(arch_.n_blocks) * hd;
        linear_backward(p, grads, w_out_, arch_.data_dim, hd, hlast, d_raw, dh);

        // Blocks in reverse. dh holds dL/d(h_out) entering each block.
        for (int b = arch_.n_blocks - 1; b >= 0; --b) {
            const double* hin = tp.h.data() + static_cast<size_t>(b) * hd;
            const double* pre = tp.blk_pre.data() + static_cast<size_t>(b) * hd;
            const double* act = tp.blk_act.data() + static_cast<size_t>(b) * hd;
            size_t base = blocks_ + static_cast<size_t>(b) * block_stride_;
            size_t lin2 = base + lin_size_(hd, hd);
            linear_backward(p, grads, lin2, hd, hd, act, dh, dtmp);
            // SiLU.
            for (int i = 0; i < hd; ++i) dtmp[i] *= detail::silu_grad(pre[i]);
            // Through the first linear; residual path adds dh directly.
            linear_backward(p, grads, base, hd, hd, hin, dtmp, dh, /*accumulate_dx=*/true);
        }

        // Input projection.
        din_.assign(static_cast<size_t>(in_dim_), 0.0);
        dpre_.resize(static_cast<size_t>(hd));
        for (int i = 0; i < hd; ++i) dpre_[static_cast<size_t>(i)] = dh[i] * detail::silu_grad(tp.in_pre[static_cast<size_t>(i)]);
        linear_backward(p, grads, w_in_, hd, in_dim_, tp.in_vec.data(), dpre_.data(), din_.data());

        // Split din: [c_in * x | fourier(t) | class embedding (+ guidance)].
        const double* dfour = din_.data() + 2;
        fourier_backward(p.data() + f_time_, grads.data() + f_time_, tp.u_time, fh,
                         tp.four_t.data(), dfour);

        const double* dcond = din_.data() + 2 + fd;
        double* de_row = grads.data() + e_cls_ + static_cast<size_t>(tp.cls) * fd;
        for (int i = 0; i < fd; ++i) de_row[i] += dcond[i];

        if (tp.used_guidance) {
            dg1_.resize(static_cast<size_t>(fd));
            dg2_.resize(static_cast<size_t>(fd));
            linear_backward(p, grads, g_w3_, fd, fd, tp.g_act2.data(), dcond, dg1_.data());
            for (int i = 0; i < fd; ++i) dg1_[static_cast<size_t>(i)] *= detail::silu_grad(tp.g_pre2[static_cast<size_t>(i)]);
            linear_backward(p, grads, g_w2_, fd, fd, tp.g_act1.data(), dg1_.data(), dg2_.data());
            for (int i = 0; i < fd; ++i) dg2_[static_cast<size_t>(i)] *= detail::silu_grad(tp.g_pre1[static_cast<size_t>(i)]);
            linear_backward(p, grads, g_w1_, fd, fd, tp.g_four.data(), dg2_.data(), dg1_.data());
            fourier_backward(p.data() + g_f_, grads.data() + g_f_, tp.u_omega, fh,
                             tp.g_four.data(), dg1_.data());
        }
    }

  private:
    static size_t lin_size_(int rows, int cols) {
        return static_cast<size_t>(rows) * static_cast<size_t>(cols) + static_cast<size_t>(rows);
    }

    void compute_layout() {
        const int fd = arch_.fourier_dim;
        in_dim_ = arch_.data_dim + 2 * fd;
        size_t off = 0;
        f_time_ = off;
        off += static_cast<size_t>(fd / 2);
        e_cls_ = off;
        off += static_cast<size_t>(arch_.num_classes) * fd;
        w_in_ = off;
        off += lin_size_(arch_.hidden_dim, in_dim_);
        blocks_ = off;
        block_stride_ = 2 * lin_size_(arch_.hidden_dim, arch_.hidden_dim);
        off += static_cast<size_t>(arch_.n_blocks) * block_stride_;
        w_out_ = off;
        head_size_ = lin_size_(arch_.data_dim, arch_.hidden_dim);
        off += head_size_;
        if (arch_.guidance_embed) {
            g_f_ = off;
            off += static_cast<size_t>(fd / 2);
            g_w1_ = off;
            off += lin_size_(fd, fd);
            g_w2_ = off;
            off += lin_size_(fd, fd);
            g_w3_ = off;
            off += lin_size_(fd, fd);
        }
        total_ = off;
    }

    void check_params(std::span<const double> p) const {
        if (p.size() != total_) throw ShapeError("Net: parameter vector has wrong length");
    }

    static void init_linear(std::vector<double>& p, size_t base, int rows, int cols, Rng& rng) {
        double std = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int i = 0; i < rows * cols; ++i) p[base + static_cast<size_t>(i)] = rng.normal(0.0, std);
        // biases stay zero
    }

    void init_guidance(std::vector<double>& p, Rng& rng) const {
        const int fd = arch_.fourier_dim;
        for (int i = 0; i < fd / 2; ++i) p[g_f_ + static_cast<size_t>(i)] = rng.normal(0.0, arch_.fourier_scale);
        init_linear(p, g_w1_, fd, fd, rng);
        init_linear(p, g_w2_, fd, fd, rng);
        // g_w3 stays zero: the pathway contributes nothing until trained.
    }

    // y = W u + b with W row-major at p[base], b after it.
    static void linear(std::span<const double> p, size_t base, int rows, int cols, const double* u,
                       double* y) {
        const double* w = p.data() + base;
        const double* b = w + static_cast<size_t>(rows) * cols;
        for (int r = 0; r < rows; ++r) {
            const double* wr = w + static_cast<size_t>(r) * cols;
            double acc = b[r];
            for (int c = 0; c < cols; ++c) acc += wr[c] * u[c];
            y[r] = acc;
        }
    }

    // Accumulates dW, db; writes or accumulates dx (may be null).
    static void linear_backward(std::span<const double> p, std::span<double> grads, size_t base,
                                int rows, int cols, const double* u, const double* dy, double* dx,
                                bool accumulate_dx = false) {
        const double* w = p.data() + base;
        double* dw = grads.data() + base;
        double* db = dw + static_cast<size_t>(rows) * cols;
        if (dx && !accumulate_dx)
            for (int c = 0; c < cols; ++c) dx[c] = 0.0;
        for (int r = 0; r < rows; ++r) {
            double g = dy[r];
            db[r] += g;
            const double* wr = w + static_cast<size_t>(r) * cols;
            double* dwr = dw + static_cast<size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
                dwr[c] += g * u[c];
                if (dx) dx[c] += g * wr[c];
            }
        }
    }

    // features = sqrt(2) * [cos(2 pi f_i u) ... | sin(2 pi f_i u) ...]
    static void fourier_features(const double* freqs, double u, int half, double* out) {
        for (int i = 0; i < half; ++i) {
            double arg = detail::kTwoPi * freqs[i] * u;
            out[i] = detail::kSqrt2 * std::cos(arg);
            out[half + i] = detail::kSqrt2 * std::sin(arg);
        }
    }

    static void fourier_backward(const double* freqs, double* dfreqs, double u, int half,
                                 const double* feats, const double* dfeats) {
        for (int i = 0; i < half; ++i) {
            double arg = detail::kTwoPi * freqs[i] * u;
            double dcos = -detail::kSqrt2 * std::sin(arg) * detail::kTwoPi * u;
            double dsin = detail::kSqrt2 * std::cos(arg) * detail::kTwoPi * u;
            dfreqs[i] += dfeats[i] * dcos + dfeats[half + i] * dsin;
        }
        (void)feats;
    }

    ArchSpec arch_;
    Preconditioner pre_;
    int in_dim_ = 0;
    size_t f_time_ = 0, e_cls_ = 0, w_in_ = 0, blocks_ = 0, w_out_ = 0;
    size_t g_f_ = 0, g_w1_ = 0, g_w2_ = 0, g_w3_ = 0;
    size_t block_stride_ = 0, head_size_ = 0, total_ = 0;
    mutable std::vector<double> scratch_, din_, dpre_, dg1_, dg2_;
};

/// Appends a zero-output guidance pathway; every pre-existing weight keeps its
/// value and forward() is unchanged at any omega until the pathway trains.
inline ModelParams attach_guidance_embedding(const ModelParams& params, const Preconditioner& pre,
                                             uint64_t seed) {
    if (params.arch.guidance_embed)
        throw StateError("attach_guidance_embedding: pathway already attached");
    ArchSpec arch2 = params.arch;
    arch2.guidance_embed = true;
    Net new_net(arch2, pre);
    ModelParams out;
    out.arch = arch2;
    out.version = params.version + 1;
    out.trained_as = params.trained_as;
    out.null_trained = params.null_trained;
    // Old layout is a prefix of the new one; the appended tail gets random
    // internals and a zero final linear, so forward() is unchanged at any
    // omega until the pathway trains.
    out.values = new_net.init_params(seed);
    std::copy(params.values.begin(), params.values.end(), out.values.begin());
    return out;
}

inline ModelParams ema_update(const ModelParams& ema, const ModelParams& online, double decay) {
    if (ema.arch != online.arch || ema.values.size() != online.values.size())
        throw ShapeError("ema_update: architecture mismatch");
    if (decay < 0.0 || decay >= 1.0) throw ConfigError("ema_update: decay must be in [0,1)");
    ModelParams out = ema;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = decay * ema.values[i] + (1.0 - decay) * online.values[i];
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic "JFDL", u32 format version, u32 header length,
// text header (key=value lines), then the flat parameter vector as
// little-endian 64-bit floats.
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f64le(std::ostream& os, double v) {
    uint64_t bits = std::bit_cast<uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace detail

inline void save_checkpoint(const std::string& path, const ModelParams& mp,
                            const Preconditioner& pre) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write checkpoint: " + path);
    std::ostringstream hdr;
    char num[64];
    hdr << "hidden_dim=" << mp.arch.hidden_dim << "\n";
    hdr << "n_blocks=" << mp.arch.n_blocks << "\n";
    hdr << "fourier_dim=" << mp.arch.fourier_dim << "\n";
    std::snprintf(num, sizeof(num), "%.17g", mp.arch.fourier_scale);
    hdr << "fourier_scale=" << num << "\n";
    hdr << "num_classes=" << mp.arch.num_classes << "\n";
    hdr << "guidance_embed=" << (mp.arch.guidance_embed ? 1 : 0) << "\n";
    hdr << "data_dim=" << mp.arch.data_dim << "\n";
    std::snprintf(num, sizeof(num), "%.17g", pre.sigma_data);
    hdr << "sigma_data=" << num << "\n";
    std::snprintf(num, sizeof(num), "%.17g", pre.sigma_max);
    hdr << "sigma_max=" << num << "\n";
    hdr << "model_version=" << mp.version << "\n";
    hdr << "trained_as=" << mp.trained_as << "\n";
    hdr << "null_trained=" << (mp.null_trained ? 1 : 0) << "\n";
    hdr << "param_count=" << mp.values.size() << "\n";
    std::string h = hdr.str();
    f.write("JFDL", 4);
    detail::put_u32(f, 1);
    detail::put_u32(f, static_cast<uint32_t>(h.size()));
    f.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (double v : mp.values) detail::put_f64le(f, v);
    if (!f) throw ConfigError("short write on checkpoint: " + path);
}

inline std::pair<ModelParams, Preconditioner> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open checkpoint: " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "JFDL", 4) != 0)
        throw ConfigError("bad checkpoint magic in " + path);
    uint32_t version = detail::get_u32(f);
    if (version != 1) throw ConfigError("unsupported checkpoint version in " + path);
    uint32_t hlen = detail::get_u32(f);
    std::string hdr(hlen, '\0');
    f.read(hdr.data(), hlen);
    if (!f) throw ConfigError("truncated checkpoint header in " + path);

    ModelParams mp;
    Preconditioner pre;
    size_t declared = 0;
    std::istringstream hs(hdr);
    std::string line;
    while (std::getline(hs, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "hidden_dim") mp.arch.hidden_dim = std::stoi(val);
        else if (key == "n_blocks") mp.arch.n_blocks = std::stoi(val);
        else if (key == "fourier_dim") mp.arch.fourier_dim = std::stoi(val);
        else if (key == "fourier_scale") mp.arch.fourier_scale = std::stod(val);
        else if (key == "num_classes") mp.arch.num_classes = std::stoi(val);
        else if (key == "guidance_embed") mp.arch.guidance_embed = (val == "1");
        else if (key == "data_dim") mp.arch.data_dim = std::stoi(val);
        else if (key == "sigma_data") pre.sigma_data = std::stod(val);
        else if (key == "sigma_max") pre.sigma_max = std::stod(val);
        else if (key == "model_version") mp.version = std::stoi(val);
        else if (key == "trained_as") mp.trained_as = val;
        else if (key == "null_trained") mp.null_trained = (val == "1");
        else if (key == "param_count") declared = static_cast<size_t>(std::stoull(val));
        else throw ConfigError("unknown checkpoint header key: " + key);
    }
    Net net(mp.arch, pre);
    if (declared != net.param_count())
        throw ConfigError("checkpoint parameter count does not match architecture");
    mp.values.resize(declared);
    for (size_t i = 0; i < declared; ++i) {
        mp.values[i] = detail::get_f64le(f);
        if (!std::isfinite(mp.values[i])) throw NumericError("non-finite parameter in " + path);
    }
    if (!f) throw ConfigError("truncated checkpoint data in " + path);
    return {std::move(mp), pre};
}

} // namespace jfdl

#endif
