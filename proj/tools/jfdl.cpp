// jfdl: command-line workbench for post-hoc guidance tuning of consistency
// models on 2-D toy distributions, pseudo-noise normality analysis, and the
// marginal/Taylor verification suites.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jfdl/dataset.hpp"
#include "jfdl/gmm.hpp"
#include "jfdl/manifest.hpp"
#include "jfdl/net.hpp"
#include "jfdl/propcheck.hpp"
#include "jfdl/pseudo_noise.hpp"
#include "jfdl/sampler.hpp"
#include "jfdl/solver.hpp"
#include "jfdl/training.hpp"
#include "jfdl/twosample.hpp"
#include "jfdl/ve.hpp"

namespace fs = std::filesystem;
using namespace jfdl;

namespace {

struct GlobalOpts {
    uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false; // reductions are always ordered; flag is accepted
    std::string out_dir = "jfdl-out";
};

fs::path ensure_out_dir(const GlobalOpts& g) {
    fs::path dir(g.out_dir);
    fs::create_directories(dir);
    return dir;
}

double estimate_sigma_data(const std::vector<LabeledPoint2D>& data) {
    double acc = 0.0;
    for (const auto& p : data) acc += p.x.norm2();
    return std::sqrt(acc / (2.0 * static_cast<double>(data.size())));
}

void write_samples_csv(const fs::path& path, const std::vector<LabeledPoint2D>& samples) {
    write_dataset_csv(path.string(), samples);
}

struct ArchOpts {
    int hidden = 64;
    int blocks = 2;
    int fourier_dim = 32;
    double fourier_scale = 1.0;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--hidden", hidden, "Hidden width of the residual MLP");
        cmd->add_option("--blocks", blocks, "Number of residual blocks");
        cmd->add_option("--fourier-dim", fourier_dim, "Fourier feature count (even)");
        cmd->add_option("--fourier-scale", fourier_scale, "Std of the Fourier frequencies");
    }

    ArchSpec to_arch(int data_classes, bool guidance) const {
        ArchSpec a;
        a.hidden_dim = hidden;
        a.n_blocks = blocks;
        a.fourier_dim = fourier_dim;
        a.fourier_scale = fourier_scale;
        a.num_classes = data_classes + 1;
        a.guidance_embed = guidance;
        return a;
    }
};

struct TrainOpts {
    std::string data_path;
    std::string resume;
    int iters = 20000;
    int batch = 64;
    double lr = 1e-3;
    double p_mean = -1.1, p_std = 2.0;
    double null_mask_prob = 0.2;
    double ema_decay = 0.9993;
    double sigma_data = -1.0; // < 0: estimated from the dataset
    double sigma_max = 80.0;
    int q = 2;

    void add_to(CLI::App* cmd, bool with_q) {
        cmd->add_option("--data", data_path, "Training dataset CSV")->required();
        cmd->add_option("--resume", resume, "Checkpoint to resume from");
        cmd->add_option("--iters", iters, "Total optimization iterations");
        cmd->add_option("--batch", batch, "Batch size");
        cmd->add_option("--lr", lr, "Adam learning rate");
        cmd->add_option("--p-mean", p_mean, "Log-normal mean of the sigma sampler");
        cmd->add_option("--p-std", p_std, "Log-normal std of the sigma sampler");
        cmd->add_option("--null-mask-prob", null_mask_prob, "Probability of masking the class to null");
        cmd->add_option("--ema-decay", ema_decay, "EMA decay rate");
        cmd->add_option("--sigma-data", sigma_data, "Data normalization constant (default: estimated)");
        cmd->add_option("--sigma-max", sigma_max, "VE sigma_max");
        if (with_q) cmd->add_option("--q", q, "Stage shrink factor of the consistency gap");
    }

    void echo(std::map<std::string, std::string>& cfg) const {
        cfg["data"] = data_path;
        if (!resume.empty()) cfg["resume"] = resume;
        cfg["iters"] = std::to_string(iters);
        cfg["batch"] = std::to_string(batch);
        cfg["lr"] = std::to_string(lr);
        cfg["p_mean"] = std::to_string(p_mean);
        cfg["p_std"] = std::to_string(p_std);
        cfg["null_mask_prob"] = std::to_string(null_mask_prob);
        cfg["ema_decay"] = std::to_string(ema_decay);
        cfg["sigma_max"] = std::to_string(sigma_max);
        cfg["q"] = std::to_string(q);
    }
};

void run_train_command(const GlobalOpts& g, const TrainOpts& topt, const ArchOpts& aopt,
                       LossKind kind, const std::string& cmd_name) {
    RunManifest man;
    man.command = cmd_name;
    man.started = RunManifest::now_utc();
    fs::path out = ensure_out_dir(g);

    auto data = read_dataset_csv(topt.data_path);
    int data_classes = dataset_num_classes(data);
    double sdata = topt.sigma_data > 0.0 ? topt.sigma_data : estimate_sigma_data(data);
    VEScheme scheme(topt.sigma_max, sdata);

    ModelParams init;
    if (!topt.resume.empty()) {
        auto [mp, pre] = load_checkpoint(topt.resume);
        if (mp.arch.num_classes != data_classes + 1)
            throw ConfigError("resume checkpoint class count does not match the dataset");
        init = std::move(mp);
        scheme = VEScheme(pre.sigma_max, pre.sigma_data);
    } else {
        init.arch = aopt.to_arch(data_classes, false);
        Net net(init.arch, Preconditioner(scheme.sigma_data, scheme.sigma_max));
        init.values = net.init_params(g.seed);
        init.trained_as = kind == LossKind::Dm ? "dm" : "cm";
    }

    TrainConfig cfg;
    cfg.lr = topt.lr;
    cfg.batch_size = topt.batch;
    cfg.total_iters = topt.iters;
    cfg.p_mean = topt.p_mean;
    cfg.p_std = topt.p_std;
    cfg.q = topt.q;
    cfg.null_mask_prob = topt.null_mask_prob;
    cfg.ema_decay = topt.ema_decay;
    cfg.seed = g.seed;
    cfg.loss_kind = kind;

    TrainResult res = run_training(cfg, data, scheme, init);

    Preconditioner pre(scheme.sigma_data, scheme.sigma_max);
    save_checkpoint((out / "checkpoint.jfdl").string(), res.params, pre);
    save_checkpoint((out / "checkpoint_ema.jfdl").string(), res.ema, pre);
    write_metrics_csv((out / "metrics.csv").string(), res.metrics);

    topt.echo(man.config);
    man.config["seed"] = std::to_string(g.seed);
    man.config["loss"] = to_string(kind);
    man.config["sigma_data"] = std::to_string(sdata);
    man.add_output(out, "checkpoint.jfdl");
    man.add_output(out, "checkpoint_ema.jfdl");
    man.add_output(out, "metrics.csv");
    man.finished = RunManifest::now_utc();
    man.write(out);
    std::printf("%s: wrote %s (%d iters, %d classes)\n", cmd_name.c_str(),
                (out / "checkpoint.jfdl").c_str(), topt.iters, data_classes);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"jfdl: guidance tuning workbench for consistency models on 2-D toys"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; command-line flags override");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Global seed; module streams derive from it");
    app.add_option("--threads", g.threads, "Worker cap for parallel analysis");
    app.add_flag("--deterministic", g.deterministic,
                 "Force ordered reductions (always on; flag kept for interface stability)");
    app.add_option("--out", g.out_dir, "Output directory (all files land here)");

    // ---------------- gen-data ----------------
    auto* gen = app.add_subcommand("gen-data", "Generate a toy dataset CSV");
    std::string gen_kind = "blobs";
    int gen_n = 10000;
    double gen_noise = -1.0;
    gen->add_option("--dataset", gen_kind, "spiral | circle | blobs")->required();
    gen->add_option("--n", gen_n, "Number of samples");
    gen->add_option("--noise-sigma", gen_noise, "Jitter override (default: recipe value)");

    // ---------------- train-dm / train-cm ----------------
    auto* tdm = app.add_subcommand("train-dm", "Train a denoiser on a dataset");
    TrainOpts tdm_opt;
    ArchOpts tdm_arch;
    tdm_opt.add_to(tdm, false);
    tdm_arch.add_to(tdm);

    auto* tcm = app.add_subcommand("train-cm", "Consistency training on a dataset");
    TrainOpts tcm_opt;
    ArchOpts tcm_arch;
    tcm_opt.add_to(tcm, true);
    tcm_arch.add_to(tcm);

    // ---------------- tune-jfdl ----------------
    auto* tune = app.add_subcommand("tune-jfdl", "Post-hoc guidance tuning of a pre-trained CM");
    std::string tune_mode = "naive";
    std::string tune_cm;
    TrainOpts tune_opt;
    tune->add_option("--mode", tune_mode, "naive | random")->required();
    tune->add_option("--cm", tune_cm, "Pre-trained CM checkpoint")->required();
    tune_opt.data_path.clear();
    tune->add_option("--data", tune_opt.data_path, "Training dataset CSV")->required();
    double tune_omega_max = 2.0;
    tune->add_option("--omega-max", tune_omega_max, "Max guidance scale for omega ~ U(1, max)");
    tune->add_option("--iters", tune_opt.iters, "Tuning iterations")->default_val(6000);
    tune->add_option("--batch", tune_opt.batch, "Batch size");
    tune->add_option("--lr", tune_opt.lr, "Adam learning rate")->default_val(5e-4);
    tune->add_option("--p-mean", tune_opt.p_mean, "Log-normal mean (shifted up while tuning)")
        ->default_val(-0.5);
    tune->add_option("--p-std", tune_opt.p_std, "Log-normal std");
    tune->add_option("--q", tune_opt.q, "Stage shrink factor");
    tune->add_option("--ema-decay", tune_opt.ema_decay, "EMA decay rate");

    // ---------------- analyze-noise ----------------
    auto* an = app.add_subcommand("analyze-noise", "Pseudo-noise normality grid (Fig. 2 style)");
    std::string an_solver = "analytic";
    std::string an_dataset = "blobs";
    std::string an_ckpt, an_data;
    int an_grid = 20, an_nper = 2000, an_steps = 64, an_oracle_pts = 1000;
    double an_sigma_lo = 0.002;
    an->add_option("--solver", an_solver, "analytic | dm | cm");
    an->add_option("--dataset", an_dataset, "Toy dataset kind (analytic data law)");
    an->add_option("--ckpt", an_ckpt, "Checkpoint for dm/cm solvers");
    an->add_option("--data", an_data, "Dataset CSV as the data source for dm/cm");
    an->add_option("--grid-points", an_grid, "Number of t grid points");
    an->add_option("--sigma-lo", an_sigma_lo, "Lowest sigma of the log-spaced grid");
    an->add_option("--n-per-t", an_nper, "Samples per grid cell");
    an->add_option("--n-steps", an_steps, "ODE steps per transport (analytic/dm)");
    an->add_option("--oracle-points", an_oracle_pts, "KDE component count for spiral/circle oracles");

    // ---------------- verify ----------------
    auto* ver = app.add_subcommand("verify", "Empirical checks of the two propositions");
    ver->require_subcommand(1);
    auto* vp1 = ver->add_subcommand("prop1", "Hybrid flow preserves the data marginal");
    std::string vp1_dataset = "blobs";
    std::vector<double> vp1_t = {0.1, 0.5, 0.9};
    int vp1_n = 5000, vp1_rounds = 200, vp1_steps = 128, vp1_oracle_pts = 1000;
    bool vp1_negctl = false;
    vp1->add_option("--dataset", vp1_dataset, "Toy dataset kind");
    vp1->add_option("--t", vp1_t, "Noise indices to test");
    vp1->add_option("--n", vp1_n, "Sample size per test");
    vp1->add_option("--rounds", vp1_rounds, "Permutation rounds");
    vp1->add_option("--n-steps", vp1_steps, "ODE steps per transport");
    vp1->add_option("--oracle-points", vp1_oracle_pts, "KDE components for spiral/circle");
    vp1->add_flag("--negative-control", vp1_negctl, "Skip the backward null transport");

    auto* vp2 = ver->add_subcommand("prop2", "Mixed-signal Taylor form");
    std::string vp2_dataset = "blobs";
    int vp2_cls = 2;
    std::vector<double> vp2_x0 = {0.1, 2.0};
    double vp2_tlo = 2e-6, vp2_thi = 3e-5;
    int vp2_tpoints = 10, vp2_steps = 1024;
    bool vp2_flip = false;
    vp2->add_option("--dataset", vp2_dataset, "Toy dataset kind");
    vp2->add_option("--class", vp2_cls, "Class label of x0");
    vp2->add_option("--x0", vp2_x0, "Clean point (two values)")->expected(2);
    vp2->add_option("--t-lo", vp2_tlo, "Smallest t");
    vp2->add_option("--t-hi", vp2_thi, "Largest t");
    vp2->add_option("--t-points", vp2_tpoints, "Log-spaced t count");
    vp2->add_option("--n-steps", vp2_steps, "ODE steps per transport");
    vp2->add_flag("--flip-sign", vp2_flip, "Use the wrong-sign model (expects slope ~ 1)");

    auto* vfd = ver->add_subcommand("first-deriv", "Finite-difference check of the hybrid flow derivative");
    std::string vfd_dataset = "blobs";
    int vfd_cls = 2;
    std::vector<double> vfd_x0 = {1.5, 2.0};
    double vfd_t = 0.01, vfd_h = 1e-3;
    int vfd_steps = 512;
    vfd->add_option("--dataset", vfd_dataset, "Toy dataset kind");
    vfd->add_option("--class", vfd_cls, "Class label of x0");
    vfd->add_option("--x0", vfd_x0, "Clean point (two values)")->expected(2);
    vfd->add_option("--t", vfd_t, "Noise index");
    vfd->add_option("--fd-step", vfd_h, "Central-difference step");
    vfd->add_option("--n-steps", vfd_steps, "ODE steps per transport");

    // ---------------- sample ----------------
    auto* smp = app.add_subcommand("sample", "Draw 1- or 2-step samples from a checkpoint");
    std::string smp_ckpt;
    int smp_steps = 1, smp_cls = -1, smp_n = 2000;
    double smp_omega = 1.0, smp_mid_sigma = -1.0;
    bool smp_ema = true;
    smp->add_option("--ckpt", smp_ckpt, "Model checkpoint")->required();
    smp->add_option("--steps", smp_steps, "1 or 2");
    smp->add_option("--omega", smp_omega, "Guidance scale (>= 1)");
    smp->add_option("--class", smp_cls, "Class label, or -1 for random per sample");
    smp->add_option("--n", smp_n, "Number of samples");
    smp->add_option("--intermediate-sigma", smp_mid_sigma, "2-step middle noise level");
    smp->add_flag("--ema,!--no-ema", smp_ema, "Use the EMA checkpoint convention (flag only)");

    // ---------------- metrics ----------------
    auto* met = app.add_subcommand("metrics", "Quality report between two sample CSVs");
    std::string met_samples, met_reference;
    bool met_per_class = false;
    int met_steps = 0;
    double met_omega = 0.0;
    met->add_option("--samples", met_samples, "Generated samples CSV")->required();
    met->add_option("--reference", met_reference, "Reference samples CSV")->required();
    met->add_flag("--per-class", met_per_class, "One row per class in addition to the pooled row");
    met->add_option("--steps", met_steps, "Echoed key: sampler steps");
    met->add_option("--omega", met_omega, "Echoed key: guidance scale");

    // Global options may appear after the subcommand name.
    for (CLI::App* s : {gen, tdm, tcm, tune, an, ver, vp1, vp2, vfd, smp, met}) s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen) {
            RunManifest man;
            man.command = "gen-data";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);
            DatasetKind kind = dataset_kind_from(gen_kind);
            DatasetSpec spec = DatasetSpec::defaults(kind, gen_n, g.seed);
            if (gen_noise >= 0.0) spec.noise_sigma = gen_noise;
            auto data = generate(spec);
            write_dataset_csv((out / "dataset.csv").string(), data);
            man.config = {{"dataset", gen_kind},
                          {"n", std::to_string(gen_n)},
                          {"noise_sigma", std::to_string(spec.noise_sigma)},
                          {"seed", std::to_string(g.seed)}};
            man.add_output(out, "dataset.csv");
            man.finished = RunManifest::now_utc();
            man.write(out);
            std::printf("gen-data: wrote %s (%zu rows)\n", (out / "dataset.csv").c_str(),
                        data.size());
        } else if (*tdm) {
            run_train_command(g, tdm_opt, tdm_arch, LossKind::Dm, "train-dm");
        } else if (*tcm) {
            run_train_command(g, tcm_opt, tcm_arch, LossKind::Ect, "train-cm");
        } else if (*tune) {
            if (tune_mode != "naive" && tune_mode != "random")
                throw ConfigError("tune-jfdl: --mode must be naive or random");
            RunManifest man;
            man.command = "tune-jfdl";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);

            auto [cm, pre] = load_checkpoint(tune_cm);
            if (cm.trained_as != "cm")
                throw ConfigError("tune-jfdl requires a consistency-model checkpoint");
            if (tune_mode == "naive" && !cm.null_trained)
                throw ConfigError("naive mode requires a null-class-capable solver "
                                  "(train-cm with --null-mask-prob > 0)");
            if (cm.arch.guidance_embed)
                throw ConfigError("tune-jfdl: checkpoint already has a guidance pathway");

            auto data = read_dataset_csv(tune_opt.data_path);
            if (dataset_num_classes(data) + 1 != cm.arch.num_classes)
                throw ConfigError("tune-jfdl: dataset classes do not match the checkpoint");
            VEScheme scheme(pre.sigma_max, pre.sigma_data);

            // Frozen snapshot of the pre-trained CM; never updated.
            ModelParams psi = cm;
            Net psi_net(psi.arch, pre);
            SolverHandle frozen = SolverHandle::consistency(psi_net, psi, scheme);

            ModelParams online = attach_guidance_embedding(cm, pre, g.seed);

            TrainConfig cfg;
            cfg.lr = tune_opt.lr;
            cfg.batch_size = tune_opt.batch;
            cfg.total_iters = tune_opt.iters;
            cfg.p_mean = tune_opt.p_mean;
            cfg.p_std = tune_opt.p_std;
            cfg.q = tune_opt.q;
            cfg.null_mask_prob = 0.0; // the null path is not rehearsed while tuning
            cfg.omega_max = tune_omega_max;
            cfg.ema_decay = tune_opt.ema_decay;
            cfg.seed = g.seed;
            cfg.loss_kind = tune_mode == "naive" ? LossKind::JfdlNaive : LossKind::JfdlRandom;

            TrainResult res = run_training(cfg, data, scheme, online, &frozen);
            save_checkpoint((out / "checkpoint.jfdl").string(), res.params, pre);
            save_checkpoint((out / "checkpoint_ema.jfdl").string(), res.ema, pre);
            write_metrics_csv((out / "metrics.csv").string(), res.metrics);

            tune_opt.echo(man.config);
            man.config["mode"] = tune_mode;
            man.config["cm"] = tune_cm;
            man.config["omega_max"] = std::to_string(tune_omega_max);
            man.config["seed"] = std::to_string(g.seed);
            man.add_output(out, "checkpoint.jfdl");
            man.add_output(out, "checkpoint_ema.jfdl");
            man.add_output(out, "metrics.csv");
            man.finished = RunManifest::now_utc();
            man.write(out);
            std::printf("tune-jfdl(%s): wrote %s\n", tune_mode.c_str(),
                        (out / "checkpoint.jfdl").c_str());
        } else if (*an) {
            RunManifest man;
            man.command = "analyze-noise";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);

            std::optional<GaussianMixture> gm;
            std::vector<LabeledPoint2D> data;
            std::optional<Net> net;
            ModelParams mp;
            VEScheme scheme(80.0, 1.0);
            std::optional<SolverHandle> solver;
            DataDraw draw;

            if (an_solver == "analytic") {
                DatasetKind kind = dataset_kind_from(an_dataset);
                gm = GaussianMixture::oracle_for(kind, substream(g.seed, "oracle").next_u64(),
                                                 an_oracle_pts);
                scheme = VEScheme(80.0, sigma_data(kind));
                solver = SolverHandle::analytic(*gm, scheme, Integrator::Heun, an_steps);
                draw = draw_from(*gm);
            } else if (an_solver == "dm" || an_solver == "cm") {
                if (an_ckpt.empty() || an_data.empty())
                    throw ConfigError("analyze-noise: dm/cm solvers need --ckpt and --data");
                auto [loaded, pre] = load_checkpoint(an_ckpt);
                mp = std::move(loaded);
                scheme = VEScheme(pre.sigma_max, pre.sigma_data);
                net.emplace(mp.arch, pre);
                data = read_dataset_csv(an_data);
                draw = draw_from(data);
                solver = an_solver == "dm"
                             ? SolverHandle::denoiser(*net, mp, scheme, Integrator::Heun, an_steps)
                             : SolverHandle::consistency(*net, mp, scheme);
            } else {
                throw ConfigError("analyze-noise: unknown solver " + an_solver);
            }

            auto grid = default_t_grid(scheme, an_grid, an_sigma_lo);
            auto rep = run_grid(*solver, draw, grid, an_nper, g.seed, g.threads, an_dataset);
            write_noise_report_csv((out / "noise_report.csv").string(), rep);
            write_noise_heatmap_csv((out / "noise_heatmap.csv").string(), rep);

            man.config = {{"solver", an_solver}, {"dataset", an_dataset},
                          {"grid_points", std::to_string(an_grid)},
                          {"n_per_t", std::to_string(an_nper)},
                          {"n_steps", std::to_string(an_steps)},
                          {"seed", std::to_string(g.seed)}};
            man.add_output(out, "noise_report.csv");
            man.add_output(out, "noise_heatmap.csv");
            man.finished = RunManifest::now_utc();
            man.write(out);
            std::printf("analyze-noise: %d/%d cells pass, max SNR %.2f dB\n", rep.passed_cells(),
                        rep.total_cells(), rep.max_snr_db());
        } else if (*ver) {
            RunManifest man;
            man.command = "verify";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);

            if (*vp1) {
                DatasetKind kind = dataset_kind_from(vp1_dataset);
                GaussianMixture gm = GaussianMixture::oracle_for(
                    kind, substream(g.seed, "oracle").next_u64(), vp1_oracle_pts);
                VEScheme scheme(80.0, sigma_data(kind));
                SolverHandle oracle =
                    SolverHandle::analytic(gm, scheme, Integrator::Heun, vp1_steps);
                std::vector<MarginalTestResult> rows;
                for (size_t i = 0; i < vp1_t.size(); ++i) {
                    Rng rng = substream(g.seed, "prop1", i);
                    rows.push_back(check_prop1(oracle, gm, vp1_t[i], vp1_n, rng, vp1_rounds,
                                               vp1_negctl));
                    std::printf("prop1 t=%.3g: energy=%.5g threshold=%.5g %s\n", rows.back().t,
                                rows.back().energy_distance, rows.back().permutation_threshold,
                                rows.back().pass ? "PASS" : "FAIL");
                }
                write_prop1_csv((out / "prop1.csv").string(), rows, vp1_dataset, g.seed);
                man.add_output(out, "prop1.csv");
                man.config["check"] = "prop1";
                man.config["negative_control"] = vp1_negctl ? "1" : "0";
            } else if (*vp2) {
                DatasetKind kind = dataset_kind_from(vp2_dataset);
                GaussianMixture gm =
                    GaussianMixture::oracle_for(kind, substream(g.seed, "oracle").next_u64());
                VEScheme scheme(80.0, sigma_data(kind));
                SolverHandle oracle = SolverHandle::analytic(gm, scheme, Integrator::Rk4, vp2_steps);
                std::vector<double> ts(static_cast<size_t>(vp2_tpoints));
                for (int i = 0; i < vp2_tpoints; ++i)
                    ts[static_cast<size_t>(i)] =
                        vp2_tlo * std::pow(vp2_thi / vp2_tlo,
                                           static_cast<double>(i) / (vp2_tpoints - 1));
                Vec2 x0{vp2_x0[0], vp2_x0[1]};
                auto res = check_prop2(oracle, gm, vp2_cls, x0, ts, vp2_flip);
                write_prop2_csv((out / "prop2.csv").string(), res, vp2_dataset, x0, vp2_cls);
                man.add_output(out, "prop2.csv");
                man.config["check"] = "prop2";
                std::printf("prop2: slope=%.4g ci=[%.4g, %.4g] conclusive=%d\n", res.fitted_slope,
                            res.slope_ci_lo, res.slope_ci_hi, res.conclusive ? 1 : 0);
            } else if (*vfd) {
                DatasetKind kind = dataset_kind_from(vfd_dataset);
                GaussianMixture gm =
                    GaussianMixture::oracle_for(kind, substream(g.seed, "oracle").next_u64());
                VEScheme scheme(80.0, sigma_data(kind));
                SolverHandle oracle = SolverHandle::analytic(gm, scheme, Integrator::Rk4, vfd_steps);
                auto res = check_first_derivative(oracle, gm, Vec2{vfd_x0[0], vfd_x0[1]}, vfd_cls,
                                                  vfd_t, vfd_h);
                std::ofstream f((out / "first_deriv.csv").string());
                f << "t,h,fd_x,fd_y,analytic_x,analytic_y,cosine,rel_err,cancellation\n";
                char buf[256];
                std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.6g,%.6g,%d\n",
                              res.t, res.h, res.finite_difference.x, res.finite_difference.y,
                              res.analytic.x, res.analytic.y, res.cosine, res.rel_err,
                              res.cancellation ? 1 : 0);
                f << buf;
                f.close();
                man.add_output(out, "first_deriv.csv");
                man.config["check"] = "first-deriv";
                std::printf("first-deriv: cosine=%.4f rel_err=%.4g cancellation=%d\n", res.cosine,
                            res.rel_err, res.cancellation ? 1 : 0);
            }
            man.config["seed"] = std::to_string(g.seed);
            man.finished = RunManifest::now_utc();
            man.write(out);
        } else if (*smp) {
            RunManifest man;
            man.command = "sample";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);
            auto [mp, pre] = load_checkpoint(smp_ckpt);
            Net net(mp.arch, pre);
            VEScheme scheme(pre.sigma_max, pre.sigma_data);
            SamplePlan plan;
            plan.steps = smp_steps;
            plan.omega = smp_omega;
            plan.cls = smp_cls;
            plan.n = smp_n;
            plan.seed = g.seed;
            plan.intermediate_sigma = smp_mid_sigma;
            auto samples = sample(net, mp, scheme, plan);
            write_samples_csv(out / "samples.csv", samples);
            man.config = {{"ckpt", smp_ckpt},
                          {"steps", std::to_string(smp_steps)},
                          {"omega", std::to_string(smp_omega)},
                          {"class", std::to_string(smp_cls)},
                          {"n", std::to_string(smp_n)},
                          {"seed", std::to_string(g.seed)}};
            man.add_output(out, "samples.csv");
            man.finished = RunManifest::now_utc();
            man.write(out);
            std::printf("sample: wrote %s\n", (out / "samples.csv").c_str());
            (void)smp_ema;
        } else if (*met) {
            RunManifest man;
            man.command = "metrics";
            man.started = RunManifest::now_utc();
            fs::path out = ensure_out_dir(g);
            auto samples = read_dataset_csv(met_samples);
            auto reference = read_dataset_csv(met_reference);
            std::ofstream f((out / "quality.csv").string());
            f << "steps,omega,class,energy_distance,mmd_rbf,sample_variance\n";
            char buf[256];
            auto emit = [&](int cls) {
                auto s = points_of(samples, cls);
                auto r = points_of(reference, cls);
                if (s.empty() || r.empty()) return;
                QualityReport q = quality(s, r);
                std::snprintf(buf, sizeof(buf), "%d,%.10g,%d,%.10g,%.10g,%.10g\n", met_steps,
                              met_omega, cls, q.energy_distance_to_class, q.mmd_rbf,
                              q.sample_variance);
                f << buf;
            };
            emit(-1);
            if (met_per_class)
                for (int c = 0; c < dataset_num_classes(reference); ++c) emit(c);
            f.close();
            man.config = {{"samples", met_samples}, {"reference", met_reference}};
            man.add_output(out, "quality.csv");
            man.finished = RunManifest::now_utc();
            man.write(out);
            std::printf("metrics: wrote %s\n", (out / "quality.csv").c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const CapabilityError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
