// Command-line front end for the dual-view synthesis pipeline:
//   phantoms -> preprocess -> train -> sample -> evaluate -> report
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualgen/pipeline.hpp"
#include "dualgen/version.hpp"

namespace {

dualgen::RunConfig load_base_config(const std::string& config_path) {
    if (config_path.empty()) return {};
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config file: " + config_path);
    return dualgen::RunConfig::from_json(nlohmann::json::parse(in));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(dualgen::kToolName) + " " + dualgen::kToolVersion +
                 " - dual-view mammogram synthesis and consistency evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values")
        ->expected(1);

    // phantoms
    auto* cmd_ph = app.add_subcommand("phantoms", "generate a synthetic dual-view dataset");
    cmd_ph->fallthrough();
    int ph_n = 100;
    uint64_t ph_seed = 1;
    std::string ph_out, ph_refcdf_out;
    int ph_image_size = -1;
    double ph_scale_min = -1, ph_scale_max = -1, ph_density_min = -1, ph_density_max = -1;
    double ph_angle_min = -1, ph_angle_max = -1, ph_noise_min = -1, ph_noise_max = -1;
    double ph_artifact_rate = -1;
    cmd_ph->add_option("--n", ph_n, "number of pairs");
    cmd_ph->add_option("--seed", ph_seed, "dataset seed");
    cmd_ph->add_option("--out", ph_out, "output directory")->required();
    cmd_ph->add_option("--image-size", ph_image_size, "pixels per side");
    cmd_ph->add_option("--scale-min", ph_scale_min, "breast scale lower bound");
    cmd_ph->add_option("--scale-max", ph_scale_max, "breast scale upper bound");
    cmd_ph->add_option("--density-min", ph_density_min, "density lower bound");
    cmd_ph->add_option("--density-max", ph_density_max, "density upper bound");
    cmd_ph->add_option("--angle-min", ph_angle_min, "pectoral angle lower bound (deg)");
    cmd_ph->add_option("--angle-max", ph_angle_max, "pectoral angle upper bound (deg)");
    cmd_ph->add_option("--noise-min", ph_noise_min, "noise sigma lower bound");
    cmd_ph->add_option("--noise-max", ph_noise_max, "noise sigma upper bound");
    cmd_ph->add_option("--artifact-rate", ph_artifact_rate, "bright-bar artifact probability");
    cmd_ph->add_option("--refcdf-out", ph_refcdf_out,
                       "also write a reference CDF built from the first 100 views");

    // preprocess
    auto* cmd_pre = app.add_subcommand("preprocess", "condition and encode a pair dataset");
    cmd_pre->fallthrough();
    std::string pre_manifest, pre_refcdf = "data/reference_cdf.json", pre_out;
    std::string pre_mode = "absdiff";
    cmd_pre->add_option("--manifest", pre_manifest, "pairs manifest.json")->required();
    cmd_pre->add_option("--refcdf", pre_refcdf, "reference CDF JSON");
    cmd_pre->add_option("--out", pre_out, "output directory")->required();
    cmd_pre->add_option("--mode", pre_mode, "third channel: sum|absdiff|zero");

    // train
    auto* cmd_tr = app.add_subcommand("train", "train the noise predictor");
    cmd_tr->fallthrough();
    std::string tr_data, tr_out, tr_resume, tr_sigma;
    double tr_lr = -1, tr_beta_start = -1, tr_beta_end = -1;
    int tr_batch = -1, tr_epochs = -1, tr_image_size = -1, tr_timesteps = -1;
    uint64_t tr_seed = 0;
    bool tr_seed_set = false;
    std::vector<int> tr_ckpt_epochs;
    cmd_tr->add_option("--data", tr_data, "encoded corpus directory")->required();
    cmd_tr->add_option("--out", tr_out, "output directory")->required();
    cmd_tr->add_option("--lr", tr_lr, "learning rate");
    cmd_tr->add_option("--batch-size", tr_batch, "mini-batch size");
    cmd_tr->add_option("--epochs", tr_epochs, "training epochs");
    cmd_tr->add_option("--image-size", tr_image_size, "expected image side");
    cmd_tr->add_option("--seed", tr_seed, "training seed")->each([&](const std::string&) {
        tr_seed_set = true;
    });
    cmd_tr->add_option("--timesteps", tr_timesteps, "diffusion steps T");
    cmd_tr->add_option("--beta-start", tr_beta_start, "linear schedule start");
    cmd_tr->add_option("--beta-end", tr_beta_end, "linear schedule end");
    cmd_tr->add_option("--sigma", tr_sigma, "reverse noise scale: beta|posterior");
    cmd_tr->add_option("--checkpoint-epochs", tr_ckpt_epochs, "epoch snapshot list");
    cmd_tr->add_option("--resume", tr_resume, "checkpoint to continue from");

    // sample
    auto* cmd_sa = app.add_subcommand("sample", "generate synthetic pairs from a checkpoint");
    cmd_sa->fallthrough();
    std::string sa_ckpt, sa_out;
    int sa_n = -1;
    uint64_t sa_seed = 7;
    double sa_percentile = -1;
    cmd_sa->add_option("--checkpoint", sa_ckpt, "checkpoint file")->required();
    cmd_sa->add_option("--out", sa_out, "output directory")->required();
    cmd_sa->add_option("--n", sa_n, "number of pairs to sample");
    cmd_sa->add_option("--seed", sa_seed, "sampling seed");
    cmd_sa->add_option("--percentile", sa_percentile, "normalization percentile");

    // evaluate
    auto* cmd_ev = app.add_subcommand("evaluate", "score a synthetic corpus against a real one");
    cmd_ev->fallthrough();
    std::string ev_real, ev_synth, ev_out, ev_label = "Model";
    bool ev_keep_largest = true;
    cmd_ev->add_option("--real", ev_real, "reference pairs manifest")->required();
    cmd_ev->add_option("--synth", ev_synth, "synthetic pairs manifest")->required();
    cmd_ev->add_option("--out", ev_out, "output directory")->required();
    cmd_ev->add_option("--label", ev_label, "dataset label for the report");
    cmd_ev->add_flag("--keep-largest,!--no-keep-largest", ev_keep_largest,
                     "restrict masks to the largest connected component");

    // report
    auto* cmd_re = app.add_subcommand("report", "merge evaluation results across models");
    cmd_re->fallthrough();
    std::vector<std::string> re_eval_dirs;
    std::string re_out;
    cmd_re->add_option("--eval-dir", re_eval_dirs, "evaluation directory (repeatable)")
        ->required();
    cmd_re->add_option("--out", re_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        dualgen::RunConfig cfg = load_base_config(config_path);

        if (cmd_ph->parsed()) {
            if (cmd_ph->count("--image-size")) cfg.phantoms.image_size = ph_image_size;
            if (cmd_ph->count("--scale-min")) cfg.phantoms.scale_min = ph_scale_min;
            if (cmd_ph->count("--scale-max")) cfg.phantoms.scale_max = ph_scale_max;
            if (cmd_ph->count("--density-min")) cfg.phantoms.density_min = ph_density_min;
            if (cmd_ph->count("--density-max")) cfg.phantoms.density_max = ph_density_max;
            if (cmd_ph->count("--angle-min")) cfg.phantoms.angle_min = ph_angle_min;
            if (cmd_ph->count("--angle-max")) cfg.phantoms.angle_max = ph_angle_max;
            if (cmd_ph->count("--noise-min")) cfg.phantoms.noise_min = ph_noise_min;
            if (cmd_ph->count("--noise-max")) cfg.phantoms.noise_max = ph_noise_max;
            if (cmd_ph->count("--artifact-rate")) cfg.phantoms.artifact_rate = ph_artifact_rate;
            if (!cmd_ph->count("--n")) ph_n = cfg.n_pairs;
            dualgen::cmd_phantoms(cfg, ph_n, ph_seed, ph_out, ph_refcdf_out);
            std::printf("wrote %d pairs to %s\n", ph_n, ph_out.c_str());
        } else if (cmd_pre->parsed()) {
            const auto mode = dualgen::third_channel_mode_from_string(pre_mode);
            const int n = dualgen::cmd_preprocess(cfg, pre_manifest, pre_refcdf, pre_out, mode);
            std::printf("encoded %d pairs to %s (mode=%s)\n", n, pre_out.c_str(),
                        pre_mode.c_str());
        } else if (cmd_tr->parsed()) {
            if (cmd_tr->count("--lr")) cfg.train.learning_rate = tr_lr;
            if (cmd_tr->count("--batch-size")) cfg.train.batch_size = tr_batch;
            if (cmd_tr->count("--epochs")) cfg.train.epochs = tr_epochs;
            if (cmd_tr->count("--image-size")) cfg.train.image_size = tr_image_size;
            if (tr_seed_set) cfg.train.seed = tr_seed;
            if (cmd_tr->count("--timesteps")) cfg.train.timesteps = tr_timesteps;
            if (cmd_tr->count("--beta-start")) cfg.train.beta_start = tr_beta_start;
            if (cmd_tr->count("--beta-end")) cfg.train.beta_end = tr_beta_end;
            if (cmd_tr->count("--sigma"))
                cfg.train.sigma_kind = tr_sigma == "posterior" ? dualgen::SigmaKind::Posterior
                                                               : dualgen::SigmaKind::Beta;
            if (cmd_tr->count("--checkpoint-epochs")) cfg.checkpoint_epochs = tr_ckpt_epochs;
            const auto losses = dualgen::cmd_train(cfg, tr_data, tr_out, tr_resume);
            std::printf("trained %zu epochs; final mean loss %.6f\n", losses.size(),
                        losses.empty() ? 0.0 : losses.back());
        } else if (cmd_sa->parsed()) {
            if (cmd_sa->count("--percentile")) cfg.eval_percentile = sa_percentile;
            if (!cmd_sa->count("--n")) sa_n = cfg.n_synth;
            const double residual = dualgen::cmd_sample(cfg, sa_ckpt, sa_out, sa_n, sa_seed);
            std::printf("sampled %d pairs to %s (mean residual %.6f)\n", sa_n, sa_out.c_str(),
                        residual);
        } else if (cmd_ev->parsed()) {
            if (cmd_ev->count("--keep-largest") || cmd_ev->count("--no-keep-largest"))
                cfg.keep_largest = ev_keep_largest;
            dualgen::cmd_evaluate(cfg, ev_real, ev_synth, ev_out, ev_label);
            std::printf("evaluation written to %s\n", ev_out.c_str());
        } else if (cmd_re->parsed()) {
            dualgen::cmd_report(cfg, re_eval_dirs, re_out);
            std::printf("combined report written to %s\n", re_out.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
