#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dualgen/checkpoint.hpp"
#include "dualgen/denoiser.hpp"
#include "dualgen/diffusion.hpp"
#include "dualgen/encoding.hpp"
#include "dualgen/metrics.hpp"
#include "dualgen/netpbm.hpp"
#include "dualgen/parallel.hpp"
#include "dualgen/phantom.hpp"
#include "dualgen/preprocess.hpp"
#include "dualgen/report.hpp"
#include "dualgen/stats.hpp"
#include "dualgen/version.hpp"

namespace dualgen {

// Everything a full run needs: training hyperparameters, phantom dataset
// parameters, evaluation counts and switches. Serializable as JSON so a
// config file can seed a run and individual flags can override it.
struct RunConfig {
    TrainConfig train;
    PhantomRanges phantoms;
    int n_pairs = 100;  // phantom pairs per dataset
    int n_real = 2500;  // evaluation reference count
    int n_synth = 500;  // generated pairs
    bool keep_largest = true;
    double eval_percentile = 99.0;
    int cdf_bins = 256;
    std::vector<int> checkpoint_epochs = {10, 20, 50, 70};

    void validate() const {
        train.validate();
        if (n_pairs < 1) throw std::invalid_argument("n_pairs must be >= 1");
        if (n_real < 2 || n_synth < 2)
            throw std::invalid_argument("evaluation counts must be >= 2");
        if (!(eval_percentile > 0.0 && eval_percentile <= 100.0))
            throw std::invalid_argument("eval_percentile outside (0,100]");
        if (cdf_bins < 2) throw std::invalid_argument("cdf_bins must be >= 2");
    }

    nlohmann::ordered_json to_json() const {
        return nlohmann::ordered_json{
            {"train", train_config_to_json(train)},
            {"phantoms", phantoms.to_json()},
            {"n_pairs", n_pairs},
            {"n_real", n_real},
            {"n_synth", n_synth},
            {"keep_largest", keep_largest},
            {"eval_percentile", eval_percentile},
            {"cdf_bins", cdf_bins},
            {"checkpoint_epochs", checkpoint_epochs},
        };
    }

    static RunConfig from_json(const nlohmann::json& j) {
        RunConfig c;
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
        if (j.contains("phantoms")) c.phantoms = PhantomRanges::from_json(j.at("phantoms"));
        if (j.contains("n_pairs")) c.n_pairs = j.at("n_pairs").get<int>();
        if (j.contains("n_real")) c.n_real = j.at("n_real").get<int>();
        if (j.contains("n_synth")) c.n_synth = j.at("n_synth").get<int>();
        if (j.contains("keep_largest")) c.keep_largest = j.at("keep_largest").get<bool>();
        if (j.contains("eval_percentile"))
            c.eval_percentile = j.at("eval_percentile").get<double>();
        if (j.contains("cdf_bins")) c.cdf_bins = j.at("cdf_bins").get<int>();
        if (j.contains("checkpoint_epochs"))
            c.checkpoint_epochs = j.at("checkpoint_epochs").get<std::vector<int>>();
        return c;
    }
};

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string config_hash(const nlohmann::ordered_json& config) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(config.dump())));
    return buf;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

// Run-level manifest: tool identity, config hash, and the functional
// arguments of the stage. Paths stay out so identically configured runs
// in different directories emit identical bytes.
inline void write_run_manifest(const std::string& out_dir, const std::string& command,
                               const nlohmann::ordered_json& config,
                               nlohmann::ordered_json extras = {}) {
    nlohmann::ordered_json m{
        {"tool", kToolName},
        {"version", kToolVersion},
        {"command", command},
        {"config_hash", config_hash(config)},
        {"config", config},
    };
    if (!extras.is_null())
        for (auto& [k, v] : extras.items()) m[k] = v;
    write_text_file(std::filesystem::path(out_dir) / "MANIFEST.json", m.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

} // namespace detail

struct PairRef {
    int id = 0;
    std::string cc_path;
    std::string mlo_path;
};

struct PairCorpus {
    std::string kind;
    std::vector<PairRef> pairs;
    nlohmann::json raw; // full manifest for extra per-kind fields
};

// Reads a pairs manifest (phantom or sample corpus) and resolves the
// image paths relative to the manifest's directory.
inline PairCorpus load_pair_corpus(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const auto j = detail::read_json_file(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    PairCorpus corpus;
    corpus.kind = j.value("kind", "");
    corpus.raw = j;
    for (const auto& p : j.at("pairs")) {
        PairRef ref;
        ref.id = p.at("id").get<int>();
        ref.cc_path = (base / p.at("cc").get<std::string>()).string();
        ref.mlo_path = (base / p.at("mlo").get<std::string>()).string();
        corpus.pairs.push_back(std::move(ref));
    }
    return corpus;
}

// --- phantoms ---------------------------------------------------------------

// Generates the phantom pair dataset; optionally derives a reference CDF
// from the first 100 written view images (50 pairs), mirroring how a
// matching target would be estimated from a reference corpus.
inline DatasetManifest cmd_phantoms(const RunConfig& cfg, int n, uint64_t seed,
                                    const std::string& out_dir,
                                    const std::string& refcdf_out = "") {
    cfg.validate();
    PhantomRanges ranges = cfg.phantoms;
    const auto manifest = generate_dataset(n, ranges, seed, out_dir);

    if (!refcdf_out.empty()) {
        namespace fs = std::filesystem;
        std::vector<GrayImage> sample;
        const int pairs_needed = std::min(n, 50);
        for (int i = 0; i < pairs_needed; ++i) {
            sample.push_back(read_pgm((fs::path(out_dir) / manifest.pairs[i].cc_path).string()));
            sample.push_back(read_pgm((fs::path(out_dir) / manifest.pairs[i].mlo_path).string()));
        }
        const auto ref = build_reference_cdf(sample, cfg.cdf_bins);
        detail::write_text_file(refcdf_out, ref.to_json().dump(2) + "\n");
    }

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"n", n}, {"seed", seed}};
    detail::write_run_manifest(out_dir, "phantoms", config);
    return manifest;
}

// --- preprocess -------------------------------------------------------------

// Conditioning chain applied to every pair before encoding:
// max-normalize, mirror left-sided views (phantoms are all right-sided),
// histogram-match against the reference CDF, then encode with the
// configured third-channel mode and store as 16-bit PPM.
inline int cmd_preprocess(const RunConfig& cfg, const std::string& manifest_path,
                          const std::string& refcdf_path, const std::string& out_dir,
                          ThirdChannelMode mode) {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const auto corpus = load_pair_corpus(manifest_path);
    const auto ref = ReferenceCdf::from_json(detail::read_json_file(refcdf_path));

    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    nlohmann::ordered_json log = nlohmann::ordered_json::array();
    const std::string ops_desc[] = {
        "normalize_max",
        "mirror_if_left",
        "histogram_match(bins=" + std::to_string(ref.bins) + ")",
        "encode(" + to_string(mode) + ")",
    };
    for (const auto& p : corpus.pairs) {
        GrayImage cc = read_pgm(p.cc_path);
        GrayImage mlo = read_pgm(p.mlo_path);
        cc = histogram_match(mirror_if_left(normalize_max(cc), Laterality::Right), ref);
        mlo = histogram_match(mirror_if_left(normalize_max(mlo), Laterality::Right), ref);
        const RgbImage enc = encode(DualViewPair{std::move(cc), std::move(mlo)}, mode);
        char name[64];
        std::snprintf(name, sizeof(name), "enc_%05d.ppm", p.id);
        write_ppm(enc, (fs::path(out_dir) / name).string(), 16);
        images.push_back({{"id", p.id}, {"ppm", name}});
        log.push_back({{"id", p.id},
                       {"cc", fs::path(p.cc_path).filename().string()},
                       {"mlo", fs::path(p.mlo_path).filename().string()},
                       {"laterality", "R"},
                       {"ops", ops_desc}});
    }

    nlohmann::ordered_json enc_manifest{
        {"kind", "encoded-images"},
        {"mode", to_string(mode)},
        {"n", corpus.pairs.size()},
        {"cdf_bins", ref.bins},
        {"images", images},
    };
    detail::write_text_file(fs::path(out_dir) / "manifest.json", enc_manifest.dump(2) + "\n");
    detail::write_text_file(fs::path(out_dir) / "stage_log.json",
                            nlohmann::ordered_json{{"images", log}}.dump(2) + "\n");

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"mode", to_string(mode)}};
    detail::write_run_manifest(out_dir, "preprocess", config);
    return static_cast<int>(corpus.pairs.size());
}

// --- train ------------------------------------------------------------------

inline std::string checkpoint_filename(int epoch) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.mrgb", epoch);
    return name;
}

// Trains on an encoded corpus, writing epoch-snapshot checkpoints (with
// optimizer state, so any snapshot can resume) and the per-epoch loss
// trace. Returns the trace.
inline std::vector<double> cmd_train(const RunConfig& cfg, const std::string& encoded_dir,
                                     const std::string& out_dir,
                                     const std::string& resume_path = "") {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const auto enc = detail::read_json_file(fs::path(encoded_dir) / "manifest.json");
    std::vector<ImageTensor> dataset;
    for (const auto& item : enc.at("images"))
        dataset.push_back(tensor_from_rgb(
            read_ppm((fs::path(encoded_dir) / item.at("ppm").get<std::string>()).string())));

    TrainConfig tc = cfg.train;
    tc.third_channel_mode = third_channel_mode_from_string(enc.at("mode").get<std::string>());

    const DenoiserParams* resume_params = nullptr;
    const AdamState* resume_state = nullptr;
    int start_epoch = 0;
    Checkpoint ck;
    if (!resume_path.empty()) {
        ck = load_checkpoint(resume_path);
        if (!ck.state)
            throw std::runtime_error("resume checkpoint lacks optimizer state: " + resume_path);
        if (ck.config.image_size != tc.image_size || ck.config.timesteps != tc.timesteps)
            throw std::runtime_error("resume checkpoint was trained with a different config");
        resume_params = &ck.params;
        resume_state = &*ck.state;
        start_epoch = ck.epoch;
    }

    std::vector<std::pair<int, double>> trace;
    const auto result = train(
        dataset, tc,
        [&](int epoch, const DenoiserParams& params, const AdamState& state, double loss) {
            trace.emplace_back(epoch, loss);
            const bool snapshot =
                std::find(cfg.checkpoint_epochs.begin(), cfg.checkpoint_epochs.end(),
                          epoch) != cfg.checkpoint_epochs.end();
            if (snapshot || epoch == tc.epochs)
                save_checkpoint((fs::path(out_dir) / checkpoint_filename(epoch)).string(),
                                params, tc, epoch, &state);
        },
        resume_params, resume_state, start_epoch);

    save_checkpoint((fs::path(out_dir) / "checkpoint_final.mrgb").string(), result.params,
                    tc, tc.epochs, &result.state);

    std::string csv = "epoch,mean_loss\n";
    for (const auto& [epoch, loss] : trace) {
        char row[64];
        std::snprintf(row, sizeof(row), "%d,%.17g\n", epoch, loss);
        csv += row;
    }
    detail::write_text_file(fs::path(out_dir) / "loss_trace.csv", csv);

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"mode", to_string(tc.third_channel_mode)},
                      {"resumed_from_epoch", start_epoch}};
    detail::write_run_manifest(out_dir, "train", config);
    return result.epoch_loss;
}

// --- sample -----------------------------------------------------------------

// Draws n pairs from a checkpoint: ancestral sampling per image with an
// index-derived seed (order-independent, so images parallelize), then the
// 99th-percentile normalization, then decode into per-view grayscale.
inline double cmd_sample(const RunConfig& cfg, const std::string& checkpoint_path,
                         const std::string& out_dir, int n, uint64_t seed) {
    cfg.validate();
    if (n < 1) throw std::invalid_argument("cmd_sample: n must be >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const NoiseSchedule sched = ck.config.schedule();
    const int size = ck.config.image_size;
    const ThirdChannelMode mode = ck.config.third_channel_mode;

    std::vector<double> residuals(n, 0.0);
    std::vector<std::string> ppm_names(n), cc_names(n), mlo_names(n);
    parallel_for(static_cast<size_t>(n), [&](size_t i) {
        DenoiserWorkspace ws;
        const NoisePredictor predictor = [&](const ImageTensor& x, int t) {
            return denoiser_forward(ck.params, x, t, ws);
        };
        const ImageTensor tensor = generate(
            predictor, sched, 3, size, size,
            Rng::derive_seed(seed, 6, static_cast<uint64_t>(i)));
        RgbImage rgb = percentile_normalize(rgb_from_tensor(tensor), cfg.eval_percentile);
        const DualViewPair pair = decode(rgb);
        residuals[i] = consistency_residual(rgb, mode);

        char base[64];
        std::snprintf(base, sizeof(base), "sample_%05d", static_cast<int>(i));
        ppm_names[i] = std::string(base) + ".ppm";
        cc_names[i] = std::string(base) + "_cc.pgm";
        mlo_names[i] = std::string(base) + "_mlo.pgm";
        write_ppm(rgb, (fs::path(out_dir) / ppm_names[i]).string(), 16);
        write_pgm(pair.cc, (fs::path(out_dir) / cc_names[i]).string(), 16);
        write_pgm(pair.mlo, (fs::path(out_dir) / mlo_names[i]).string(), 16);
    });

    double residual_mean = 0.0;
    for (double r : residuals) residual_mean += r;
    residual_mean /= n;

    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (int i = 0; i < n; ++i)
        pairs.push_back({{"id", i}, {"cc", cc_names[i]}, {"mlo", mlo_names[i]},
                         {"ppm", ppm_names[i]}});
    nlohmann::ordered_json manifest{
        {"kind", "sample-pairs"},
        {"mode", to_string(mode)},
        {"n", n},
        {"seed", seed},
        {"epoch", ck.epoch},
        {"consistency_residual_mean", residual_mean},
        {"pairs", pairs},
    };
    detail::write_text_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"n", n}, {"seed", seed}, {"epoch", ck.epoch}};
    detail::write_run_manifest(out_dir, "sample", config);
    return residual_mean;
}

// --- evaluate ---------------------------------------------------------------

struct CorpusMetrics {
    std::vector<MetricSample> samples;
    int skipped = 0;
    SampleSet iou_set() const {
        SampleSet s;
        s.label = "iou";
        for (const auto& m : samples) s.values.push_back(m.iou);
        return s;
    }
    SampleSet dsc_set() const {
        SampleSet s;
        s.label = "dsc";
        for (const auto& m : samples) s.values.push_back(m.dsc);
        return s;
    }
};

// Mask metrics for every pair of a corpus. Unreadable pairs and pairs with
// a degenerate (single-bin) view are skipped and counted; both-empty-mask
// pairs stay in the distribution with score 0.
inline CorpusMetrics corpus_consistency(const PairCorpus& corpus, bool keep_largest,
                                        double eval_percentile,
                                        const std::string& corpus_label) {
    CorpusMetrics out;
    for (const auto& ref : corpus.pairs) {
        try {
            GrayImage cc = percentile_normalize(read_pgm(ref.cc_path), eval_percentile);
            GrayImage mlo = percentile_normalize(read_pgm(ref.mlo_path), eval_percentile);
            out.samples.push_back(
                pair_consistency(DualViewPair{std::move(cc), std::move(mlo)}, keep_largest,
                                 corpus_label + "/" + std::to_string(ref.id)));
        } catch (const PnmError&) {
            ++out.skipped;
        } catch (const DegenerateHistogramError&) {
            ++out.skipped;
        }
    }
    return out;
}

inline nlohmann::ordered_json violin_bins_json(const SampleSet& s, int bins = 40) {
    std::vector<int> counts(bins, 0);
    for (double v : s.values) {
        int k = static_cast<int>(std::floor(v * bins));
        k = std::clamp(k, 0, bins - 1);
        ++counts[k];
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int k = 0; k < bins; ++k)
        rows.push_back({{"bin_lo", static_cast<double>(k) / bins},
                        {"bin_hi", static_cast<double>(k + 1) / bins},
                        {"count", counts[k]}});
    return rows;
}

// Full distribution comparison of a synthetic corpus against a reference
// corpus: per-sample CSV, descriptive statistics, EMD/KS comparison, and
// violin-ready binned densities.
inline nlohmann::ordered_json cmd_evaluate(const RunConfig& cfg,
                                           const std::string& real_manifest,
                                           const std::string& synth_manifest,
                                           const std::string& out_dir,
                                           const std::string& label) {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    const auto real_corpus = load_pair_corpus(real_manifest);
    const auto synth_corpus = load_pair_corpus(synth_manifest);
    if (real_corpus.pairs.empty() || synth_corpus.pairs.empty())
        throw std::runtime_error("cmd_evaluate: empty corpus");

    const auto real = corpus_consistency(real_corpus, cfg.keep_largest, cfg.eval_percentile,
                                         "real");
    const auto synth = corpus_consistency(synth_corpus, cfg.keep_largest,
                                          cfg.eval_percentile, label);
    if (real.samples.empty() || synth.samples.empty())
        throw std::runtime_error("cmd_evaluate: no evaluable pairs");

    // Per-sample CSV.
    std::string csv = "corpus,id,iou,dsc,warnings\n";
    auto append_rows = [&csv](const CorpusMetrics& cm) {
        for (const auto& m : cm.samples) {
            char row[160];
            std::snprintf(row, sizeof(row), "%s,%.9f,%.9f,%s\n", m.source_id.c_str(), m.iou,
                          m.dsc, m.empty_union ? "empty_union" : "");
            // source_id already carries "corpus/id"; split for the CSV.
            std::string line = row;
            const auto slash = line.find('/');
            if (slash != std::string::npos) line[slash] = ',';
            csv += line;
        }
    };
    append_rows(real);
    append_rows(synth);
    detail::write_text_file(fs::path(out_dir) / "per_sample.csv", csv);

    const SampleSet real_iou = real.iou_set(), real_dsc = real.dsc_set();
    const SampleSet synth_iou = synth.iou_set(), synth_dsc = synth.dsc_set();

    const DescriptiveStats real_iou_stats = describe(real_iou);
    const DescriptiveStats real_dsc_stats = describe(real_dsc);
    const DescriptiveStats synth_iou_stats = describe(synth_iou, &real_iou_stats.mean);
    const DescriptiveStats synth_dsc_stats = describe(synth_dsc, &real_dsc_stats.mean);
    const ComparisonResult cmp_iou = compare_distributions(synth_iou, real_iou);
    const ComparisonResult cmp_dsc = compare_distributions(synth_dsc, real_dsc);

    // Violin-plot-ready binned densities.
    std::string violin = "corpus,metric,bin_lo,bin_hi,count,density\n";
    auto violin_rows = [&violin](const std::string& corpus, const std::string& metric,
                                 const SampleSet& s) {
        const double n = static_cast<double>(s.values.size());
        for (const auto& row : violin_bins_json(s)) {
            const double lo = row.at("bin_lo").get<double>();
            const double hi = row.at("bin_hi").get<double>();
            const int count = row.at("count").get<int>();
            char line[160];
            std::snprintf(line, sizeof(line), "%s,%s,%.3f,%.3f,%d,%.9f\n", corpus.c_str(),
                          metric.c_str(), lo, hi, count, count / (n * (hi - lo)));
            violin += line;
        }
    };
    violin_rows("real", "iou", real_iou);
    violin_rows("real", "dsc", real_dsc);
    violin_rows(label, "iou", synth_iou);
    violin_rows(label, "dsc", synth_dsc);
    detail::write_text_file(fs::path(out_dir) / "violin.csv", violin);

    nlohmann::ordered_json report{
        {"label", label},
        {"counts", {{"real", real.samples.size()}, {"synth", synth.samples.size()}}},
        {"skipped", {{"real", real.skipped}, {"synth", synth.skipped}}},
        {"metrics",
         {{"iou",
           {{"real", descriptive_to_json(real_iou_stats)},
            {"synth", descriptive_to_json(synth_iou_stats)},
            {"comparison", comparison_to_json(cmp_iou)}}},
          {"dsc",
           {{"real", descriptive_to_json(real_dsc_stats)},
            {"synth", descriptive_to_json(synth_dsc_stats)},
            {"comparison", comparison_to_json(cmp_dsc)}}}}},
    };
    if (synth_corpus.raw.contains("consistency_residual_mean"))
        report["consistency_residual_mean"] =
            synth_corpus.raw.at("consistency_residual_mean").get<double>();
    detail::write_text_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");

    std::string text;
    text += render_table1("IoU", {{"Real", real_iou_stats}, {label, synth_iou_stats}});
    text += "\n";
    text += render_table1("DSC", {{"Real", real_dsc_stats}, {label, synth_dsc_stats}});
    text += "\n";
    text += render_table2("IoU", {{label, cmp_iou}});
    text += "\n";
    text += render_table2("DSC", {{label, cmp_dsc}});
    detail::write_text_file(fs::path(out_dir) / "report.txt", text);

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"label", label}};
    config["eval_chain"] = {
        "percentile_normalize(p=" + format_stat(cfg.eval_percentile) + ") per view",
        std::string("pair_consistency(keep_largest=") + (cfg.keep_largest ? "true" : "false") +
            ")"};
    detail::write_run_manifest(out_dir, "evaluate", config);
    return report;
}

// --- report -----------------------------------------------------------------

// Merges several evaluation directories (one per third-channel model)
// into combined Table-1/Table-2 style views; missing directories render
// as explicit gaps.
inline nlohmann::ordered_json cmd_report(const RunConfig& cfg,
                                         const std::vector<std::string>& eval_dirs,
                                         const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);

    struct ModelReport {
        std::string label;
        std::optional<nlohmann::json> report;
    };
    std::vector<ModelReport> models;
    std::optional<nlohmann::json> first_report;
    for (const auto& dir : eval_dirs) {
        ModelReport m;
        const auto path = fs::path(dir) / "report.json";
        if (fs::exists(path)) {
            m.report = detail::read_json_file(path);
            m.label = m.report->at("label").get<std::string>();
            if (!first_report) first_report = m.report;
        } else {
            m.label = fs::path(dir).filename().string();
        }
        models.push_back(std::move(m));
    }
    if (!first_report) throw std::runtime_error("cmd_report: no evaluation reports found");

    std::string text;
    nlohmann::ordered_json combined{{"models", nlohmann::ordered_json::array()}};
    for (const char* metric : {"iou", "dsc"}) {
        const std::string metric_label = metric == std::string("iou") ? "IoU" : "DSC";
        std::vector<Table1Row> t1;
        std::vector<Table2Row> t2;
        t1.push_back({"Real", descriptive_from_json(
                                  first_report->at("metrics").at(metric).at("real"))});
        for (const auto& m : models) {
            if (m.report) {
                const auto& mj = m.report->at("metrics").at(metric);
                t1.push_back({m.label, descriptive_from_json(mj.at("synth"))});
                t2.push_back({m.label, comparison_from_json(mj.at("comparison"))});
            } else {
                t1.push_back({m.label, std::nullopt});
                t2.push_back({m.label, std::nullopt});
            }
        }
        text += render_table1(metric_label, t1) + "\n";
        text += render_table2(metric_label, t2) + "\n";
    }
    text += "consistency residual (mean |b - f(r,g)| over sampled images):\n";
    for (const auto& m : models) {
        if (m.report && m.report->contains("consistency_residual_mean")) {
            char line[96];
            std::snprintf(line, sizeof(line), "  %-12s %.6f\n", m.label.c_str(),
                          m.report->at("consistency_residual_mean").get<double>());
            text += line;
        } else {
            text += "  " + m.label + "  [missing]\n";
        }
    }
    detail::write_text_file(fs::path(out_dir) / "combined_report.txt", text);

    for (const auto& m : models) {
        nlohmann::ordered_json entry{{"label", m.label}, {"present", m.report.has_value()}};
        if (m.report) entry["report"] = *m.report;
        combined["models"].push_back(entry);
    }
    combined["real"] = {
        {"iou", first_report->at("metrics").at("iou").at("real")},
        {"dsc", first_report->at("metrics").at("dsc").at("real")},
    };
    detail::write_text_file(fs::path(out_dir) / "combined_report.json",
                            combined.dump(2) + "\n");

    nlohmann::ordered_json config = cfg.to_json();
    config["args"] = {{"models", static_cast<int>(models.size())}};
    detail::write_run_manifest(out_dir, "report", config);
    return combined;
}

} // namespace dualgen
