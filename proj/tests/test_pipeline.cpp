#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "dualgen/pipeline.hpp"

#include "test_util.hpp"

using namespace dualgen;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.phantoms.image_size = 16;
    cfg.train.image_size = 16;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.train.learning_rate = 1e-3;
    cfg.train.timesteps = 10;
    cfg.train.beta_start = 1e-2;
    cfg.train.beta_end = 0.2;
    cfg.train.seed = 5;
    cfg.n_pairs = 12;
    cfg.n_real = 12;
    cfg.n_synth = 3;
    cfg.checkpoint_epochs = {1};
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DUALGEN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// Minimal structural validator for our own schema files: supports type,
// required and properties/items, which is all they use.
bool validate_schema(const nlohmann::json& schema, const nlohmann::json& value,
                     std::string* why) {
    if (schema.contains("type")) {
        const auto type = schema.at("type").get<std::string>();
        const bool ok = (type == "object" && value.is_object()) ||
                        (type == "array" && value.is_array()) ||
                        (type == "string" && value.is_string()) ||
                        (type == "boolean" && value.is_boolean()) ||
                        (type == "number" && value.is_number()) ||
                        (type == "integer" && value.is_number_integer());
        if (!ok) {
            *why = "expected type " + type;
            return false;
        }
    }
    if (schema.contains("required"))
        for (const auto& key : schema.at("required")) {
            if (!value.contains(key.get<std::string>())) {
                *why = "missing required key " + key.get<std::string>();
                return false;
            }
        }
    if (schema.contains("properties") && value.is_object())
        for (const auto& [key, sub] : schema.at("properties").items())
            if (value.contains(key) && !validate_schema(sub, value.at(key), why))
                return false;
    if (schema.contains("items") && value.is_array())
        for (const auto& item : value)
            if (!validate_schema(schema.at("items"), item, why)) return false;
    return true;
}

} // namespace

TEST_CASE("table fixtures render character-exactly") {
    SECTION("descriptive row in the published layout") {
        DescriptiveStats s;
        s.count = 2500;
        s.mean = 0.654;
        s.std_dev = 0.113;
        s.min = 0.0;
        s.q1 = 0.592;
        s.median = 0.668;
        s.q3 = 0.733;
        s.max = 0.932;
        s.iqr = 0.141;
        const std::string table = render_table1("IoU", {{"Real", s}});
        const std::string expected_row =
            "Real          2500   0.654       N/A   0.113       0   0.592   0.668"
            "   0.733   0.932   0.141";
        INFO(table);
        CHECK(table.find(expected_row + "\n") != std::string::npos);
    }

    SECTION("comparison row in the published layout") {
        ComparisonResult r;
        r.emd = 0.020;
        r.ks_d = 0.077;
        r.p_value = 0.01;
        r.significance = classify_significance(r.p_value);
        REQUIRE(r.significance == Significance::DoubleStar);
        const std::string table = render_table2("IoU", {{"Model_diff", r}});
        INFO(table);
        CHECK(table.find("Model_diff    0.020  0.077  **\n") != std::string::npos);
    }
}

TEST_CASE("pipeline stages compose and rerun byte-identically") {
    testutil::TempDir tmp("pipeline");
    const RunConfig cfg = tiny_config();

    // phantoms (+ reference CDF)
    const std::string data_dir = tmp.file("data");
    const std::string refcdf = tmp.file("refcdf.json");
    cmd_phantoms(cfg, cfg.n_pairs, 5, data_dir, refcdf);
    REQUIRE(fs::exists(fs::path(data_dir) / "manifest.json"));
    REQUIRE(fs::exists(refcdf));
    REQUIRE(fs::exists(fs::path(data_dir) / "MANIFEST.json"));

    // preprocess, mode Sum: blue must equal clamp(r+g) up to quantization
    const std::string enc_sum = tmp.file("enc_sum");
    const int n_enc = cmd_preprocess(cfg, (fs::path(data_dir) / "manifest.json").string(),
                                     refcdf, enc_sum, ThirdChannelMode::Sum);
    CHECK(n_enc == cfg.n_pairs);
    int ppm_count = 0;
    for (const auto& e : fs::directory_iterator(enc_sum))
        if (e.path().extension() == ".ppm") ++ppm_count;
    CHECK(ppm_count == cfg.n_pairs);
    for (int i = 0; i < cfg.n_pairs; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "enc_%05d.ppm", i);
        const RgbImage img = read_ppm((fs::path(enc_sum) / name).string());
        CHECK(consistency_residual(img, ThirdChannelMode::Sum) <= 2.0 / 65535.0);
    }

    SECTION("zero mode stores an exactly empty blue plane") {
        const std::string enc_zero = tmp.file("enc_zero");
        cmd_preprocess(cfg, (fs::path(data_dir) / "manifest.json").string(), refcdf,
                       enc_zero, ThirdChannelMode::Zero);
        const RgbImage img = read_ppm((fs::path(enc_zero) / "enc_00000.ppm").string());
        for (double v : img.b.data) CHECK(v == 0.0);
    }

    SECTION("rerunning preprocess reproduces identical bytes") {
        const auto before = testutil::read_bytes((fs::path(enc_sum) / "enc_00003.ppm").string());
        const auto manifest_before =
            testutil::read_bytes((fs::path(enc_sum) / "manifest.json").string());
        cmd_preprocess(cfg, (fs::path(data_dir) / "manifest.json").string(), refcdf, enc_sum,
                       ThirdChannelMode::Sum);
        CHECK(testutil::read_bytes((fs::path(enc_sum) / "enc_00003.ppm").string()) == before);
        CHECK(testutil::read_bytes((fs::path(enc_sum) / "manifest.json").string()) ==
              manifest_before);
    }

    // train
    const std::string run_dir = tmp.file("run");
    const auto losses = cmd_train(cfg, enc_sum, run_dir);
    REQUIRE(losses.size() == 2);
    CHECK(losses.back() < losses.front());
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint_epoch_0001.mrgb"));
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint_epoch_0002.mrgb"));
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint_final.mrgb"));
    CHECK(fs::exists(fs::path(run_dir) / "loss_trace.csv"));

    SECTION("learning-rate comparison harness") {
        RunConfig fast = cfg, slow = cfg;
        fast.train.learning_rate = 1e-4;
        slow.train.learning_rate = 1e-5;
        const auto fast_losses = cmd_train(fast, enc_sum, tmp.file("run_lr4"));
        const auto slow_losses = cmd_train(slow, enc_sum, tmp.file("run_lr5"));
        CHECK(fast_losses.size() == slow_losses.size());
        CHECK(fs::exists(fs::path(tmp.file("run_lr4")) / "loss_trace.csv"));
        CHECK(fs::exists(fs::path(tmp.file("run_lr5")) / "loss_trace.csv"));
    }

    SECTION("resume from a snapshot replays the full run") {
        RunConfig longer = cfg;
        longer.train.epochs = 4;
        const std::string full_dir = tmp.file("run_full");
        const auto full = cmd_train(longer, enc_sum, full_dir);

        const std::string resumed_dir = tmp.file("run_resumed");
        const auto resumed =
            cmd_train(longer, enc_sum, resumed_dir,
                      (fs::path(run_dir) / "checkpoint_epoch_0002.mrgb").string());
        REQUIRE(resumed.size() == 2);
        CHECK(resumed[0] == full[2]);
        CHECK(resumed[1] == full[3]);
        CHECK(testutil::read_bytes((fs::path(resumed_dir) / "checkpoint_final.mrgb").string()) ==
              testutil::read_bytes((fs::path(full_dir) / "checkpoint_final.mrgb").string()));
    }

    // sample
    const std::string synth_dir = tmp.file("synth");
    cmd_sample(cfg, (fs::path(run_dir) / "checkpoint_final.mrgb").string(), synth_dir,
               cfg.n_synth, 77);
    int ppm = 0, pgm = 0;
    for (const auto& e : fs::directory_iterator(synth_dir)) {
        if (e.path().extension() == ".ppm") ++ppm;
        if (e.path().extension() == ".pgm") ++pgm;
    }
    CHECK(ppm == cfg.n_synth);
    CHECK(pgm == 2 * cfg.n_synth);
    for (int i = 0; i < cfg.n_synth; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%05d.ppm", i);
        const RgbImage img = read_ppm((fs::path(synth_dir) / name).string());
        img.validate();
    }

    SECTION("sampling is reproducible byte-for-byte") {
        const auto first =
            testutil::read_bytes((fs::path(synth_dir) / "sample_00001.ppm").string());
        const std::string synth2 = tmp.file("synth2");
        cmd_sample(cfg, (fs::path(run_dir) / "checkpoint_final.mrgb").string(), synth2,
                   cfg.n_synth, 77);
        CHECK(testutil::read_bytes((fs::path(synth2) / "sample_00001.ppm").string()) == first);
        CHECK(testutil::read_bytes((fs::path(synth2) / "manifest.json").string()) ==
              testutil::read_bytes((fs::path(synth_dir) / "manifest.json").string()));
    }

    // evaluate: corpus against itself is a perfect match
    const std::string self_eval = tmp.file("eval_self");
    const auto input_before =
        testutil::read_bytes((fs::path(data_dir) / "pair_00001_cc.pgm").string());
    const auto self_report =
        cmd_evaluate(cfg, (fs::path(data_dir) / "manifest.json").string(),
                     (fs::path(data_dir) / "manifest.json").string(), self_eval, "Self");
    for (const char* metric : {"iou", "dsc"}) {
        const auto& cmp = self_report.at("metrics").at(metric).at("comparison");
        CHECK(cmp.at("emd").get<double>() == 0.0);
        CHECK(cmp.at("ks_d").get<double>() == 0.0);
        CHECK(cmp.at("p_value").get<double>() == 1.0);
    }
    CHECK(testutil::read_bytes((fs::path(data_dir) / "pair_00001_cc.pgm").string()) ==
          input_before);

    // evaluate synth vs real, then merge reports
    const std::string eval_dir = tmp.file("eval_model");
    const auto report =
        cmd_evaluate(cfg, (fs::path(data_dir) / "manifest.json").string(),
                     (fs::path(synth_dir) / "manifest.json").string(), eval_dir, "Model_sum");
    CHECK(report.at("counts").at("synth").get<int>() <= cfg.n_synth);
    CHECK(fs::exists(fs::path(eval_dir) / "per_sample.csv"));
    CHECK(fs::exists(fs::path(eval_dir) / "violin.csv"));
    CHECK(fs::exists(fs::path(eval_dir) / "report.txt"));

    SECTION("report merges models and marks gaps") {
        const std::string report_dir = tmp.file("combined");
        const auto combined = cmd_report(
            cfg, {eval_dir, self_eval, tmp.file("missing_model")}, report_dir);
        REQUIRE(combined.at("models").size() == 3);
        CHECK(combined.at("models")[0].at("present").get<bool>());
        CHECK(combined.at("models")[1].at("present").get<bool>());
        CHECK_FALSE(combined.at("models")[2].at("present").get<bool>());

        const auto text = testutil::read_bytes(
            (fs::path(report_dir) / "combined_report.txt").string());
        const std::string text_str(text.begin(), text.end());
        CHECK(text_str.find("[missing]") != std::string::npos);

        const auto schema = nlohmann::json::parse(std::ifstream(
            fs::path(DUALGEN_REPO_ROOT) / "docs" / "report_schema.json"));
        const auto produced = nlohmann::json::parse(std::ifstream(
            fs::path(report_dir) / "combined_report.json"));
        std::string why;
        const bool ok = validate_schema(schema, produced, &why);
        INFO(why);
        CHECK(ok);
    }
}

TEST_CASE("evaluate skips unreadable pairs and counts them") {
    testutil::TempDir tmp("eval_skip");
    RunConfig cfg = tiny_config();
    const std::string data_dir = tmp.file("data");
    cmd_phantoms(cfg, 6, 9, data_dir);

    // Corrupt one image file.
    std::ofstream(fs::path(data_dir) / "pair_00002_cc.pgm", std::ios::trunc) << "junk";
    const auto report = cmd_evaluate(cfg, (fs::path(data_dir) / "manifest.json").string(),
                                     (fs::path(data_dir) / "manifest.json").string(),
                                     tmp.file("eval"), "Model");
    CHECK(report.at("skipped").at("real").get<int>() == 1);
    CHECK(report.at("counts").at("real").get<int>() == 5);
}

TEST_CASE("run config json round trip and hashing") {
    RunConfig cfg = tiny_config();
    cfg.keep_largest = false;
    cfg.train.learning_rate = 3e-4;
    const auto j = cfg.to_json();
    const auto back = RunConfig::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(config_hash(j) == config_hash(back.to_json()));
    RunConfig other = cfg;
    other.n_synth += 1;
    CHECK(config_hash(other.to_json()) != config_hash(j));
}

TEST_CASE("cli exit codes") {
    testutil::TempDir tmp("cli");

    SECTION("usage error is exit 2") {
        CHECK(run_cli("phantoms --n 3") == 2);          // missing --out
        CHECK(run_cli("no-such-command") == 2);
        CHECK(run_cli("") == 2);                        // subcommand required
    }

    SECTION("success is exit 0") {
        CHECK(run_cli("phantoms --n 3 --seed 4 --image-size 16 --out " + tmp.file("d")) == 0);
        CHECK(fs::exists(fs::path(tmp.file("d")) / "manifest.json"));
    }

    SECTION("--config is accepted after the subcommand") {
        const std::string cfg = std::string(DUALGEN_REPO_ROOT) + "/configs/desk.json";
        CHECK(run_cli("phantoms --config " + cfg + " --n 2 --image-size 16 --out " +
                      tmp.file("c")) == 0);
        CHECK(fs::exists(fs::path(tmp.file("c")) / "manifest.json"));
    }

    SECTION("runtime failure is exit 1") {
        CHECK(run_cli("train --data " + tmp.file("nonexistent") + " --out " +
                      tmp.file("out")) == 1);
        CHECK(run_cli("sample --checkpoint " + tmp.file("missing.mrgb") + " --out " +
                      tmp.file("s") + " --n 1") == 1);
    }

    SECTION("help is exit 0") { CHECK(run_cli("--help") == 0); }
}

TEST_CASE("bundled reference cdf is valid") {
    const auto path = fs::path(DUALGEN_REPO_ROOT) / "data" / "reference_cdf.json";
    REQUIRE(fs::exists(path));
    const auto ref = ReferenceCdf::from_json(nlohmann::json::parse(std::ifstream(path)));
    CHECK(ref.bins == 256);
}
