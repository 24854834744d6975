#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualgen/denoiser.hpp"

namespace dualgen {

// Checkpoint file layout:
//   bytes 0..3   magic "MRGB"
//   bytes 4..7   format version, u32 little-endian (currently 1)
//   bytes 8..11  header length in bytes, u32 little-endian
//   header       JSON: architecture, schedule, train config, epoch,
//                optimizer step, has_optimizer_state
//   payload      little-endian float32 arrays in declaration order:
//                all weight arrays, then (if present) Adam first and
//                second moments in the same order.

constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    DenoiserParams params;
    std::optional<AdamState> state;
    TrainConfig config;
    int epoch = 0;
};

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline void put_f32_array(std::ostream& out, const std::vector<float>& a) {
    for (float f : a) put_u32(out, std::bit_cast<uint32_t>(f));
}

inline void get_f32_array(std::istream& in, std::vector<float>& a) {
    for (float& f : a) f = std::bit_cast<float>(get_u32(in));
}

} // namespace detail

inline nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    return nlohmann::ordered_json{
        {"learning_rate", cfg.learning_rate},
        {"batch_size", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"image_size", cfg.image_size},
        {"seed", cfg.seed},
        {"timesteps", cfg.timesteps},
        {"beta_start", cfg.beta_start},
        {"beta_end", cfg.beta_end},
        {"sigma", cfg.sigma_kind == SigmaKind::Beta ? "beta" : "posterior"},
        {"third_channel_mode", to_string(cfg.third_channel_mode)},
    };
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.image_size = j.at("image_size").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.timesteps = j.at("timesteps").get<int>();
    cfg.beta_start = j.at("beta_start").get<double>();
    cfg.beta_end = j.at("beta_end").get<double>();
    cfg.sigma_kind =
        j.at("sigma").get<std::string>() == "posterior" ? SigmaKind::Posterior : SigmaKind::Beta;
    cfg.third_channel_mode =
        third_channel_mode_from_string(j.at("third_channel_mode").get<std::string>());
    return cfg;
}

inline void save_checkpoint(const std::string& path, const DenoiserParams& params,
                            const TrainConfig& cfg, int epoch,
                            const AdamState* state = nullptr) {
    params.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);

    nlohmann::ordered_json header{
        {"arch",
         {{"in_channels", params.arch.in_channels},
          {"hidden_channels", params.arch.hidden_channels},
          {"time_embed_dim", params.arch.time_embed_dim}}},
        {"train_config", train_config_to_json(cfg)},
        {"epoch", epoch},
        {"adam_step", state ? state->step : 0},
        {"has_optimizer_state", state != nullptr},
    };
    const std::string header_str = header.dump();

    out.write("MRGB", 4);
    detail::put_u32(out, kCheckpointVersion);
    detail::put_u32(out, static_cast<uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& a : params.arrays) detail::put_f32_array(out, a);
    if (state) {
        for (const auto& a : state->m) detail::put_f32_array(out, a);
        for (const auto& a : state->v) detail::put_f32_array(out, a);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "MRGB")
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    const uint32_t version = detail::get_u32(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const uint32_t header_len = detail::get_u32(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
    const auto header = nlohmann::json::parse(header_str);

    Checkpoint ck;
    ck.params.arch.in_channels = header.at("arch").at("in_channels").get<int>();
    ck.params.arch.hidden_channels = header.at("arch").at("hidden_channels").get<int>();
    ck.params.arch.time_embed_dim = header.at("arch").at("time_embed_dim").get<int>();
    ck.config = train_config_from_json(header.at("train_config"));
    ck.epoch = header.at("epoch").get<int>();

    const auto sizes = param_array_sizes(ck.params.arch);
    for (int i = 0; i < kNumParamArrays; ++i) {
        ck.params.arrays[i].resize(sizes[i]);
        detail::get_f32_array(in, ck.params.arrays[i]);
    }
    if (header.at("has_optimizer_state").get<bool>()) {
        AdamState st = AdamState::zeros(ck.params.arch);
        st.step = header.at("adam_step").get<int64_t>();
        for (int i = 0; i < kNumParamArrays; ++i) detail::get_f32_array(in, st.m[i]);
        for (int i = 0; i < kNumParamArrays; ++i) detail::get_f32_array(in, st.v[i]);
        ck.state = std::move(st);
    }
    if (!in) throw std::runtime_error("truncated checkpoint payload: " + path);
    ck.params.validate();
    return ck;
}

} // namespace dualgen
