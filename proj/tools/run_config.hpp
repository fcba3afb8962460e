#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "unisync/eval_harness.hpp"
#include "unisync/flow_train.hpp"
#include "unisync/latent_codec.hpp"
#include "unisync/model_params.hpp"
#include "unisync/noise_schedule.hpp"
#include "unisync/pixel_composite.hpp"
#include "unisync/tali_sample.hpp"
#include "unisync/talking_shapes.hpp"

namespace unisync::cli {

using json = nlohmann::ordered_json;

struct EvalSettings {
    std::size_t clips = 64;
    bool include_degenerate = true;
    std::vector<double> taus{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    std::string frames_subdir = "composited";
    std::size_t gradcheck_probes = 64;
    double gradcheck_step = 1e-3;
    double gradcheck_threshold = 1e-3;
};

struct Paths {
    std::string out_dir = "runs";
    std::string corpus;       // training corpus; generated in memory when empty
    std::string eval_corpus;  // eval corpus; generated in memory when empty
    std::string checkpoint;   // model weights for dub, sweep and gradcheck
    std::string frames;       // directory of clip_%04d/<subdir>/ frames for composite and eval
};

struct RunConfig {
    CodecSpec codec{};
    ModelConfig model{};
    NoiseSchedule schedule{};
    TrainConfig train{};
    std::size_t corpus_clips = 512;
    SamplerConfig sampler{};
    CompositeSpec composite{};
    EvalSettings eval{};
    Paths paths{};
    std::uint64_t seed = 0;

    SceneSpec scene() const;
    PipelineConfig pipeline() const;
    CorpusSpec train_corpus() const;
    CorpusSpec eval_corpus() const;
};

/// Every key with its default value.
json default_config_json();

/// Defaults overlaid with `doc`. Unknown keys and wrong types are Config errors naming the key path.
json merge_config(const json& doc);

/// Applies `section.key=value`. The value is read as JSON when it parses, as a string otherwise.
void apply_override(json& doc, const std::string& assignment);

/// Builds and validates the typed config from a fully merged document.
RunConfig parse_config(const json& resolved);

/// First 8 hex digits of FNV-1a over the compact dump.
std::string config_hash(const json& resolved);

}  // namespace unisync::cli
