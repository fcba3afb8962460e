#include "run_config.hpp"

#include <cstdio>

#include "unisync/error.hpp"
#include "unisync/rng.hpp"

namespace unisync::cli {

namespace {

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorKind::Config, msg); }

const char* type_name(const json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number_unsigned()) return "unsigned integer";
    if (v.is_number()) return "number";
    if (v.is_string()) return "string";
    if (v.is_array()) return "array";
    if (v.is_object()) return "object";
    return "null";
}

// `value` must have the same kind as `def`; integers are accepted where reals are expected.
void check_type(const json& def, const json& value, const std::string& path) {
    bool ok = false;
    if (def.is_boolean()) ok = value.is_boolean();
    else if (def.is_number_unsigned()) ok = value.is_number_unsigned();
    else if (def.is_number()) ok = value.is_number();
    else if (def.is_string()) ok = value.is_string();
    else if (def.is_array()) {
        ok = value.is_array();
        for (std::size_t i = 0; ok && i < value.size(); ++i) {
            // element kind comes from the default list, which is never empty
            check_type(def.at(0), value[i], path + "[" + std::to_string(i) + "]");
        }
    }
    if (!ok) {
        const char* want = def.is_number_unsigned() ? "unsigned integer" : type_name(def);
        config_error(path + ": expected " + std::string(want) + ", got " + type_name(value));
    }
}

template <typename T>
T get(const json& doc, const char* section, const char* key) {
    return doc.at(section).at(key).get<T>();
}

Activation parse_activation(const std::string& s) {
    if (s == "gelu") return Activation::Gelu;
    if (s == "identity") return Activation::Identity;
    config_error("model.activation: unknown activation '" + s + "' (expected gelu or identity)");
}

const char* activation_name(Activation a) { return a == Activation::Gelu ? "gelu" : "identity"; }

}  // namespace

json default_config_json() {
    const RunConfig d;
    json j;
    j["codec"] = {{"spatial_factor", d.codec.spatial_factor}, {"temporal_factor", d.codec.temporal_factor}};
    j["model"] = {{"channels", d.model.channels},
                  {"patch_frames", d.model.patch_frames},
                  {"patch_spatial", d.model.patch_spatial},
                  {"dim", d.model.dim},
                  {"hidden", d.model.hidden},
                  {"blocks", d.model.blocks},
                  {"latent_frames", d.model.latent_frames},
                  {"latent_height", d.model.latent_height},
                  {"latent_width", d.model.latent_width},
                  {"activation", activation_name(d.model.activation)},
                  {"pafs", d.model.pafs}};
    j["schedule"] = {{"kind", to_string(d.schedule.kind)}, {"steps", static_cast<std::size_t>(d.schedule.steps)}};
    j["train"] = {{"learning_rate", d.train.learning_rate},
                  {"momentum", d.train.momentum},
                  {"batch_size", d.train.batch_size},
                  {"steps", d.train.steps},
                  {"weighting", to_string(d.train.weighting)},
                  {"literal_eq2", d.train.literal_eq2},
                  {"checkpoint_every", d.train.checkpoint_every},
                  {"corpus_clips", d.corpus_clips}};
    j["sampler"] = {{"tau_inj", d.sampler.tau_inj},
                    {"steps", d.sampler.steps},
                    {"injection_level", to_string(d.sampler.injection_level)}};
    j["composite"] = {{"dilate_radius", static_cast<std::size_t>(d.composite.dilate_radius)},
                      {"blur_sigma", d.composite.blur_sigma}};
    j["eval"] = {{"clips", d.eval.clips},
                 {"include_degenerate", d.eval.include_degenerate},
                 {"taus", d.eval.taus},
                 {"seeds", d.eval.seeds},
                 {"frames_subdir", d.eval.frames_subdir},
                 {"gradcheck_probes", d.eval.gradcheck_probes},
                 {"gradcheck_step", d.eval.gradcheck_step},
                 {"gradcheck_threshold", d.eval.gradcheck_threshold}};
    j["paths"] = {{"out_dir", d.paths.out_dir},
                  {"corpus", d.paths.corpus},
                  {"eval_corpus", d.paths.eval_corpus},
                  {"checkpoint", d.paths.checkpoint},
                  {"frames", d.paths.frames}};
    j["seed"] = d.seed;
    return j;
}

json merge_config(const json& doc) {
    json out = default_config_json();
    if (doc.is_null()) return out;
    if (!doc.is_object()) config_error("config: top level must be an object");
    for (const auto& [section, body] : doc.items()) {
        if (!out.contains(section)) config_error(section + ": unknown key");
        json& target = out[section];
        if (!target.is_object()) {
            check_type(target, body, section);
            target = body;
            continue;
        }
        if (!body.is_object()) config_error(section + ": expected object, got " + type_name(body));
        for (const auto& [key, value] : body.items()) {
            const std::string path = section + "." + key;
            if (!target.contains(key)) config_error(path + ": unknown key");
            check_type(target[key], value, path);
            target[key] = value;
        }
    }
    return out;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) config_error("--set expects section.key=value (got '" + assignment + "')");
    const std::string path = assignment.substr(0, eq), raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json patch;
    const auto dot = path.find('.');
    if (dot == std::string::npos) {
        patch[path] = value;
    } else {
        if (path.find('.', dot + 1) != std::string::npos) config_error(path + ": unknown key");
        patch[path.substr(0, dot)][path.substr(dot + 1)] = value;
    }
    json merged = json::object();
    for (const auto& [k, v] : doc.items()) merged[k] = v;
    // overlay one key, keeping the rest of the section
    for (const auto& [section, body] : patch.items()) {
        if (body.is_object() && merged.contains(section) && merged[section].is_object()) {
            for (const auto& [key, v] : body.items()) merged[section][key] = v;
        } else {
            merged[section] = body;
        }
    }
    doc = merge_config(merged);
}

RunConfig parse_config(const json& resolved) {
    const json& j = resolved;
    RunConfig c;
    c.codec.spatial_factor = get<std::size_t>(j, "codec", "spatial_factor");
    c.codec.temporal_factor = get<std::size_t>(j, "codec", "temporal_factor");
    if (c.codec.spatial_factor == 0) config_error("codec.spatial_factor must be >= 1");
    if (c.codec.temporal_factor == 0) config_error("codec.temporal_factor must be >= 1");

    c.model.channels = get<std::size_t>(j, "model", "channels");
    c.model.patch_frames = get<std::size_t>(j, "model", "patch_frames");
    c.model.patch_spatial = get<std::size_t>(j, "model", "patch_spatial");
    c.model.dim = get<std::size_t>(j, "model", "dim");
    c.model.hidden = get<std::size_t>(j, "model", "hidden");
    c.model.blocks = get<std::size_t>(j, "model", "blocks");
    c.model.latent_frames = get<std::size_t>(j, "model", "latent_frames");
    c.model.latent_height = get<std::size_t>(j, "model", "latent_height");
    c.model.latent_width = get<std::size_t>(j, "model", "latent_width");
    c.model.activation = parse_activation(get<std::string>(j, "model", "activation"));
    c.model.pafs = get<bool>(j, "model", "pafs");
    if (c.model.channels != 3) config_error("model.channels must be 3 (RGB video)");
    try {
        c.model.validate();
    } catch (const Error& e) {
        config_error(std::string("model: ") + e.what());
    }

    c.schedule.kind = parse_schedule_kind(get<std::string>(j, "schedule", "kind"));
    const auto steps = get<std::size_t>(j, "schedule", "steps");
    if (steps == 0 || steps > 100000) config_error("schedule.steps must lie in [1, 100000]");
    c.schedule.steps = static_cast<int>(steps);

    c.seed = j.at("seed").get<std::uint64_t>();
    c.train.learning_rate = get<double>(j, "train", "learning_rate");
    c.train.momentum = get<double>(j, "train", "momentum");
    c.train.batch_size = get<std::size_t>(j, "train", "batch_size");
    c.train.steps = get<std::size_t>(j, "train", "steps");
    c.train.weighting = parse_weighting(get<std::string>(j, "train", "weighting"));
    c.train.literal_eq2 = get<bool>(j, "train", "literal_eq2");
    c.train.checkpoint_every = get<std::size_t>(j, "train", "checkpoint_every");
    c.train.schedule = c.schedule;
    c.train.seed = c.seed;
    c.corpus_clips = get<std::size_t>(j, "train", "corpus_clips");
    if (c.corpus_clips == 0) config_error("train.corpus_clips must be >= 1");
    c.train.validate();

    c.sampler.tau_inj = get<double>(j, "sampler", "tau_inj");
    c.sampler.steps = get<std::size_t>(j, "sampler", "steps");
    c.sampler.injection_level = parse_injection_level(get<std::string>(j, "sampler", "injection_level"));
    c.sampler.seed = c.seed;

    const auto radius = get<std::size_t>(j, "composite", "dilate_radius");
    if (radius > 1000) config_error("composite.dilate_radius must be <= 1000");
    c.composite.dilate_radius = static_cast<int>(radius);
    c.composite.blur_sigma = get<double>(j, "composite", "blur_sigma");

    c.eval.clips = get<std::size_t>(j, "eval", "clips");
    c.eval.include_degenerate = get<bool>(j, "eval", "include_degenerate");
    c.eval.taus = get<std::vector<double>>(j, "eval", "taus");
    c.eval.seeds = get<std::vector<std::uint64_t>>(j, "eval", "seeds");
    c.eval.frames_subdir = get<std::string>(j, "eval", "frames_subdir");
    c.eval.gradcheck_probes = get<std::size_t>(j, "eval", "gradcheck_probes");
    c.eval.gradcheck_step = get<double>(j, "eval", "gradcheck_step");
    c.eval.gradcheck_threshold = get<double>(j, "eval", "gradcheck_threshold");
    if (c.eval.clips == 0) config_error("eval.clips must be >= 1");
    if (c.eval.taus.empty()) config_error("eval.taus must not be empty");
    if (c.eval.seeds.empty()) config_error("eval.seeds must not be empty");
    for (std::size_t i = 0; i < c.eval.taus.size(); ++i) {
        const double t = c.eval.taus[i];
        if (!(t >= 0.0 && t <= 1.0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "eval.taus[%zu] must lie in [0, 1] (got %g)", i, t);
            config_error(buf);
        }
    }
    if (!(c.eval.gradcheck_step > 0.0)) config_error("eval.gradcheck_step must be positive");
    if (!(c.eval.gradcheck_threshold > 0.0)) config_error("eval.gradcheck_threshold must be positive");

    c.paths.out_dir = get<std::string>(j, "paths", "out_dir");
    c.paths.corpus = get<std::string>(j, "paths", "corpus");
    c.paths.eval_corpus = get<std::string>(j, "paths", "eval_corpus");
    c.paths.checkpoint = get<std::string>(j, "paths", "checkpoint");
    c.paths.frames = get<std::string>(j, "paths", "frames");

    c.pipeline().validate();
    return c;
}

SceneSpec RunConfig::scene() const {
    SceneSpec s;
    s.frames = model.latent_frames * codec.temporal_factor;
    s.height = model.latent_height * codec.spatial_factor;
    s.width = model.latent_width * codec.spatial_factor;
    return s;
}

PipelineConfig RunConfig::pipeline() const {
    PipelineConfig p;
    p.codec = codec;
    p.model = model;
    p.schedule = schedule;
    p.sampler = sampler;
    p.composite = composite;
    return p;
}

CorpusSpec RunConfig::train_corpus() const {
    CorpusSpec c;
    c.clips = corpus_clips;
    c.seed = RngStream(seed).split("corpus").next_u64();
    c.scene = scene();
    return c;
}

CorpusSpec RunConfig::eval_corpus() const {
    CorpusSpec c;
    c.clips = eval.clips;
    c.seed = RngStream(seed).split("eval_corpus").next_u64();
    c.scene = scene();
    c.include_degenerate = eval.include_degenerate;
    return c;
}

std::string config_hash(const json& resolved) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : resolved.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf, 8);
}

}  // namespace unisync::cli
