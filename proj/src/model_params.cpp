#include "unisync/model_params.hpp"

#include <algorithm>
#include <cmath>

#include "byte_io.hpp"

namespace unisync {

void ModelConfig::validate() const {
    if (channels == 0 || dim == 0 || hidden == 0 || patch_frames == 0 || patch_spatial == 0) {
        fail(ErrorKind::InvalidDimension, "model extents must be positive");
    }
    if (latent_frames == 0 || latent_height == 0 || latent_width == 0 || latent_frames % patch_frames != 0 ||
        latent_height % patch_spatial != 0 || latent_width % patch_spatial != 0) {
        fail(ErrorKind::InvalidDimension, "latent extents (" + std::to_string(latent_frames) + "," +
                                              std::to_string(latent_height) + "," + std::to_string(latent_width) +
                                              ") do not tile into patches");
    }
    if (dim % 2 != 0) {
        fail(ErrorKind::InvalidDimension, "model.dim must be even");
    }
}

ParamLayout::ParamLayout(std::size_t num_blocks) {
    std::size_t next = 11;
    for (std::size_t l = 0; l < num_blocks; ++l) {
        Block b{};
        b.norm_gain = next++;
        b.norm_bias = next++;
        b.fc1_w = next++;
        b.fc1_b = next++;
        b.fc2_w = next++;
        b.fc2_b = next++;
        b.ctx_w = next++;
        b.ctx_b = next++;
        blocks.push_back(b);
    }
    head_w = next++;
    head_b = next++;
}

template <typename Real>
BasicModelParams<Real>::BasicModelParams(const ModelConfig& config) : m_config(config), m_layout(config.blocks) {
    config.validate();
    const std::size_t d = config.dim, h = config.hidden, c = config.channels;
    const std::size_t kf = config.patch_frames, ks = config.patch_spatial;
    auto add = [&](std::string name, std::vector<std::size_t> shape, Real fill = Real(0)) {
        std::size_t n = 1;
        for (std::size_t e : shape) {
            n *= e;
        }
        m_tensors.push_back({std::move(name), std::move(shape), std::vector<Real>(n, fill)});
    };
    add("pafs.conv.weight", {d, c, kf, ks, ks});
    add("pafs.conv.bias", {d});
    add("pafs.proj.weight", {d, d});
    add("pafs.proj.bias", {d});
    add("pafs.pos_embed", {config.tokens(), d});
    add("pafs.norm.gain", {d}, Real(1));
    add("pafs.norm.bias", {d});
    add("patch_embed.weight", {d, 2 * c, kf, ks, ks});
    add("patch_embed.bias", {d});
    add("time.weight", {d, 2 * ModelConfig::kTimeFrequencies});
    add("time.bias", {d});
    for (std::size_t l = 0; l < config.blocks; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        add(p + "norm.gain", {d}, Real(1));
        add(p + "norm.bias", {d});
        add(p + "mlp.fc1.weight", {h, d});
        add(p + "mlp.fc1.bias", {h});
        add(p + "mlp.fc2.weight", {d, h});
        add(p + "mlp.fc2.bias", {d});
        add(p + "ctx.weight", {d, 2 * d});
        add(p + "ctx.bias", {d});
    }
    add("head.weight", {config.patch_out(), d});
    add("head.bias", {config.patch_out()});
}

template <typename Real>
Tensor<Real>& BasicModelParams<Real>::get(std::string_view name) {
    for (auto& t : m_tensors) {
        if (t.name == name) {
            return t;
        }
    }
    fail(ErrorKind::InvalidInput, "no parameter named " + std::string(name));
}

template <typename Real>
const Tensor<Real>& BasicModelParams<Real>::get(std::string_view name) const {
    return const_cast<BasicModelParams*>(this)->get(name);
}

template <typename Real>
std::size_t BasicModelParams<Real>::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : m_tensors) {
        n += t.data.size();
    }
    return n;
}

template <typename Real>
void BasicModelParams<Real>::set_zero() noexcept {
    for (auto& t : m_tensors) {
        std::fill(t.data.begin(), t.data.end(), Real(0));
    }
}

template <typename Real>
bool BasicModelParams<Real>::all_finite() const noexcept {
    for (const auto& t : m_tensors) {
        for (Real v : t.data) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

template class BasicModelParams<float>;
template class BasicModelParams<double>;

ModelParams init_params(const ModelConfig& config, RngStream rng) {
    ModelParams p(config);
    const ParamLayout& L = p.layout();
    auto fill_normal = [&](std::size_t idx, double stddev) {
        RngStream r = rng.split(p[idx].name);
        for (float& v : p[idx].data) {
            v = static_cast<float>(stddev * r.normal());
        }
    };
    auto fan_in = [&](std::size_t idx) {
        const auto& s = p[idx].shape;
        std::size_t n = 1;
        for (std::size_t i = 1; i < s.size(); ++i) {
            n *= s[i];
        }
        return static_cast<double>(n);
    };
    for (std::size_t idx : {L.conv_w, L.proj_w, L.embed_w, L.time_w}) {
        fill_normal(idx, 1.0 / std::sqrt(fan_in(idx)));
    }
    fill_normal(L.pos_embed, 0.1);
    for (const auto& b : L.blocks) {
        fill_normal(b.fc1_w, 1.0 / std::sqrt(fan_in(b.fc1_w)));
        fill_normal(b.fc2_w, 1.0 / std::sqrt(fan_in(b.fc2_w)));
        fill_normal(b.ctx_w, 0.5 / std::sqrt(fan_in(b.ctx_w)));
    }
    fill_normal(L.head_w, 0.1 / std::sqrt(fan_in(L.head_w)));
    return p;
}

namespace {
constexpr char kCheckpointMagic[4] = {'U', 'N', 'I', 'S'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += (i ? "," : "") + std::to_string(s[i]);
    }
    return out + "]";
}
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(params.tensors().size()));
    for (const auto& t : params.tensors()) {
        w.u32(static_cast<std::uint32_t>(t.name.size()));
        w.raw(t.name.data(), t.name.size());
        w.u32(static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t e : t.shape) {
            w.u32(static_cast<std::uint32_t>(e));
        }
        w.f32s(t.data);
    }
    return std::move(w.bytes());
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    detail::write_file(path.string(), encode_checkpoint(params));
}

ModelParams decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& config) {
    detail::ByteReader r(bytes);
    if (r.str(4, "magic") != std::string(kCheckpointMagic, 4)) {
        fail(ErrorKind::Format, "bad checkpoint magic");
    }
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32("tensor count");

    // Parse everything first so a truncated file is a format error even when
    // an earlier tensor would already be incompatible.
    std::vector<Tensor<float>> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        Tensor<float> t;
        const std::uint32_t len = r.u32("name length");
        t.name = r.str(len, "tensor name");
        const std::uint32_t rank = r.u32("rank");
        if (rank > 8) {
            fail(ErrorKind::Format, "implausible rank for tensor " + t.name);
        }
        long double n = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            t.shape.push_back(r.u32("extent"));
            n *= t.shape.back();
        }
        if (n * 4 > static_cast<long double>(r.remaining())) {
            fail(ErrorKind::Format, "truncated data for tensor " + t.name);
        }
        t.data.resize(static_cast<std::size_t>(n));
        r.f32s(t.data, "tensor data");
        loaded.push_back(std::move(t));
    }
    if (r.remaining() != 0) {
        fail(ErrorKind::Format, "trailing bytes after checkpoint");
    }

    ModelParams params(config);
    for (std::size_t i = 0; i < std::max<std::size_t>(loaded.size(), params.tensors().size()); ++i) {
        if (i >= loaded.size()) {
            fail(ErrorKind::Incompatible, "checkpoint is missing tensor " + params[i].name);
        }
        if (i >= params.tensors().size()) {
            fail(ErrorKind::Incompatible, "checkpoint has unexpected tensor " + loaded[i].name);
        }
        auto& expect = params[i];
        if (loaded[i].name != expect.name) {
            fail(ErrorKind::Incompatible,
                 "tensor " + std::to_string(i) + " is " + loaded[i].name + ", expected " + expect.name);
        }
        if (loaded[i].shape != expect.shape) {
            fail(ErrorKind::Incompatible, "tensor " + expect.name + " has shape " + shape_str(loaded[i].shape) +
                                              ", config expects " + shape_str(expect.shape));
        }
        expect.data = std::move(loaded[i].data);
    }
    return params;
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
    auto bytes = detail::read_file(path.string());
    return decode_checkpoint(bytes, config);
}

}  // namespace unisync
