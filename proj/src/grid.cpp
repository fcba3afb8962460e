#include "unisync/grid.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "byte_io.hpp"

namespace unisync {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidDimension: return "invalid-dimension";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::Format: return "format";
        case ErrorKind::Range: return "range";
        case ErrorKind::State: return "state";
        case ErrorKind::Config: return "config";
        case ErrorKind::Incompatible: return "incompatible";
        case ErrorKind::Diverged: return "training-diverged";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Detection: return "detection";
        case ErrorKind::Spec: return "spec";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

std::string Dims::str() const {
    std::ostringstream os;
    os << '(' << b << ',' << c << ',' << f << ',' << h << ',' << w << ')';
    return os.str();
}

Grid::Grid(Dims dims, float fill) : m_dims(dims), m_data(dims.count(), fill) {}

Grid::Grid(Dims dims, std::vector<float> data) : m_dims(dims), m_data(std::move(data)) {
    require(m_data.size() == m_dims.count(), ErrorKind::InvalidDimension,
            "grid data length " + std::to_string(m_data.size()) + " does not match dims " + m_dims.str());
}

Grid Grid::slice_batch(std::size_t b) const {
    require(b < m_dims.b, ErrorKind::InvalidDimension, "batch index out of range");
    Dims d = m_dims;
    d.b = 1;
    auto src = batch(b);
    return Grid(d, std::vector<float>(src.begin(), src.end()));
}

Grid Grid::slice_channels(std::size_t begin, std::size_t end) const {
    require(begin <= end && end <= m_dims.c, ErrorKind::InvalidDimension, "channel slice out of range");
    Dims d = m_dims;
    d.c = end - begin;
    Grid out(d);
    const std::size_t chan = m_dims.per_channel();
    for (std::size_t b = 0; b < m_dims.b; ++b) {
        const float* src = m_data.data() + (b * m_dims.c + begin) * chan;
        std::copy(src, src + d.c * chan, out.m_data.data() + b * d.c * chan);
    }
    return out;
}

bool Grid::all_finite() const noexcept {
    return std::all_of(m_data.begin(), m_data.end(), [](float v) { return std::isfinite(v); });
}

bool Grid::bitwise_equal(const Grid& other) const noexcept {
    if (m_dims != other.m_dims) {
        return false;
    }
    return std::memcmp(m_data.data(), other.m_data.data(), m_data.size() * sizeof(float)) == 0;
}

void require_finite(const Grid& g, const char* what) {
    if (!g.all_finite()) {
        fail(ErrorKind::InvalidInput, std::string(what) + " contains NaN or Inf");
    }
}

void require_same_dims(const Grid& a, const Grid& b, const char* what) {
    if (a.dims() != b.dims()) {
        fail(ErrorKind::InvalidDimension,
             std::string(what) + ": dims " + a.dims().str() + " vs " + b.dims().str());
    }
}

Grid stack_batch(std::span<const Grid> items) {
    require(!items.empty(), ErrorKind::InvalidDimension, "stack_batch needs at least one grid");
    Dims d = items.front().dims();
    require(d.b == 1, ErrorKind::InvalidDimension, "stack_batch expects B=1 grids");
    std::vector<float> data;
    data.reserve(d.per_batch() * items.size());
    for (const Grid& g : items) {
        Dims gd = g.dims();
        require(gd == d, ErrorKind::InvalidDimension, "stack_batch dims mismatch: " + gd.str() + " vs " + d.str());
        data.insert(data.end(), g.values().begin(), g.values().end());
    }
    d.b = items.size();
    return Grid(d, std::move(data));
}

double max_abs_diff(const Grid& a, const Grid& b) {
    require_same_dims(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

namespace {
constexpr char kGridMagic[4] = {'G', 'R', 'D', '1'};
}

std::vector<std::uint8_t> encode_grid(const Grid& g) {
    detail::ByteWriter w;
    w.raw(kGridMagic, 4);
    w.u32(5);
    for (std::size_t e : g.dims().as_array()) {
        require(e <= 0xffffffffu, ErrorKind::InvalidDimension, "extent exceeds u32");
        w.u32(static_cast<std::uint32_t>(e));
    }
    w.f32s(g.data());
    return std::move(w.bytes());
}

Grid decode_grid(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    if (r.str(4, "magic") != std::string(kGridMagic, 4)) {
        fail(ErrorKind::Format, "bad grid magic");
    }
    const std::uint32_t rank = r.u32("rank");
    require(rank == 5, ErrorKind::Format, "grid rank must be 5, got " + std::to_string(rank));
    std::array<std::size_t, 5> e{};
    for (auto& x : e) {
        x = r.u32("extent");
    }
    Dims d{e[0], e[1], e[2], e[3], e[4]};
    // Guard the product before allocating.
    long double expected = 4.0L * e[0] * e[1] * e[2] * e[3] * e[4];
    if (expected > static_cast<long double>(r.remaining())) {
        fail(ErrorKind::Format, "truncated grid data for dims " + d.str());
    }
    Grid g(d);
    r.f32s(g.data(), "grid data");
    if (r.remaining() != 0) {
        fail(ErrorKind::Format, "trailing bytes after grid data");
    }
    return g;
}

void save_grid(const Grid& g, const std::filesystem::path& path) {
    auto bytes = encode_grid(g);
    detail::write_file(path.string(), bytes);
}

Grid load_grid(const std::filesystem::path& path) {
    auto bytes = detail::read_file(path.string());
    return decode_grid(bytes);
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path);
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(ErrorKind::Io, "write failed for " + path);
    }
}

}  // namespace detail
}  // namespace unisync
