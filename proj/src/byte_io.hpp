#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "unisync/error.hpp"

namespace unisync::detail {

// Little-endian append/consume helpers shared by the grid and checkpoint formats.
class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            m_bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        m_bytes.insert(m_bytes.end(), b, b + n);
    }
    void f32s(std::span<const float> values) {
        if constexpr (std::endian::native == std::endian::little) {
            raw(values.data(), values.size() * sizeof(float));
        } else {
            for (float v : values) {
                f32(v);
            }
        }
    }
    std::vector<std::uint8_t>& bytes() noexcept { return m_bytes; }

private:
    std::vector<std::uint8_t> m_bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : m_bytes(bytes) {}

    std::size_t remaining() const noexcept { return m_bytes.size() - m_pos; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) {
            fail(ErrorKind::Format, std::string("truncated file while reading ") + what);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(m_bytes[m_pos + i]) << (8 * i);
        }
        m_pos += 4;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(m_bytes.data() + m_pos), n);
        m_pos += n;
        return s;
    }
    void f32s(std::span<float> out, const char* what) {
        need(out.size() * 4, what);
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), m_bytes.data() + m_pos, out.size() * 4);
            m_pos += out.size() * 4;
        } else {
            for (float& v : out) {
                v = std::bit_cast<float>(u32(what));
            }
        }
    }

private:
    std::span<const std::uint8_t> m_bytes;
    std::size_t m_pos = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace unisync::detail
