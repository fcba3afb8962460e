#include <cmath>
#include <fstream>

#include "doctest.h"
#include "test_util.hpp"
#include "unisync/frames.hpp"
#include "unisync/grid.hpp"
#include "unisync/rng.hpp"

using namespace unisync;
using unisync::testing::TempDir;

TEST_CASE("philox4x32-10 known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
          A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("rng stream golden sequence") {
    RngStream rng(42);
    const std::array<std::uint64_t, 8> golden = {0x77f5493b9ceaf053ull, 0x53ba6cfdfcdb2127ull, 0xa8875dcbd36c0225ull, 0xabaf0dabbac70475ull,
                                                0xd6cbaeb5539023bcull, 0x4b20b5d25099d809ull, 0xbe3e422a39b9314cull, 0x68784c855bbd83b1ull};
    for (std::uint64_t g : golden) {
        CHECK(rng.next_u64() == g);
    }
}

TEST_CASE("rng streams are reproducible and splits are distinct") {
    RngStream a(7), b(7);
    for (int i = 0; i < 16; ++i) {
        CHECK(a.normal() == b.normal());
    }
    RngStream root(7);
    RngStream s1 = root.split("init");
    RngStream s2 = root.split("inject");
    RngStream s3 = root.split("inject", 1);
    CHECK(s1.seed() != s2.seed());
    CHECK(s2.seed() != s3.seed());
    CHECK(s1.next_u64() != s2.next_u64());
    // Splitting does not advance the parent.
    CHECK(root.counter() == 0);
}

TEST_CASE("gaussian_noise") {
    SUBCASE("determinism for a fixed seed") {
        RngStream a(7), b(7);
        Grid ga = gaussian_noise({1, 1, 1, 1, 1}, a);
        Grid gb = gaussian_noise({1, 1, 1, 1, 1}, b);
        CHECK(ga == gb);
    }
    SUBCASE("moments over 4096 draws") {
        RngStream rng(123);
        Grid g = gaussian_noise({1, 1, 1, 64, 64}, rng);
        double sum = 0.0, sq = 0.0;
        for (float v : g.data()) {
            sum += v;
            sq += static_cast<double>(v) * v;
        }
        const double n = static_cast<double>(g.size());
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        CHECK(mean > -0.1);
        CHECK(mean < 0.1);
        CHECK(var > 0.85);
        CHECK(var < 1.15);
    }
    SUBCASE("zero extent is rejected") {
        RngStream rng(1);
        try {
            gaussian_noise({1, 1, 1, 1, 0}, rng);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidDimension);
        }
    }
}

TEST_CASE("grid binary roundtrip") {
    TempDir tmp("grid");
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Grid g = unisync::testing::random_grid({2, 3, 2, 5, 7}, seed, -10.0f, 10.0f);
        save_grid(g, tmp.path() / "g.grd");
        Grid back = load_grid(tmp.path() / "g.grd");
        CHECK(back == g);
    }
}

TEST_CASE("grid layout is bit-exact") {
    Grid g({1, 1, 1, 1, 2}, std::vector<float>{1.0f, -2.0f});
    auto bytes = encode_grid(g);
    REQUIRE(bytes.size() == 4 + 4 + 20 + 8);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "GRD1");
    CHECK(bytes[4] == 5);
    CHECK(bytes[24] == 2);  // width extent
    // 1.0f = 0x3f800000 little-endian
    CHECK(bytes[28] == 0x00);
    CHECK(bytes[31] == 0x3f);
}

TEST_CASE("grid format errors") {
    TempDir tmp("gridbad");
    SUBCASE("wrong magic") {
        auto bytes = encode_grid(Grid({1, 1, 1, 2, 2}, 1.0f));
        bytes[0] = 'X';
        CHECK_THROWS_AS(decode_grid(bytes), Error);
        try {
            decode_grid(bytes);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
        }
    }
    SUBCASE("data shorter than the product of dims") {
        auto bytes = encode_grid(Grid({1, 2, 3, 4, 5}, 0.5f));
        bytes.resize(bytes.size() - 4);
        try {
            decode_grid(bytes);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Format);
        }
    }
    SUBCASE("truncated header") {
        auto bytes = encode_grid(Grid({1, 1, 1, 1, 1}, 0.5f));
        bytes.resize(10);
        CHECK_THROWS_AS(decode_grid(bytes), Error);
    }
}

TEST_CASE("netpbm frame roundtrip") {
    TempDir tmp("frames");
    SUBCASE("constant 0.5 quantizes to 127 or 128") {
        FrameSequence fs(2, 4, 6, 3, 0.5f);
        write_frames(fs, tmp.path());
        FrameSequence back = read_frames(tmp.path());
        REQUIRE(back.same_shape(fs));
        for (float v : back.data()) {
            CHECK((v == 127.0f / 255.0f || v == 128.0f / 255.0f));
        }
    }
    SUBCASE("zeros are exact") {
        FrameSequence fs(3, 5, 5, 1, 0.0f);
        write_frames(fs, tmp.path());
        FrameSequence back = read_frames(tmp.path());
        REQUIRE(back.same_shape(fs));
        for (float v : back.data()) {
            CHECK(v == 0.0f);
        }
        CHECK(std::filesystem::exists(tmp.path() / "frame_00002.pgm"));
    }
    SUBCASE("random frames within one quantization step") {
        Grid g = unisync::testing::random_grid({1, 3, 2, 9, 11}, 99, 0.0f, 1.0f);
        FrameSequence fs = FrameSequence::from_grid(g);
        write_frames(fs, tmp.path());
        FrameSequence back = read_frames(tmp.path());
        REQUIRE(back.same_shape(fs));
        double worst = 0.0;
        for (std::size_t i = 0; i < fs.data().size(); ++i) {
            worst = std::max(worst, std::abs(static_cast<double>(fs.data()[i]) - back.data()[i]));
        }
        CHECK(worst <= 1.0 / 255.0 + 1e-7);
    }
    SUBCASE("mixed frame sizes are rejected") {
        std::vector<std::vector<float>> images{std::vector<float>(16, 0.0f), std::vector<float>(12, 0.0f)};
        try {
            frames_from_images(images, 4, 4, 1);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::InvalidInput);
        }
        write_netpbm({4, 4, 1, std::vector<std::uint8_t>(16, 0)}, tmp.path() / "frame_00000.pgm");
        write_netpbm({3, 4, 1, std::vector<std::uint8_t>(12, 0)}, tmp.path() / "frame_00001.pgm");
        CHECK_THROWS_AS(read_frames(tmp.path()), Error);
    }
}

TEST_CASE("netpbm header with comments") {
    TempDir tmp("pnm");
    const std::string text = "P5\n# comment line\n2 1\n255\n";
    std::ofstream(tmp.path() / "a.pgm", std::ios::binary) << text << '\x10' << '\xff';
    NetpbmImage img = read_netpbm(tmp.path() / "a.pgm");
    CHECK(img.width == 2);
    CHECK(img.height == 1);
    CHECK(img.pixels == std::vector<std::uint8_t>{0x10, 0xff});
}

TEST_CASE("frames <-> grid layout") {
    FrameSequence fs(2, 3, 4, 3);
    fs.at(1, 2, 3, 2) = 0.25f;
    Grid g = fs.to_grid();
    CHECK(g.dims() == Dims{1, 3, 2, 3, 4});
    CHECK(g.at(0, 2, 1, 2, 3) == 0.25f);
    FrameSequence back = FrameSequence::from_grid(g);
    CHECK(back.at(1, 2, 3, 2) == 0.25f);
}
