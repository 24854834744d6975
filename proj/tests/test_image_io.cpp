#include <catch2/catch_amalgamated.hpp>

#include "dualgen/netpbm.hpp"
#include "dualgen/rng.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace dualgen;

TEST_CASE("read_pgm maps stored integers onto [0,1]") {
    testutil::TempDir tmp("pgm_read");

    SECTION("8-bit endpoints") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P5\n2 1\n255\n");
        bytes.push_back(0);
        bytes.push_back(255);
        testutil::write_bytes(tmp.file("a.pgm"), bytes);
        const GrayImage img = read_pgm(tmp.file("a.pgm"));
        REQUIRE(img.width == 2);
        REQUIRE(img.height == 1);
        CHECK(img.data[0] == 0.0);
        CHECK(img.data[1] == 1.0);
    }

    SECTION("16-bit big-endian sample") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P5\n1 1\n65535\n");
        bytes.push_back(0x80);
        bytes.push_back(0x00);
        testutil::write_bytes(tmp.file("b.pgm"), bytes);
        const GrayImage img = read_pgm(tmp.file("b.pgm"));
        CHECK(img.data[0] == Catch::Approx(32768.0 / 65535.0).epsilon(1e-12));
    }

    SECTION("ASCII P2 is rejected") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P2\n1 1\n255\n0\n");
        testutil::write_bytes(tmp.file("c.pgm"), bytes);
        try {
            read_pgm(tmp.file("c.pgm"));
            FAIL("expected PnmError");
        } catch (const PnmError& e) {
            CHECK(e.kind() == PnmErrorKind::UnsupportedMagic);
        }
    }

    SECTION("header comments are accepted") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P5\n# a comment\n2 1\n# another\n255\n");
        bytes.push_back(7);
        bytes.push_back(9);
        testutil::write_bytes(tmp.file("d.pgm"), bytes);
        const GrayImage img = read_pgm(tmp.file("d.pgm"));
        CHECK(img.data[0] == Catch::Approx(7.0 / 255.0));
    }

    SECTION("truncated payload") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P5\n2 2\n255\n");
        bytes.push_back(1);
        testutil::write_bytes(tmp.file("e.pgm"), bytes);
        try {
            read_pgm(tmp.file("e.pgm"));
            FAIL("expected PnmError");
        } catch (const PnmError& e) {
            CHECK(e.kind() == PnmErrorKind::TruncatedPayload);
        }
    }

    SECTION("unusual maxval is a malformed header") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P5\n1 1\n100\n");
        bytes.push_back(1);
        testutil::write_bytes(tmp.file("f.pgm"), bytes);
        try {
            read_pgm(tmp.file("f.pgm"));
            FAIL("expected PnmError");
        } catch (const PnmError& e) {
            CHECK(e.kind() == PnmErrorKind::MalformedHeader);
        }
    }
}

TEST_CASE("write_pgm quantizes round-half-up") {
    testutil::TempDir tmp("pgm_write");
    GrayImage img(2, 1);
    img.data = {0.0, 1.0};
    write_pgm(img, tmp.file("a.pgm"), 8);
    auto bytes = testutil::read_bytes(tmp.file("a.pgm"));
    REQUIRE(bytes.size() >= 2);
    CHECK(bytes[bytes.size() - 2] == 0);
    CHECK(bytes[bytes.size() - 1] == 255);

    GrayImage half(1, 1);
    half.data = {0.5};
    write_pgm(half, tmp.file("b.pgm"), 8);
    bytes = testutil::read_bytes(tmp.file("b.pgm"));
    CHECK(bytes.back() == 128); // round(127.5) half-up
}

TEST_CASE("pgm round trip stays within one quantization step") {
    testutil::TempDir tmp("pgm_rt");
    double max_err16 = 0.0, max_err8 = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const GrayImage img = oracle::random_image(6, 5, 1000 + i);
        write_pgm(img, tmp.file("rt.pgm"), 16);
        const GrayImage back = read_pgm(tmp.file("rt.pgm"));
        for (size_t j = 0; j < img.size(); ++j)
            max_err16 = std::max(max_err16, std::abs(img.data[j] - back.data[j]));
        write_pgm(img, tmp.file("rt8.pgm"), 8);
        const GrayImage back8 = read_pgm(tmp.file("rt8.pgm"));
        for (size_t j = 0; j < img.size(); ++j)
            max_err8 = std::max(max_err8, std::abs(img.data[j] - back8.data[j]));
    }
    CHECK(max_err16 <= 1.0 / 65535.0);
    CHECK(max_err8 <= 1.0 / 255.0);
}

TEST_CASE("reader and writer are inverse on canonical files") {
    testutil::TempDir tmp("pgm_canon");
    for (int i = 0; i < 20; ++i) {
        const GrayImage img = oracle::random_image(9, 4, 77 + i);
        write_pgm(img, tmp.file("x.pgm"), 16);
        const auto first = testutil::read_bytes(tmp.file("x.pgm"));
        write_pgm(read_pgm(tmp.file("x.pgm")), tmp.file("y.pgm"), 16);
        CHECK(testutil::read_bytes(tmp.file("y.pgm")) == first);
    }
}

TEST_CASE("ppm basics") {
    testutil::TempDir tmp("ppm");

    SECTION("pure red pixel") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P6\n1 1\n255\n");
        bytes.push_back(255);
        bytes.push_back(0);
        bytes.push_back(0);
        testutil::write_bytes(tmp.file("red.ppm"), bytes);
        const RgbImage img = read_ppm(tmp.file("red.ppm"));
        CHECK(img.r.data[0] == 1.0);
        CHECK(img.g.data[0] == 0.0);
        CHECK(img.b.data[0] == 0.0);
    }

    SECTION("declared 2x2 with 3 pixels of payload truncates") {
        std::vector<unsigned char> bytes;
        testutil::append_text(bytes, "P6\n2 2\n255\n");
        for (int i = 0; i < 9; ++i) bytes.push_back(10);
        testutil::write_bytes(tmp.file("short.ppm"), bytes);
        try {
            read_ppm(tmp.file("short.ppm"));
            FAIL("expected PnmError");
        } catch (const PnmError& e) {
            CHECK(e.kind() == PnmErrorKind::TruncatedPayload);
        }
    }

    SECTION("16-bit round trip within 1/65535 per channel") {
        Rng rng(5);
        double max_err = 0.0;
        for (int i = 0; i < 50; ++i) {
            RgbImage img(5, 3);
            for (auto* plane : {&img.r, &img.g, &img.b})
                for (double& v : plane->data) v = rng.uniform();
            write_ppm(img, tmp.file("rt.ppm"), 16);
            const RgbImage back = read_ppm(tmp.file("rt.ppm"));
            for (size_t j = 0; j < img.r.size(); ++j) {
                max_err = std::max(max_err, std::abs(img.r.data[j] - back.r.data[j]));
                max_err = std::max(max_err, std::abs(img.g.data[j] - back.g.data[j]));
                max_err = std::max(max_err, std::abs(img.b.data[j] - back.b.data[j]));
            }
        }
        CHECK(max_err <= 1.0 / 65535.0);
    }
}
