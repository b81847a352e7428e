#include <fstream>
#include <sstream>

#include "doctest.h"

#include "evomd/errors.hpp"
#include "evomd/frames.hpp"
#include "test_util.hpp"

using namespace evomd;
using evomd_test::TempDir;
using evomd_test::write_text;

namespace {

Frame make_frame(std::int64_t t, std::vector<Bond> bonds = {}) {
    Frame f;
    f.trajectory_id = "t0";
    f.time_ps = t;
    f.elements = {"Mo", "S", "S", "O"};
    f.bonds = std::move(bonds);
    return f;
}

}  // namespace

TEST_CASE("apply_threshold keeps bonds strictly above bo_min") {
    Frame f = make_frame(0, {{0, 1, 0.5}, {0, 2, 0.51}, {1, 3, 0.49}});
    apply_threshold(f, BondThreshold{0.5});
    REQUIRE(f.bonds.size() == 1);
    CHECK(f.bonds[0] == Bond{0, 2, 0.51});

    // idempotent
    apply_threshold(f, BondThreshold{0.5});
    CHECK(f.bonds.size() == 1);
}

TEST_CASE("frame write/read round-trip") {
    TempDir dir;
    const auto path = dir.file("frames.jsonl");
    const Frame a = make_frame(0, {{0, 1, 0.9}});
    const Frame b = make_frame(5, {{0, 1, 0.9}, {2, 3, 1.2}});
    {
        std::ofstream out(path, std::ios::binary);
        write_frame(out, a);
        write_frame(out, b);
    }
    const auto frames = read_frames(path, BondThreshold{0.5});
    REQUIRE(frames.size() == 2);
    CHECK(frames[0] == a);
    CHECK(frames[1] == b);
}

TEST_CASE("reader applies the threshold before handing frames out") {
    TempDir dir;
    const auto path = dir.file("frames.jsonl");
    {
        std::ofstream out(path, std::ios::binary);
        write_frame(out, make_frame(0, {{0, 1, 0.3}, {1, 2, 0.8}}));
        write_frame(out, make_frame(5, {{0, 1, 0.3}}));
    }
    const auto frames = read_frames(path, BondThreshold{0.5});
    REQUIRE(frames.size() == 2);
    CHECK(frames[0].bonds == std::vector<Bond>{{1, 2, 0.8}});
    CHECK(frames[1].bonds.empty());
}

TEST_CASE("reader rejects a non-positive threshold") {
    TempDir dir;
    const auto path = dir.file("frames.jsonl");
    write_text(path, "");
    CHECK_THROWS_AS(FrameReader(path, BondThreshold{0.0}), ValidationError);
    CHECK_THROWS_AS(FrameReader(path, BondThreshold{-1.0}), ValidationError);
}

TEST_CASE("reader validates record shape with file:line context") {
    TempDir dir;
    const auto path = dir.file("frames.jsonl");

    SUBCASE("malformed json") {
        write_text(path, "{not json\n");
        FrameReader reader(path, BondThreshold{0.5});
        CHECK_THROWS_WITH_AS(reader.next(), doctest::Contains("frames.jsonl:1"), ValidationError);
    }
    SUBCASE("dangling bond index") {
        write_text(path,
                   R"({"trajectory_id":"t0","time_ps":0,"elements":["Mo","S"],"bonds":[[0,2,1.0]]})"
                   "\n");
        FrameReader reader(path, BondThreshold{0.5});
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
    SUBCASE("self bond") {
        write_text(path,
                   R"({"trajectory_id":"t0","time_ps":0,"elements":["Mo","S"],"bonds":[[1,1,1.0]]})"
                   "\n");
        FrameReader reader(path, BondThreshold{0.5});
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
    SUBCASE("duplicate pair") {
        write_text(path,
                   R"({"trajectory_id":"t0","time_ps":0,"elements":["Mo","S"],"bonds":[[0,1,1.0],[1,0,0.9]]})"
                   "\n");
        FrameReader reader(path, BondThreshold{0.5});
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
    SUBCASE("bad element symbol") {
        write_text(path, R"({"trajectory_id":"t0","time_ps":0,"elements":["Mo","sulfur"],"bonds":[]})"
                         "\n");
        FrameReader reader(path, BondThreshold{0.5});
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
}

TEST_CASE("reader enforces monotone time and a constant interval per trajectory") {
    TempDir dir;
    const auto path = dir.file("frames.jsonl");

    auto frame_line = [](const std::string& id, std::int64_t t) {
        return R"({"trajectory_id":")" + id + R"(","time_ps":)" + std::to_string(t) +
               R"(,"elements":["Mo"],"bonds":[]})" + "\n";
    };

    SUBCASE("time going backwards") {
        write_text(path, frame_line("t0", 10) + frame_line("t0", 5));
        FrameReader reader(path, BondThreshold{0.5});
        reader.next();
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
    SUBCASE("interval drift") {
        write_text(path, frame_line("t0", 0) + frame_line("t0", 5) + frame_line("t0", 12));
        FrameReader reader(path, BondThreshold{0.5});
        reader.next();
        reader.next();
        CHECK_THROWS_AS(reader.next(), ValidationError);
    }
    SUBCASE("interleaved trajectories keep separate clocks") {
        write_text(path, frame_line("a", 0) + frame_line("b", 100) + frame_line("a", 2) +
                             frame_line("b", 110) + frame_line("a", 4));
        FrameReader reader(path, BondThreshold{0.5});
        int n = 0;
        while (reader.next()) ++n;
        CHECK(n == 5);
        CHECK(reader.intervals().at("a") == 2);
        CHECK(reader.intervals().at("b") == 10);
    }
}

TEST_CASE("validate_trajectory builds a manifest") {
    std::vector<Frame> frames = {make_frame(0), make_frame(5), make_frame(10)};
    const auto m = validate_trajectory(frames);
    CHECK(m.trajectory_id == "t0");
    CHECK(m.frame_count == 3);
    CHECK(m.interval_ps == 5);
    CHECK(m.atom_count == 4);
}

TEST_CASE("validate_trajectory rejects inconsistent input") {
    SUBCASE("fewer than two frames") {
        CHECK_THROWS_AS(validate_trajectory({make_frame(0)}), ValidationError);
    }
    SUBCASE("mixed trajectory ids") {
        auto other = make_frame(5);
        other.trajectory_id = "t1";
        CHECK_THROWS_AS(validate_trajectory({make_frame(0), other}), ValidationError);
    }
    SUBCASE("atom count changes") {
        auto shrunk = make_frame(5);
        shrunk.elements.pop_back();
        CHECK_THROWS_AS(validate_trajectory({make_frame(0), shrunk}), ValidationError);
    }
    SUBCASE("interval changes") {
        CHECK_THROWS_AS(validate_trajectory({make_frame(0), make_frame(5), make_frame(11)}),
                        ValidationError);
    }
}
