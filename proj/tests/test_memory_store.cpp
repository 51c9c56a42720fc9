#include <doctest.h>

#include <random>

#include "autoskill/errors.hpp"
#include "autoskill/memory_store.hpp"
#include "helpers.hpp"

using namespace autoskill;

TEST_CASE("append writes the exact block grammar") {
    TempDir dir;
    fs::path file = dir.path() / "memory.md";
    auto clock = fixed_clock_source(test::base_time());

    append_block(file, "prefer batched I/O", clock);
    CHECK(read_file(file) == "## 2026-05-07 10:34:33 UTC\nprefer batched I/O\n\n");
}

TEST_CASE("appends never modify existing bytes") {
    TempDir dir;
    fs::path file = dir.path() / "memory.md";
    auto clock = test::stepping_clock(test::base_time());

    append_block(file, "first", clock);
    std::string before = read_file(file);
    append_block(file, "second", clock);
    std::string after = read_file(file);
    CHECK(after.size() > before.size());
    CHECK(after.substr(0, before.size()) == before);
}

TEST_CASE("append to a nonexistent path creates the file lazily") {
    TempDir dir;
    fs::path file = dir.path() / "deep" / "nested" / ".memory.md";
    CHECK_FALSE(fs::exists(file));
    append_block(file, "created on first write", fixed_clock_source(test::base_time()));
    auto blocks = read_blocks(file);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].content == "created on first write");
}

TEST_CASE("empty content is rejected") {
    TempDir dir;
    CHECK_THROWS_WITH_AS(append_block(dir.path() / "m.md", "   \n ", fixed_clock_source(test::base_time())),
                         doctest::Contains("EmptyContent"), Error);
}

TEST_CASE("write-then-read returns the appended sequence") {
    TempDir dir;
    fs::path file = dir.path() / "memory.md";
    auto clock = test::stepping_clock(test::base_time());

    std::vector<std::string> contents = {"alpha", "beta\nwith second line", "- list\n- items"};
    for (const auto& c : contents) append_block(file, c, clock);

    auto blocks = read_blocks(file);
    REQUIRE(blocks.size() == contents.size());
    for (size_t i = 0; i < contents.size(); ++i) {
        CHECK(blocks[i].content == contents[i]);
        CHECK_FALSE(blocks[i].pre_header);
        if (i > 0) CHECK(blocks[i].timestamp >= blocks[i - 1].timestamp);
    }
}

TEST_CASE("absent file reads as empty") {
    TempDir dir;
    CHECK(read_blocks(dir.path() / "missing.md").empty());
    CHECK(read_memory_text(dir.path() / "missing.md").empty());
}

TEST_CASE("hand-edited junk before the first header is kept as a flagged block") {
    auto blocks = read_blocks(test::fixture("memory/hand_edited.md"));
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].pre_header);
    CHECK(blocks[0].content == "jotted note before any header\nsecond junk line");
    CHECK(blocks[1].content == "prefer batched I/O");
    CHECK(blocks[2].content == "pin package versions\nwith a second line");
}

TEST_CASE("header detection requires the full timestamp grammar") {
    CHECK(is_memory_header_line("## 2026-05-07 10:34:33 UTC"));
    CHECK_FALSE(is_memory_header_line("## merged from other-skill"));
    CHECK_FALSE(is_memory_header_line("# 2026-05-07 10:34:33 UTC"));
    CHECK_FALSE(is_memory_header_line("## 2026-05-07 10:34:33"));
}

TEST_CASE("tier symmetry: identical sequences against three tier locations") {
    TempDir dir;
    std::vector<fs::path> tiers = {
        dir.path() / "memory" / "long_term_memory" / "memory.md",  // long-term
        dir.path() / "sessions" / "s1" / "memory.md",              // session-scoped
        dir.path() / "skills" / "x" / ".memory.md",                // per-skill
    };

    std::mt19937_64 rng(11);
    std::vector<std::string> contents;
    for (int i = 0; i < 24; ++i) {
        std::string c = "note-" + std::to_string(rng() % 1000);
        if (rng() % 3 == 0) c += "\nsecond line " + std::to_string(i);
        contents.push_back(c);
    }

    for (const auto& tier : tiers) {
        auto clock = test::stepping_clock(test::base_time());
        for (const auto& c : contents) append_block(tier, c, clock);
    }

    auto reference = read_blocks(tiers[0]);
    for (const auto& tier : tiers) {
        auto blocks = read_blocks(tier);
        REQUIRE(blocks.size() == reference.size());
        for (size_t i = 0; i < blocks.size(); ++i) {
            CHECK(blocks[i].content == reference[i].content);
            CHECK(blocks[i].timestamp == reference[i].timestamp);
        }
    }
}

TEST_CASE("non-destruction: file length never decreases") {
    TempDir dir;
    fs::path file = dir.path() / "memory.md";
    auto clock = test::stepping_clock(test::base_time());
    std::uintmax_t last = 0;
    for (int i = 0; i < 10; ++i) {
        append_block(file, "entry " + std::to_string(i), clock);
        read_blocks(file);  // reads must not shrink the file either
        std::uintmax_t size = fs::file_size(file);
        CHECK(size > last);
        last = size;
    }
}
