#include <doctest.h>

#include "autoskill/util.hpp"
#include "helpers.hpp"

using namespace autoskill;

TEST_CASE("utc header formatting matches the memory grammar") {
    auto tp = test::base_time();
    CHECK(format_utc_header(tp) == "2026-05-07 10:34:33 UTC");
    CHECK(format_iso8601(tp) == "2026-05-07T10:34:33Z");
    auto parsed = parse_utc_header("2026-05-07 10:34:33 UTC");
    REQUIRE(parsed.has_value());
    CHECK(format_utc_header(*parsed) == "2026-05-07 10:34:33 UTC");
    CHECK_FALSE(parse_utc_header("2026-05-07 10:34:33 GMT").has_value());
    CHECK_FALSE(parse_utc_header("not a time").has_value());
}

TEST_CASE("id sources emit 32-hex strings; seeded ones repeat") {
    auto ids = random_id_source();
    std::string a = ids();
    CHECK(a.size() == 32);
    CHECK(a.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(a != ids());

    auto s1 = seeded_id_source(7);
    auto s2 = seeded_id_source(7);
    CHECK(s1() == s2());
    CHECK(s1() == s2());
}

TEST_CASE("kebab-case acceptance") {
    CHECK(is_kebab_case("csv-summarize"));
    CHECK(is_kebab_case("a"));
    CHECK(is_kebab_case("a1-2b"));
    CHECK_FALSE(is_kebab_case(""));
    CHECK_FALSE(is_kebab_case("-leading"));
    CHECK_FALSE(is_kebab_case("trailing-"));
    CHECK_FALSE(is_kebab_case("double--dash"));
    CHECK_FALSE(is_kebab_case("Upper-case"));
    CHECK_FALSE(is_kebab_case("under_score"));
}

TEST_CASE("atomic write leaves the previous content on simulated crash") {
    TempDir dir;
    fs::path target = dir.path() / "state.json";
    atomic_write_file(target, "v1");
    // a crash between temp write and rename leaves only the temp file
    write_file(target.string() + ".tmp", "half-written v2");
    CHECK(read_file(target) == "v1");
    atomic_write_file(target, "v2");
    CHECK(read_file(target) == "v2");
}

TEST_CASE("split_lines round trip forms") {
    auto lines = split_lines("a\nb\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "a");
    auto no_final = split_lines("a\nb");
    REQUIRE(no_final.size() == 2);
    CHECK(no_final[1] == "b");
    CHECK(split_lines("").empty());
}
