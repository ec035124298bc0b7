#include <doctest.h>

#include <filesystem>

#include "troika/events.hpp"
#include "troika/fsio.hpp"

using namespace troika;
namespace fs = std::filesystem;

TEST_CASE("event lines round-trip") {
    Event e{"2026-02-03T04:05:06Z", EventKind::ReplanDecided,
            R"({"decision":"APPROVE_REPLAN","forbidden":5})"};
    std::string line = format_event_line(e);
    CHECK(line.back() == '\n');
    auto back = parse_event_line(line);
    REQUIRE(back.has_value());
    CHECK(*back == e);
}

TEST_CASE("every event kind label round-trips") {
    for (int k = 0; k <= static_cast<int>(EventKind::Solved); ++k) {
        EventKind kind = static_cast<EventKind>(k);
        auto parsed = event_kind_from_label(event_kind_label(kind));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == kind);
    }
    CHECK_FALSE(event_kind_from_label("NotAnEvent").has_value());
}

TEST_CASE("parse_event_line rejects malformed lines without throwing") {
    CHECK_FALSE(parse_event_line("").has_value());
    CHECK_FALSE(parse_event_line("   \n").has_value());
    CHECK_FALSE(parse_event_line("no-kind-here\n").has_value());
    CHECK_FALSE(parse_event_line("2026-01-01T00:00:00Z BogusKind {}\n").has_value());
    CHECK_FALSE(parse_event_line("2026-01-01T00:00:00Z Dispatch not-json\n").has_value());
}

TEST_CASE("read_event_log counts corrupt lines and keeps the rest") {
    fs::path dir = fs::temp_directory_path() / "troika-events-test";
    fs::create_directories(dir);
    fs::path log = dir / "events.log";
    fsio::atomic_write(log,
                       "2026-01-01T00:00:00Z PhaseEnter {\"phase\":\"setup\"}\n"
                       "garbage line\n"
                       "2026-01-01T00:00:01Z Dispatch {\"step\":1}\n");
    int corrupt = 0;
    auto events = read_event_log(log, &corrupt);
    CHECK(events.size() == 2);
    CHECK(corrupt == 1);
    CHECK(events[0].kind == EventKind::PhaseEnter);
    CHECK(events[1].kind == EventKind::Dispatch);
    fs::remove_all(dir);
}

TEST_CASE("buffered events only reach disk on flush") {
    fs::path dir = fs::temp_directory_path() / "troika-events-flush";
    fs::create_directories(dir);
    fs::path log = dir / "events.log";

    EventBuffer buffer;
    buffer.emit("2026-01-01T00:00:00Z", EventKind::Timeout, R"({"step":4})");
    CHECK_FALSE(fs::exists(log));
    CHECK(buffer.pending().size() == 1);

    buffer.flush(log);
    CHECK(buffer.pending().empty());
    auto events = read_event_log(log);
    REQUIRE(events.size() == 1);
    CHECK(events[0].kind == EventKind::Timeout);

    buffer.flush(log); // empty flush appends nothing
    CHECK(read_event_log(log).size() == 1);
    fs::remove_all(dir);
}
