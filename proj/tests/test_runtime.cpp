#include <doctest.h>

#include "de/runtime.hpp"
#include "support/fixtures.hpp"

using namespace de;
using fixture::Minimal;

TEST_CASE("minimal channel: one cycle invokes the publisher once") {
    Minimal m;
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    CHECK(ch->status().state == ChannelState::Boot);
    auto report = run_cycle(*ch, clock, db);
    CHECK(report.outcome == CycleOutcome::Completed);
    CHECK(*m.pub->calls == 1);
    CHECK(report.evaluation.fired_rules == std::vector<std::string>{"fire"});
    CHECK(ch->status().state == ChannelState::Steady);
    CHECK(ch->status().cycle_id == 1);
    REQUIRE(report.written.size() == 2);
    CHECK(report.written[0].name == "raw");
    CHECK(report.written[1].name == "out");
}

TEST_CASE("a false condition invokes no publisher") {
    Minimal m("ch", "raw.v < 0");
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    auto report = run_cycle(*ch, clock, db);
    CHECK(report.outcome == CycleOutcome::Completed);
    CHECK(*m.pub->calls == 0);
    CHECK(report.publishers.empty());
}

TEST_CASE("the publisher sees the final snapshot restricted to its inputs") {
    Minimal m;
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    (void)run_cycle(*ch, clock, db);
    REQUIRE(m.pub->seen->size() == 1);
    const auto& seen = m.pub->seen->front();
    CHECK(seen.contains("out"));
    CHECK_FALSE(seen.contains("raw"));
}

TEST_CASE("a failing transform aborts the cycle and the next one proceeds") {
    Minimal m;
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    (void)run_cycle(*ch, clock, db);
    *m.transform_throws = true;
    clock.advance_to(60);
    auto bad = run_cycle(*ch, clock, db);
    CHECK(bad.outcome == CycleOutcome::Aborted);
    CHECK(bad.publishers.empty());
    CHECK(*m.pub->calls == 1);
    REQUIRE_FALSE(bad.incidents.empty());
    CHECK(bad.incidents.back().message.find("TransformFailure") == 0);
    CHECK(ch->status().state == ChannelState::Steady);

    *m.transform_throws = false;
    clock.advance_to(120);
    auto good = run_cycle(*ch, clock, db);
    CHECK(good.outcome == CycleOutcome::Completed);
    CHECK(good.cycle_id == bad.cycle_id + 1);
    CHECK(*m.pub->calls == 2);
}

TEST_CASE("source retries: three failures recover, four exhaust the cap") {
    {
        Minimal m;
        *m.source_failures_left = 3;
        auto ch = m.build();
        DataBlock db;
        Clock clock;
        auto report = run_cycle(*ch, clock, db);
        CHECK(report.outcome == CycleOutcome::Completed);
        CHECK(*m.source_calls == 4);
        CHECK(report.incidents.size() == 3);
    }
    {
        Minimal m;
        *m.source_failures_left = 4;
        auto ch = m.build();
        DataBlock db;
        Clock clock;
        auto report = run_cycle(*ch, clock, db);
        CHECK(report.outcome == CycleOutcome::Error);
        CHECK(ch->status().state == ChannelState::Error);
        CHECK(ch->status().last_error.has_value());
        CHECK(*m.pub->calls == 0);
        CHECK_THROWS((void)run_cycle(*ch, clock, db));
    }
}

TEST_CASE("an expired input aborts with MissingInput") {
    // Source every 600 s, products valid 60 s by params, channel every 100 s.
    Minimal m("ch", "raw.v >= 0", 100, 600);
    m.spec.sources[0].params = {{"validity_s", 60}};
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    CHECK(run_cycle(*ch, clock, db).outcome == CycleOutcome::Completed);
    clock.advance_to(100);
    auto report = run_cycle(*ch, clock, db);
    CHECK(report.outcome == CycleOutcome::Aborted);
    CHECK(report.incidents.back().message.find("MissingInput") == 0);
}

TEST_CASE("schedule runs cycles on the channel period") {
    Minimal m;
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    std::vector<SimTime> times;
    std::vector<Channel*> list{ch.get()};
    schedule(list, clock, db, 3, ScheduleHooks{{}, [&](const CycleReport& r) { times.push_back(r.sim_time_s); }, {}});
    CHECK(times == std::vector<SimTime>{0, 60, 120});
    CHECK_THROWS_AS(schedule(list, clock, db, 0), std::invalid_argument);
}

TEST_CASE("a source with twice the channel period runs every other cycle") {
    Minimal m("ch", "raw.v >= 0", 60, 120);
    auto ch = m.build();
    DataBlock db;
    Clock clock;
    std::vector<Channel*> list{ch.get()};
    schedule(list, clock, db, 4);
    auto history = db.history("ch", "raw");
    REQUIRE(history.size() == 2);
    CHECK(history[0].header.created_at == 0);
    CHECK(history[1].header.created_at == 120);
    CHECK(*m.source_calls == 2);
}

TEST_CASE("one channel in error does not block another") {
    Minimal good("good");
    Minimal bad("bad");
    *bad.source_failures_left = 100;
    auto g = good.build();
    auto b = bad.build();
    DataBlock db;
    Clock clock;
    std::vector<Channel*> list{b.get(), g.get()};
    schedule(list, clock, db, 5);
    CHECK(b->status().state == ChannelState::Error);
    CHECK(g->status().state == ChannelState::Steady);
    CHECK(g->status().cycle_id == 5);
    CHECK(*good.pub->calls == 5);
}

TEST_CASE("operator stop moves the channel offline") {
    Minimal m;
    auto ch = m.build();
    ch->stop();
    CHECK(ch->status().state == ChannelState::Offline);
    DataBlock db;
    Clock clock;
    CHECK_THROWS((void)run_cycle(*ch, clock, db));
}

TEST_CASE("replaying the same channel gives identical reports") {
    auto run = [] {
        Minimal m;
        auto ch = m.build();
        DataBlock db;
        Clock clock;
        std::vector<Channel*> list{ch.get()};
        std::string text;
        schedule(list, clock, db, 5, ScheduleHooks{{}, [&](const CycleReport& r) { text += r.to_json().dump(); }, {}});
        return text;
    };
    CHECK(run() == run());
}

TEST_CASE("the clock never moves backwards") {
    Clock clock(10);
    CHECK_THROWS(clock.advance_to(5));
    clock.advance_to(10);
    CHECK(clock.now() == 10);
}

TEST_CASE("an invalid spec cannot be built into a channel") {
    Minimal m;
    m.spec.transforms[0].consumes = {"xyz"};
    CHECK_THROWS_AS((void)m.build(), de::Error);
}
