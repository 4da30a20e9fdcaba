#include "doctest.h"
#include "securetime/analysis.hpp"
#include "securetime/rng.hpp"

using namespace securetime;

TEST_CASE("bound formulas evaluate exactly") {
    BoundsSet b = compute_bounds(NetParams{0, 5'000'000, 100'000});
    CHECK(b.eps_m_ns == 10'000'000);
    CHECK(b.eps_1_ns == 15'000'000);
    CHECK(b.eps_2_ns == 20'001'000);

    // degenerate symmetric envelope
    b = compute_bounds(NetParams{1'000'000, 1'000'000, 50'000});
    CHECK(b.eps_m_ns == 0);
    CHECK(b.eps_1_ns == 0);
    CHECK(b.eps_2_ns == 100);

    b = compute_bounds(NetParams{1'000'000, 3'000'000, 50'000});
    CHECK(b.eps_m_ns == 4'000'000);
    CHECK(b.eps_1_ns == 6'000'000);
    CHECK(b.eps_2_ns == 8'000'300);
}

TEST_CASE("bounds are ordered and monotone over a random grid") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        NetParams net;
        net.min_delay_ns = rng.range_i64(0, 5'000'000);
        net.max_delay_ns = net.min_delay_ns + rng.range_i64(0, 10'000'000);
        net.max_drift_ppb = rng.range_i64(1, 1'000'000);
        const BoundsSet b = compute_bounds(net);
        REQUIRE(b.eps_m_ns <= b.eps_1_ns);
        REQUIRE(b.eps_1_ns <= b.eps_2_ns);

        NetParams wider = net;
        wider.max_delay_ns += 1'000'000;
        const BoundsSet w = compute_bounds(wider);
        REQUIRE(w.eps_1_ns >= b.eps_1_ns);
        REQUIRE(w.eps_2_ns >= b.eps_2_ns);

        if (net.max_delay_ns > 0) {
            NetParams faster = net;
            faster.max_drift_ppb = net.max_drift_ppb + 100'000;
            REQUIRE(compute_bounds(faster).eps_2_ns > b.eps_2_ns);
        }
    }
}

TEST_CASE("check names the failing criterion") {
    const BoundsSet bounds = compute_bounds(NetParams{0, 5'000'000, 100'000});

    RunReport honest;
    honest.max_unnoticed_offset_ns = 2'000'000;
    CHECK(check(honest, bounds).pass);

    RunReport forged = honest;
    forged.forged_accepted = 1;
    CheckResult verdict = check(forged, bounds);
    CHECK_FALSE(verdict.pass);
    bool named = false;
    for (const auto& line : verdict.lines)
        if (line.find("FAIL") != std::string::npos && line.find("forged") != std::string::npos) named = true;
    CHECK(named);

    RunReport late;
    late.max_unnoticed_offset_ns = bounds.eps_1_ns + 3;
    CHECK_FALSE(check(late, bounds).pass);
    late.max_unnoticed_offset_ns = bounds.eps_1_ns + 2;
    CHECK(check(late, bounds).pass);  // tolerance of two ticks

    RunReport alarmed;
    alarmed.offset_at_first_alarm_ns = bounds.eps_2_ns + 3;
    CHECK_FALSE(check(alarmed, bounds).pass);
}

TEST_CASE("duration formatting is exact") {
    CHECK(format_ns(10'000'000) == "10ms");
    CHECK(format_ns(20'001'000) == "20.001ms");
    CHECK(format_ns(100) == "100ns");
    CHECK(format_ns(0) == "0ns");
    CHECK(format_ns(1'500) == "1.5us");
    CHECK(format_ns(-2'000'000) == "-2ms");
    CHECK(format_ns(90'000'000'000) == "90s");
}

TEST_CASE("report serialization round trips the key fields") {
    RunReport report;
    report.max_unnoticed_offset_ns = 123;
    report.forged_accepted = 4;
    report.per_message_overhead_bytes = 68;
    const std::string text = report.to_text();
    CHECK(text.find("max_unnoticed_offset_ns=123") != std::string::npos);
    CHECK(text.find("forged_accepted=4") != std::string::npos);
    CHECK(text.find("offset_at_first_alarm_ns=-") != std::string::npos);

    const std::string row = report.to_csv_row("run1");
    CHECK(row.substr(0, 5) == "run1,");
}
