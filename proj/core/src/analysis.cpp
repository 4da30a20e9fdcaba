#include "securetime/analysis.hpp"

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace securetime {

BoundsSet compute_bounds(const NetParams& net) {
    net.validate();
    const std::int64_t spread = net.max_delay_ns - net.min_delay_ns;
    BoundsSet b;
    b.eps_m_ns = 2 * spread;
    b.eps_1_ns = 3 * spread;
    b.eps_2_ns = 4 * spread + scale_ppb(2 * net.max_delay_ns, net.max_drift_ppb);
    return b;
}

std::string format_ns(std::int64_t ns) {
    const bool negative = ns < 0;
    std::uint64_t v = negative ? static_cast<std::uint64_t>(-ns) : static_cast<std::uint64_t>(ns);
    struct Unit {
        std::uint64_t scale;
        const char* suffix;
    };
    static const Unit units[] = {{1'000'000'000, "s"}, {1'000'000, "ms"}, {1'000, "us"}, {1, "ns"}};
    for (const auto& unit : units) {
        if (v >= unit.scale) {
            std::uint64_t whole = v / unit.scale;
            std::uint64_t frac = v % unit.scale;
            std::ostringstream out;
            if (negative) out << '-';
            out << whole;
            if (frac != 0) {
                const std::size_t width = std::to_string(unit.scale).size() - 1;
                std::string digits = std::to_string(frac);
                digits.insert(0, width - digits.size(), '0');
                while (!digits.empty() && digits.back() == '0') digits.pop_back();
                out << '.' << digits;
            }
            out << unit.suffix;
            return out.str();
        }
    }
    return "0ns";
}

RunReport evaluate(const Trace& trace) {
    RunReport report;
    std::set<crypto::Digest> honest;
    for (const auto& e : trace.events())
        if (e.honest_emission && e.message_digest) honest.insert(*e.message_digest);

    bool alarmed = false;
    std::map<std::pair<std::string, crypto::Digest>, std::uint64_t> accepted_count;
    for (const auto& e : trace.events()) {
        if (e.alarm && !alarmed) {
            alarmed = true;
            report.first_alarm_at = e.true_time;
            if (e.true_offset_ns) report.offset_at_first_alarm_ns = std::abs(*e.true_offset_ns);
        }
        if (e.alarm) report.alarms += 1;
        if (!alarmed && e.true_offset_ns)
            report.max_unnoticed_offset_ns = std::max(report.max_unnoticed_offset_ns, std::abs(*e.true_offset_ns));
        if (e.accepted && e.message_digest) {
            if (!honest.contains(*e.message_digest) || e.adversarial_delivery) {
                report.forged_accepted += 1;
            } else if (++accepted_count[{e.node, *e.message_digest}] > 1) {
                report.replays_accepted += 1;
            }
        }
        if (e.applied_delta_ns) {
            report.corrections_applied += 1;
            if (e.detail.find("clamped") != std::string::npos) report.corrections_clamped += 1;
        }
    }
    return report;
}

std::string RunReport::to_text() const {
    std::ostringstream out;
    out << "max_unnoticed_offset_ns=" << max_unnoticed_offset_ns << '\n';
    out << "offset_at_first_alarm_ns=" << (offset_at_first_alarm_ns ? std::to_string(*offset_at_first_alarm_ns) : "-")
        << '\n';
    out << "first_alarm_at_ns=" << (first_alarm_at ? std::to_string(*first_alarm_at) : "-") << '\n';
    out << "forged_accepted=" << forged_accepted << '\n';
    out << "replays_accepted=" << replays_accepted << '\n';
    out << "corrections_applied=" << corrections_applied << '\n';
    out << "corrections_clamped=" << corrections_clamped << '\n';
    out << "alarms=" << alarms << '\n';
    out << "per_message_overhead_bytes=" << per_message_overhead_bytes << '\n';
    return out.str();
}

std::string RunReport::csv_header() {
    return "name,max_unnoticed_offset_ns,offset_at_first_alarm_ns,first_alarm_at_ns,forged_accepted,"
           "replays_accepted,corrections_applied,corrections_clamped,alarms,per_message_overhead_bytes";
}

std::string RunReport::to_csv_row(const std::string& name) const {
    std::ostringstream out;
    out << name << ',' << max_unnoticed_offset_ns << ','
        << (offset_at_first_alarm_ns ? std::to_string(*offset_at_first_alarm_ns) : "") << ','
        << (first_alarm_at ? std::to_string(*first_alarm_at) : "") << ',' << forged_accepted << ','
        << replays_accepted << ',' << corrections_applied << ',' << corrections_clamped << ',' << alarms << ','
        << per_message_overhead_bytes;
    return out.str();
}

CheckResult check(const RunReport& report, const BoundsSet& bounds, std::int64_t tolerance_ticks) {
    CheckResult result;
    result.pass = true;
    auto criterion = [&](bool ok, const std::string& text) {
        result.lines.push_back(std::string(ok ? "pass" : "FAIL") + ": " + text);
        result.pass = result.pass && ok;
    };
    criterion(report.max_unnoticed_offset_ns <= bounds.eps_1_ns + tolerance_ticks,
              "max unnoticed offset " + format_ns(report.max_unnoticed_offset_ns) + " within eps_1 " +
                  format_ns(bounds.eps_1_ns));
    if (report.offset_at_first_alarm_ns)
        criterion(*report.offset_at_first_alarm_ns <= bounds.eps_2_ns + tolerance_ticks,
                  "offset at first alarm " + format_ns(*report.offset_at_first_alarm_ns) + " within eps_2 " +
                      format_ns(bounds.eps_2_ns));
    criterion(report.forged_accepted == 0,
              "forged messages accepted = " + std::to_string(report.forged_accepted));
    criterion(report.replays_accepted == 0,
              "replayed messages accepted = " + std::to_string(report.replays_accepted));
    return result;
}

}  // namespace securetime
