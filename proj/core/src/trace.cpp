#include "securetime/trace.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include "securetime/bytes.hpp"

namespace securetime {

namespace {

std::string sanitize(const std::string& field) {
    std::string out = field;
    std::replace(out.begin(), out.end(), ',', ';');
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

}  // namespace

void Trace::write_csv(std::ostream& out) const {
    out << "event_index,true_time_ns,node,event_kind,detail,true_offset_ns,applied_delta_ns,alarm\n";
    for (const auto& e : events_) {
        out << e.index << ',' << e.true_time << ',' << sanitize(e.node) << ',' << sanitize(e.kind) << ','
            << sanitize(e.detail) << ',';
        if (e.true_offset_ns) out << *e.true_offset_ns;
        out << ',';
        if (e.applied_delta_ns) out << *e.applied_delta_ns;
        out << ',' << (e.alarm ? 1 : 0) << '\n';
    }
}

std::string Trace::csv_string() const {
    std::ostringstream out;
    write_csv(out);
    return out.str();
}

crypto::Digest Trace::hash() const {
    const std::string csv = csv_string();
    return crypto::digest(BytesView(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
}

}  // namespace securetime
