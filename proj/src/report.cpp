#include "cltype/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace cltype {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
    return buf;
}

ordered_json hex_list(const std::vector<std::uint32_t>& v) {
    auto out = ordered_json::array();
    for (auto x : v) {
        out.push_back(hex(x));
    }
    return out;
}

}  // namespace

std::string report_to_json(const Report& r, bool include_elapsed) {
    ordered_json j;
    auto findings = ordered_json::array();
    for (const auto& f : r.findings) {
        ordered_json o;
        o["kind"] = std::string(to_string(f.kind));
        o["site"] = hex(f.site);
        o["seq"] = f.seq;
        o["evidence"] = f.evidence;
        o["lines"] = hex_list(f.lines);
        o["hits"] = f.hits;
        if (f.kind == FindingKind::SDBC) {
            o["branch"] = {{"if_lines", hex_list(f.if_lines)}, {"else_lines", hex_list(f.else_lines)}};
        }
        findings.push_back(std::move(o));
    }
    j["findings"] = std::move(findings);
    auto units = ordered_json::array();
    for (const auto& u : r.units) {
        units.push_back({{"representative", hex(u.representative)}, {"members", hex_list(u.members)}});
    }
    j["units"] = std::move(units);
    ordered_json stats;
    stats["trace_length"] = r.stats.trace_length;
    stats["tainted_records"] = r.stats.tainted_records;
    stats["sdma"] = r.stats.sdma;
    stats["sdbc"] = r.stats.sdbc;
    stats["sdbc_layout_unknown"] = r.stats.sdbc_layout_unknown;
    stats["units"] = r.stats.units;
    stats["containment_violations"] = r.stats.containment_violations;
    stats["elapsed_ms"] = include_elapsed ? r.stats.elapsed_ms : 0.0;
    j["stats"] = std::move(stats);
    j["diagnostics"] = r.diagnostics;
    return j.dump(2) + "\n";
}

std::string render_findings(const Report& r) {
    std::ostringstream os;
    for (const auto& f : r.findings) {
        os << to_string(f.kind) << " at " << hex(f.site) << " (seq " << f.seq << ", " << f.hits << " hit"
           << (f.hits == 1 ? "" : "s") << "): " << f.evidence;
        if (!f.lines.empty()) {
            os << " lines";
            for (auto l : f.lines) {
                os << ' ' << hex(l);
            }
        }
        os << '\n';
    }
    os << r.findings.size() << " finding(s) in " << r.units.size() << " unit(s)\n";
    return os.str();
}

std::string render_log(const Report& r) {
    std::ostringstream os;
    for (const auto& row : r.log) {
        os << row.seq << "  " << hex(row.addr) << "  " << row.instruction << (row.tainted ? "" : "  (untainted)")
           << '\n';
        for (const auto& t : row.types) {
            os << "    " << t << '\n';
        }
        if (!row.rules.empty()) {
            os << "    rules: " << row.rules << '\n';
        }
        if (!row.flag_rules.empty()) {
            os << "    flag rules: " << row.flag_rules << '\n';
        }
        if (!row.stmt_rules.empty()) {
            os << "    statement rules: " << row.stmt_rules << '\n';
        }
        if (!row.control.empty()) {
            os << "    " << row.control << '\n';
        }
    }
    return os.str();
}

}  // namespace cltype
