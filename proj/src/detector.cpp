#include "cltype/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "cltype/errors.hpp"
#include "cltype/eval.hpp"
#include "cltype/lifter.hpp"
#include "cltype/taint.hpp"

namespace cltype {

namespace {

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%x", v);
    return buf;
}

std::string join_lines(const LineSet& s) {
    std::string out;
    for (auto l : s) {
        if (!out.empty()) {
            out += ' ';
        }
        out += hex(l);
    }
    return out.empty() ? "-" : out;
}

bool secret_or_random(const TypedBitvector& v) {
    return std::any_of(v.begin(), v.end(), [](const RefinedBit& b) {
        return b.sec == SecurityType::SDD || b.sec == SecurityType::URA;
    });
}

std::string temp_label(VarRef r) {
    // Temporaries print as r0, r1, r2 like the textbook tables.
    if (is_temp(r.id)) {
        return "r" + std::to_string(static_cast<unsigned>(r.id) - static_cast<unsigned>(VarId::t0));
    }
    return var_name(r);
}

}  // namespace

std::string_view to_string(FindingKind k) noexcept {
    switch (k) {
    case FindingKind::SDMA: return "SDMA";
    case FindingKind::SDBC: return "SDBC";
    case FindingKind::SDBCLayoutUnknown: return "SDBC-layout-unknown";
    }
    return "?";
}

std::optional<Finding> check_sdma(const TypedBitvector& addr_vec, CacheGeometry g, std::uint32_t concrete_addr) {
    if (addr_vec.width() != 32) {
        throw std::invalid_argument("check_sdma: address must be 32 bits");
    }
    TypedBitvector line_bits;
    for (unsigned i = g.line_bits; i < 32; ++i) {
        line_bits.push_back(addr_vec[i]);
    }
    if (vector_type(line_bits) != SecurityType::SDD) {
        return std::nullopt;
    }
    Finding f;
    f.kind = FindingKind::SDMA;
    f.evidence = addr_vec.display();
    f.lines = {cache_line(concrete_addr, g)};
    return f;
}

std::optional<Finding> check_sdbc(const TypedBitvector& flag, std::uint32_t cond_addr, const BranchTable* table,
                                  CacheGeometry g) {
    if (flag.width() != 1) {
        throw std::invalid_argument("check_sdbc: flag must be one bit");
    }
    // A value predicate means the outcome is forced, whatever the level says.
    if (flag[0].sec != SecurityType::SDD || flag[0].known()) {
        return std::nullopt;
    }
    Finding f;
    f.site = cond_addr;
    f.evidence = flag.display();
    const BranchEntry* e = table != nullptr ? table->find(cond_addr) : nullptr;
    if (e == nullptr) {
        f.kind = FindingKind::SDBCLayoutUnknown;
        return f;
    }
    if (!distinguishable(*e, g)) {
        return std::nullopt;
    }
    f.kind = FindingKind::SDBC;
    const auto li = if_lines(*e, g);
    const auto le = else_lines(*e, g);
    f.if_lines.assign(li.begin(), li.end());
    f.else_lines.assign(le.begin(), le.end());
    LineSet all = li;
    all.insert(le.begin(), le.end());
    f.lines.assign(all.begin(), all.end());
    return f;
}

std::vector<LeakageUnit> group_units(const std::vector<Finding>& findings, std::uint32_t gap) {
    std::vector<std::uint32_t> sites;
    sites.reserve(findings.size());
    for (const auto& f : findings) {
        sites.push_back(f.site);
    }
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    std::vector<LeakageUnit> units;
    for (auto s : sites) {
        if (units.empty() || s - units.back().members.back() > gap) {
            units.push_back({s, {}});
        }
        units.back().members.push_back(s);
    }
    return units;
}

Report analyze(const std::vector<TraceRecord>& trace, const AnnotationSet& ann, const BranchTable* table,
               const AnalysisOptions& opts) {
    const auto t_start = std::chrono::steady_clock::now();
    const CacheGeometry g = opts.geometry;
    Report report;
    report.stats.trace_length = trace.size();

    std::map<std::uint64_t, AnnotationSet> by_seq;
    for (const auto& e : ann.entries) {
        by_seq[e.seq].entries.push_back(e);
    }

    TypeEnv env;
    TaintTracker taint;
    std::map<std::pair<std::uint32_t, FindingKind>, Finding> found;
    const auto record = [&](Finding f, std::uint32_t site, std::uint64_t seq) {
        f.site = site;
        f.seq = seq;
        const auto key = std::pair{site, f.kind};
        if (auto it = found.find(key); it != found.end()) {
            ++it->second.hits;
        } else {
            found.emplace(key, std::move(f));
        }
    };

    for (const auto& rec : trace) {
        bool annotated = false;
        std::vector<std::uint32_t> annotated_bytes;
        if (const auto it = by_seq.find(rec.seq); it != by_seq.end()) {
            apply_annotations(env, it->second, rec.seq);
            annotated = taint.apply(it->second, rec.seq);
        }
        LiftedRecord lifted;
        try {
            lifted = lift(rec);
        } catch (const LiftError& e) {
            throw AnalysisError("seq " + std::to_string(rec.seq) + " (" + hex(rec.addr) + "): " + e.what());
        }
        const bool tainted = taint.step(lifted) || annotated;
        if (tainted) {
            ++report.stats.tainted_records;
        }

        LogRow row;
        RuleSet value_rules, flag_rules, stmt_rules;
        std::string control;
        std::vector<std::uint32_t> written;
        for (const auto& s : lifted.stmts) {
            StmtTrace st;
            try {
                exec_in_place(s, env, &st);
            } catch (const AnalysisError& e) {
                throw AnalysisError("seq " + std::to_string(rec.seq) + " (" + hex(rec.addr) + "): " + e.what());
            }
            const Assign* as = std::get_if<Assign>(&s);
            const bool flag_stmt = as != nullptr && is_flag(as->dst.id);
            (flag_stmt ? flag_rules : value_rules).merge(st.rules);
            // A public address sum is bookkeeping, not inference over tainted data.
            if (st.address && secret_or_random(*st.address)) {
                value_rules.merge(st.addr_rules);
            }
            stmt_rules.merge(st.stmt_rules);
            std::uint32_t mem_addr = 0;
            if (const auto* ld = std::get_if<Load>(&s)) {
                mem_addr = ld->addr;
            } else if (const auto* sto = std::get_if<Store>(&s)) {
                mem_addr = sto->addr;
                for (unsigned b = 0; b < sto->value->width / 8; ++b) {
                    written.push_back(sto->addr + b);
                }
            }
            if (st.address && tainted) {
                if (auto f = check_sdma(*st.address, g, mem_addr)) {
                    record(std::move(*f), rec.addr, rec.seq);
                    if (opts.verbose) {
                        control += "MA(" + hex(rec.addr) + ") line " + hex(cache_line(mem_addr, g)) + "; ";
                    }
                }
            }
            if (opts.verbose) {
                if (as != nullptr) {
                    row.types.push_back(temp_label(as->dst) + "=" + st.value.display());
                } else if (const auto* ld = std::get_if<Load>(&s)) {
                    row.types.push_back("addr=" + st.address->display());
                    row.types.push_back(temp_label(ld->dst) + "=" + st.value.display());
                } else {
                    row.types.push_back("addr=" + st.address->display());
                    row.types.push_back("mem[" + hex(mem_addr) + "]=" + st.value.display());
                }
            }
        }
        if (lifted.branch) {
            const auto flag = eval(*lifted.branch->condition, env);
            if (tainted) {
                if (auto f = check_sdbc(flag, rec.addr, table, g)) {
                    if (opts.verbose) {
                        control += f->kind == FindingKind::SDBC ? "secret-dependent branch; " : "layout unknown; ";
                    }
                    record(std::move(*f), rec.addr, rec.seq);
                }
            }
            if (opts.verbose) {
                row.types.push_back(std::string(var_name(full(lifted.branch->flag))) + "=" + flag.display());
                if (const BranchEntry* e = table != nullptr ? table->find(rec.addr) : nullptr) {
                    control += "BC(" + hex(e->a) + "," + hex(e->b) + "," + hex(e->c) + ") true -> " +
                               join_lines(if_lines(*e, g)) + ", false -> " + join_lines(else_lines(*e, g));
                }
            }
        }
        if (lifted.jump_target && opts.verbose) {
            control += "BR(" + hex(rec.addr) + "," + hex(*lifted.jump_target) + ")";
        }

        // Containment: anything typed secret or random must be inside the taint set.
        for (unsigned i = 0; i < kNumVars; ++i) {
            const auto id = static_cast<VarId>(i);
            if (is_temp(id) || taint.tainted(id)) {
                continue;
            }
            if (secret_or_random(env.read(full(id)))) {
                report.containment.push_back("seq " + std::to_string(rec.seq) + ": " + var_name(full(id)));
            }
        }
        if (const auto it = by_seq.find(rec.seq); it != by_seq.end()) {
            for (const auto& e : it->second.entries) {
                if (const auto* m = std::get_if<ByteRange>(&e.target)) {
                    for (std::uint32_t b = 0; b < m->length; ++b) {
                        written.push_back(m->start + b);
                    }
                }
            }
        }
        for (auto a : written) {
            if (!taint.tainted_byte(a) && secret_or_random(env.read_mem(a, 1))) {
                report.containment.push_back("seq " + std::to_string(rec.seq) + ": mem[" + hex(a) + "]");
            }
        }

        if (opts.verbose) {
            row.seq = rec.seq;
            row.addr = rec.addr;
            row.instruction = to_string(rec.op);
            row.tainted = tainted;
            row.rules = value_rules.to_string();
            row.flag_rules = flag_rules.to_string();
            row.stmt_rules = stmt_rules.to_string();
            while (control.size() >= 2 && control.ends_with("; ")) {
                control.resize(control.size() - 2);
            }
            row.control = std::move(control);
            report.log.push_back(std::move(row));
        }
    }

    for (auto& [key, f] : found) {
        switch (f.kind) {
        case FindingKind::SDMA: ++report.stats.sdma; break;
        case FindingKind::SDBC: ++report.stats.sdbc; break;
        case FindingKind::SDBCLayoutUnknown: ++report.stats.sdbc_layout_unknown; break;
        }
        report.findings.push_back(std::move(f));
    }
    report.units = group_units(report.findings, opts.unit_gap);
    report.stats.units = report.units.size();
    report.stats.containment_violations = report.containment.size();
    if (report.stats.sdbc_layout_unknown != 0) {
        report.diagnostics.push_back(std::to_string(report.stats.sdbc_layout_unknown) +
                                     " secret-dependent branch(es) without a branch table entry");
    }
    report.stats.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

}  // namespace cltype
