// Command-line driver.
//
//   cltype --trace t.trace --annot t.annot --branch-table t.bt [--report r.json] [--verbose]
//   cltype --mode oracle-compare --trace program.txt [--branch-table t.bt]
//   cltype --mode gen-trace --trace out.trace --annot out.annot --branch-table out.bt --length N
//
// Exit status: 0 clean, 1 input error, 2 findings (or, for oracle-compare, false negatives).

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cltype/annotations.hpp"
#include "cltype/detector.hpp"
#include "cltype/errors.hpp"
#include "cltype/generator.hpp"
#include "cltype/layout.hpp"
#include "cltype/oracle.hpp"
#include "cltype/report.hpp"
#include "cltype/trace.hpp"

namespace {

using namespace cltype;

struct RunConfig {
    std::string trace_path, annot_path, branch_table_path, report_path;
    unsigned cache_line_bits = 6;
    std::uint32_t unit_gap = 32;
    bool verbose = false;
    std::string mode = "analyze";
    std::uint64_t length = 0;
    unsigned body_size = 10;
    std::uint64_t seed = 1;
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw ParseError(path, 0, "cannot write file");
    }
}

std::optional<BranchTable> maybe_table(const RunConfig& cfg) {
    if (cfg.branch_table_path.empty()) {
        std::cerr << "warning: no branch table; secret-dependent branches are reported as SDBC-layout-unknown\n";
        return std::nullopt;
    }
    return load_branch_table(cfg.branch_table_path);
}

int analyze_mode(const RunConfig& cfg) {
    if (cfg.trace_path.empty()) {
        throw std::invalid_argument("--trace is required");
    }
    AnalysisOptions opts;
    opts.geometry = CacheGeometry::make(cfg.cache_line_bits);
    opts.unit_gap = cfg.unit_gap;
    opts.verbose = cfg.verbose;
    const auto trace = load_trace(cfg.trace_path);
    AnnotationSet ann;
    if (!cfg.annot_path.empty()) {
        ann = load_annotations(cfg.annot_path);
        try {
            ann.validate(trace.size());
        } catch (const std::invalid_argument& e) {
            throw ParseError(cfg.annot_path, 0, e.what());
        }
    }
    const auto table = maybe_table(cfg);
    const Report report = analyze(trace, ann, table ? &*table : nullptr, opts);

    if (cfg.verbose) {
        std::cout << render_log(report) << '\n';
    }
    std::cout << render_findings(report);
    for (const auto& d : report.diagnostics) {
        std::cerr << "warning: " << d << '\n';
    }
    if (!cfg.report_path.empty()) {
        write_file(cfg.report_path, report_to_json(report));
    }
    return report.findings.empty() ? 0 : 2;
}

int oracle_mode(const RunConfig& cfg) {
    if (cfg.trace_path.empty()) {
        throw std::invalid_argument("--trace is required (an oracle program)");
    }
    AnalysisOptions opts;
    opts.geometry = CacheGeometry::make(cfg.cache_line_bits);
    opts.unit_gap = cfg.unit_gap;
    opts.verbose = cfg.verbose;
    const auto program = load_program(cfg.trace_path);
    const auto table = maybe_table(cfg);
    const BranchTable* tp = table ? &*table : nullptr;

    const Report report = analyze(materialize(program, 0, 0), program_annotations(program), tp, opts);
    const GroundTruth truth = enumerate_leakage(program, opts.geometry, tp);
    const Verdict v = compare(report, truth);

    if (cfg.verbose) {
        std::cout << render_log(report) << '\n';
    }
    std::cout << render_findings(report);
    std::cout << "oracle: " << truth.leaky_mem_sites.size() << " leaky memory site(s), " << truth.leaky_branch_sites.size()
              << " leaky branch site(s)\n";
    for (const auto& fn : v.false_negatives) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%x", fn.site);
        std::cout << "false negative: " << to_string(fn.kind) << " at " << buf << " [" << fn.label << "]\n";
    }
    std::cout << (v.sound ? "verdict: sound\n" : "verdict: unsound\n");
    if (!cfg.report_path.empty()) {
        write_file(cfg.report_path, report_to_json(report));
    }
    return v.sound ? 0 : 2;
}

int gen_mode(const RunConfig& cfg) {
    if (cfg.trace_path.empty()) {
        throw std::invalid_argument("--trace is required (output path, '-' for stdout)");
    }
    std::unique_ptr<std::ofstream> file;
    std::ostream* out = &std::cout;
    if (cfg.trace_path != "-") {
        file = std::make_unique<std::ofstream>(cfg.trace_path, std::ios::binary);
        if (!*file) {
            throw ParseError(cfg.trace_path, 0, "cannot write file");
        }
        out = file.get();
    }
    const auto art = gen_trace(cfg.length, cfg.body_size, cfg.seed, *out);
    if (!cfg.annot_path.empty()) {
        write_file(cfg.annot_path, art.annotations);
    }
    if (!cfg.branch_table_path.empty()) {
        write_file(cfg.branch_table_path, art.branch_table);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"Cache side-channel analyzer for micro-x86 traces"};
    app.add_option("--trace", cfg.trace_path, "Trace file (oracle program in oracle-compare mode, output in gen-trace)");
    app.add_option("--annot", cfg.annot_path, "SECRET/RANDOM annotation file");
    app.add_option("--branch-table", cfg.branch_table_path, "Branch layout table (BC lines)");
    app.add_option("--cache-line-bits", cfg.cache_line_bits, "log2 of the cache line size")->capture_default_str();
    app.add_option("--unit-gap", cfg.unit_gap, "Max byte gap between sites of one leakage unit")->capture_default_str();
    app.add_option("--report", cfg.report_path, "Write the JSON report here");
    app.add_flag("--verbose", cfg.verbose, "Print the per-record inference log");
    app.add_option("--mode", cfg.mode, "analyze | oracle-compare | gen-trace")
        ->check(CLI::IsMember({"analyze", "oracle-compare", "gen-trace"}))
        ->capture_default_str();
    app.add_option("--length", cfg.length, "gen-trace: number of records");
    app.add_option("--body-size", cfg.body_size, "gen-trace: loop body length")->capture_default_str();
    app.add_option("--seed", cfg.seed, "gen-trace: generator seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (cfg.mode == "oracle-compare") {
            return oracle_mode(cfg);
        }
        if (cfg.mode == "gen-trace") {
            return gen_mode(cfg);
        }
        return analyze_mode(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
