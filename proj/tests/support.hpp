// Helpers shared by the test executables and the acceptance runner.
#ifndef CLTYPE_TESTS_SUPPORT_HPP
#define CLTYPE_TESTS_SUPPORT_HPP

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cltype/annotations.hpp"
#include "cltype/eval.hpp"
#include "cltype/lifter.hpp"
#include "cltype/taint.hpp"
#include "cltype/trace.hpp"

#ifndef CLTYPE_TEST_DATA
#error "CLTYPE_TEST_DATA must point at tests/data"
#endif

namespace cltype::testing {

inline std::string data_path(const std::string& name) { return std::string(CLTYPE_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool secret_or_random(const TypedBitvector& v) {
    return std::any_of(v.begin(), v.end(), [](const RefinedBit& b) {
        return b.sec == SecurityType::SDD || b.sec == SecurityType::URA;
    });
}

// Replays the trace with its own taint tracker and type environment and lists every
// (seq, location) typed SDD or URA that the taint set does not contain. Memory is checked in full
// after every record, so keep this to short traces.
inline std::vector<std::string> containment_violations(const std::vector<TraceRecord>& trace,
                                                       const AnnotationSet& ann) {
    std::vector<std::string> out;
    TypeEnv env;
    TaintTracker taint;
    for (const auto& rec : trace) {
        apply_annotations(env, ann, rec.seq);
        taint.apply(ann, rec.seq);
        const LiftedRecord lifted = lift(rec);
        taint.step(lifted);
        for (const auto& s : lifted.stmts) {
            exec_in_place(s, env);
        }
        for (unsigned i = 0; i < kNumVars; ++i) {
            const auto id = static_cast<VarId>(i);
            if (!is_temp(id) && !taint.tainted(id) && secret_or_random(env.read(full(id)))) {
                out.push_back("seq " + std::to_string(rec.seq) + " " + var_name(full(id)));
            }
        }
        for (const auto& [addr, bits] : env.memory()) {
            const bool typed = std::any_of(bits.begin(), bits.end(), [](const RefinedBit& b) {
                return b.sec == SecurityType::SDD || b.sec == SecurityType::URA;
            });
            if (typed && !taint.tainted_byte(addr)) {
                out.push_back("seq " + std::to_string(rec.seq) + " mem " + std::to_string(addr));
            }
        }
    }
    return out;
}

}  // namespace cltype::testing

#endif
