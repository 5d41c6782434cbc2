#ifndef CLTYPE_ERRORS_HPP
#define CLTYPE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cltype {

/// Malformed input text. `line` is 1-based; 0 when the error is not tied to a line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string file, std::size_t line, const std::string& msg)
        : std::runtime_error(format(file, line, msg)), file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& file, std::size_t line, const std::string& msg) {
        std::string out = file.empty() ? std::string("<input>") : file;
        if (line != 0) {
            out += ':' + std::to_string(line);
        }
        return out + ": " + msg;
    }

    std::string file_;
    std::size_t line_;
};

/// An instruction that parsed but cannot be turned into IR (bad operand shape, unsupported form).
class LiftError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inference hit a construct it refuses to type, e.g. a shift by a secret amount.
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The oracle refused a program: too many assignments, step budget exceeded, a fault while executing.
class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cltype

#endif
