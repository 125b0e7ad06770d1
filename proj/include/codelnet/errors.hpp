#ifndef CODELNET_ERRORS_HPP
#define CODELNET_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace codelnet {

// Error categories aligned with the stable process exit codes of the CLI
// (and with the status codes of the C API).
enum class ErrorCode : int {
    ok = 0,
    check_failed = 1,     // verification failure (gradcheck below tolerance etc.)
    io = 2,               // missing/corrupt files, parse errors, unwritable paths
    split_infeasible = 3, // dataset split cannot satisfy the requested counts
    numeric = 4,          // non-finite values where finite ones are required
    mismatch = 5,         // weights/config disagreement
    invalid_argument = 64 // bad shapes, bad parameter values, usage-level misuse
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline Error invalid_argument_error(const std::string& msg) { return Error(ErrorCode::invalid_argument, msg); }
inline Error dimension_error(const std::string& msg) { return Error(ErrorCode::invalid_argument, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorCode::io, msg); }
inline Error split_error(const std::string& msg) { return Error(ErrorCode::split_infeasible, msg); }
inline Error numeric_error(const std::string& msg) { return Error(ErrorCode::numeric, msg); }
inline Error mismatch_error(const std::string& msg) { return Error(ErrorCode::mismatch, msg); }

} // namespace codelnet

#endif
