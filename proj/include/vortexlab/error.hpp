#pragma once

#include <stdexcept>
#include <string>

namespace vortexlab {

/// Failure with a process exit code for the CLI: 1 runtime, 2 usage, 3 config.
class VortexError : public std::runtime_error {
public:
    VortexError(int exit_code, const std::string& msg)
        : std::runtime_error(msg), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

inline VortexError config_error(const std::string& msg) { return VortexError(3, msg); }
inline VortexError runtime_error_(const std::string& msg) { return VortexError(1, msg); }

} // namespace vortexlab
