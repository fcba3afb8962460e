#pragma once

#include <stdexcept>
#include <string>

namespace unisync {

enum class ErrorKind {
    InvalidDimension,
    InvalidInput,
    Format,
    Range,
    State,
    Config,
    Incompatible,
    Diverged,
    UndefinedMetric,
    Detection,
    Spec,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure surfaced by the library carries one of the kinds above so the
/// CLI can print a single machine-parsable line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) {
        throw Error(kind, what);
    }
}

}  // namespace unisync
