#pragma once

#include <stdexcept>
#include <string>

namespace rankscope {

enum class ErrorKind {
    Input,        // malformed values or shapes handed to an operation
    Parameter,    // argument out of its admissible range
    Validation,   // configuration rejected at parse time
    Io,
    Format,       // on-disk container does not match its declared layout
    Divergence,
    Numerical,    // ill-conditioned or undefined quantity
    Lemma,        // a bound checked by the theory suite was violated
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class DivergenceError : public Error {
public:
    DivergenceError(long step, const std::string& what)
        : Error(ErrorKind::Divergence, what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace rankscope
