#pragma once

#include <stdexcept>
#include <string>

namespace dualgen {

// File decode failures, one kind per distinct malformation.
enum class PnmErrorKind {
    UnsupportedMagic,
    MalformedHeader,
    TruncatedPayload,
    IoFailure,
};

class PnmError : public std::runtime_error {
public:
    PnmError(PnmErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    PnmErrorKind kind() const noexcept { return kind_; }

private:
    PnmErrorKind kind_;
};

// Thrown when an intensity histogram occupies a single bin, so no
// threshold can separate two classes.
class DegenerateHistogramError : public std::runtime_error {
public:
    explicit DegenerateHistogramError(const std::string& msg)
        : std::runtime_error(msg) {}
};

} // namespace dualgen
