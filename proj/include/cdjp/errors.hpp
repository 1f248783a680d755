#pragma once

#include <stdexcept>
#include <string>

namespace cdjp {

// Base for all domain errors so the CLI can report module-qualified messages.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error("DimensionMismatch: " + msg) {}
};

struct TruncationLeak : Error {
    explicit TruncationLeak(const std::string& msg) : Error("TruncationLeak: " + msg) {}
};

struct PositivityLoss : Error {
    long step = -1;
    PositivityLoss(const std::string& msg, long step_index)
        : Error("PositivityLoss: " + msg + " (step " + std::to_string(step_index) + ")"),
          step(step_index) {}
};

struct GaugeViolation : Error {
    explicit GaugeViolation(const std::string& msg) : Error("GaugeViolation: " + msg) {}
};

struct AnharmonicNotClosed : Error {
    explicit AnharmonicNotClosed(const std::string& msg) : Error("AnharmonicNotClosed: " + msg) {}
};

struct NonPureInput : Error {
    explicit NonPureInput(const std::string& msg) : Error("NonPureInput: " + msg) {}
};

struct SingularMatrix : Error {
    explicit SingularMatrix(const std::string& msg) : Error("SingularMatrix: " + msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error("ValidationError: " + msg) {}
};

}  // namespace cdjp
