#pragma once

#include <stdexcept>
#include <string>

namespace fedsv {

// Shape/length mismatch between vectors, matrices or model inputs.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyDataError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptySelectionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Problem size exceeds what an exact method can enumerate.
struct CapacityError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Training produced a non-finite loss; remembers the epoch it happened in.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(int epoch_idx)
        : std::runtime_error("non-finite loss during training at epoch " + std::to_string(epoch_idx)),
          epoch(epoch_idx) {}
    int epoch;
};

struct IdxError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Bad magic number.
struct IdxFormatError : IdxError {
    using IdxError::IdxError;
};
// File shorter than its header promises.
struct IdxLengthError : IdxError {
    using IdxError::IdxError;
};
// Image count and label count disagree.
struct IdxConsistencyError : IdxError {
    using IdxError::IdxError;
};

struct PartitionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotApplicableError : std::logic_error {
    using std::logic_error::logic_error;
};

// A simulation run stopped early; remembers which round was executing.
struct RunAbortError : std::runtime_error {
    RunAbortError(int round_idx, const std::string& why)
        : std::runtime_error("run aborted at round " + std::to_string(round_idx) + ": " + why),
          round(round_idx) {}
    int round;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An output path that cannot be opened for writing.
struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fedsv
