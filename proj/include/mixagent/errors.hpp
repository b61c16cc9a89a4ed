#pragma once

#include <stdexcept>
#include <string>

namespace mixagent {

// Exit-code categories for the CLI contract: 2 config, 3 data, 4 numeric.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : DataError {
    using DataError::DataError;
};
struct NegativeWeight : DataError {
    using DataError::DataError;
};
struct SumNotOne : DataError {
    using DataError::DataError;
};
struct EmptySample : DataError {
    using DataError::DataError;
};
struct InvalidEmpirical : DataError {
    using DataError::DataError;
};
struct EmptyCandidates : DataError {
    using DataError::DataError;
};
struct KTooLarge : DataError {
    using DataError::DataError;
};
struct SpecInvalid : ConfigError {
    using ConfigError::ConfigError;
};
struct ExhaustedPool : DataError {
    using DataError::DataError;
};
struct EmptyEvalSet : DataError {
    using DataError::DataError;
};
struct EmptyHistory : DataError {
    using DataError::DataError;
};
struct DescriptorInvalid : ConfigError {
    using ConfigError::ConfigError;
};
struct ContextOverflow : DataError {
    using DataError::DataError;
};
struct ShapeMismatch : DataError {
    using DataError::DataError;
};
struct MissingFeedback : DataError {
    using DataError::DataError;
};
struct EmptyCorpus : DataError {
    using DataError::DataError;
};
struct EmptyBatch : DataError {
    using DataError::DataError;
};
struct CheckpointInvalid : DataError {
    using DataError::DataError;
};
struct TooFewSamples : DataError {
    using DataError::DataError;
};
struct DegenerateDesign : NumericError {
    using NumericError::NumericError;
};

}  // namespace mixagent
