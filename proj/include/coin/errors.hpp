#pragma once

#include <stdexcept>
#include <string>

namespace coin {

// Precondition violations: bad shapes, bad hyperparameters, malformed config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// lambda = 0 with a coordinate whose aggregate Fisher is exactly zero.
class SingularCoordinate : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A file the pipeline expects from an earlier stage is absent or unreadable.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace coin
