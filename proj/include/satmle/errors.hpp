#pragma once

#include <stdexcept>
#include <string>

namespace satmle {

struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RankDeficientError : EstimationError {
    using EstimationError::EstimationError;
};

struct SeparationError : EstimationError {
    using EstimationError::EstimationError;
};

struct NoConvergenceError : EstimationError {
    using EstimationError::EstimationError;
};

struct DegenerateCurvatureError : EstimationError {
    using EstimationError::EstimationError;
};

struct TooFewClustersError : EstimationError {
    using EstimationError::EstimationError;
};

struct DegenerateRangeError : EstimationError {
    using EstimationError::EstimationError;
};

struct EmptyCellError : EstimationError {
    using EstimationError::EstimationError;
};

struct DegenerateClustersError : EstimationError {
    using EstimationError::EstimationError;
};

} // namespace satmle
