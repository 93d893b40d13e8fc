#pragma once

#include <stdexcept>
#include <string>

namespace mi {

// Base class for all library errors so callers can catch one type at the
// CLI boundary and emit structured diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ZeroDistanceError : Error {
    explicit ZeroDistanceError(const std::string& m) : Error("ZeroDistance", m) {}
};

struct InvalidSpecError : Error {
    explicit InvalidSpecError(const std::string& m) : Error("InvalidSpec", m) {}
};

struct PathsTooCloseError : Error {
    explicit PathsTooCloseError(const std::string& m) : Error("PathsTooClose", m) {}
};

struct TooFewDeploymentsError : Error {
    explicit TooFewDeploymentsError(const std::string& m) : Error("TooFewDeployments", m) {}
};

struct RankDeficientError : Error {
    explicit RankDeficientError(const std::string& m) : Error("RankDeficient", m) {}
};

struct NearZeroXiError : Error {
    explicit NearZeroXiError(const std::string& m) : Error("NearZeroXi", m) {}
};

struct SingularCovarianceError : Error {
    explicit SingularCovarianceError(const std::string& m) : Error("SingularCovariance", m) {}
};

struct NotPsdError : Error {
    explicit NotPsdError(const std::string& m) : Error("NotPSD", m) {}
};

struct EmptyInputError : Error {
    explicit EmptyInputError(const std::string& m) : Error("EmptyInput", m) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error("ParseError", m) {}
};

struct DimensionMismatchError : Error {
    explicit DimensionMismatchError(const std::string& m) : Error("DimensionMismatch", m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("ConfigError", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("IoError", m) {}
};

} // namespace mi
