#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace kernid {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched point or matrix dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Kernel evaluated at a singular configuration (Laplace with x == y).
class SingularKernelError : public Error {
public:
    SingularKernelError(const std::string& msg, long target_index = -1, long source_index = -1)
        : Error(msg), target_index(target_index), source_index(source_index) {}

    long target_index;
    long source_index;
};

/// Source/target split produced an empty target set; the caller may lower xi.
class NoTargetsError : public Error {
public:
    using Error::Error;
};

/// An index or count parameter is outside its valid range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Requested ID rank exceeds the numerically resolvable rank of the matrix.
class IllConditionedSkeletonError : public Error {
public:
    using Error::Error;
};

/// Text input could not be parsed; line is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, long line) : Error(msg), line(line) {}
    long line;
};

/// Invalid configuration (bad value, unknown key, missing section).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Iterative numerical procedure failed to converge within its cap.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Bandwidth search could not bracket the requested rank budget.
/// Carries the (h, rank) profile scanned so far for diagnosis.
class SearchFailureError : public Error {
public:
    SearchFailureError(const std::string& msg, std::vector<std::pair<double, long>> profile)
        : Error(msg), profile(std::move(profile)) {}

    std::vector<std::pair<double, long>> profile;
};

} // namespace kernid
