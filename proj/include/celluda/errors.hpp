#pragma once

#include <stdexcept>
#include <string>

namespace celluda {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a precondition: bad parameter, wrong shape, empty input.
class UsageError : public Error
{
public:
    using Error::Error;
};

/// Input data is malformed or missing (files, annotations, NaNs).
class DataError : public Error
{
public:
    using Error::Error;
};

/// Loss became non-finite during optimization.
class TrainingError : public Error
{
public:
    TrainingError(const std::string& what, int epoch)
        : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch)
    {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

} // namespace celluda
