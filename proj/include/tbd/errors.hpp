#pragma once

#include <stdexcept>
#include <string>

namespace tbd {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AllWeightsDegenerate : public Error {
public:
    AllWeightsDegenerate() : Error("all particle log-weights are -inf") {}
    explicit AllWeightsDegenerate(const std::string& what) : Error(what) {}
};

class NegativeRate : public Error {
public:
    using Error::Error;
};

class SingularCovariance : public Error {
public:
    using Error::Error;
};

class TooLarge : public Error {
public:
    using Error::Error;
};

class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// Thrown for any invalid configuration value; the message names the field.
class ConfigInvalid : public Error {
public:
    using Error::Error;
};

class FormatMismatch : public Error {
public:
    using Error::Error;
};

class UnknownAxis : public Error {
public:
    using Error::Error;
};

}  // namespace tbd
