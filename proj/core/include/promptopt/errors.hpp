#pragma once

#include <stdexcept>
#include <string>

namespace promptopt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or missing configuration; message carries the offending field path.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Network-level failure after all retries were spent.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Non-retryable HTTP error from the completion endpoint.
class ApiError : public Error {
public:
    ApiError(int status, const std::string& message)
        : Error(message), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

/// The endpoint terminated the completion with a content filter.
class FilteredError : public Error {
public:
    using Error::Error;
};

/// Manifest ingestion problems (missing fields, bad splits, duplicate ids).
class DataError : public Error {
public:
    using Error::Error;
};

/// Template loading/rendering problems (unknown template, unbound placeholder).
class TemplateError : public Error {
public:
    using Error::Error;
};

/// Trace bookkeeping violations (step gaps, missing evaluations).
class TraceError : public Error {
public:
    using Error::Error;
};

/// A run aborted mid-way; the partial trace was persisted before throwing.
class RunAborted : public Error {
public:
    using Error::Error;
};

}  // namespace promptopt
