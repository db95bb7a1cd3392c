#pragma once

#include <stdexcept>
#include <string>

namespace telescope {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedName : public Error {
public:
    explicit MalformedName(const std::string& name)
        : Error("malformed capture file name: '" + name + "'") {}
};

class UncoveredTimestamp : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class LineTooLong : public Error {
public:
    using Error::Error;
};

class MissingTimestamp : public Error {
public:
    using Error::Error;
};

class DegenerateSeries : public Error {
public:
    using Error::Error;
};

class NotNormalizable : public Error {
public:
    using Error::Error;
};

class InvalidPolicy : public Error {
public:
    using Error::Error;
};

class InsufficientSpace : public Error {
public:
    using Error::Error;
};

class ChecksumMismatch : public Error {
public:
    ChecksumMismatch(const std::string& file, const std::string& detail)
        : Error("checksum mismatch for " + file + ": " + detail), file_(file) {}

    const std::string& file() const noexcept { return file_; }

private:
    std::string file_;
};

}  // namespace telescope
