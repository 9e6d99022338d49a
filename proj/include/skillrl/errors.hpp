#pragma once

#include <stdexcept>
#include <string>

namespace skillrl {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// shape/validation problems in graph construction or env stepping
struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// persistent-file problems, kept distinct so callers can tell them apart
struct VersionError : Error {
    explicit VersionError(const std::string& msg) : Error(msg) {}
};
struct CorruptFileError : Error {
    explicit CorruptFileError(const std::string& msg) : Error(msg) {}
};
struct HashMismatchError : Error {
    explicit HashMismatchError(const std::string& msg) : Error(msg) {}
};

// non-finite values where finite math is required
struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace skillrl
