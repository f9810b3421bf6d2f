#pragma once

#include <stdexcept>
#include <string>

namespace seal {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed file or encoding (bad magic, truncated payload, undecodable RLE).
class FormatError : public Error {
public:
    using Error::Error;
};

// Input violates a documented invariant (coordinates out of range, bad prompt).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation's precondition (empty mask, missing stage-1 checkpoint).
class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Dataset content is inconsistent (missing guidance frame, class index outside table).
class DataError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

}  // namespace seal
