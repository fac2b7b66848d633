#pragma once

#include <stdexcept>
#include <string>

namespace neurorate {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input file does not follow its declared format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Channel whose in-band mean amplitude is zero; band ratios are undefined.
class DegenerateChannelError : public Error {
public:
    using Error::Error;
};

/// Loss became NaN or infinite during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace neurorate
