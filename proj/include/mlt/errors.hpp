#pragma once

#include <stdexcept>
#include <string>

namespace mlt {

// Every failure the library reports derives from Error so callers can catch
// one type; the subclasses name the failure kind.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line = 0, int column = 0)
        : Error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ")"
                         : what),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

class NonDecodable : public Error {
public:
    using Error::Error;
};

class SamplingFailure : public Error {
public:
    using Error::Error;
};

class ModeError : public Error {
public:
    using Error::Error;
};

class LayoutError : public Error {
public:
    using Error::Error;
};

}  // namespace mlt
