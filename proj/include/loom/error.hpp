#pragma once

#include <stdexcept>
#include <string>

namespace loom {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Payload missing from the content store (evicted or never stored).
class NotFoundError : public Error {
public:
    explicit NotFoundError(const std::string& msg) : Error(msg) {}
};

// Payload requested for a ghost value, which carries none by construction.
class GhostError : public NotFoundError {
public:
    explicit GhostError(const std::string& msg) : NotFoundError(msg) {}
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& msg) : Error(msg) {}
};

// Implicit service adapter missing or failing.
class ServiceError : public Error {
public:
    explicit ServiceError(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line(line), column(column) {}
    int line;
    int column;
};

} // namespace loom
