#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace netsnake {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public Error {
public:
    enum class Kind { IndexOutOfRange, DuplicateEdge, SelfLoop, Empty, DimensionMismatch };

    GraphError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    [[nodiscard]] Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's documented domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// A snake run or a training run left the region where its update is meaningful
/// (non-finite values, or vertices carried farther than the divergence radius).
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::ptrdiff_t step, std::ptrdiff_t vertex = -1)
        : Error(what), step_(step), vertex_(vertex) {}

    [[nodiscard]] std::ptrdiff_t step() const noexcept { return step_; }
    /// Offending vertex, or -1 when the failure is not tied to one vertex.
    [[nodiscard]] std::ptrdiff_t vertex() const noexcept { return vertex_; }

private:
    std::ptrdiff_t step_;
    std::ptrdiff_t vertex_;
};

} // namespace netsnake
