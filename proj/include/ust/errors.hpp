#ifndef UST_ERRORS_HPP
#define UST_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ust {

/// Bad input supplied by the operator: malformed files, inconsistent schemas,
/// invalid configuration. The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural problems with a causal graph (cycles, unknown nodes, syntax).
class GraphError : public ValidationError {
public:
    GraphError(const std::string& what, std::size_t line = 0)
        : ValidationError(line ? "line " + std::to_string(line) + ": " + what : what), m_line(line) {}

    /// 1-based source line, or 0 when not tied to a line.
    std::size_t line() const { return m_line; }

private:
    std::size_t m_line;
};

/// Problems with tabular data or distributions.
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Failures while running a model or an audit (subprocess crashes, bad model
/// output). The CLI maps these to exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ust

#endif  // UST_ERRORS_HPP
