#pragma once

#include <stdexcept>
#include <string>

namespace lgcd {

enum class ErrorKind {
    validation,
    numeric,
    io,
    unsupported,
    contract,
};

// All library failures derive from Error so the C boundary can map them to
// status codes without knowing the concrete type.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t col)
        : ValidationError(what), row_(row), col_(col) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

// Kernel weights vanish around the evaluation point.
class NoLocalMassError : public NumericError {
public:
    explicit NoLocalMassError(const std::string& what) : NumericError(what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& what) : Error(ErrorKind::unsupported, what) {}
};

class ContractError : public Error {
public:
    explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

} // namespace lgcd
