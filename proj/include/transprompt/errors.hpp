#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace transprompt {

enum class ErrorKind {
  Contract,      // precondition violated by the caller
  Parse,         // malformed input file
  Schema,        // well-formed input that disagrees with the declared schema
  Validation,    // value-level invariant violated (e.g. probability simplex)
  Degenerate,    // numerically undefined input (zero-norm vector)
  Numeric,       // non-finite intermediate result
  Budget,        // prompt exceeds the token budget
  Grammar,       // prompt text does not follow the feature-label grammar
  Unparseable,   // completion carries no integer
  OutOfRange,    // completion integer >= class count
  Credential,    // missing or rejected API key
  Transport,     // network failure after retries, or request budget exhausted
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class ParseError : public Error {
public:
  ParseError(std::size_t row, const std::string& what)
      : Error(ErrorKind::Parse, what), row_(row) {}
  /// 1-based line number in the source file (header is line 1).
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

class BudgetError : public Error {
public:
  BudgetError(std::size_t largest_feasible_k, const std::string& what)
      : Error(ErrorKind::Budget, what), largest_feasible_k_(largest_feasible_k) {}
  std::size_t largest_feasible_k() const noexcept { return largest_feasible_k_; }

private:
  std::size_t largest_feasible_k_;
};

class CompletionError : public Error {
public:
  CompletionError(ErrorKind kind, std::string raw, const std::string& what)
      : Error(kind, what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

private:
  std::string raw_;
};

[[noreturn]] void throw_contract(const std::string& what);

}  // namespace transprompt
