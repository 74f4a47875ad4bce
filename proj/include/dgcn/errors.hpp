#pragma once

#include <stdexcept>
#include <string>

namespace dgcn {

// Shape mismatches, invalid arguments, inconsistent state.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// k-NN style queries that need more points than the cloud has.
struct InsufficientPointsError : ContractError {
  explicit InsufficientPointsError(const std::string& msg) : ContractError(msg) {}
};

// Malformed text input; carries a 1-based line number when known.
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, long line = -1)
      : std::runtime_error(line >= 0 ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_number(line) {}
  long line_number;
};

// Non-finite values where finite ones are required (divergent training etc.).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace dgcn
