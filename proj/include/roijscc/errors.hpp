#pragma once

#include <stdexcept>
#include <string>

namespace roijscc {

// Invalid geometry or tensor shape handed to a pure function.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Run configuration that cannot be executed (bad k/B pair, unknown flag, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transmitter and receiver disagree on the symbol layout.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during optimization.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken internal invariant; never expected on valid input.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

#define ROIJSCC_ASSERT(cond, msg)                                          \
  do {                                                                     \
    if (!(cond)) throw ::roijscc::InternalError(std::string("assertion failed: ") + (msg)); \
  } while (0)

}  // namespace roijscc
