#pragma once

#include <stdexcept>
#include <string>

namespace pixelseg {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// NaN/Inf produced or consumed where finite values are required.
struct NumericError : Error {
  using Error::Error;
};

// API precondition violated (empty input set, non-scalar loss, ...).
struct ContractError : Error {
  using Error::Error;
};

// Malformed file or record contents.
struct FormatError : Error {
  using Error::Error;
};

// Remote service unreachable or timed out.
struct TransportError : Error {
  using Error::Error;
};

// Remote service replied with something that violates the wire contract.
struct ProtocolError : Error {
  using Error::Error;
};

// Invalid run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Synthetic scene construction could not satisfy its placement constraints.
struct GenerationError : Error {
  using Error::Error;
};

}  // namespace pixelseg
