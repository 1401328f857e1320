#pragma once

#include <stdexcept>
#include <string>

namespace gwsteer {

// Malformed or inconsistent user input.
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Request outside what an operation supports (instance too large, unsupported tag).
struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankDeficiencyError : NumericError {
  using NumericError::NumericError;
};

struct CertificateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Steering target unreachable for one agent; agent is a 0-based index.
struct InfeasibleError : std::runtime_error {
  int agent;
  InfeasibleError(int agent_index, const std::string& what)
      : std::runtime_error(what), agent(agent_index) {}
};

}  // namespace gwsteer
