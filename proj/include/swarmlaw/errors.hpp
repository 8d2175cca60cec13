#pragma once

#include <stdexcept>
#include <string>

namespace swarmlaw {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value produced while evaluating a coefficient function.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Two agents share a position, so the radial unit vector is undefined.
class CoincidentAgentError : public Error {
 public:
  CoincidentAgentError(const std::string& what, int agent_i = -1, int agent_j = -1)
      : Error(what), agent_i(agent_i), agent_j(agent_j) {}
  int agent_i;
  int agent_j;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or missing required input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace swarmlaw
