#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dmpc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A forward rollout produced a non-finite state.
class RolloutDivergence : public Error {
 public:
  RolloutDivergence(int step, const std::string& what)
      : Error(what), step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// A slack variable left the barrier domain (z <= 0).
class BarrierDomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or solution shapes do not match the problem layout.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Non-finite arithmetic inside a numerical kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

class InitializationError : public Error {
 public:
  using Error::Error;
};

/// A lockstep round is missing a message it requires.
class ProtocolGap : public Error {
 public:
  ProtocolGap(int agent, long round, const std::string& what)
      : Error(what), agent_(agent), round_(round) {}
  int agent() const noexcept { return agent_; }
  long round() const noexcept { return round_; }

 private:
  int agent_;
  long round_;
};

/// Exogenous data does not cover a subproblem's coupling set.
class SubproblemError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Bytes that do not decode to an AgentMessage.
class MessageFormatError : public Error {
 public:
  using Error::Error;
};

/// An agent failed inside a protocol round; the round is discarded.
class RoundAborted : public Error {
 public:
  RoundAborted(int agent, const std::string& what) : Error(what), agent_(agent) {}
  int agent() const noexcept { return agent_; }

 private:
  int agent_;
};

/// Scenario document failed validation. Carries every problem found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid scenario:";
    for (const auto& i : issues) out += "\n  - " + i;
    return out;
  }
  std::vector<std::string> issues_;
};

}  // namespace dmpc
