#ifndef SWARM_ERROR_HPP
#define SWARM_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace swarm {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter or configuration value is out of its admissible range.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A structural invariant of the engine state does not hold.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (shapes, finiteness, bounds).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Optimisation produced a non-finite quantity.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// An interaction callback threw while processing one agent.
class InteractionError : public Error {
 public:
  InteractionError(std::size_t agent, const std::string& what)
      : Error("interaction failed at agent " + std::to_string(agent) + ": " + what),
        agent_(agent) {}

  std::size_t agent() const noexcept { return agent_; }

 private:
  std::size_t agent_;
};

}  // namespace swarm

#endif  // SWARM_ERROR_HPP
