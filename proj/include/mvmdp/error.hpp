#pragma once

#include <stdexcept>
#include <string>

namespace mvmdp {

// Exit codes used by the command line front end.
enum class ExitCode : int { ok = 0, config = 2, model = 3, solver = 4, acceptance = 5 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const { return code_; }

 private:
  ExitCode code_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

struct ModelError : Error {
  explicit ModelError(const std::string& what) : Error(ExitCode::model, what) {}
};

struct SolverError : Error {
  explicit SolverError(const std::string& what) : Error(ExitCode::solver, what) {}
};

// Raised when the exact pseudo-mean lattice would exceed the cell cap.
struct LatticeExplosion : SolverError {
  explicit LatticeExplosion(const std::string& what) : SolverError(what) {}
};

}  // namespace mvmdp
