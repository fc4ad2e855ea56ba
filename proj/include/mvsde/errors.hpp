#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mvsde {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& msg) : Error("invalid input: " + msg) {}
};

class UnsupportedSize : public Error {
public:
    explicit UnsupportedSize(const std::string& msg) : Error("unsupported size: " + msg) {}
};

/// Particle state left the admissible range during a simulation.
class BlowUpError : public Error {
public:
    BlowUpError(int particle, double time, const std::string& what_state)
        : Error("blow-up at particle " + std::to_string(particle) + ", t=" +
                std::to_string(time) + " (" + what_state + ")"),
          particle(particle), time(time) {}
    int particle;
    double time;
};

/// Iterative solver did not reach its tolerance; carries the last residual.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, double residual)
        : Error(msg + " (residual=" + std::to_string(residual) + ")"), residual(residual) {}
    double residual;
};

class ConditioningError : public Error {
public:
    explicit ConditioningError(const std::string& msg) : Error("conditioning: " + msg) {}
};

class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& msg) : Error("divergent integral: " + msg) {}
};

/// Config validation collects every problem before failing.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : Error(join(problems)), issues(std::move(problems)) {}
    std::vector<std::string> issues;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "config invalid:";
        for (const auto& p : v) s += "\n  - " + p;
        return s;
    }
};

} // namespace mvsde
