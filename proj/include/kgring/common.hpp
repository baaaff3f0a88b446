#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kgring {

using cplx = std::complex<double>;
using VecC = Eigen::VectorXcd;
using VecR = Eigen::VectorXd;
using MatC = Eigen::MatrixXcd;
using MatR = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or missing configuration. `key` is the dotted path ("coupling.c1").
struct ConfigError : Error {
  std::string key;
  ConfigError(std::string k, const std::string& msg)
      : Error(k.empty() ? msg : k + ": " + msg), key(std::move(k)) {}
};

struct DomainError : Error {
  using Error::Error;
};

// Iterative solver failure; `trace` holds whatever history the solver kept.
struct ConvergenceError : Error {
  std::vector<std::string> trace;
  ConvergenceError(const std::string& msg, std::vector<std::string> t = {})
      : Error(msg), trace(std::move(t)) {}
};

}  // namespace kgring
