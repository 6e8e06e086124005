#pragma once

#include <Eigen/Core>

#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pidpbc {

/// A matrix that must be inverted was (numerically) singular at the
/// reported unactuated configuration.
class SingularityError : public std::runtime_error {
 public:
  template <typename Derived>
  SingularityError(const std::string& what, const Eigen::MatrixBase<Derived>& q_u, double time = -1.0)
      : std::runtime_error(format(what, q_u, time)), reason_(what), time_(time) {
    for (Eigen::Index i = 0; i < q_u.size(); ++i) q_u_.push_back(static_cast<double>(q_u(i)));
  }

  const std::string& reason() const { return reason_; }
  const std::vector<double>& q_u() const { return q_u_; }
  double time() const { return time_; }

 private:
  template <typename Derived>
  static std::string format(const std::string& what, const Eigen::MatrixBase<Derived>& q_u, double time) {
    std::ostringstream os;
    os.precision(17);
    os << what << " at q_u = [";
    for (Eigen::Index i = 0; i < q_u.size(); ++i) os << (i ? ", " : "") << static_cast<double>(q_u(i));
    os << "]";
    if (time >= 0) os << ", t = " << time;
    return os.str();
  }

  std::string reason_;
  std::vector<double> q_u_;
  double time_;
};

/// A structural assumption required by the requested operation does not hold.
class AssumptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The closed loop produced a non-finite state.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

}  // namespace pidpbc
