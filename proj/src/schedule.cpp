#include "boot/schedule.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "boot/tensor.hpp"

namespace boot {

namespace {

void require_closed_unit(double t, const char* fn) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError(std::string(fn) + ": t=" + std::to_string(t) + " outside [0, 1]");
}

void require_open_unit(double t, const char* fn) {
  if (!(t > 0.0 && t < 1.0)) throw DomainError(std::string(fn) + ": t=" + std::to_string(t) + " outside (0, 1)");
}

}  // namespace

void NoiseSchedule::validate() const {
  if (!(t_min > 0.0 && t_min < t_max && t_max < 1.0)) {
    throw DomainError("schedule: need 0 < t_min < t_max < 1, got t_min=" + std::to_string(t_min) +
                      " t_max=" + std::to_string(t_max));
  }
}

std::pair<double, double> NoiseSchedule::alpha_sigma(double t) const {
  require_closed_unit(t, "alpha_sigma");
  if (t == 1.0) return {0.0, 1.0};  // cos(pi/2) is 6e-17 in floating point
  const double a = 0.5 * std::numbers::pi * t;
  return {std::cos(a), std::sin(a)};
}

double NoiseSchedule::half_log_snr(double t) const {
  require_open_unit(t, "half_log_snr");
  return std::log(std::tan(0.5 * std::numbers::pi * t));
}

double NoiseSchedule::lambda_prime(double t) const {
  require_open_unit(t, "lambda_prime");
  return std::numbers::pi / std::sin(std::numbers::pi * t);
}

double NoiseSchedule::decay_factor(double t, double s) const {
  require_open_unit(t, "decay_factor");
  if (!(s >= 0.0 && s < 1.0)) throw DomainError("decay_factor: s=" + std::to_string(s) + " outside [0, 1)");
  const auto [at, st] = alpha_sigma(t);
  const auto [as, ss] = alpha_sigma(s);
  return (at * ss) / (st * as);
}

double NoiseSchedule::step_weight(double t, double s) const { return 1.0 - decay_factor(t, s); }

double NoiseSchedule::lambda_prime_discrete(double t, double delta) const {
  if (!(delta > 0.0)) throw ContractError("lambda_prime_discrete: delta must be > 0");
  const double s = t - delta;
  if (s < 0.0) throw DomainError("lambda_prime_discrete: s = t - delta = " + std::to_string(s) + " must be >= 0");
  return step_weight(t, s) / delta;
}

}  // namespace boot
