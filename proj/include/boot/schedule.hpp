#pragma once

#include <utility>

namespace boot {

enum class ScheduleKind { cosine };

/// Variance-preserving cosine schedule alpha_t = cos(pi t / 2),
/// sigma_t = sin(pi t / 2), learned and sampled on [t_min, t_max].
///
/// lambda_t = -log(alpha_t / sigma_t) is the negative half log-SNR; it is
/// strictly increasing in t and diverges at both ends of [0, 1].
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  double t_min = 0.02;
  double t_max = 0.98;

  /// Throws DomainError unless 0 < t_min < t_max < 1.
  void validate() const;

  std::pair<double, double> alpha_sigma(double t) const;
  double alpha(double t) const { return alpha_sigma(t).first; }
  double sigma(double t) const { return alpha_sigma(t).second; }

  double half_log_snr(double t) const;
  /// d lambda / dt = pi / sin(pi t).
  double lambda_prime(double t) const;
  /// (1 - alpha_t sigma_s / (sigma_t alpha_s)) / delta with s = t - delta.
  double lambda_prime_discrete(double t, double delta) const;
  /// 1 - alpha_t sigma_s / (sigma_t alpha_s) = 1 - exp(lambda_s - lambda_t):
  /// the exact interpolation weight of one signal-space step from t to s.
  double step_weight(double t, double s) const;
  /// exp(lambda_s - lambda_t) computed from alpha/sigma.
  double decay_factor(double t, double s) const;
};

}  // namespace boot
