#include <doctest.h>

#include <cmath>
#include <numbers>

#include "boot/guidance.hpp"
#include "boot/solvers.hpp"
#include "boot/teacher.hpp"

using namespace boot;

namespace {

double toy_f(double x, double t) { return 0.5 * std::tanh(x) + 0.3 * t; }

FunctionDenoiser toy_teacher() {
  return FunctionDenoiser(1, [](const Tensor& x, std::span<const double> t, std::span<const int>) {
    Tensor out = x;
    for (std::size_t r = 0; r < x.rows(); ++r) out.at(r, 0) = toy_f(x.at(r, 0), t[r]);
    return out;
  });
}

FunctionDenoiser constant_teacher(std::size_t dim, double c) {
  return FunctionDenoiser(dim, [c](const Tensor& x, std::span<const double>, std::span<const int>) {
    return Tensor(x.shape(), c);
  });
}

// Error of a solver against the closed-form Gaussian trajectory.
double path_error(const AnalyticGaussianTeacher& teacher, const Tensor& eps, std::size_t n, SignalSolver solver) {
  const NoiseSchedule& s = teacher.schedule();
  const TeacherQuery q{&teacher};
  const Tensor y = integrate_signal_ode(q, eps, n, s, solver).final_state;
  double err = 0.0;
  for (std::size_t r = 0; r < eps.rows(); ++r) {
    Eigen::VectorXd e(eps.cols());
    for (std::size_t c = 0; c < eps.cols(); ++c) e(c) = eps.at(r, c);
    const Eigen::VectorXd exact = teacher.exact_signal_path(e, s.t_max, s.t_min);
    for (std::size_t c = 0; c < eps.cols(); ++c) err = std::max(err, std::abs(y.at(r, c) - exact(c)));
  }
  return err;
}

AnalyticGaussianTeacher gaussian_2d() {
  Eigen::VectorXd mu(2);
  mu << 1.0, -0.5;
  Eigen::MatrixXd cov(2, 2);
  cov << 0.5, 0.15, 0.15, 0.2;
  return AnalyticGaussianTeacher(mu, cov);
}

}  // namespace

TEST_SUITE("solvers") {
  TEST_CASE("uniform grid endpoints") {
    const NoiseSchedule s;
    const auto g = uniform_grid(s, 8);
    REQUIRE(g.size() == 9);
    CHECK(g.front() == s.t_max);
    CHECK(g.back() == s.t_min);
    for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
    CHECK_THROWS_AS(uniform_grid(s, 0), ContractError);
  }

  TEST_CASE("DDIM matches a scalar recursion") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = toy_teacher();
    const Tensor eps = Tensor::from_rows({{-1.3}, {0.2}, {2.1}});
    const std::size_t n = 16;
    const Tensor got = ddim_sample(TeacherQuery{&teacher}, eps, n, s).final_state;
    for (std::size_t r = 0; r < 3; ++r) {
      double x = eps.at(r, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const double t = s.t_max - (s.t_max - s.t_min) * i / n;
        const double u = i + 1 == n ? s.t_min : s.t_max - (s.t_max - s.t_min) * (i + 1) / n;
        const double at = std::cos(std::numbers::pi * t / 2), st = std::sin(std::numbers::pi * t / 2);
        const double au = std::cos(std::numbers::pi * u / 2), su = std::sin(std::numbers::pi * u / 2);
        x = su / st * x + (au - at * su / st) * toy_f(x, t);
      }
      CHECK(got.at(r, 0) == doctest::Approx(x).epsilon(1e-14));
    }
  }

  TEST_CASE("signal recursion reproduces DDIM on a random network") {
    const NoiseSchedule s;
    Rng rng(1);
    DenoiserNet net({2, 32, 3, 0, 16, PredictionKind::noise}, s, rng);
    const TeacherQuery q{&net};
    const Tensor eps = rng.normal_tensor(20, 2);
    const SampleResult d = ddim_sample(q, eps, 64, s);
    const SampleResult y = signal_ode_sample(q, eps, 64, s, SignalInit::match_ddim);
    REQUIRE(d.trajectory.times == y.trajectory.times);
    double worst = 0.0;
    for (std::size_t k = 0; k < d.trajectory.times.size(); ++k) {
      const Tensor x = to_x_space(y.trajectory.states[k], eps, y.trajectory.times[k], s);
      worst = std::max(worst, max_abs_diff(x, d.trajectory.states[k]));
    }
    CHECK(worst <= 1e-10);
  }

  TEST_CASE("constant teacher gives the telescoped closed form") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = constant_teacher(1, 0.8);
    const Tensor eps = Tensor::from_rows({{1.5}});
    const Tensor y = signal_ode_sample(TeacherQuery{&teacher}, eps, 37, s, SignalInit::epsilon).final_state;
    const double expect = 0.8 + std::exp(s.half_log_snr(s.t_min) - s.half_log_snr(s.t_max)) * (1.5 - 0.8);
    CHECK(y.at(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("fixed point stays put") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = constant_teacher(2, -0.4);
    const TeacherQuery q{&teacher};
    const Tensor eps = Tensor::from_rows({{0.3, 1.0}});
    const Tensor y = Tensor(eps.shape(), -0.4);
    CHECK(max_abs_diff(signal_ode_step(q, y, eps, 0.7, 0.5, s), y) < 1e-15);
    CHECK(max_abs_diff(euler_signal_ode_step(q, y, eps, 0.7, 0.2, s), y) < 1e-15);
    CHECK(max_abs_diff(heun_signal_ode_step(q, y, eps, 0.7, 0.2, s), y) < 1e-15);
  }

  TEST_CASE("single-step coefficients") {
    const NoiseSchedule s;
    FunctionDenoiser zero = constant_teacher(1, 0.0);
    const TeacherQuery q{&zero};
    const Tensor one = Tensor::from_rows({{1.0}});
    CHECK(signal_ode_step(q, one, one, 0.5, 0.25, s).at(0, 0) == doctest::Approx(0.414214).epsilon(1e-6));
    CHECK(ddim_step(q, one, 0.5, 0.25, s).at(0, 0) ==
          doctest::Approx(std::sin(std::numbers::pi / 8) / std::sin(std::numbers::pi / 4)).epsilon(1e-14));
    CHECK(ddim_step(q, one, 0.5, 0.5, s) == one);
  }

  TEST_CASE("Euler with delta lambda' = 1 lands on the prediction") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = toy_teacher();
    const Tensor y = Tensor::from_rows({{0.9}});
    const Tensor eps = Tensor::from_rows({{-0.6}});
    const double t = 0.5, delta = 1.0 / std::numbers::pi;
    const Tensor out = euler_signal_ode_step(TeacherQuery{&teacher}, y, eps, t, delta, s);
    const double x_hat = s.alpha(t) * 0.9 + s.sigma(t) * -0.6;
    CHECK(out.at(0, 0) == doctest::Approx(toy_f(x_hat, t)).epsilon(1e-14));
  }

  TEST_CASE("closed-form Gaussian path matches a fine Heun solve") {
    const AnalyticGaussianTeacher teacher = gaussian_2d();
    Rng rng(2);
    const Tensor eps = rng.normal_tensor(8, 2);
    CHECK(path_error(teacher, eps, 4096, SignalSolver::heun) < 2e-7);
  }

  TEST_CASE("Euler is first order and Heun second order") {
    const AnalyticGaussianTeacher teacher = gaussian_2d();
    Rng rng(3);
    const Tensor eps = rng.normal_tensor(16, 2);
    const double e1 = path_error(teacher, eps, 128, SignalSolver::euler);
    const double e2 = path_error(teacher, eps, 256, SignalSolver::euler);
    const double h1 = path_error(teacher, eps, 128, SignalSolver::heun);
    const double h2 = path_error(teacher, eps, 256, SignalSolver::heun);
    CHECK(e1 / e2 > 1.7);
    CHECK(e1 / e2 < 2.3);
    CHECK(h1 / h2 > 3.3);
    CHECK(h1 / h2 < 4.7);
  }

  TEST_CASE("evaluation counts per sampler") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = toy_teacher();
    const TeacherQuery q{&teacher};
    const Tensor eps = Tensor::from_rows({{0.1}, {0.2}});
    ddim_sample(q, eps, 10, s);
    CHECK(teacher.nfe() == 10);
    teacher.reset_nfe();
    signal_ode_sample(q, eps, 10, s);
    CHECK(teacher.nfe() == 10);
    teacher.reset_nfe();
    integrate_signal_ode(q, eps, 10, s, SignalSolver::euler);
    CHECK(teacher.nfe() == 10);
    teacher.reset_nfe();
    integrate_signal_ode(q, eps, 10, s, SignalSolver::heun);
    CHECK(teacher.nfe() == 20);
    teacher.reset_nfe();
    integrate_signal_ode(q, eps, 10, s, SignalSolver::heun, SignalInit::teacher_prediction);
    CHECK(teacher.nfe() == 21);
  }

  TEST_CASE("guided sampling costs two evaluations per step") {
    const NoiseSchedule s;
    FunctionDenoiser teacher(
        1, [](const Tensor& x, std::span<const double>, std::span<const int>) { return x * 0.5; }, 2);
    const GuidanceBatch g = GuidanceBatch::fixed(3, 1, kNullLabel, 2.0);
    ddim_sample(TeacherQuery{&teacher, &g}, Tensor::zeros(3, 1), 8, s);
    CHECK(teacher.nfe() == 16);
  }

  TEST_CASE("initial signal states") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = constant_teacher(1, 2.0);
    const TeacherQuery q{&teacher};
    const Tensor eps = Tensor::from_rows({{0.7}});
    CHECK(signal_init(q, eps, s, SignalInit::epsilon) == eps);
    CHECK(signal_init(q, eps, s, SignalInit::teacher_prediction).at(0, 0) == 2.0);
    const Tensor y = signal_init(q, eps, s, SignalInit::match_ddim);
    CHECK(to_x_space(y, eps, s.t_max, s).at(0, 0) == doctest::Approx(0.7).epsilon(1e-14));
  }

  TEST_CASE("contract violations") {
    const NoiseSchedule s;
    FunctionDenoiser teacher = toy_teacher();
    const TeacherQuery q{&teacher};
    const Tensor y = Tensor::from_rows({{0.1}});
    CHECK_THROWS_AS(ddim_step(q, y, 0.3, 0.4, s), ContractError);
    CHECK_THROWS_AS(signal_ode_step(q, y, y, 0.3, 0.4, s), ContractError);
    CHECK_THROWS_AS(euler_signal_ode_step(q, y, y, 0.05, 0.04, s), ContractError);
    CHECK_THROWS_AS(heun_signal_ode_step(q, y, y, 0.5, 0.0, s), ContractError);
    CHECK_THROWS_AS(signal_ode_step(q, y, Tensor::zeros(1, 2), 0.5, 0.4, s), DimensionError);
  }
}
