#include "boot/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "boot/log.hpp"
#include "boot/solvers.hpp"

namespace boot {

void SampleSet::validate() const {
  if (points.rank() != 2) throw DimensionError("SampleSet: points must be (n, D), got " + shape_string(points.shape()));
  if (!labels.empty() && labels.size() != points.rows()) {
    throw DimensionError("SampleSet: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(points.rows()) + " points");
  }
}

namespace {

double row_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return std::sqrt(s);
}

// Sum over j of |x_i - y_j| for every row i of x, computed in row blocks.
std::vector<double> row_distance_sums(const Tensor& x, const Tensor& y, std::size_t threads) {
  std::vector<double> sums(x.rows(), 0.0);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < y.rows(); ++j) s += row_distance(x.row(i), y.row(j));
      sums[i] = s;
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, x.rows()));
  if (threads == 1) {
    work(0, x.rows());
    return sums;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (x.rows() + threads - 1) / threads;
  for (std::size_t k = 0; k < threads; ++k) {
    const std::size_t lo = k * chunk;
    const std::size_t hi = std::min(x.rows(), lo + chunk);
    if (lo < hi) pool.emplace_back(work, lo, hi);
  }
  for (auto& t : pool) t.join();
  return sums;
}

double mean_pair_distance(const Tensor& x, const Tensor& y, std::size_t threads) {
  const auto sums = row_distance_sums(x, y, threads);
  const double total = std::accumulate(sums.begin(), sums.end(), 0.0);
  return total / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

}  // namespace

double energy_distance(const Tensor& a, const Tensor& b, std::size_t threads) {
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("energy_distance: sample sets must be (n, D)");
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("energy_distance: empty sample set");
  if (a.cols() != b.cols()) {
    throw DimensionError("energy_distance: dimensions " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  }
  const double ab = mean_pair_distance(a, b, threads);
  const double aa = mean_pair_distance(a, a, threads);
  const double bb = mean_pair_distance(b, b, threads);
  return 2.0 * ab - aa - bb;
}

double energy_distance(const SampleSet& a, const SampleSet& b, std::size_t threads) {
  a.validate();
  b.validate();
  return energy_distance(a.points, b.points, threads);
}

ModeCoverage mode_coverage(const Tensor& samples, const std::vector<std::vector<double>>& centers, double radius,
                           double min_fraction) {
  if (!(radius > 0.0)) throw ContractError("mode_coverage: radius must be > 0");
  ModeCoverage out;
  out.fractions.assign(centers.size(), 0.0);
  if (samples.rank() != 2 || samples.rows() == 0) return out;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (centers[k].size() != samples.cols()) throw DimensionError("mode_coverage: center dimension mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      if (row_distance(samples.row(i), centers[k]) <= radius) ++hits;
    }
    out.fractions[k] = static_cast<double>(hits) / static_cast<double>(samples.rows());
    if (out.fractions[k] >= min_fraction) ++out.covered;
  }
  return out;
}

std::vector<Tensor> reference_signal_states(const TeacherQuery& teacher, const Tensor& eps,
                                            std::span<const double> times, const NoiseSchedule& sched,
                                            std::size_t n_steps) {
  for (double t : times) {
    if (t < sched.t_min || t > sched.t_max) {
      throw DomainError("reference_signal_states: t=" + std::to_string(t) + " outside [t_min, t_max]");
    }
  }
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return times[i] > times[j]; });

  const auto grid = uniform_grid(sched, n_steps);
  std::vector<Tensor> out(times.size());
  Tensor y = signal_init(teacher, eps, sched, SignalInit::teacher_prediction);
  std::size_t node = 0;
  constexpr double kSame = 1e-14;
  for (std::size_t idx : order) {
    const double target = times[idx];
    while (node + 1 < grid.size() && grid[node + 1] >= target - kSame) {
      y = heun_signal_ode_step(teacher, y, eps, grid[node], grid[node] - grid[node + 1], sched);
      ++node;
    }
    const double gap = grid[node] - target;
    out[idx] = gap > kSame ? heun_signal_ode_step(teacher, y, eps, grid[node], gap, sched) : y;
  }
  return out;
}

std::vector<double> trajectory_divergence(const StudentNet& student, const TeacherQuery& teacher, const Tensor& eps,
                                          std::span<const double> times, std::span<const int> labels,
                                          std::span<const double> weights, std::size_t ref_steps) {
  const auto refs = reference_signal_states(teacher, eps, times, student.schedule(), ref_steps);
  std::vector<double> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const Tensor y = sample_student(student, eps, times[k], labels, weights);
    double total = 0.0;
    for (std::size_t r = 0; r < y.rows(); ++r) total += row_distance(y.row(r), refs[k].row(r));
    out[k] = total / static_cast<double>(y.rows());
  }
  return out;
}

double mean_nearest_center_distance(const Tensor& samples, const std::vector<std::vector<double>>& centers) {
  if (centers.empty()) throw ContractError("mean_nearest_center_distance: no centers");
  if (samples.rank() != 2 || samples.rows() == 0) throw ContractError("mean_nearest_center_distance: no samples");
  double total = 0.0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centers) {
      if (c.size() != samples.cols()) throw DimensionError("mean_nearest_center_distance: center dimension mismatch");
      best = std::min(best, row_distance(samples.row(i), c));
    }
    total += best;
  }
  return total / static_cast<double>(samples.rows());
}

double covariance_trace(const Tensor& samples) {
  if (samples.rank() != 2 || samples.rows() < 2) throw ContractError("covariance_trace: need at least 2 samples");
  const std::size_t n = samples.rows();
  double trace = 0.0;
  for (std::size_t c = 0; c < samples.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += samples.at(i, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = samples.at(i, c) - mean;
      var += d * d;
    }
    trace += var / static_cast<double>(n - 1);
  }
  return trace;
}

std::vector<GuidanceRow> guidance_sweep(const StudentNet& student, std::span<const double> weights, int condition,
                                        const std::vector<std::vector<double>>& centers, const Tensor& eps,
                                        std::optional<std::pair<double, double>> trained_range) {
  if (!student.arch().weight_conditioned) throw ContractError("guidance_sweep: student is not w-conditioned");
  const std::vector<int> labels(eps.rows(), condition);
  std::vector<GuidanceRow> rows;
  for (double w : weights) {
    if (trained_range && (w < trained_range->first || w > trained_range->second)) {
      std::ostringstream msg;
      msg << "guidance_sweep: w=" << w << " outside trained range [" << trained_range->first << ", "
          << trained_range->second << "]";
      log_info(msg.str());
    }
    const std::vector<double> ws(eps.rows(), w);
    const Tensor x = sample_student(student, eps, student.schedule().t_min, labels, ws);
    rows.push_back({w, mean_nearest_center_distance(x, centers), covariance_trace(x)});
  }
  return rows;
}

SpeedReport speed_report(const TeacherQuery& teacher, const StudentNet& student, const Tensor& eps,
                         std::size_t ddim_steps, std::size_t repeats) {
  if (teacher.teacher == nullptr) throw ContractError("speed_report: no teacher");
  if (repeats == 0) throw ContractError("speed_report: repeats must be >= 1");
  using clock = std::chrono::steady_clock;
  SpeedReport rep;
  rep.teacher_ms = std::numeric_limits<double>::infinity();
  rep.student_ms = std::numeric_limits<double>::infinity();
  const double t_min = student.schedule().t_min;
  for (std::size_t k = 0; k < repeats; ++k) {
    const std::uint64_t teacher_before = teacher.teacher->nfe();
    auto t0 = clock::now();
    const Tensor xt = ddim_sample(teacher, eps, ddim_steps, student.schedule()).final_state;
    auto t1 = clock::now();
    rep.teacher_ms = std::min(rep.teacher_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
    rep.teacher_nfe_per_sample = teacher.teacher->nfe() - teacher_before;

    const std::uint64_t before = student.nfe();
    t0 = clock::now();
    const Tensor xs = sample_student(student, eps, t_min);
    t1 = clock::now();
    rep.student_ms = std::min(rep.student_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
    rep.student_nfe_per_sample = student.nfe() - before;
    if (!xt.all_finite() || !xs.all_finite()) throw std::runtime_error("speed_report: non-finite samples");
  }
  rep.teacher_nfe_total = rep.teacher_nfe_per_sample * eps.rows();
  rep.student_nfe_total = rep.student_nfe_per_sample * eps.rows();
  rep.ratio = rep.teacher_ms / std::max(rep.student_ms, 1e-9);
  return rep;
}

// ---- files ------------------------------------------------------------------

void write_samples_csv(const std::filesystem::path& path, const SampleSet& samples) {
  samples.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t c = 0; c < samples.dim(); ++c) out << (c ? "," : "") << 'x' << c;
  if (!samples.labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t r = 0; r < samples.size(); ++r) {
    for (std::size_t c = 0; c < samples.dim(); ++c) out << (c ? "," : "") << samples.points.at(r, c);
    if (!samples.labels.empty()) out << ',' << samples.labels[r];
    out << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": not a number '" + s + "'");
  }
  return v;
}

}  // namespace

SampleSet read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  auto header = split_csv(line);
  const bool labeled = !header.empty() && header.back() == "label";
  const std::size_t dim = header.size() - (labeled ? 1 : 0);
  if (dim == 0) throw std::runtime_error(path.string() + ": no coordinate columns");
  SampleSet set;
  std::vector<double> data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " columns");
    }
    for (std::size_t c = 0; c < dim; ++c) data.push_back(parse_double(cells[c], path, lineno));
    if (labeled) set.labels.push_back(static_cast<int>(parse_double(cells.back(), path, lineno)));
  }
  const std::size_t n = data.size() / dim;
  set.points = Tensor({n, dim}, std::move(data));
  set.generator = path.filename().string();
  return set;
}

std::string scatter_svg(const Tensor& points, std::span<const int> labels) {
  if (points.rank() != 2 || points.cols() == 0) throw DimensionError("scatter_svg: points must be (n, D)");
  const bool two_d = points.cols() >= 2;
  auto px = [&](std::size_t i) { return points.at(i, 0); };
  auto py = [&](std::size_t i) { return two_d ? -points.at(i, 1) : 0.0; };
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    if (i == 0) {
      x0 = x1 = px(i);
      y0 = y1 = py(i);
    }
    x0 = std::min(x0, px(i));
    x1 = std::max(x1, px(i));
    y0 = std::min(y0, py(i));
    y1 = std::max(y1, py(i));
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-6});
  const double pad = 0.05 * span;
  const double r = 0.004 * span;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream out;
  out << std::setprecision(6);
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"600\" height=\"600\" viewBox=\""
      << x0 - pad << ' ' << y0 - pad << ' ' << (x1 - x0) + 2 * pad << ' ' << (y1 - y0) + 2 * pad << "\">\n";
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const int label = labels.empty() ? 0 : labels[i];
    const char* color = palette[static_cast<std::size_t>(label < 0 ? 5 : label % 5)];
    out << "<circle cx=\"" << px(i) << "\" cy=\"" << py(i) << "\" r=\"" << r << "\" fill=\"" << color
        << "\" fill-opacity=\"0.6\"/>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_scatter_svg(const std::filesystem::path& path, const Tensor& points, std::span<const int> labels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << scatter_svg(points, labels);
}

}  // namespace boot
