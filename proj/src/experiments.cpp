#include "dsnls/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace dsnls {

namespace {

/// Compensated (Kahan) accumulator; summation order is fixed by the callers.
struct Kahan {
  double sum = 0.0, carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

int resolve_threads(int requested, int n_items) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  return std::min(t, std::max(1, n_items));
}

/** Runs fn(i) for i = 0..n-1 on a pool of worker threads. fn must handle
 * per-trajectory failures itself; any other exception is rethrown once. */
template <class Fn>
void for_each_trajectory(int n, int threads, Fn&& fn) {
  threads = resolve_threads(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

FILE* open_csv(const std::string& out_dir, const char* name) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/" + name;
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

int step_count(double t_final, double dt) {
  const int n = static_cast<int>(std::llround(t_final / dt));
  if (n < 1 || std::abs(n * dt - t_final) > 1e-9 * std::max(1.0, t_final))
    throw ConfigError("t_final must be an integer multiple of dt");
  return n;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double x = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad numeric value for '" + key + "': " + value);
  }
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("bad integer value for '" + key + "': " + value);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// u^{n+1} under the selected Dirichlet scheme, advancing state.time by dt.
ComplexGridState advance_scheme(SchemeKind scheme, const ComplexGridState& u,
                                const NlsParameters& params, std::span<const double> dw,
                                const GridSpec& grid, const StepConfig& step_cfg) {
  switch (scheme) {
    case SchemeKind::CMS:
      return cms_step_nls(u, params, dw, grid, step_cfg);
    case SchemeKind::CN:
      return cn_step(u, params, dw, grid, step_cfg);
    case SchemeKind::MS: {
      ComplexGridState w = u;
      const double scale = std::exp(params.alpha * u.time);
      for (auto& c : w.u) c *= scale;
      ComplexGridState w_next = ms_step_transformed(w, params, dw, grid, step_cfg);
      const double back = std::exp(-params.alpha * w_next.time);
      for (auto& c : w_next.u) c *= back;
      return w_next;
    }
  }
  throw std::logic_error("advance_scheme: unknown scheme");
}

}  // namespace

void ExperimentConfig::validate() const {
  grid.validate();
  params.validate();
  if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
  if (n_trajectories < 1) throw ConfigError("n_trajectories must be >= 1");
  if (noise_modes < 1) throw ConfigError("noise_modes must be >= 1");
  if (theta < 0.0 || theta > 1.0) throw ConfigError("theta must lie in [0, 1]");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (experiment == ExperimentKind::PlaneWave) {
    if (amplitude == 0.0) throw ConfigError("plane-wave amplitude must be nonzero");
    if (scheme != SchemeKind::CMS) throw ConfigError("plane-wave runs use scheme = cms");
  }
  if (experiment == ExperimentKind::Convergence) {
    if (reference_level < 1) throw ConfigError("reference_level must be >= 1");
    if (coarse_levels.empty()) throw ConfigError("coarse_levels must be nonempty");
    for (int l : coarse_levels)
      if (l >= reference_level)
        throw ConfigError("coarse levels must be strictly coarser than the reference level");
  }
}

NoiseModel ExperimentConfig::noise_model(std::uint64_t trajectory) const {
  NoiseModel model;
  model.kind = noise_kind;
  model.truncation_m = noise_modes;
  model.x_left = grid.x_left;
  model.x_right = grid.x_right;
  model.seed = seed;
  model.trajectory_index = trajectory;
  return model;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.experiment = kind;
  switch (kind) {
    case ExperimentKind::PlaneWave:
      cfg.grid = {0.0, 2.0 * std::numbers::pi, 2.0 * std::numbers::pi / 32.0, 0.01};
      cfg.t_final = 5.0;
      cfg.params = {0.1, std::sqrt(2.0)};
      cfg.amplitude = 0.5;
      cfg.noise_kind = NoiseKind::Scalar;
      cfg.n_trajectories = 200;
      break;
    case ExperimentKind::SolitonChargeEnergy:
      cfg.grid = {-25.0, 25.0, 0.1, 0.01};
      cfg.t_final = 10.0;
      cfg.params = {0.1, 0.5};
      cfg.noise_kind = NoiseKind::SpectralTruncated;
      cfg.noise_modes = 8;
      cfg.n_trajectories = 100;
      break;
    case ExperimentKind::Convergence:
      cfg.grid = {-1.0, 1.0, 1.0 / 256.0, std::pow(2.0, -12)};
      cfg.t_final = 0.25;
      cfg.params = {0.02, std::sqrt(2.0)};
      cfg.noise_kind = NoiseKind::SpectralTruncated;
      cfg.noise_modes = 8;
      cfg.n_trajectories = 100;
      cfg.reference_level = 12;
      cfg.coarse_levels = {11, 9, 7, 5};
      break;
    case ExperimentKind::TwoFormAudit:
      cfg.grid = {-5.0, 5.0, 0.25, 0.01};
      cfg.t_final = 1.0;
      cfg.params = {0.02, 0.5};
      cfg.noise_kind = NoiseKind::SpectralTruncated;
      cfg.noise_modes = 8;
      cfg.n_trajectories = 5;
      break;
  }
  return cfg;
}

void apply_config_line(ExperimentConfig& cfg, const std::string& raw_key,
                       const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string value = trim(raw_value);
  if (key == "experiment") {
    if (value == "plane_wave")
      cfg.experiment = ExperimentKind::PlaneWave;
    else if (value == "soliton")
      cfg.experiment = ExperimentKind::SolitonChargeEnergy;
    else if (value == "convergence")
      cfg.experiment = ExperimentKind::Convergence;
    else if (value == "two_form_audit")
      cfg.experiment = ExperimentKind::TwoFormAudit;
    else
      throw ConfigError("unknown experiment: " + value);
  } else if (key == "x_left") {
    cfg.grid.x_left = to_double(key, value);
  } else if (key == "x_right") {
    cfg.grid.x_right = to_double(key, value);
  } else if (key == "dx") {
    cfg.grid.dx = to_double(key, value);
  } else if (key == "dt") {
    cfg.grid.dt = to_double(key, value);
  } else if (key == "t_final") {
    cfg.t_final = to_double(key, value);
  } else if (key == "alpha") {
    cfg.params.alpha = to_double(key, value);
  } else if (key == "epsilon") {
    cfg.params.epsilon = to_double(key, value);
  } else if (key == "amplitude") {
    cfg.amplitude = to_double(key, value);
  } else if (key == "noise_kind") {
    if (value == "scalar")
      cfg.noise_kind = NoiseKind::Scalar;
    else if (value == "spectral")
      cfg.noise_kind = NoiseKind::SpectralTruncated;
    else
      throw ConfigError("unknown noise_kind: " + value);
  } else if (key == "noise_modes") {
    cfg.noise_modes = static_cast<int>(to_int(key, value));
  } else if (key == "n_trajectories") {
    cfg.n_trajectories = static_cast<int>(to_int(key, value));
  } else if (key == "scheme") {
    if (value == "cms")
      cfg.scheme = SchemeKind::CMS;
    else if (value == "ms")
      cfg.scheme = SchemeKind::MS;
    else if (value == "cn")
      cfg.scheme = SchemeKind::CN;
    else
      throw ConfigError("unknown scheme: " + value);
  } else if (key == "theta") {
    cfg.theta = to_double(key, value);
  } else if (key == "reference_level") {
    cfg.reference_level = static_cast<int>(to_int(key, value));
  } else if (key == "coarse_levels") {
    cfg.coarse_levels.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) cfg.coarse_levels.push_back(static_cast<int>(to_int(key, item)));
    }
    if (cfg.coarse_levels.empty()) throw ConfigError("coarse_levels: empty list");
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "audit_system") {
    if (value == "nls")
      cfg.audit_system = AuditSystem::Nls;
    else if (value == "kdv")
      cfg.audit_system = AuditSystem::Kdv;
    else
      throw ConfigError("unknown audit_system: " + value);
  } else if (key == "out_dir") {
    cfg.out_dir = value;
  } else if (key == "threads") {
    cfg.threads = static_cast<int>(to_int(key, value));
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    pairs.emplace_back(t.substr(0, eq), t.substr(eq + 1));
  }
  ExperimentConfig cfg;
  for (const auto& [k, v] : pairs)
    if (trim(k) == "experiment") {
      ExperimentConfig probe;
      apply_config_line(probe, k, v);
      cfg = default_config(probe.experiment);
    }
  for (const auto& [k, v] : pairs) apply_config_line(cfg, k, v);
  return cfg;
}

PlaneWaveResult run_plane_wave(const ExperimentConfig& cfg) {
  cfg.validate();
  const GridSpec& grid = cfg.grid;
  const int n_steps = step_count(cfg.t_final, grid.dt);
  const int n_traj = cfg.n_trajectories;
  const double a2 = cfg.amplitude * cfg.amplitude;
  const double alpha = cfg.params.alpha, eps = cfg.params.epsilon;

  StepConfig step_cfg;
  step_cfg.theta = cfg.theta;

  struct Traj {
    std::vector<double> amp_num, amp_exact, amp_err, phase_num, phase_exact, phase_err;
    bool ok = false;
    TrajectoryFailure failure{};
  };
  std::vector<Traj> traj(n_traj);

  for_each_trajectory(n_traj, cfg.threads, [&](int i) {
    Traj& out = traj[i];
    out.amp_num.resize(n_steps + 1);
    out.amp_exact.resize(n_steps + 1);
    out.amp_err.resize(n_steps + 1);
    out.phase_num.resize(n_steps + 1);
    out.phase_exact.resize(n_steps + 1);
    out.phase_err.resize(n_steps + 1);

    const NoisePath path = sample_path(cfg.noise_model(i), grid, n_steps);
    ComplexGridState u;
    u.u.assign(grid.n_interior(), Complex(cfg.amplitude, 0.0));
    u.time = 0.0;

    double w_cum = 0.0;       // Brownian value W(t_n)
    double phase_acc = 0.0;   // temporally unwrapped numerical phase
    double prev_phase = 0.0;  // spatial-mean phase of the previous level
    for (int n = 0; n <= n_steps; ++n) {
      const double t = n * grid.dt;
      auto [amp, sp_phase] = mean_amplitude_phase(u);
      if (n == 0)
        phase_acc = sp_phase;
      else
        phase_acc += wrap_angle(sp_phase - prev_phase);
      prev_phase = sp_phase;

      double phase_exact = alpha > 0.0
                               ? a2 / (2.0 * alpha) * (1.0 - std::exp(-2.0 * alpha * t))
                               : a2 * t;
      phase_exact += eps * w_cum;
      const double amp_exact = std::abs(cfg.amplitude) * std::exp(-alpha * t);

      out.amp_num[n] = amp;
      out.amp_exact[n] = amp_exact;
      out.amp_err[n] = std::abs(amp - amp_exact);
      out.phase_num[n] = phase_acc;
      out.phase_exact[n] = phase_exact;
      out.phase_err[n] = std::abs(phase_acc - phase_exact);

      if (n == n_steps) break;
      try {
        u = cms_step_nls(u, cfg.params, std::span<const double>(path.step_slice(n), grid.n_nodes()),
                         grid, step_cfg, BoundaryKind::Periodic);
      } catch (const StepFailure& f) {
        out.failure = {cfg.seed, i, n, f.residual};
        return;
      }
      w_cum += path.increment(n, 0);
    }
    out.ok = true;
  });

  PlaneWaveResult res;
  res.t.resize(n_steps + 1);
  for (int n = 0; n <= n_steps; ++n) res.t[n] = n * grid.dt;
  for (const Traj& tr : traj)
    if (!tr.ok) res.failures.push_back(tr.failure);
  if (!res.failures.empty()) {
    const auto& f = res.failures.front();
    throw SolverFailureThreshold("plane-wave step failure in trajectory " +
                                 std::to_string(f.trajectory) + " at step " +
                                 std::to_string(f.step));
  }

  auto mean_series = [&](auto proj) {
    std::vector<double> out(n_steps + 1);
    for (int n = 0; n <= n_steps; ++n) {
      Kahan k;
      for (const Traj& tr : traj) k.add(proj(tr)[n]);
      out[n] = k.sum / n_traj;
    }
    return out;
  };
  res.amp_num = mean_series([](const Traj& t) -> const std::vector<double>& { return t.amp_num; });
  res.amp_exact =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.amp_exact; });
  res.amp_err = mean_series([](const Traj& t) -> const std::vector<double>& { return t.amp_err; });
  res.phase_num =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.phase_num; });
  res.phase_exact =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.phase_exact; });
  res.phase_err =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.phase_err; });
  res.final_amp_err = res.amp_err.back();
  res.final_phase_err = res.phase_err.back();
  return res;
}

SolitonResult run_soliton(const ExperimentConfig& cfg) {
  cfg.validate();
  const GridSpec& grid = cfg.grid;
  const int n_steps = step_count(cfg.t_final, grid.dt);
  const int n_traj = cfg.n_trajectories;
  const int n_nodes = grid.n_nodes();
  const double alpha = cfg.params.alpha, eps = cfg.params.epsilon;
  const double decay = std::exp(-2.0 * alpha * grid.dt);

  StepConfig step_cfg;
  step_cfg.theta = cfg.theta;

  struct Traj {
    std::vector<double> q_cms, q_cn, r_cms, r_cn, e_grad, e_quartic, e_noise_cum;
    double max_r_cms = 0.0, max_r_cn = 0.0, max_ratio = 0.0;
    double max_edef_cms = 0.0, max_edef_cn = 0.0;
    bool ok = false;
    TrajectoryFailure failure{};
  };
  std::vector<Traj> traj(n_traj);

  ComplexGridState u0;
  u0.u.resize(n_nodes);
  for (int j = 0; j < n_nodes; ++j) u0.u[j] = Complex(1.0 / std::cosh(grid.node(j)), 0.0);
  u0.u.front() = u0.u.back() = Complex(0.0, 0.0);
  u0.time = 0.0;

  auto energy_terms = [&](const ComplexGridState& u, double& grad, double& quartic) {
    double g = 0.0, q = 0.0;
    for (int j = 0; j + 1 < n_nodes; ++j) {
      g += std::norm((u.u[j + 1] - u.u[j]) / grid.dx);
      const double ax = std::norm(0.5 * (u.u[j + 1] + u.u[j]));
      q += ax * ax;
    }
    grad = 0.5 * grid.dx * g;
    quartic = 0.25 * grid.dx * q;
  };

  for_each_trajectory(n_traj, cfg.threads, [&](int i) {
    Traj& out = traj[i];
    out.q_cms.assign(n_steps + 1, 0.0);
    out.q_cn.assign(n_steps + 1, 0.0);
    out.r_cms.assign(n_steps + 1, 0.0);
    out.r_cn.assign(n_steps + 1, 0.0);
    out.e_grad.assign(n_steps + 1, 0.0);
    out.e_quartic.assign(n_steps + 1, 0.0);
    out.e_noise_cum.assign(n_steps + 1, 0.0);

    const NoisePath path = sample_path(cfg.noise_model(i), grid, n_steps);
    ComplexGridState u_cms = u0, u_cn = u0;
    out.q_cms[0] = discrete_charge(u_cms, grid);
    out.q_cn[0] = discrete_charge(u_cn, grid);
    energy_terms(u_cms, out.e_grad[0], out.e_quartic[0]);

    double noise_cum = 0.0;
    try {
      for (int n = 0; n < n_steps; ++n) {
        const std::span<const double> dw(path.step_slice(n), n_nodes);
        ComplexGridState next_cms = cms_step_nls(u_cms, cfg.params, dw, grid, step_cfg);
        ComplexGridState next_cn = cn_step(u_cn, cfg.params, dw, grid, step_cfg);

        out.q_cms[n + 1] = discrete_charge(next_cms, grid);
        out.q_cn[n + 1] = discrete_charge(next_cn, grid);
        out.r_cms[n + 1] = charge_residual(out.q_cms[n], out.q_cms[n + 1], alpha, grid.dt);
        out.r_cn[n + 1] = charge_residual(out.q_cn[n], out.q_cn[n + 1], alpha, grid.dt);
        out.max_r_cms = std::max(out.max_r_cms, std::abs(out.r_cms[n + 1]));
        out.max_r_cn = std::max(out.max_r_cn, std::abs(out.r_cn[n + 1]));
        out.max_ratio =
            std::max(out.max_ratio, std::abs(out.q_cms[n + 1] / out.q_cms[n] - decay) / decay);

        out.max_edef_cms = std::max(
            out.max_edef_cms, energy_recursion_check(u_cms, next_cms, cfg.params, dw, grid));
        out.max_edef_cn =
            std::max(out.max_edef_cn, energy_recursion_check(u_cn, next_cn, cfg.params, dw, grid));

        energy_terms(next_cms, out.e_grad[n + 1], out.e_quartic[n + 1]);
        double step_noise = 0.0;
        const double e2 = decay;
        for (int j = 0; j + 1 < n_nodes; ++j) {
          const double ax_next = std::norm(0.5 * (next_cms.u[j + 1] + next_cms.u[j]));
          const double ax_curr = std::norm(0.5 * (u_cms.u[j + 1] + u_cms.u[j]));
          step_noise += (ax_next - e2 * ax_curr) * (dw[j] / grid.dt);
        }
        noise_cum += 0.5 * grid.dx * eps * step_noise;
        out.e_noise_cum[n + 1] = noise_cum;

        u_cms = std::move(next_cms);
        u_cn = std::move(next_cn);
      }
    } catch (const StepFailure& f) {
      out.failure = {cfg.seed, i, static_cast<int>(std::llround(u_cms.time / grid.dt)),
                     f.residual};
      return;
    }
    out.ok = true;
  });

  SolitonResult res;
  res.t.resize(n_steps + 1);
  for (int n = 0; n <= n_steps; ++n) res.t[n] = n * grid.dt;

  int n_ok = 0;
  for (const Traj& tr : traj) {
    if (tr.ok)
      ++n_ok;
    else
      res.failures.push_back(tr.failure);
  }
  if (n_ok == 0) throw SolverFailureThreshold("soliton run: all trajectories failed");

  auto mean_series = [&](auto proj) {
    std::vector<double> out(n_steps + 1);
    for (int n = 0; n <= n_steps; ++n) {
      Kahan k;
      for (const Traj& tr : traj)
        if (tr.ok) k.add(proj(tr)[n]);
      out[n] = k.sum / n_ok;
    }
    return out;
  };
  res.q_cms = mean_series([](const Traj& t) -> const std::vector<double>& { return t.q_cms; });
  res.q_cn = mean_series([](const Traj& t) -> const std::vector<double>& { return t.q_cn; });
  res.r_cms = mean_series([](const Traj& t) -> const std::vector<double>& { return t.r_cms; });
  res.r_cn = mean_series([](const Traj& t) -> const std::vector<double>& { return t.r_cn; });
  res.e_grad = mean_series([](const Traj& t) -> const std::vector<double>& { return t.e_grad; });
  res.e_quartic =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.e_quartic; });
  res.e_noise_cum =
      mean_series([](const Traj& t) -> const std::vector<double>& { return t.e_noise_cum; });

  const double q0 = discrete_charge(u0, grid);
  res.q_exact.resize(n_steps + 1);
  for (int n = 0; n <= n_steps; ++n) res.q_exact[n] = q0 * std::exp(-2.0 * alpha * res.t[n]);

  for (const Traj& tr : traj) {
    if (!tr.ok) continue;
    res.max_r_cms = std::max(res.max_r_cms, tr.max_r_cms);
    res.max_r_cn = std::max(res.max_r_cn, tr.max_r_cn);
    res.max_charge_ratio_err = std::max(res.max_charge_ratio_err, tr.max_ratio);
    res.max_energy_defect_cms = std::max(res.max_energy_defect_cms, tr.max_edef_cms);
    res.max_energy_defect_cn = std::max(res.max_energy_defect_cn, tr.max_edef_cn);
  }
  return res;
}

double fitted_slope(const std::vector<double>& dts, const std::vector<double>& errors) {
  if (dts.size() != errors.size() || dts.size() < 2)
    throw std::invalid_argument("fitted_slope: need >= 2 points");
  const double n = static_cast<double>(dts.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < dts.size(); ++i) {
    const double x = std::log2(dts[i]);
    const double y = std::log2(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ConvergenceReport run_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  GridSpec ref_grid = cfg.grid;
  ref_grid.dt = std::pow(2.0, -cfg.reference_level);
  const int n_nodes = ref_grid.n_nodes();
  const int n_ref = step_count(cfg.t_final, ref_grid.dt);

  StepConfig step_cfg;
  step_cfg.theta = cfg.theta;

  ComplexGridState u0;
  u0.u.resize(n_nodes);
  for (int j = 0; j < n_nodes; ++j)
    u0.u[j] = Complex(std::sin(std::numbers::pi * ref_grid.node(j)), 0.0);
  u0.u.front() = u0.u.back() = Complex(0.0, 0.0);
  u0.time = 0.0;

  const size_t n_levels = cfg.coarse_levels.size();
  std::vector<GridSpec> level_grid(n_levels);
  std::vector<int> level_steps(n_levels);
  for (size_t l = 0; l < n_levels; ++l) {
    const int factor = 1 << (cfg.reference_level - cfg.coarse_levels[l]);
    if (n_ref % factor != 0)
      throw ConfigError("coarse level does not divide the reference step count");
    level_grid[l] = ref_grid;
    level_grid[l].dt = ref_grid.dt * factor;
    level_steps[l] = n_ref / factor;
  }

  auto integrate = [&](const GridSpec& grid, int n_steps, const NoisePath* path) {
    ComplexGridState u = u0;
    const std::vector<double> zeros(path ? 0 : n_nodes, 0.0);
    for (int n = 0; n < n_steps; ++n) {
      const std::span<const double> dw =
          path ? std::span<const double>(path->step_slice(n), n_nodes)
               : std::span<const double>(zeros);
      u = advance_scheme(cfg.scheme, u, cfg.params, dw, grid, step_cfg);
    }
    return u;
  };

  ConvergenceReport report;

  if (cfg.params.epsilon == 0.0) {
    const ComplexGridState ref = integrate(ref_grid, n_ref, nullptr);
    ConvergenceCurve curve;
    curve.modes = 0;
    for (size_t l = 0; l < n_levels; ++l) {
      const ComplexGridState coarse = integrate(level_grid[l], level_steps[l], nullptr);
      curve.dts.push_back(level_grid[l].dt);
      curve.errors.push_back(discrete_l2_error(ref, coarse, ref_grid));
    }
    curve.slope = fitted_slope(curve.dts, curve.errors);
    report.curves.push_back(std::move(curve));
    return report;
  }

  for (int modes = 1; modes <= cfg.noise_modes; ++modes) {
    struct Traj {
      std::vector<double> sq_err;
      bool ok = false;
      TrajectoryFailure failure{};
    };
    std::vector<Traj> traj(cfg.n_trajectories);

    for_each_trajectory(cfg.n_trajectories, cfg.threads, [&](int i) {
      Traj& out = traj[i];
      NoiseModel model = cfg.noise_model(i);
      model.truncation_m = modes;
      const NoisePath ref_path = sample_path(model, ref_grid, n_ref);
      try {
        const ComplexGridState ref = integrate(ref_grid, n_ref, &ref_path);
        out.sq_err.resize(n_levels);
        for (size_t l = 0; l < n_levels; ++l) {
          const NoisePath coarse_path =
              refine_or_coarsen(ref_path, cfg.coarse_levels[l] - cfg.reference_level);
          const ComplexGridState coarse = integrate(level_grid[l], level_steps[l], &coarse_path);
          const double e = discrete_l2_error(ref, coarse, ref_grid);
          out.sq_err[l] = e * e;
        }
        out.ok = true;
      } catch (const StepFailure& f) {
        out.failure = {cfg.seed, i, -1, f.residual};
      }
    });

    int n_ok = 0;
    for (const Traj& tr : traj) {
      if (tr.ok)
        ++n_ok;
      else
        report.failures.push_back(tr.failure);
    }
    const int n_failed = cfg.n_trajectories - n_ok;
    if (n_failed * 100 > cfg.n_trajectories)
      throw SolverFailureThreshold("convergence run: more than 1% of trajectories failed (M=" +
                                   std::to_string(modes) + ")");

    ConvergenceCurve curve;
    curve.modes = modes;
    for (size_t l = 0; l < n_levels; ++l) {
      Kahan k;
      for (const Traj& tr : traj)
        if (tr.ok) k.add(tr.sq_err[l]);
      curve.dts.push_back(level_grid[l].dt);
      curve.errors.push_back(std::sqrt(k.sum / n_ok));
    }
    curve.slope = fitted_slope(curve.dts, curve.errors);
    report.curves.push_back(std::move(curve));
  }
  return report;
}

AuditResult run_two_form_audit(const ExperimentConfig& cfg) {
  cfg.validate();
  const GridSpec& grid = cfg.grid;
  const int n_steps = step_count(cfg.t_final, grid.dt);
  const int n_nodes = grid.n_nodes();

  const HamiltonianSystemSpec system = cfg.audit_system == AuditSystem::Nls
                                           ? nls_system(cfg.params)
                                           : kdv_system(cfg.params.alpha, cfg.params.epsilon);

  StepConfig step_cfg;
  step_cfg.theta = cfg.theta;

  // Base field: sech pulse for the NLS structure, Gaussian bump for KdV.
  RealGridState4 z0;
  z0.z.resize(n_nodes);
  for (int j = 0; j < n_nodes; ++j) {
    const double x = grid.node(j);
    Eigen::Vector4d z;
    if (cfg.audit_system == AuditSystem::Nls) {
      const double s = 1.0 / std::cosh(x);
      z << s, 0.0, -s * std::tanh(x), 0.0;
    } else {
      const double g = std::exp(-x * x);
      z << 0.1 * g, -0.2 * x * g, (-0.2 + 0.4 * x * x) * g, 0.0;
    }
    z0.z[j] = z;
  }
  z0.z.front()[0] = z0.z.front()[1] = 0.0;
  z0.z.back()[0] = z0.z.back()[1] = 0.0;
  z0.time = 0.0;

  AuditResult res;
  for (int s = 0; s < cfg.n_trajectories; ++s) {
    TangentPair tan;
    tan.U.resize(n_nodes);
    tan.V.resize(n_nodes);
    double max_abs = 0.0;
    for (int j = 0; j < n_nodes; ++j) {
      for (int c = 0; c < 4; ++c) {
        tan.U[j][c] = gaussian_at(cfg.seed, 2 * s, c, j);
        tan.V[j][c] = gaussian_at(cfg.seed, 2 * s + 1, c, j);
        max_abs = std::max({max_abs, std::abs(tan.U[j][c]), std::abs(tan.V[j][c])});
      }
    }
    for (int j = 0; j < n_nodes; ++j) {
      tan.U[j] /= max_abs;
      tan.V[j] /= max_abs;
    }
    tan.U.front()[0] = tan.U.front()[1] = tan.U.back()[0] = tan.U.back()[1] = 0.0;
    tan.V.front()[0] = tan.V.front()[1] = tan.V.back()[0] = tan.V.back()[1] = 0.0;

    const NoisePath path = sample_path(cfg.noise_model(s), grid, n_steps);
    RealGridState4 z = z0;
    for (int n = 0; n < n_steps; ++n) {
      const std::span<const double> dw(path.step_slice(n), n_nodes);
      RealGridState4 z_next = cms_step_generic(system, z, dw, grid, step_cfg);
      TangentPair tan_next = tangent_step(system, z, z_next, tan, dw, grid, step_cfg);
      const std::vector<double> defects = two_form_defect(system, tan, tan_next, grid);
      for (double d : defects) res.max_defect = std::max(res.max_defect, std::abs(d));
      if (s == 0) res.defects.push_back(defects);
      z = std::move(z_next);
      tan = std::move(tan_next);
    }
  }
  return res;
}

void write_plane_wave_csv(const PlaneWaveResult& r, const std::string& out_dir) {
  FILE* f = open_csv(out_dir, "amplitude.csv");
  std::fprintf(f, "t,amp_num,amp_exact,amp_err\n");
  for (size_t n = 0; n < r.t.size(); ++n)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", r.t[n], r.amp_num[n], r.amp_exact[n],
                 r.amp_err[n]);
  std::fclose(f);

  f = open_csv(out_dir, "phase.csv");
  std::fprintf(f, "t,phase_num,phase_exact,phase_err\n");
  for (size_t n = 0; n < r.t.size(); ++n)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", r.t[n], r.phase_num[n], r.phase_exact[n],
                 r.phase_err[n]);
  std::fclose(f);
}

void write_soliton_csv(const SolitonResult& r, const std::string& out_dir) {
  FILE* f = open_csv(out_dir, "charge.csv");
  std::fprintf(f, "t,Q_cms,Q_cn,Q_exact,r_cms,r_cn\n");
  for (size_t n = 0; n < r.t.size(); ++n)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t[n], r.q_cms[n], r.q_cn[n],
                 r.q_exact[n], r.r_cms[n], r.r_cn[n]);
  std::fclose(f);

  f = open_csv(out_dir, "energy.csv");
  std::fprintf(f, "t,E_grad,E_quartic,E_noise_cum\n");
  for (size_t n = 0; n < r.t.size(); ++n)
    std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", r.t[n], r.e_grad[n], r.e_quartic[n],
                 r.e_noise_cum[n]);
  std::fclose(f);
}

void write_convergence_csv(const ConvergenceReport& r, const std::string& out_dir) {
  FILE* f = open_csv(out_dir, "convergence.csv");
  std::fprintf(f, "M,dt,error\n");
  for (const ConvergenceCurve& c : r.curves)
    for (size_t l = 0; l < c.dts.size(); ++l)
      std::fprintf(f, "%d,%.17g,%.17g\n", c.modes, c.dts[l], c.errors[l]);
  for (const ConvergenceCurve& c : r.curves) std::fprintf(f, "%d,slope,%.17g\n", c.modes, c.slope);
  std::fclose(f);
}

void write_audit_csv(const AuditResult& r, const std::string& out_dir) {
  FILE* f = open_csv(out_dir, "audit.csv");
  std::fprintf(f, "n,j,defect\n");
  for (size_t n = 0; n < r.defects.size(); ++n)
    for (size_t j = 0; j < r.defects[n].size(); ++j)
      std::fprintf(f, "%zu,%zu,%.17g\n", n, j, r.defects[n][j]);
  std::fclose(f);
}

void write_failures_csv(const std::vector<TrajectoryFailure>& failures,
                        const std::string& out_dir) {
  if (failures.empty()) return;
  FILE* f = open_csv(out_dir, "failures.csv");
  std::fprintf(f, "seed,trajectory,step,residual\n");
  for (const TrajectoryFailure& fail : failures)
    std::fprintf(f, "%llu,%d,%d,%.17g\n", static_cast<unsigned long long>(fail.seed),
                 fail.trajectory, fail.step, fail.residual);
  std::fclose(f);
}

int run_experiment(const ExperimentConfig& cfg) {
  try {
    cfg.validate();
    switch (cfg.experiment) {
      case ExperimentKind::PlaneWave: {
        const PlaneWaveResult r = run_plane_wave(cfg);
        write_plane_wave_csv(r, cfg.out_dir);
        write_failures_csv(r.failures, cfg.out_dir);
        break;
      }
      case ExperimentKind::SolitonChargeEnergy: {
        const SolitonResult r = run_soliton(cfg);
        write_soliton_csv(r, cfg.out_dir);
        write_failures_csv(r.failures, cfg.out_dir);
        break;
      }
      case ExperimentKind::Convergence: {
        const ConvergenceReport r = run_convergence(cfg);
        write_convergence_csv(r, cfg.out_dir);
        write_failures_csv(r.failures, cfg.out_dir);
        break;
      }
      case ExperimentKind::TwoFormAudit: {
        const AuditResult r = run_two_form_audit(cfg);
        write_audit_csv(r, cfg.out_dir);
        break;
      }
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const SolverFailureThreshold& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  } catch (const StepFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 3;
  }
  return 0;
}

}  // namespace dsnls
