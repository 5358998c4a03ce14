#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsnls/diagnostics.hpp"
#include "dsnls/grid.hpp"
#include "dsnls/hamiltonian.hpp"
#include "dsnls/integrators.hpp"
#include "dsnls/noise.hpp"

namespace dsnls {

enum class ExperimentKind { PlaneWave, SolitonChargeEnergy, Convergence, TwoFormAudit };
enum class SchemeKind { CMS, MS, CN };
enum class AuditSystem { Nls, Kdv };

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailureThreshold : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::SolitonChargeEnergy;
  GridSpec grid;
  double t_final = 10.0;
  NlsParameters params;
  double amplitude = 0.5;  // plane-wave amplitude A
  NoiseKind noise_kind = NoiseKind::SpectralTruncated;
  int noise_modes = 8;
  int n_trajectories = 100;
  SchemeKind scheme = SchemeKind::CMS;
  double theta = 1.0;
  int reference_level = 12;          // reference dt = 2^{-reference_level}
  std::vector<int> coarse_levels{11, 9, 7, 5};
  std::uint64_t seed = 1;
  AuditSystem audit_system = AuditSystem::Nls;
  std::string out_dir = ".";
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
  NoiseModel noise_model(std::uint64_t trajectory) const;
};

/// Reference defaults for each experiment, at desk scale.
ExperimentConfig default_config(ExperimentKind kind);

/// Parses a flat key = value config file; unknown keys raise ConfigError.
ExperimentConfig parse_config_file(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct TrajectoryFailure {
  std::uint64_t seed;
  int trajectory;
  int step;
  double residual;
};

struct PlaneWaveResult {
  std::vector<double> t;
  std::vector<double> amp_num, amp_exact, amp_err;
  std::vector<double> phase_num, phase_exact, phase_err;
  double final_amp_err = 0.0;    // ensemble mean |amplitude error| at T
  double final_phase_err = 0.0;  // ensemble mean |phase error| at T
  std::vector<TrajectoryFailure> failures;
};

struct SolitonResult {
  std::vector<double> t;
  std::vector<double> q_cms, q_cn, q_exact, r_cms, r_cn;
  std::vector<double> e_grad, e_quartic, e_noise_cum;
  double max_r_cms = 0.0, max_r_cn = 0.0;
  double max_charge_ratio_err = 0.0;  // max relative defect of Q^{n+1}/Q^n vs e^{-2 alpha dt}
  double max_energy_defect_cms = 0.0, max_energy_defect_cn = 0.0;
  std::vector<TrajectoryFailure> failures;
};

struct ConvergenceCurve {
  int modes = 0;  // 0 marks the deterministic curve
  std::vector<double> dts;
  std::vector<double> errors;
  double slope = 0.0;
};

struct ConvergenceReport {
  std::vector<ConvergenceCurve> curves;
  std::vector<TrajectoryFailure> failures;
};

struct AuditResult {
  double max_defect = 0.0;
  // Per-(step, cell) defects of the first audited seed.
  std::vector<std::vector<double>> defects;
};

PlaneWaveResult run_plane_wave(const ExperimentConfig& cfg);
SolitonResult run_soliton(const ExperimentConfig& cfg);
ConvergenceReport run_convergence(const ExperimentConfig& cfg);
AuditResult run_two_form_audit(const ExperimentConfig& cfg);

/// Least-squares slope of log2(err) against log2(dt).
double fitted_slope(const std::vector<double>& dts, const std::vector<double>& errors);

void write_plane_wave_csv(const PlaneWaveResult& r, const std::string& out_dir);
void write_soliton_csv(const SolitonResult& r, const std::string& out_dir);
void write_convergence_csv(const ConvergenceReport& r, const std::string& out_dir);
void write_audit_csv(const AuditResult& r, const std::string& out_dir);
void write_failures_csv(const std::vector<TrajectoryFailure>& failures,
                        const std::string& out_dir);

/** Runs the configured experiment and writes its CSVs. Returns a process exit
 * code: 0 success, 2 config error, 3 solver failure threshold exceeded. */
int run_experiment(const ExperimentConfig& cfg);

}  // namespace dsnls
