#pragma once

#include <cstdint>
#include <string>

#include "dropf/mpc.hpp"

namespace dropf {

inline constexpr int kFormatVersion = 1;

NetworkCase load_case(const std::string& path);
void save_case(const NetworkCase& net, const std::string& path);

/// CSV matrix, one sample per row, width n_xi * T. An optional first header
/// line is skipped. Ragged rows, NaN or infinite entries are errors naming
/// the offending row.
Matrix load_error_csv(const std::string& path);
void save_error_csv(const Matrix& samples, const std::string& path);

AffinePolicy load_policy(const std::string& path, const HorizonModel& model);
void save_policy(const AffinePolicy& policy, const HorizonModel& model,
                 const std::string& path);

/// Everything needed to reproduce a run byte-for-byte (modulo timestamp).
struct RunManifest {
  std::string case_path;
  std::uint64_t case_hash = 0;
  std::string data_path;
  std::uint64_t data_hash = 0;
  double alpha = 0.1;
  double rho = 1.0;
  double epsilon = 0.0;
  std::string ground_norm = "l1";
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string created_utc;
};

std::uint64_t file_hash(const std::string& path);

void save_solution(const Solution& sol, const HorizonModel& model,
                   const RunManifest& manifest, const std::string& path);

void save_sweep(const SweepResult& sweep, const RunManifest& manifest,
                const std::string& csv_path, const std::string& json_path);

void save_trace(const MpcTrace& trace, const NetworkCase& base,
                const RunManifest& manifest, const std::string& csv_path,
                const std::string& json_path);

EvalReport load_eval_report(const std::string& path);
void save_eval_report(const EvalReport& report, const RunManifest& manifest,
                      const std::string& path);

}  // namespace dropf
