#pragma once
#include <cstdlib>

#include <cstdio>
#include <ostream>
#include <string>

#include "sdelab/config.hpp"
#include "sdelab/optimizers.hpp"

namespace sdelab {

// Shortest decimal form that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

// Trajectory CSV: `#`-prefixed header block (config echo + content hash),
// one row per recorded step. Deterministic byte-for-byte given the config.
inline void write_trajectory_csv(std::ostream& out, const Config& cfg,
                                 const TrajectoryRecord& rec,
                                 std::uint64_t run_id) {
  cfg.write_echo(out);
  out << "run_id,step,time,loss,grad_norm_sq,lr_eff,g_hat,status\n";
  const char* status = rec.diverged() ? "diverged" : "completed";
  for (const auto& p : rec.points) {
    out << run_id << ',' << p.step << ',' << format_double(p.time) << ','
        << format_double(p.loss) << ',' << format_double(p.grad_norm_sq) << ','
        << format_double(p.lr_eff) << ',' << format_double(p.g_hat) << ','
        << status << "\n";
  }
}

inline void write_trajectory_rows(std::ostream& out,
                                  const TrajectoryRecord& rec,
                                  std::uint64_t run_id) {
  const char* status = rec.diverged() ? "diverged" : "completed";
  for (const auto& p : rec.points) {
    out << run_id << ',' << p.step << ',' << format_double(p.time) << ','
        << format_double(p.loss) << ',' << format_double(p.grad_norm_sq) << ','
        << format_double(p.lr_eff) << ',' << format_double(p.g_hat) << ','
        << status << "\n";
  }
}

}  // namespace sdelab
