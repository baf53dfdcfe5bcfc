#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sdelab/compressors.hpp"
#include "sdelab/noise.hpp"
#include "sdelab/objectives.hpp"
#include "sdelab/rng.hpp"
#include "sdelab/schedulers.hpp"

namespace sdelab {

enum class Algorithm { kDsgd, kDcsgd, kDsignsgd, kNormalizedDcsgd };

struct ClientSpec {
  NoiseSpec noise;
  CompressorSpec compressor;
};

struct RunConfig {
  Objective objective;
  std::vector<ClientSpec> clients;
  SchedulerSpec scheduler;
  double eta = 0.1;            // base stepsize
  long steps = 100;
  std::uint64_t seed = 0;      // master seed
  std::uint64_t run_id = 0;
  double divergence_threshold = 1e12;
  long record_stride = 1;
  std::optional<Vec> x0;       // defaults to the objective's initial point
};

struct TrajectoryPoint {
  long step = 0;
  double time = 0.0;          // continuous time k*eta
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double lr_eff = 0.0;        // effective stepsize eta*eta_k applied at this step
  double g_hat = 0.0;         // server-side gradient-norm estimate
};

struct TrajectoryRecord {
  enum class Status { kCompleted, kDiverged };

  std::vector<TrajectoryPoint> points;
  Status status = Status::kCompleted;
  long diverged_step = -1;
  Vec final_x;

  bool diverged() const { return status == Status::kDiverged; }
};

// Mean of the client Euclidean norms; the one-scalar-per-round statistic the
// server aggregates for the normalized stepsize.
inline double aggregate_norm_estimate(std::span<const Vec> client_grads) {
  if (client_grads.empty())
    throw std::invalid_argument("aggregate_norm_estimate: no clients");
  double acc = 0.0;
  for (const auto& g : client_grads) acc += g.norm();
  return acc / static_cast<double>(client_grads.size());
}

inline void validate_config(const RunConfig& cfg, Algorithm alg) {
  if (cfg.clients.empty())
    throw std::invalid_argument("run: at least one client required");
  if (cfg.steps <= 0) throw std::invalid_argument("run: steps must be > 0");
  if (cfg.eta <= 0.0) throw std::invalid_argument("run: eta must be > 0");
  if (cfg.record_stride <= 0)
    throw std::invalid_argument("run: record_stride must be > 0");
  for (const auto& c : cfg.clients) {
    const bool is_sign = c.compressor.kind == CompressorSpec::Kind::kSign;
    switch (alg) {
      case Algorithm::kDsgd:
        if (c.compressor.kind != CompressorSpec::Kind::kIdentity)
          throw std::invalid_argument("DSGD: clients must use the identity compressor");
        break;
      case Algorithm::kDcsgd:
      case Algorithm::kNormalizedDcsgd:
        if (is_sign)
          throw std::invalid_argument(
              "DCSGD: sign map is not an unbiased compressor; use DSignSGD");
        break;
      case Algorithm::kDsignsgd:
        if (!is_sign)
          throw std::invalid_argument("DSignSGD: clients must use the sign compressor");
        break;
    }
  }
}

namespace detail {

// Scratch buffers reused across steps so the hot loop does not allocate.
struct RoundWorkspace {
  Vec noisy, compressed, direction;
  double g_hat = 0.0;
  double lr_eff = 0.0;
};

// One aggregation round: each client forms a noisy gradient, the server
// averages the (compressed) messages and the client norm estimates, and the
// effective stepsize is resolved from the scheduler (using this round's
// norm estimate when the scheduler is adaptive).
inline void aggregate_round(const Vec& grad, const RunConfig& cfg,
                            Algorithm alg, long k, RoundWorkspace& ws) {
  const auto n = cfg.clients.size();
  ws.direction.resize(grad.size());
  ws.direction.setZero();
  double norm_acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rng::Stream noise_stream(cfg.seed, cfg.run_id, i, rng::Purpose::kNoise,
                             static_cast<std::uint64_t>(k));
    sample_noise_into(cfg.clients[i].noise, grad, noise_stream, ws.noisy);
    ws.noisy += grad;
    norm_acc += ws.noisy.norm();

    rng::Stream mask_stream(cfg.seed, cfg.run_id, i, rng::Purpose::kMask,
                            static_cast<std::uint64_t>(k));
    switch (alg) {
      case Algorithm::kDsgd:
        ws.direction += ws.noisy;
        break;
      case Algorithm::kDcsgd:
      case Algorithm::kNormalizedDcsgd:
        compress_into(cfg.clients[i].compressor, ws.noisy, mask_stream,
                      ws.compressed);
        ws.direction += ws.compressed;
        break;
      case Algorithm::kDsignsgd:
        compress_into(CompressorSpec::sign(), ws.noisy, mask_stream,
                      ws.compressed);
        ws.direction += ws.compressed;
        break;
    }
  }
  ws.g_hat = norm_acc / static_cast<double>(n);
  ws.direction /= static_cast<double>(n);
  if (alg == Algorithm::kNormalizedDcsgd)
    ws.direction /= ws.direction.norm() + 1e-8;

  ws.lr_eff = cfg.scheduler.is_adaptive()
                  ? normalized_lr(cfg.eta, ws.g_hat, cfg.scheduler.norm)
                  : cfg.eta * eta_at(cfg.scheduler, static_cast<double>(k));
}

inline Vec one_step(const Vec& x, const RunConfig& cfg, Algorithm alg, long k) {
  RoundWorkspace ws;
  aggregate_round(cfg.objective.gradient(x), cfg, alg, k, ws);
  return x - ws.lr_eff * ws.direction;
}

}  // namespace detail

// Single update of the given algorithm at step index k; exposed for tests.
inline Vec step_dcsgd(const Vec& x, const RunConfig& cfg, long k) {
  return detail::one_step(x, cfg, Algorithm::kDcsgd, k);
}

inline Vec step_dsignsgd(const Vec& x, const RunConfig& cfg, long k) {
  return detail::one_step(x, cfg, Algorithm::kDsignsgd, k);
}

inline Vec step_normalized_dcsgd(const Vec& x, const RunConfig& cfg, long k) {
  return detail::one_step(x, cfg, Algorithm::kNormalizedDcsgd, k);
}

// Runs the full discrete loop, recording loss and squared gradient norm at
// the configured stride plus the terminal state. Divergence (non-finite or
// above-threshold loss/iterate) halts the run with a flag.
inline TrajectoryRecord run(const RunConfig& cfg, Algorithm alg) {
  validate_config(cfg, alg);
  TrajectoryRecord rec;
  rng::Stream init_stream(cfg.seed, cfg.run_id, 0, rng::Purpose::kInit);
  Vec x = cfg.x0 ? *cfg.x0 : cfg.objective.initial_point(init_stream);
  if (cfg.x0 && cfg.x0->size() != cfg.objective.dimension())
    throw std::invalid_argument("run: x0 dimension mismatch");

  detail::RoundWorkspace ws;
  Vec grad;
  for (long k = 0; k < cfg.steps; ++k) {
    grad = cfg.objective.gradient(x);
    detail::aggregate_round(grad, cfg, alg, k, ws);
    if (k % cfg.record_stride == 0) {
      rec.points.push_back({k, static_cast<double>(k) * cfg.eta,
                            cfg.objective.loss(x), grad.squaredNorm(),
                            ws.lr_eff, ws.g_hat});
    }
    x -= ws.lr_eff * ws.direction;

    const double loss = cfg.objective.loss(x);
    if (!std::isfinite(loss) || loss > cfg.divergence_threshold ||
        !x.allFinite() || x.norm() > cfg.divergence_threshold) {
      rec.status = TrajectoryRecord::Status::kDiverged;
      rec.diverged_step = k + 1;
      rec.final_x = x;
      return rec;
    }
  }

  grad = cfg.objective.gradient(x);
  rec.points.push_back({cfg.steps, static_cast<double>(cfg.steps) * cfg.eta,
                        cfg.objective.loss(x), grad.squaredNorm(), 0.0,
                        grad.norm()});
  rec.final_x = x;
  return rec;
}

}  // namespace sdelab
