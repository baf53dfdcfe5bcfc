#pragma once

#include <string>

#include "sdelab/analysis.hpp"
#include "sdelab/experiment.hpp"

namespace sdelab {

inline BoundId parse_bound_id(const std::string& name) {
  for (const BoundId id :
       {BoundId::kDsgdClassic, BoundId::kDsgdCorrected,
        BoundId::kDcsgdClassicBounded, BoundId::kDcsgdCorrectedBounded,
        BoundId::kDcsgdClassicAffine, BoundId::kDcsgdCorrectedAffine,
        BoundId::kDsignClassic, BoundId::kDsignCorrected,
        BoundId::kDsignCorrectedAlt})
    if (name == bound_name(id)) return id;
  throw std::runtime_error("unknown bound id `" + name + "`");
}

// Problem constants assembled from an experiment configuration: smoothness
// and slack from the scheduler keys, client-averaged noise/compression
// moments from the client specs, S0 from the starting point.
inline ProblemConstants problem_constants_from(const Config& cfg) {
  const Experiment e = build_experiment(cfg);
  const auto& clients = e.run.clients;
  const int dim = e.run.objective.dimension();

  ProblemConstants c;
  c.eps = cfg.get_double_or("scheduler.eps", 0.5);
  c.l0 = cfg.get_double_or("scheduler.L0", 1.0);
  c.l1 = cfg.get_double_or("scheduler.L1", 0.0);
  if (const auto known = e.run.objective.smoothness()) {
    if (!cfg.has("scheduler.L0")) c.l0 = known->l0;
    if (!cfg.has("scheduler.L1")) c.l1 = known->l1;
  }
  c.clients = static_cast<int>(clients.size());
  c.dim = dim;
  c.eta = e.run.eta;

  bool student = false;
  for (const auto& cl : clients)
    student |= cl.noise.kind == NoiseSpec::Kind::kStudentT;
  if (student) {
    std::vector<NoiseSpec> specs;
    specs.reserve(clients.size());
    for (const auto& cl : clients) specs.push_back(cl.noise);
    c.sigma_h = harmonic_mean_scale(specs);
    c.nu = clients.front().noise.nu;
  } else {
    const NormalizationParams p = normalization_from_clients(
        clients, dim, c.eps, c.l0, c.l1, NormalizationParams::Form::kFull);
    c.sigma0sq_bar = p.sigma0sq_bar;
    c.sigma1sq_bar = p.sigma1sq_bar;
    c.sigma0sq_omega_bar = p.sigma0sq_omega_bar;
    c.sigma1sq_omega_bar = p.sigma1sq_omega_bar;
    c.omega_bar = p.omega_bar;
    // Bounded-variance aliases used by the sigma-only bounds.
    c.sigmasq_bar = p.sigma0sq_bar;
    c.sigmasq_omega_bar = p.sigma0sq_omega_bar;
  }

  rng::Stream init(e.run.seed, 0, 0, rng::Purpose::kInit);
  const Vec x0 = e.run.x0 ? *e.run.x0 : e.run.objective.initial_point(init);
  c.s0 = e.run.objective.loss(x0);  // known minimum 0 for analytic objectives
  return c;
}

}  // namespace sdelab
