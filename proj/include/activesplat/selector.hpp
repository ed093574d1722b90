#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"
#include "activesplat/gp.hpp"
#include "activesplat/objective.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace activesplat {

struct Candidate {
  int id = 0;
  CameraPose pose;
};

enum class OrientationPolicy { LookAtCenter, Free };

/// Feasible poses: an explicit pool, or a position box with an orientation rule.
struct CandidateSet {
  enum class Mode { Finite, Continuous };
  Mode mode = Mode::Finite;
  std::vector<Candidate> finite;
  Vec3 box_min = Vec3::Constant(-1.0);
  Vec3 box_max = Vec3::Constant(1.0);
  OrientationPolicy orientation = OrientationPolicy::LookAtCenter;
  Vec3 look_target = Vec3::Zero();

  static CandidateSet from_poses(std::vector<Candidate> pool) {
    CandidateSet c;
    c.mode = Mode::Finite;
    c.finite = std::move(pool);
    return c;
  }
  static CandidateSet box(Vec3 lo, Vec3 hi, Vec3 target, OrientationPolicy policy = OrientationPolicy::LookAtCenter) {
    CandidateSet c;
    c.mode = Mode::Continuous;
    c.box_min = std::move(lo);
    c.box_max = std::move(hi);
    c.look_target = std::move(target);
    c.orientation = policy;
    return c;
  }
};

/// One selected view: the slot it was taken at, the observation fed to the surrogate, and the
/// objective of the cumulative view set up to and including it.
struct SlotRecord {
  int slot = 0;
  CameraPose pose;
  int candidate_id = -1;  // -1 for continuous-mode poses
  double y = 0.0;
  ObjectiveValue value;
  KernelConfig kernel;
  double wall_time = 0.0;  // seconds since the run started

  bool same_selection(const SlotRecord& o) const {
    return slot == o.slot && pose == o.pose && candidate_id == o.candidate_id && y == o.y && value == o.value &&
           kernel == o.kernel;
  }
};

struct SelectionRun {
  std::string method;
  int budget = 0;
  std::uint64_t rng_seed = 0;
  std::vector<SlotRecord> chosen;

  std::vector<CameraPose> poses() const {
    std::vector<CameraPose> p;
    for (const auto& r : chosen) p.push_back(r.pose);
    return p;
  }
  std::vector<int> ids() const {
    std::vector<int> p;
    for (const auto& r : chosen) p.push_back(r.candidate_id);
    return p;
  }
  const ObjectiveValue& final_value() const { return chosen.back().value; }

  /// Equality of everything except wall-clock timings.
  bool same_selection(const SelectionRun& o) const {
    if (method != o.method || budget != o.budget || rng_seed != o.rng_seed || chosen.size() != o.chosen.size())
      return false;
    for (std::size_t i = 0; i < chosen.size(); ++i)
      if (!chosen[i].same_selection(o.chosen[i])) return false;
    return true;
  }
};

struct ActiveConfig {
  KernelConfig initial_kernel;
  FitOptions fit;
  double direction_weight = 0.0;
  bool standardize = false;
  int refit_every = 1;
  double noise_sigma = 0.0;
  double normalizer = 1.0;
  int continuous_starts = 32;
  int continuous_probes = 512;
  int golden_sweeps = 4;
  int golden_iterations = 24;
  /// Continuous-mode results closer than this to a chosen position count as already chosen.
  double min_separation = 1e-6;
};

struct Acquisition {
  CameraPose pose;
  int candidate_id = -1;
  double mean = 0.0;
  double variance = 0.0;
  /// Continuous mode: best posterior mean among the starting points of the local ascent.
  double best_start_mean = -std::numeric_limits<double>::infinity();
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Strict ranking used by acquisition: higher mean, then higher variance, then lower id.
inline bool better(double mean_a, double var_a, int id_a, double mean_b, double var_b, int id_b) {
  if (mean_a != mean_b) return mean_a > mean_b;
  if (var_a != var_b) return var_a > var_b;
  return id_a < id_b;
}

inline CameraPose pose_from_params(const CandidateSet& cands, const std::vector<double>& p) {
  const Vec3 pos(p[0], p[1], p[2]);
  if (cands.orientation == OrientationPolicy::LookAtCenter || p.size() < 5) return look_at(pos, cands.look_target);
  const double yaw = p[3], pitch = p[4];
  const Vec3 dir(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
  return look_at(pos, pos + dir);
}

}  // namespace detail

/// Maximizes the posterior mean at `slot` over the remaining pool (finite mode) or the position
/// box (continuous mode: seeded multi-start coordinate-wise golden-section ascent).
/// `chosen` lists poses already selected; they are never returned.
inline Acquisition acquire_next(const GpSurrogate& gp, const CandidateSet& cands, int slot,
                                std::span<const CameraPose> chosen = {}, const ActiveConfig& cfg = {},
                                std::uint64_t seed = 0) {
  if (cands.mode == CandidateSet::Mode::Finite) {
    if (cands.finite.empty()) throw EmptyCandidates();
    Acquisition best;
    bool have = false;
    for (const auto& c : cands.finite) {
      const auto post = gp.posterior(pose_feature(c.pose, cfg.direction_weight), slot);
      if (!have || detail::better(post.mean, post.variance, c.id, best.mean, best.variance, best.candidate_id)) {
        best = {c.pose, c.id, post.mean, post.variance};
        have = true;
      }
    }
    return best;
  }

  const bool free = cands.orientation == OrientationPolicy::Free;
  const std::size_t dims = free ? 5 : 3;
  std::vector<double> lo{cands.box_min.x(), cands.box_min.y(), cands.box_min.z()};
  std::vector<double> hi{cands.box_max.x(), cands.box_max.y(), cands.box_max.z()};
  if (free) {
    lo.insert(lo.end(), {-std::numbers::pi, -0.5 * std::numbers::pi});
    hi.insert(hi.end(), {std::numbers::pi, 0.5 * std::numbers::pi});
  }
  auto score = [&](const std::vector<double>& p) {
    return gp.posterior(pose_feature(detail::pose_from_params(cands, p), cfg.direction_weight), slot);
  };

  std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(slot)));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto sample = [&] {
    std::vector<double> p(dims);
    for (std::size_t d = 0; d < dims; ++d) p[d] = lo[d] + (hi[d] - lo[d]) * u01(rng);
    return p;
  };

  const int n_starts = std::max(1, cfg.continuous_starts);
  const int n_random = n_starts / 2;
  std::vector<std::vector<double>> starts;
  for (int i = 0; i < n_random; ++i) starts.push_back(sample());
  struct Probe {
    std::vector<double> p;
    double mean;
  };
  std::vector<Probe> probes;
  for (int i = 0; i < cfg.continuous_probes; ++i) {
    auto p = sample();
    const double m = score(p).mean;
    probes.push_back({std::move(p), m});
  }
  std::stable_sort(probes.begin(), probes.end(), [](const Probe& a, const Probe& b) { return a.mean > b.mean; });
  for (int i = 0; i < n_starts - n_random && i < static_cast<int>(probes.size()); ++i) starts.push_back(probes[i].p);

  auto too_close = [&](const std::vector<double>& p) {
    const Vec3 pos(p[0], p[1], p[2]);
    for (const auto& c : chosen)
      if ((c.position - pos).norm() < cfg.min_separation) return true;
    return false;
  };

  constexpr double kInvPhi = 0.6180339887498949;
  Acquisition best;
  bool have = false;
  double best_start = -std::numeric_limits<double>::infinity();
  for (auto x : starts) {
    double fx = score(x).mean;
    if (!too_close(x)) best_start = std::max(best_start, fx);
    for (int sweep = 0; sweep < cfg.golden_sweeps; ++sweep) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double h = 0.25 * (hi[d] - lo[d]) * std::pow(0.5, sweep);
        double a = std::max(lo[d], x[d] - h), b = std::min(hi[d], x[d] + h);
        auto at = [&](double v) {
          auto q = x;
          q[d] = v;
          return score(q).mean;
        };
        double c1 = b - kInvPhi * (b - a), c2 = a + kInvPhi * (b - a);
        double f1 = at(c1), f2 = at(c2);
        for (int it = 0; it < cfg.golden_iterations; ++it) {
          if (f1 >= f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - kInvPhi * (b - a);
            f1 = at(c1);
          } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + kInvPhi * (b - a);
            f2 = at(c2);
          }
        }
        const double v = f1 >= f2 ? c1 : c2;
        const double fv = std::max(f1, f2);
        if (fv > fx) {
          auto q = x;
          q[d] = v;
          if (!too_close(q)) {
            x = q;
            fx = fv;
          }
        }
      }
    }
    if (too_close(x)) continue;
    const auto post = score(x);
    if (!have || detail::better(post.mean, post.variance, 0, best.mean, best.variance, 0)) {
      best = {detail::pose_from_params(cands, x), -1, post.mean, post.variance};
      have = true;
    }
  }
  if (!have) throw EmptyCandidates();
  best.best_start_mean = best_start;
  return best;
}

namespace detail {

inline std::pair<std::size_t, std::size_t> farthest_pair(std::span<const Candidate> pool, double direction_weight) {
  std::pair<std::size_t, std::size_t> best{0, pool.size() > 1 ? 1 : 0};
  double best_d = -1.0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      const double d =
          (pose_feature(pool[i].pose, direction_weight) - pose_feature(pool[j].pose, direction_weight)).norm();
      if (d > best_d) {
        best_d = d;
        best = {i, j};
      }
    }
  return best;
}

class RunClock {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <Oracle O>
SlotRecord score_prefix(const std::vector<CameraPose>& views, const O& oracle, const VoxelGrid& grid, int slot,
                        int id, double noise_sigma, double normalizer, std::uint64_t seed) {
  SlotRecord r;
  r.slot = slot;
  r.pose = views.back();
  r.candidate_id = id;
  r.value = evaluate_rq_or_zero(std::span<const CameraPose>(views), oracle, grid, noise_sigma,
                                mix_seed(seed, 0x5107ULL + static_cast<std::uint64_t>(slot)), normalizer);
  r.y = r.value.y;
  return r;
}

/// Scores a fixed selection order slot by slot.
template <Oracle O>
SelectionRun score_sequence(std::string method, const std::vector<Candidate>& order, const O& oracle,
                            const VoxelGrid& grid, int budget, std::uint64_t seed, double normalizer) {
  SelectionRun run;
  run.method = std::move(method);
  run.budget = budget;
  run.rng_seed = seed;
  RunClock clock;
  std::vector<CameraPose> views;
  for (std::size_t s = 0; s < order.size(); ++s) {
    views.push_back(order[s].pose);
    auto rec = score_prefix(views, oracle, grid, static_cast<int>(s), order[s].id, 0.0, normalizer, seed);
    rec.wall_time = clock.seconds();
    run.chosen.push_back(rec);
  }
  return run;
}

}  // namespace detail

/// Active selection loop: two initialization views (slot 0 observed as 0), then for each of
/// `budget` iterations refit the kernel, acquire the posterior-mean maximizer at the next slot,
/// score the cumulative view set and add the observation.
template <Oracle O>
SelectionRun run_active(const O& oracle, const CandidateSet& cands, const VoxelGrid& grid, int budget,
                        std::uint64_t seed, const ActiveConfig& cfg = {}) {
  if (budget < 1) throw std::invalid_argument("run_active: budget must be >= 1");
  SelectionRun run;
  run.method = "active";
  run.budget = budget;
  run.rng_seed = seed;
  detail::RunClock clock;

  CandidateSet pool = cands;
  std::vector<CameraPose> views;
  std::vector<Candidate> init;
  if (pool.mode == CandidateSet::Mode::Finite) {
    if (pool.finite.size() < 2) throw EmptyCandidates();
    const auto [i, j] = detail::farthest_pair(pool.finite, cfg.direction_weight);
    init = {pool.finite[i], pool.finite[j]};
    pool.finite.erase(pool.finite.begin() + static_cast<std::ptrdiff_t>(j));
    pool.finite.erase(pool.finite.begin() + static_cast<std::ptrdiff_t>(i));
  } else {
    const Vec3 c = 0.5 * (pool.box_min + pool.box_max);
    const double r = 0.5 * (pool.box_max - pool.box_min).minCoeff();
    init = {{-1, look_at(c - r * Vec3::UnitX(), pool.look_target)}, {-1, look_at(c + r * Vec3::UnitX(), pool.look_target)}};
  }

  GpSurrogate gp(cfg.initial_kernel, cfg.standardize);
  for (int s = 0; s < 2; ++s) {
    views.push_back(init[s].pose);
    auto rec = detail::score_prefix(views, oracle, grid, s, init[s].id, cfg.noise_sigma, cfg.normalizer, seed);
    if (s == 0) rec.y = 0.0;
    rec.kernel = gp.kernel();
    gp.add(pose_feature(init[s].pose, cfg.direction_weight), s, rec.y);
    rec.wall_time = clock.seconds();
    run.chosen.push_back(rec);
  }

  for (int k = 1; k <= budget; ++k) {
    const int slot = k + 1;
    if ((k - 1) % std::max(1, cfg.refit_every) == 0) {
      FitOptions fit = cfg.fit;
      fit.seed = detail::mix_seed(cfg.fit.seed ^ seed, static_cast<std::uint64_t>(slot));
      gp.set_kernel(fit_hyperparameters(gp, fit));
    }
    const auto acq = acquire_next(gp, pool, slot, views, cfg, seed);
    if (pool.mode == CandidateSet::Mode::Finite)
      std::erase_if(pool.finite, [&](const Candidate& c) { return c.id == acq.candidate_id; });
    views.push_back(acq.pose);
    auto rec = detail::score_prefix(views, oracle, grid, slot, acq.candidate_id, cfg.noise_sigma, cfg.normalizer, seed);
    rec.kernel = gp.kernel();
    gp.add(pose_feature(acq.pose, cfg.direction_weight), slot, rec.y);
    rec.wall_time = clock.seconds();
    run.chosen.push_back(rec);
  }
  return run;
}

/// Uniform selection without replacement of budget + 2 views, one run per seed.
template <Oracle O>
std::vector<SelectionRun> run_passive_random(const O& oracle, const CandidateSet& cands, const VoxelGrid& grid,
                                             int budget, std::span<const std::uint64_t> seeds, double normalizer = 1.0) {
  const std::size_t need = static_cast<std::size_t>(budget) + 2;
  if (cands.finite.size() < need) throw EmptyCandidates();
  std::vector<SelectionRun> runs;
  for (std::uint64_t seed : seeds) {
    std::vector<Candidate> remaining = cands.finite;
    std::vector<Candidate> order;
    std::mt19937_64 rng(seed);
    while (order.size() < need) {
      std::uniform_int_distribution<std::size_t> pick(0, remaining.size() - 1);
      const std::size_t i = pick(rng);
      order.push_back(remaining[i]);
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(i));
    }
    runs.push_back(detail::score_sequence("passive-random", order, oracle, grid, budget, seed, normalizer));
  }
  return runs;
}

/// The first budget + 2 candidates in capture order.
template <Oracle O>
SelectionRun run_passive_standard(const O& oracle, const CandidateSet& cands, const VoxelGrid& grid, int budget,
                                  double normalizer = 1.0) {
  const std::size_t need = std::min(cands.finite.size(), static_cast<std::size_t>(budget) + 2);
  std::vector<Candidate> order(cands.finite.begin(), cands.finite.begin() + static_cast<std::ptrdiff_t>(need));
  return detail::score_sequence("passive-standard", order, oracle, grid, budget, 0, normalizer);
}

/// Greedy farthest view sampling in pose-feature space from a seeded start.
inline std::vector<Candidate> farthest_view_order(std::span<const Candidate> pool, std::size_t count,
                                                  std::uint64_t seed, double direction_weight) {
  if (pool.empty() || count > pool.size()) throw EmptyCandidates();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<Candidate> order{pool[pick(rng)]};
  std::vector<double> min_dist(pool.size(), std::numeric_limits<double>::infinity());
  std::vector<char> used(pool.size(), 0);
  std::vector<PoseFeature> feats;
  for (const auto& c : pool) feats.push_back(pose_feature(c.pose, direction_weight));
  std::size_t last = 0;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].id == order[0].id) last = i;
  used[last] = 1;
  while (order.size() < count) {
    std::size_t best = pool.size();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (used[i]) continue;
      min_dist[i] = std::min(min_dist[i], (feats[i] - feats[last]).norm());
      if (best == pool.size() || min_dist[i] > min_dist[best] ||
          (min_dist[i] == min_dist[best] && pool[i].id < pool[best].id))
        best = i;
    }
    used[best] = 1;
    last = best;
    order.push_back(pool[best]);
  }
  return order;
}

template <Oracle O>
SelectionRun run_fvs(const CandidateSet& cands, const VoxelGrid& grid, const O& oracle, int budget, std::uint64_t seed,
                     double direction_weight = 0.0, double normalizer = 1.0) {
  const auto order = farthest_view_order(cands.finite, static_cast<std::size_t>(budget) + 2, seed, direction_weight);
  return detail::score_sequence("fvs", order, oracle, grid, budget, seed, normalizer);
}

/// Candidate ring around `center`: `count` poses at jittered azimuth, radius and height,
/// sorted by azimuth (capture order), ids 0..count-1. Cameras look at the centre, or away
/// from it when `outward` is set.
struct RingSpec {
  Vec3 center = Vec3::Zero();
  double radius = 3.0;
  double height = 0.0;
  int count = 120;
  double azimuth_jitter = 0.0;  // fraction of the angular spacing
  double radius_jitter = 0.0;   // absolute, uniform +-
  double height_jitter = 0.0;   // absolute, uniform +-
  double target_jitter = 0.0;   // std-dev of the look-at target offset (inward rings only)
  bool outward = false;
  std::uint64_t seed = 7;
};

inline std::vector<Candidate> make_ring_candidates(const RingSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  struct Raw {
    double azimuth;
    Vec3 pos;
  };
  std::vector<Raw> raw;
  const double step = 2.0 * std::numbers::pi / spec.count;
  for (int i = 0; i < spec.count; ++i) {
    double az = i * step + spec.azimuth_jitter * step * 0.5 * u(rng);
    az = std::fmod(az + 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
    const double r = spec.radius + spec.radius_jitter * u(rng);
    const double h = spec.height + spec.height_jitter * u(rng);
    raw.push_back({az, spec.center + Vec3(r * std::cos(az), r * std::sin(az), h)});
  }
  std::stable_sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) { return a.azimuth < b.azimuth; });
  std::vector<Candidate> out;
  std::mt19937_64 aim_rng(spec.seed ^ 0x5bd1e995ULL);
  std::normal_distribution<double> aim(0.0, 1.0);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Vec3 target = spec.outward ? raw[i].pos + (raw[i].pos - spec.center).cwiseProduct(Vec3(1, 1, 0))
                               : spec.center;
    if (!spec.outward && spec.target_jitter > 0.0) {
      const Vec3 d(aim(aim_rng), aim(aim_rng), aim(aim_rng));
      target += spec.target_jitter * d;
    }
    out.push_back({static_cast<int>(i), look_at(raw[i].pos, target)});
  }
  return out;
}

inline constexpr const char* kSlotCsvHeader =
    "slot,candidate_id,px,py,pz,qw,qx,qy,qz,y,density,occupancy,r_q,spatial_lengthscale,spatial_variance,"
    "time_lengthscale,noise_variance,wall_time";

inline void write_run_csv(const SelectionRun& run, std::ostream& os) {
  os << kSlotCsvHeader << "\n" << std::setprecision(17);
  for (const auto& r : run.chosen) {
    const auto& p = r.pose.position;
    const auto& q = r.pose.orientation;
    os << r.slot << "," << r.candidate_id << "," << p.x() << "," << p.y() << "," << p.z() << "," << q.w() << ","
       << q.x() << "," << q.y() << "," << q.z() << "," << r.y << "," << r.value.density << "," << r.value.occupancy
       << "," << r.value.r_q << "," << r.kernel.spatial_lengthscale << "," << r.kernel.spatial_variance << ","
       << r.kernel.time_lengthscale << "," << r.kernel.noise_variance << "," << r.wall_time << "\n";
  }
}

}  // namespace activesplat
