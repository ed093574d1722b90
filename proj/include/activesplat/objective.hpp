#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"

#include <concepts>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace activesplat {

/// Anything that turns a view set into a triangulated cloud, throwing OracleFailure when
/// nothing can be triangulated.
template <typename T>
concept Oracle = requires(const T& o, std::span<const CameraPose> views) {
  { o.reconstruct(views) } -> std::same_as<PointCloud>;
};

struct ObjectiveValue {
  double density = 0.0;
  double occupancy = 0.0;
  double r_q = 0.0;
  double noise_sigma = 0.0;
  double y = 0.0;  // observed value r_q + n
  std::size_t points = 0;
  bool degenerate = false;

  bool operator==(const ObjectiveValue&) const = default;
};

/// Point count divided by `normalizer`.
inline double density(const PointCloud& pc, double normalizer = 1.0) {
  return static_cast<double>(pc.size()) / normalizer;
}

/// Fraction of grid voxels holding at least one cloud point.
inline double occupancy(const VoxelGrid& grid, const PointCloud& pc) {
  const VoxelGrid marked = grid.cleared().mark_points(pc);
  return static_cast<double>(marked.occupied_count()) / static_cast<double>(marked.voxel_count());
}

inline ObjectiveValue score_cloud(const PointCloud& pc, const VoxelGrid& grid, double normalizer = 1.0) {
  ObjectiveValue v;
  v.density = density(pc, normalizer);
  v.occupancy = occupancy(grid, pc);
  v.r_q = v.density * v.occupancy;
  v.y = v.r_q;
  v.points = pc.size();
  return v;
}

/// r_q = D * O of the cloud reconstructed from `views`, observed with additive Gaussian noise
/// drawn from a generator seeded by `rng_seed`. Throws OracleFailure on a degenerate view set.
template <Oracle O>
ObjectiveValue evaluate_rq(std::span<const CameraPose> views, const O& oracle, const VoxelGrid& grid,
                           double noise_sigma, std::uint64_t rng_seed, double normalizer = 1.0) {
  const PointCloud pc = oracle.reconstruct(views);
  ObjectiveValue v = score_cloud(pc, grid, normalizer);
  v.noise_sigma = noise_sigma;
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> n(0.0, noise_sigma);
    v.y = v.r_q + n(rng);
  }
  return v;
}

/// Like evaluate_rq, but a degenerate view set scores zero instead of throwing.
template <Oracle O>
ObjectiveValue evaluate_rq_or_zero(std::span<const CameraPose> views, const O& oracle, const VoxelGrid& grid,
                                   double noise_sigma, std::uint64_t rng_seed, double normalizer = 1.0) {
  try {
    return evaluate_rq(views, oracle, grid, noise_sigma, rng_seed, normalizer);
  } catch (const OracleFailure&) {
    ObjectiveValue v;
    v.noise_sigma = noise_sigma;
    v.degenerate = true;
    return v;
  }
}

}  // namespace activesplat
