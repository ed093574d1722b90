#pragma once

#include "activesplat/config.hpp"
#include "activesplat/errors.hpp"
#include "activesplat/image.hpp"
#include "activesplat/objective.hpp"
#include "activesplat/ply.hpp"
#include "activesplat/render.hpp"
#include "activesplat/scene.hpp"
#include "activesplat/selector.hpp"
#include "activesplat/splat.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace activesplat {

/// Metrics after the first `iteration + 2` selected views.
struct TracePoint {
  int iteration = 0;
  int slot = 1;  // slot of the last view in the prefix, matching the per-slot run logs
  double r_q = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct SplitOutcome {
  int split = 0;
  std::vector<int> test_ids;
  std::vector<int> chosen_ids;
  double final_r_q = 0.0;
  double final_density = 0.0;
  double final_occupancy = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  /// First iteration whose r_q reaches 95% of the final r_q.
  int iterations_to_95 = 0;
  std::vector<TracePoint> trace;
  /// passive-random only: per-seed final r_q and PSNR, their mean r_q, and the best-by-PSNR seed.
  std::vector<double> seed_final_r_q;
  std::vector<double> seed_psnr;
  double mean_final_r_q = 0.0;
  int best_seed_index = 0;
  std::optional<std::string> error;
  double wall_time = 0.0;
};

struct MethodOutcome {
  std::string method;
  std::vector<SplitOutcome> splits;
  double median_final_r_q = 0.0;
  double median_mean_final_r_q = 0.0;  // equals median_final_r_q except for passive-random
  double median_psnr = 0.0;
  double median_ssim = 0.0;
  double median_iterations_to_95 = 0.0;
  std::vector<TracePoint> median_trace;
  double wall_time = 0.0;
};

struct SceneOutcome {
  std::string name;
  std::string generator;
  int primitives = 0;
  std::vector<MethodOutcome> methods;

  const MethodOutcome* method(std::string_view m) const {
    for (const auto& x : methods)
      if (x.method == m) return &x;
    return nullptr;
  }
};

struct RunReport {
  int schema_version = kConfigSchemaVersion;
  std::string config_hash;
  std::string protocol_note;
  int budget = 0;
  int n_test = 0;
  int test_splits = 0;
  int trace_stride = 0;
  std::vector<int> trace_iterations;
  std::vector<SceneOutcome> scenes;
  double wall_time = 0.0;

  const SceneOutcome* scene(std::string_view n) const {
    for (const auto& s : scenes)
      if (s.name == n) return &s;
    return nullptr;
  }
};

/// Iterations 0, stride, 2*stride, ... and always the final iteration `budget`.
inline std::vector<int> trace_iterations(int budget, int stride) {
  std::vector<int> it;
  for (int k = 0; k <= budget; k += std::max(1, stride)) it.push_back(k);
  if (it.back() != budget) it.push_back(budget);
  return it;
}

/// First iteration (0-based, views = iteration + 2) at which r_q reaches `fraction` of the final value.
inline int iterations_to_fraction(const SelectionRun& run, double fraction = 0.95) {
  if (run.chosen.empty()) return 0;
  const double target = fraction * run.final_value().r_q;
  for (std::size_t i = 1; i < run.chosen.size(); ++i)
    if (run.chosen[i].value.r_q >= target) return static_cast<int>(i) - 1;
  return static_cast<int>(run.chosen.size()) - 2;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---- JSON ----

inline void to_json(nlohmann::json& j, const TracePoint& p) {
  j = {{"iteration", p.iteration}, {"slot", p.slot}, {"r_q", p.r_q}, {"psnr", p.psnr}, {"ssim", p.ssim},
       {"lpips", nullptr}};
}
inline void from_json(const nlohmann::json& j, TracePoint& p) {
  p.iteration = j.at("iteration").get<int>();
  p.slot = j.at("slot").get<int>();
  p.r_q = j.at("r_q").get<double>();
  p.psnr = j.at("psnr").get<double>();
  p.ssim = j.at("ssim").get<double>();
}

inline void to_json(nlohmann::json& j, const SplitOutcome& s) {
  j = {{"split", s.split},
       {"test_ids", s.test_ids},
       {"chosen_ids", s.chosen_ids},
       {"final_r_q", s.final_r_q},
       {"final_density", s.final_density},
       {"final_occupancy", s.final_occupancy},
       {"psnr", s.psnr},
       {"ssim", s.ssim},
       {"lpips", nullptr},
       {"iterations_to_95", s.iterations_to_95},
       {"trace", s.trace},
       {"error", s.error ? nlohmann::json(*s.error) : nlohmann::json(nullptr)},
       {"wall_time_s", s.wall_time}};
  if (!s.seed_final_r_q.empty()) {
    j["seed_final_r_q"] = s.seed_final_r_q;
    j["seed_psnr"] = s.seed_psnr;
    j["mean_final_r_q"] = s.mean_final_r_q;
    j["best_seed_index"] = s.best_seed_index;
  }
}
inline void from_json(const nlohmann::json& j, SplitOutcome& s) {
  s.split = j.at("split").get<int>();
  s.test_ids = j.at("test_ids").get<std::vector<int>>();
  s.chosen_ids = j.at("chosen_ids").get<std::vector<int>>();
  s.final_r_q = j.at("final_r_q").get<double>();
  s.final_density = j.at("final_density").get<double>();
  s.final_occupancy = j.at("final_occupancy").get<double>();
  s.psnr = j.at("psnr").get<double>();
  s.ssim = j.at("ssim").get<double>();
  s.iterations_to_95 = j.at("iterations_to_95").get<int>();
  s.trace = j.at("trace").get<std::vector<TracePoint>>();
  if (!j.at("error").is_null()) s.error = j.at("error").get<std::string>();
  s.wall_time = j.value("wall_time_s", 0.0);
  if (j.contains("seed_final_r_q")) {
    s.seed_final_r_q = j.at("seed_final_r_q").get<std::vector<double>>();
    s.seed_psnr = j.at("seed_psnr").get<std::vector<double>>();
    s.mean_final_r_q = j.at("mean_final_r_q").get<double>();
    s.best_seed_index = j.at("best_seed_index").get<int>();
  }
}

inline void to_json(nlohmann::json& j, const MethodOutcome& m) {
  j = {{"method", m.method},
       {"median_final_r_q", m.median_final_r_q},
       {"median_mean_final_r_q", m.median_mean_final_r_q},
       {"median_psnr", m.median_psnr},
       {"median_ssim", m.median_ssim},
       {"median_lpips", nullptr},
       {"median_iterations_to_95", m.median_iterations_to_95},
       {"median_trace", m.median_trace},
       {"splits", m.splits},
       {"wall_time_s", m.wall_time}};
}
inline void from_json(const nlohmann::json& j, MethodOutcome& m) {
  m.method = j.at("method").get<std::string>();
  m.median_final_r_q = j.at("median_final_r_q").get<double>();
  m.median_mean_final_r_q = j.at("median_mean_final_r_q").get<double>();
  m.median_psnr = j.at("median_psnr").get<double>();
  m.median_ssim = j.at("median_ssim").get<double>();
  m.median_iterations_to_95 = j.at("median_iterations_to_95").get<double>();
  m.median_trace = j.at("median_trace").get<std::vector<TracePoint>>();
  m.splits = j.at("splits").get<std::vector<SplitOutcome>>();
  m.wall_time = j.value("wall_time_s", 0.0);
}

inline void to_json(nlohmann::json& j, const SceneOutcome& s) {
  j = {{"name", s.name}, {"generator", s.generator}, {"primitives", s.primitives}, {"methods", s.methods}};
}
inline void from_json(const nlohmann::json& j, SceneOutcome& s) {
  s.name = j.at("name").get<std::string>();
  s.generator = j.at("generator").get<std::string>();
  s.primitives = j.at("primitives").get<int>();
  s.methods = j.at("methods").get<std::vector<MethodOutcome>>();
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
  j = {{"schema_version", r.schema_version},
       {"config_hash", r.config_hash},
       {"protocol_note", r.protocol_note},
       {"budget", r.budget},
       {"n_test", r.n_test},
       {"test_splits", r.test_splits},
       {"trace_stride", r.trace_stride},
       {"trace_iterations", r.trace_iterations},
       {"scenes", r.scenes},
       {"wall_time_s", r.wall_time}};
}
inline void from_json(const nlohmann::json& j, RunReport& r) {
  r.schema_version = j.at("schema_version").get<int>();
  r.config_hash = j.at("config_hash").get<std::string>();
  r.protocol_note = j.at("protocol_note").get<std::string>();
  r.budget = j.at("budget").get<int>();
  r.n_test = j.at("n_test").get<int>();
  r.test_splits = j.at("test_splits").get<int>();
  r.trace_stride = j.at("trace_stride").get<int>();
  r.trace_iterations = j.at("trace_iterations").get<std::vector<int>>();
  r.scenes = j.at("scenes").get<std::vector<SceneOutcome>>();
  r.wall_time = j.value("wall_time_s", 0.0);
}

/// Report text with every wall-time field removed; equal for replays of the same config.
inline std::string report_without_wall_times(const RunReport& r) {
  std::function<void(nlohmann::json&)> strip = [&](nlohmann::json& j) {
    if (j.is_object()) {
      for (auto it = j.begin(); it != j.end();) {
        if (it.key().rfind("wall_time", 0) == 0) {
          it = j.erase(it);
        } else {
          strip(*it);
          ++it;
        }
      }
    } else if (j.is_array()) {
      for (auto& x : j) strip(x);
    }
  };
  nlohmann::json j = r;
  strip(j);
  return j.dump(2);
}

inline void write_report(const RunReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open '" + path + "' for writing");
  f << nlohmann::json(r).dump(2) << "\n";
  if (!f) throw IoFailure("write failed: " + path);
}

inline RunReport read_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open report '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
    return j.get<RunReport>();
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report is not valid JSON: ") + e.what(), 0);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("report schema: ") + e.what());
  }
}

// ---- running ----

/// Immutable per-scene state shared by every method and split.
class SceneContext {
public:
  SceneContext(const SceneSetup& setup, const ExperimentConfig& cfg)
      : setup_(setup),
        cfg_(cfg),
        truth_(generate_scene(setup.spec)),
        oracle_{truth_, setup.intrinsics, setup.min_observing_views, setup.occlusion, setup.dropout,
                cfg.seed, setup.occluder_scale},
        cached_(oracle_),
        grid_(setup.spec.bbox_min, setup.spec.bbox_max, setup.grid_resolution),
        ring_(make_ring_candidates(setup.ring)) {}

  SceneContext(const SceneContext&) = delete;
  SceneContext& operator=(const SceneContext&) = delete;

  const SceneSetup& setup() const { return setup_; }
  const SplatModel& truth() const { return truth_; }
  const CachedOracle& oracle() const { return cached_; }
  const VoxelGrid& grid() const { return grid_; }
  const std::vector<Candidate>& ring() const { return ring_; }

  /// Ground-truth image for a pose, rendered once.
  const Image& truth_image(const CameraPose& pose) {
    const auto key = detail::hash_pose(pose);
    auto it = images_.find(key);
    if (it == images_.end()) it = images_.emplace(key, render_ground_truth(truth_, pose, setup_.intrinsics)).first;
    return it->second;
  }

  struct Quality {
    double psnr = 0.0;
    double ssim = 0.0;
  };

  /// Initializes a splat model from the cloud of `views`, trains it on those views and scores it
  /// on `test`. A view set that triangulates nothing is scored as an empty (background) model.
  Quality evaluate(const std::vector<CameraPose>& views, const std::vector<CameraPose>& test) {
    SplatModel model;
    model.background = truth_.background;
    try {
      const PointCloud pc = cached_.reconstruct(views);
      SplatInitConfig init = cfg_.init;
      init.bbox_diagonal = grid_.diagonal().norm();
      model = init_from_cloud(pc, init);
      model.background = truth_.background;
      std::vector<TrainView> train_set;
      for (const auto& v : views) train_set.push_back({v, truth_image(v)});
      model = train(model, train_set, setup_.intrinsics, cfg_.train);
    } catch (const OracleFailure&) {
    }
    Quality q;
    for (const auto& t : test) {
      const Image img = render(model, t, setup_.intrinsics);
      q.psnr += psnr(img, truth_image(t));
      q.ssim += ssim(img, truth_image(t));
    }
    q.psnr /= static_cast<double>(test.size());
    q.ssim /= static_cast<double>(test.size());
    return q;
  }

private:
  SceneSetup setup_;
  const ExperimentConfig& cfg_;
  SplatModel truth_;
  ReconstructionOracle oracle_;
  CachedOracle cached_;
  VoxelGrid grid_;
  std::vector<Candidate> ring_;
  std::map<std::uint64_t, Image> images_;
};

/// Seeded held-out split: indices into the ring of the test views, sorted.
inline std::vector<int> test_split(std::size_t pool, int n_test, std::uint64_t seed, int split) {
  std::vector<int> idx(pool);
  for (std::size_t i = 0; i < pool; ++i) idx[i] = static_cast<int>(i);
  std::mt19937_64 rng(detail::mix_seed(seed, 0x7e57ULL + static_cast<std::uint64_t>(split)));
  for (std::size_t i = 0; i + 1 < pool; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(n_test));
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct ExperimentOptions {
  /// Directory for per-slot CSV logs and the report; empty disables file output.
  std::string output_dir;
  std::function<void(const std::string&)> progress;
};

namespace detail {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline void write_csv_file(const SelectionRun& run, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw IoFailure("cannot open '" + path.string() + "' for writing");
  write_run_csv(run, f);
  if (!f) throw IoFailure("write failed: " + path.string());
}

}  // namespace detail

/// Runs every requested method on every scene and split, trains a splat model from each final
/// cloud (and from each traced prefix), and collects metrics. Deterministic given the config.
inline RunReport run_experiment(const ExperimentConfig& cfg, const ExperimentOptions& opt = {}) {
  namespace fs = std::filesystem;
  detail::RunClock total_clock;
  RunReport report;
  report.config_hash = detail::hex64(cfg.hash());
  report.budget = cfg.budget;
  report.n_test = cfg.n_test;
  report.test_splits = cfg.test_splits;
  report.trace_stride = cfg.trace_stride;
  report.trace_iterations = trace_iterations(cfg.budget, cfg.trace_stride);
  report.protocol_note = "metrics are medians over " + std::to_string(cfg.test_splits) +
                         " seeded held-out splits of " + std::to_string(cfg.n_test) +
                         " views; passive-random is best of " + std::to_string(cfg.random_seeds.size()) +
                         " seeds by PSNR; LPIPS is not computed (null)";
  auto say = [&](const std::string& s) {
    if (opt.progress) opt.progress(s);
  };
  const bool write = !opt.output_dir.empty();
  if (write) fs::create_directories(opt.output_dir);

  for (const auto& setup : cfg.scenes) {
    SceneContext ctx(setup, cfg);
    SceneOutcome scene;
    scene.name = setup.name;
    scene.generator = std::string(to_string(setup.spec.generator));
    scene.primitives = static_cast<int>(ctx.truth().size());
    const fs::path scene_dir = write ? fs::path(opt.output_dir) / setup.name : fs::path();
    if (write) {
      fs::create_directories(scene_dir);
      PointCloud centers;
      for (const auto& g : ctx.truth().gaussians) centers.add(g.mean, g.color);
      write_point_cloud_ply(centers, (scene_dir / "scene_centers.ply").string());
    }

    for (const auto& method : cfg.methods) {
      MethodOutcome m;
      m.method = method;
      scene.methods.push_back(std::move(m));
    }

    for (int split = 0; split < cfg.test_splits; ++split) {
      const auto test_idx = test_split(ctx.ring().size(), cfg.n_test, cfg.seed, split);
      std::vector<CameraPose> test_poses;
      std::vector<Candidate> pool;
      for (std::size_t i = 0, t = 0; i < ctx.ring().size(); ++i) {
        if (t < test_idx.size() && static_cast<int>(i) == test_idx[t]) {
          test_poses.push_back(ctx.ring()[i].pose);
          ++t;
        } else {
          pool.push_back(ctx.ring()[i]);
        }
      }
      const CandidateSet cands = setup.continuous
                                     ? CandidateSet::box(setup.box_min, setup.box_max, setup.ring.center)
                                     : CandidateSet::from_poses(pool);

      for (auto& outcome : scene.methods) {
        const std::string& method = outcome.method;
        say(setup.name + " split " + std::to_string(split) + ": " + method);
        detail::RunClock clock;
        SplitOutcome so;
        so.split = split;
        so.test_ids = test_idx;
        const std::uint64_t run_seed = detail::mix_seed(cfg.seed, 0x5eedULL + static_cast<std::uint64_t>(split));
        try {
          std::vector<SelectionRun> runs;
          if (method == "active") {
            runs.push_back(run_active(ctx.oracle(), cands, ctx.grid(), cfg.budget, run_seed, cfg.active));
          } else if (method == "passive-random") {
            std::vector<std::uint64_t> seeds;
            for (auto s : cfg.random_seeds) seeds.push_back(detail::mix_seed(s, static_cast<std::uint64_t>(split)));
            runs = run_passive_random(ctx.oracle(), cands, ctx.grid(), cfg.budget, seeds, cfg.active.normalizer);
          } else if (method == "passive-standard") {
            runs.push_back(run_passive_standard(ctx.oracle(), cands, ctx.grid(), cfg.budget, cfg.active.normalizer));
          } else {
            runs.push_back(run_fvs(cands, ctx.grid(), ctx.oracle(), cfg.budget, run_seed, cfg.active.direction_weight,
                                   cfg.active.normalizer));
          }

          // Best of several runs by final PSNR; ties keep the earlier run.
          std::size_t best = 0;
          std::vector<SceneContext::Quality> finals;
          for (std::size_t r = 0; r < runs.size(); ++r) {
            finals.push_back(ctx.evaluate(runs[r].poses(), test_poses));
            if (finals[r].psnr > finals[best].psnr) best = r;
          }
          const SelectionRun& chosen = runs[best];
          if (runs.size() > 1) {
            double mean = 0.0;
            for (std::size_t r = 0; r < runs.size(); ++r) {
              so.seed_final_r_q.push_back(runs[r].final_value().r_q);
              so.seed_psnr.push_back(finals[r].psnr);
              mean += runs[r].final_value().r_q;
            }
            so.mean_final_r_q = mean / static_cast<double>(runs.size());
            so.best_seed_index = static_cast<int>(best);
          } else {
            so.mean_final_r_q = chosen.final_value().r_q;
          }
          so.chosen_ids = chosen.ids();
          so.final_r_q = chosen.final_value().r_q;
          so.final_density = chosen.final_value().density;
          so.final_occupancy = chosen.final_value().occupancy;
          so.psnr = finals[best].psnr;
          so.ssim = finals[best].ssim;
          so.iterations_to_95 = iterations_to_fraction(chosen);

          const auto poses = chosen.poses();
          for (int k : report.trace_iterations) {
            TracePoint tp;
            tp.iteration = k;
            tp.slot = chosen.chosen[static_cast<std::size_t>(k) + 1].slot;
            tp.r_q = chosen.chosen[static_cast<std::size_t>(k) + 1].value.r_q;
            if (k == cfg.budget) {
              tp.psnr = so.psnr;
              tp.ssim = so.ssim;
            } else {
              const std::vector<CameraPose> prefix(poses.begin(), poses.begin() + k + 2);
              const auto q = ctx.evaluate(prefix, test_poses);
              tp.psnr = q.psnr;
              tp.ssim = q.ssim;
            }
            so.trace.push_back(tp);
          }

          if (write) {
            for (std::size_t r = 0; r < runs.size(); ++r) {
              std::string file = method + "_split" + std::to_string(split);
              if (runs.size() > 1) file += "_seed" + std::to_string(r);
              detail::write_csv_file(runs[r], scene_dir / (file + ".csv"));
            }
          }
        } catch (const IoFailure&) {
          throw;
        } catch (const std::exception& e) {
          so.error = e.what();
        }
        so.wall_time = clock.seconds();
        outcome.wall_time += so.wall_time;
        outcome.splits.push_back(std::move(so));
      }
    }

    for (auto& m : scene.methods) {
      std::vector<double> rq, mean_rq, ps, ss, it;
      for (const auto& s : m.splits) {
        if (s.error) continue;
        rq.push_back(s.final_r_q);
        mean_rq.push_back(s.mean_final_r_q);
        ps.push_back(s.psnr);
        ss.push_back(s.ssim);
        it.push_back(s.iterations_to_95);
      }
      m.median_final_r_q = median(rq);
      m.median_mean_final_r_q = median(mean_rq);
      m.median_psnr = median(ps);
      m.median_ssim = median(ss);
      m.median_iterations_to_95 = median(it);
      for (std::size_t t = 0; t < report.trace_iterations.size(); ++t) {
        std::vector<double> r, p, s;
        for (const auto& sp : m.splits) {
          if (sp.error) continue;
          r.push_back(sp.trace[t].r_q);
          p.push_back(sp.trace[t].psnr);
          s.push_back(sp.trace[t].ssim);
        }
        TracePoint tp;
        tp.iteration = report.trace_iterations[t];
        tp.slot = tp.iteration + 1;
        tp.r_q = median(r);
        tp.psnr = median(p);
        tp.ssim = median(s);
        m.median_trace.push_back(tp);
      }
    }
    report.scenes.push_back(std::move(scene));
  }
  report.wall_time = total_clock.seconds();
  if (write) write_report(report, (fs::path(opt.output_dir) / "report.json").string());
  return report;
}

/// Per-metric CSV series (slot plus one column per method) for each scene: one file per test
/// split and one for the medians over splits. Returns the written paths.
inline std::vector<std::string> emit_trace_plots(const RunReport& report, const std::string& outdir) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw IoFailure("cannot create '" + outdir + "': " + ec.message());
  if (report.trace_iterations.empty()) throw IoFailure("report has no traces");

  const std::pair<const char*, double TracePoint::*> metrics[] = {
      {"r_q", &TracePoint::r_q}, {"psnr", &TracePoint::psnr}, {"ssim", &TracePoint::ssim}};
  auto emit = [&](const SceneOutcome& scene, const std::string& tag,
                  const std::function<const std::vector<TracePoint>*(const MethodOutcome&)>& series) {
    for (const auto& [metric, field] : metrics) {
      const fs::path path = fs::path(outdir) / (scene.name + "_" + tag + "_" + metric + ".csv");
      std::ofstream f(path);
      if (!f) throw IoFailure("cannot open '" + path.string() + "' for writing");
      f << "slot";
      for (const auto& m : scene.methods) f << "," << m.method;
      f << "\n" << std::setprecision(17);
      for (std::size_t t = 0; t < report.trace_iterations.size(); ++t) {
        f << report.trace_iterations[t] + 1;
        for (const auto& m : scene.methods) {
          const auto* s = series(m);
          f << ",";
          if (s && t < s->size()) f << (*s)[t].*field;
        }
        f << "\n";
      }
      if (!f) throw IoFailure("write failed: " + path.string());
      written.push_back(path.string());
    }
  };
  for (const auto& scene : report.scenes) {
    emit(scene, "median", [](const MethodOutcome& m) { return &m.median_trace; });
    for (int split = 0; split < report.test_splits; ++split)
      emit(scene, "split" + std::to_string(split), [split](const MethodOutcome& m) -> const std::vector<TracePoint>* {
        for (const auto& s : m.splits)
          if (s.split == split && !s.error) return &s.trace;
        return nullptr;
      });
  }
  return written;
}

/// Reads an externally produced ASCII PLY cloud; every point is marked as externally sourced.
inline PointCloud ingest_external_cloud(const std::string& path) { return read_point_cloud_ply(path); }

}  // namespace activesplat
