#pragma once

#include "activesplat/errors.hpp"
#include "activesplat/geometry.hpp"
#include "activesplat/gp.hpp"
#include "activesplat/render.hpp"
#include "activesplat/scene.hpp"
#include "activesplat/selector.hpp"
#include "activesplat/splat.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace activesplat {

inline constexpr int kConfigSchemaVersion = 1;

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> m{"active", "passive-random", "passive-standard", "fvs"};
  return m;
}

/// Everything needed to build and evaluate one scene.
struct SceneSetup {
  std::string name;
  SceneSpec spec;
  RingSpec ring;
  std::array<int, 3> grid_resolution{16, 16, 16};
  CameraIntrinsics intrinsics;
  int min_observing_views = 2;
  bool occlusion = true;
  double dropout = 0.0;
  double occluder_scale = 1.0;
  /// Continuous candidates: position box instead of the ring pool (held-out views still come from the ring).
  bool continuous = false;
  Vec3 box_min = Vec3::Constant(-1.0);
  Vec3 box_max = Vec3::Constant(1.0);
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  int budget = 20;
  int n_test = 10;
  int test_splits = 3;
  int trace_stride = 5;
  std::vector<std::string> methods = known_methods();
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> random_seeds{1, 2, 3, 4, 5};
  std::string output_dir = "out";
  ActiveConfig active;
  TrainConfig train;
  SplatInitConfig init;
  std::vector<SceneSetup> scenes;
  /// Canonical key=value dump of every resolved setting, used for hashing.
  std::string canonical;

  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  bool has_method(std::string_view m) const {
    for (const auto& x : methods)
      if (x == m) return true;
    return false;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct RawEntry {
  std::string value;
  std::size_t line = 0;
};
using RawSection = std::map<std::string, RawEntry>;

/// Typed view over one section with line-aware errors and unknown-key detection.
class KeyReader {
public:
  KeyReader(const RawSection& own, const RawSection* fallback, std::string where)
      : own_(own), fallback_(fallback), where_(std::move(where)) {}

  const RawEntry* find(const std::string& key) {
    used_.insert(key);
    if (auto it = own_.find(key); it != own_.end()) return &it->second;
    if (fallback_)
      if (auto it = fallback_->find(key); it != fallback_->end()) return &it->second;
    return nullptr;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what, std::size_t line) const {
    throw ConfigInvalid(where_ + ": '" + key + "' " + what + (line ? " (line " + std::to_string(line) + ")" : ""));
  }

  double number(const std::string& key, double def) {
    const auto* e = find(key);
    if (!e) return def;
    double v = 0.0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) fail(key, "must be a number", e->line);
    return v;
  }

  long long integer(const std::string& key, long long def) {
    const auto* e = find(key);
    if (!e) return def;
    long long v = 0;
    const auto& s = e->value;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail(key, "must be an integer", e->line);
    return v;
  }

  bool boolean(const std::string& key, bool def) {
    const auto* e = find(key);
    if (!e) return def;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    fail(key, "must be true or false", e->line);
  }

  std::string text(const std::string& key, const std::string& def) {
    const auto* e = find(key);
    return e ? e->value : def;
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> def, std::size_t count) {
    const auto* e = find(key);
    if (!e) return def;
    std::vector<double> out;
    for (const auto& tok : split_list(e->value)) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size()) fail(key, "must be a list of numbers", e->line);
      out.push_back(v);
    }
    if (count && out.size() != count) fail(key, "needs exactly " + std::to_string(count) + " values", e->line);
    return out;
  }

  Vec3 vec3(const std::string& key, const Vec3& def) {
    const auto v = numbers(key, {def.x(), def.y(), def.z()}, 3);
    return Vec3(v[0], v[1], v[2]);
  }

  std::pair<double, double> range(const std::string& key, std::pair<double, double> def) {
    const auto v = numbers(key, {def.first, def.second}, 2);
    if (!(v[0] > 0.0 && v[0] <= v[1])) fail(key, "must be 0 < lo <= hi", find(key)->line);
    return {v[0], v[1]};
  }

  void reject_unknown() const {
    for (const auto& [k, e] : own_)
      if (!used_.count(k)) throw ConfigInvalid(where_ + ": unknown key '" + k + "' (line " + std::to_string(e.line) + ")");
  }

private:
  const RawSection& own_;
  const RawSection* fallback_;
  std::string where_;
  std::set<std::string> used_;
};

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline SceneSetup read_scene(KeyReader& r, const std::string& name, std::ostringstream& canon) {
  SceneSetup s;
  s.name = name;
  const std::string gen = r.text("generator", "clustered");
  const auto g = parse_generator(gen);
  if (!g) r.fail("generator", "must be clustered, shell or indoor-box", r.find("generator")->line);
  s.spec.generator = *g;
  s.spec.seed = static_cast<std::uint64_t>(r.integer("scene_seed", 1));
  s.spec.n_primitives = static_cast<int>(r.integer("n_primitives", 2000));
  s.spec.bbox_min = r.vec3("bbox_min", Vec3::Constant(-1.0));
  s.spec.bbox_max = r.vec3("bbox_max", Vec3::Constant(1.0));
  std::tie(s.spec.min_scale, s.spec.max_scale) = r.range("scale_range", {0.02, 0.06});
  s.spec.clusters = static_cast<int>(r.integer("clusters", 6));
  s.spec.background = r.vec3("background", Vec3::Zero());
  if (s.spec.n_primitives < 0) r.fail("n_primitives", "must be >= 0", 0);
  if (!(s.spec.bbox_min.array() < s.spec.bbox_max.array()).all()) r.fail("bbox_min", "must be < bbox_max", 0);
  if ((s.spec.background.array() < 0.0).any() || (s.spec.background.array() > 1.0).any())
    r.fail("background", "must be in [0,1]", 0);

  const auto res = r.numbers("grid_resolution", {16, 16, 16}, 3);
  for (int i = 0; i < 3; ++i) {
    if (res[i] < 1 || res[i] != std::floor(res[i])) r.fail("grid_resolution", "must be positive integers", 0);
    s.grid_resolution[i] = static_cast<int>(res[i]);
  }

  const int w = static_cast<int>(r.integer("image_width", 64));
  const int h = static_cast<int>(r.integer("image_height", 64));
  const double fov = r.number("fov_deg", 40.0);
  const double near_plane = r.number("near", 0.01);
  const double far_plane = r.number("far", 100.0);
  if (w < 1 || h < 1) r.fail("image_width", "image size must be positive", 0);
  if (!(fov > 0.0 && fov < 180.0)) r.fail("fov_deg", "must be in (0, 180)", 0);
  if (!(near_plane > 0.0 && near_plane < far_plane)) r.fail("near", "must satisfy 0 < near < far", 0);
  s.intrinsics = CameraIntrinsics::from_fov(w, h, fov * std::numbers::pi / 180.0, near_plane, far_plane);

  s.ring.center = r.vec3("ring_center", s.spec.center());
  s.ring.radius = r.number("ring_radius", 3.0);
  s.ring.height = r.number("ring_height", 0.0);
  s.ring.count = static_cast<int>(r.integer("ring_count", 120));
  s.ring.azimuth_jitter = r.number("ring_azimuth_jitter", 0.0);
  s.ring.radius_jitter = r.number("ring_radius_jitter", 0.0);
  s.ring.height_jitter = r.number("ring_height_jitter", 0.0);
  s.ring.target_jitter = r.number("ring_target_jitter", 0.0);
  s.ring.outward = r.boolean("ring_outward", false);
  s.ring.seed = static_cast<std::uint64_t>(r.integer("ring_seed", 7));
  if (s.ring.count < 2) r.fail("ring_count", "must be >= 2", 0);
  if (!(s.ring.radius > 0.0)) r.fail("ring_radius", "must be positive", 0);

  const std::string cands = r.text("candidates", "ring");
  if (cands != "ring" && cands != "box") r.fail("candidates", "must be ring or box", r.find("candidates")->line);
  s.continuous = cands == "box";
  s.box_min = r.vec3("box_min", s.spec.bbox_min);
  s.box_max = r.vec3("box_max", s.spec.bbox_max);
  if (!(s.box_min.array() < s.box_max.array()).all()) r.fail("box_min", "must be < box_max", 0);

  s.min_observing_views = static_cast<int>(r.integer("min_observing_views", 2));
  s.occlusion = r.boolean("occlusion", true);
  s.dropout = r.number("dropout", 0.0);
  s.occluder_scale = r.number("occluder_scale", 1.0);
  if (s.min_observing_views < 1) r.fail("min_observing_views", "must be >= 1", 0);
  if (!(s.dropout >= 0.0 && s.dropout < 1.0)) r.fail("dropout", "must be in [0,1)", 0);

  canon << "[" << name << "]\ngenerator=" << to_string(s.spec.generator) << "\nscene_seed=" << s.spec.seed
        << "\nn_primitives=" << s.spec.n_primitives << "\nbbox=" << s.spec.bbox_min.transpose() << " "
        << s.spec.bbox_max.transpose() << "\nscale_range=" << fmt(s.spec.min_scale) << " " << fmt(s.spec.max_scale)
        << "\nclusters=" << s.spec.clusters << "\nbackground=" << s.spec.background.transpose()
        << "\ngrid=" << res[0] << " " << res[1] << " " << res[2] << "\nimage=" << w << "x" << h
        << "\nfov=" << fmt(fov) << "\nnear_far=" << fmt(near_plane) << " " << fmt(far_plane)
        << "\nring=" << s.ring.center.transpose() << " " << fmt(s.ring.radius) << " " << fmt(s.ring.height) << " "
        << s.ring.count << " " << fmt(s.ring.azimuth_jitter) << " " << fmt(s.ring.radius_jitter) << " "
        << fmt(s.ring.height_jitter) << " " << fmt(s.ring.target_jitter) << " " << s.ring.outward << " "
        << s.ring.seed << "\ncandidates=" << cands << " " << s.box_min.transpose() << " " << s.box_max.transpose()
        << "\noracle=" << s.min_observing_views << " " << s.occlusion << " " << fmt(s.dropout) << " "
        << fmt(s.occluder_scale) << "\n";
  return s;
}

/// Keys valid in scene sections; they may also appear globally as defaults for every scene.
inline const std::set<std::string>& scene_keys() {
  static const std::set<std::string> k{
      "generator",        "scene_seed",       "n_primitives",        "bbox_min",           "bbox_max",
      "scale_range",      "clusters",         "background",          "grid_resolution",    "image_width",
      "image_height",     "fov_deg",          "near",                "far",                "ring_center",
      "ring_radius",      "ring_height",      "ring_count",          "ring_azimuth_jitter", "ring_radius_jitter",
      "ring_height_jitter", "ring_target_jitter", "ring_outward",    "ring_seed",          "candidates",
      "box_min",          "box_max",          "min_observing_views", "occlusion",          "dropout",
      "occluder_scale"};
  return k;
}

}  // namespace detail

/// Parses the key = value experiment format. Lines are `key = value`; `#` starts a comment;
/// `[scene NAME]` opens a scene section whose keys override the global scene defaults.
/// Throws ConfigInvalid naming the offending key or violated constraint.
inline ExperimentConfig parse_experiment_config(std::istream& in) {
  using detail::RawSection;
  RawSection global;
  std::vector<std::pair<std::string, RawSection>> sections;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigInvalid("line " + std::to_string(ln) + ": unterminated section header");
      const auto inner = detail::split_list(t.substr(1, t.size() - 2));
      if (inner.size() != 2 || inner[0] != "scene")
        throw ConfigInvalid("line " + std::to_string(ln) + ": section must be [scene NAME]");
      for (const auto& s : sections)
        if (s.first == inner[1]) throw ConfigInvalid("line " + std::to_string(ln) + ": duplicate scene '" + inner[1] + "'");
      sections.push_back({inner[1], {}});
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigInvalid("line " + std::to_string(ln) + ": expected key = value");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigInvalid("line " + std::to_string(ln) + ": empty key");
    RawSection& target = sections.empty() ? global : sections.back().second;
    if (target.count(key)) throw ConfigInvalid("line " + std::to_string(ln) + ": duplicate key '" + key + "'");
    if (!sections.empty() && !detail::scene_keys().count(key))
      throw ConfigInvalid("line " + std::to_string(ln) + ": key '" + key + "' is not allowed in a scene section");
    target[key] = {value, ln};
  }

  ExperimentConfig cfg;
  std::ostringstream canon;
  detail::KeyReader g(global, nullptr, "config");
  if (!g.find("schema_version")) throw ConfigInvalid("config: missing 'schema_version'");
  cfg.schema_version = static_cast<int>(g.integer("schema_version", 0));
  if (cfg.schema_version != kConfigSchemaVersion)
    throw ConfigInvalid("config: unsupported schema_version " + std::to_string(cfg.schema_version));

  cfg.budget = static_cast<int>(g.integer("budget", 20));
  cfg.n_test = static_cast<int>(g.integer("n_test", 10));
  cfg.test_splits = static_cast<int>(g.integer("test_splits", 3));
  cfg.trace_stride = static_cast<int>(g.integer("trace_stride", 5));
  cfg.seed = static_cast<std::uint64_t>(g.integer("seed", 1));
  cfg.output_dir = g.text("output_dir", "out");
  if (cfg.budget < 1) throw ConfigInvalid("config: budget T must be >= 1");
  if (cfg.n_test < 1) throw ConfigInvalid("config: n_test must be >= 1");
  if (cfg.test_splits < 1) throw ConfigInvalid("config: test_splits must be >= 1");
  if (cfg.trace_stride < 1) throw ConfigInvalid("config: trace_stride must be >= 1");

  if (const auto* e = g.find("methods")) {
    cfg.methods = detail::split_list(e->value);
    if (cfg.methods.empty()) throw ConfigInvalid("config: methods must not be empty");
    std::set<std::string> seen;
    for (const auto& m : cfg.methods) {
      if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
        throw ConfigInvalid("config: unknown method '" + m + "'");
      if (!seen.insert(m).second) throw ConfigInvalid("config: method '" + m + "' listed twice");
    }
  }
  {
    const auto rs = g.numbers("random_seeds", {1, 2, 3, 4, 5}, 0);
    if (rs.empty()) throw ConfigInvalid("config: random_seeds must not be empty");
    cfg.random_seeds.clear();
    for (double v : rs) {
      if (v < 0 || v != std::floor(v)) throw ConfigInvalid("config: random_seeds must be nonnegative integers");
      cfg.random_seeds.push_back(static_cast<std::uint64_t>(v));
    }
  }

  auto& a = cfg.active;
  a.direction_weight = g.number("direction_weight", 0.0);
  a.standardize = g.boolean("standardize", false);
  a.refit_every = static_cast<int>(g.integer("refit_every", 1));
  a.noise_sigma = g.number("noise_sigma", 0.0);
  a.normalizer = g.number("normalizer", 1.0);
  a.fit.restarts = static_cast<int>(g.integer("fit_restarts", 4));
  a.fit.max_evals = static_cast<int>(g.integer("fit_max_evals", 300));
  a.fit.bounds = KernelBounds::for_scene(g.number("scene_diameter", 10.0));
  std::tie(a.fit.bounds.lengthscale_lo, a.fit.bounds.lengthscale_hi) =
      g.range("lengthscale_bounds", {a.fit.bounds.lengthscale_lo, a.fit.bounds.lengthscale_hi});
  std::tie(a.fit.bounds.variance_lo, a.fit.bounds.variance_hi) =
      g.range("variance_bounds", {a.fit.bounds.variance_lo, a.fit.bounds.variance_hi});
  std::tie(a.fit.bounds.time_lo, a.fit.bounds.time_hi) =
      g.range("time_lengthscale_bounds", {a.fit.bounds.time_lo, a.fit.bounds.time_hi});
  std::tie(a.fit.bounds.noise_lo, a.fit.bounds.noise_hi) =
      g.range("noise_bounds", {a.fit.bounds.noise_lo, a.fit.bounds.noise_hi});
  a.continuous_starts = static_cast<int>(g.integer("continuous_starts", 32));
  if (a.refit_every < 1) throw ConfigInvalid("config: refit_every must be >= 1");
  if (a.noise_sigma < 0.0) throw ConfigInvalid("config: noise_sigma must be >= 0");
  if (!(a.normalizer > 0.0)) throw ConfigInvalid("config: normalizer must be positive");
  if (a.fit.restarts < 0 || a.fit.max_evals < 1) throw ConfigInvalid("config: fit_restarts/fit_max_evals out of range");

  cfg.train.iterations = static_cast<int>(g.integer("train_iterations", 60));
  cfg.train.learning_rate = g.number("learning_rate", 1.0);
  cfg.train.train_opacity = g.boolean("train_opacity", true);
  cfg.train.train_color = g.boolean("train_color", true);
  cfg.init.initial_opacity = g.number("initial_opacity", 0.1);
  if (cfg.train.iterations < 0) throw ConfigInvalid("config: train_iterations must be >= 0");
  if (!(cfg.train.learning_rate > 0.0)) throw ConfigInvalid("config: learning_rate must be positive");
  if (!(cfg.init.initial_opacity > 0.0 && cfg.init.initial_opacity <= 1.0))
    throw ConfigInvalid("config: initial_opacity must be in (0,1]");

  canon << "schema_version=" << cfg.schema_version << "\nbudget=" << cfg.budget << "\nn_test=" << cfg.n_test
        << "\ntest_splits=" << cfg.test_splits << "\ntrace_stride=" << cfg.trace_stride << "\nseed=" << cfg.seed
        << "\nmethods=";
  for (const auto& m : cfg.methods) canon << m << ",";
  canon << "\nrandom_seeds=";
  for (auto s : cfg.random_seeds) canon << s << ",";
  canon << "\nactive=" << detail::fmt(a.direction_weight) << " " << a.standardize << " " << a.refit_every << " "
        << detail::fmt(a.noise_sigma) << " " << detail::fmt(a.normalizer) << " " << a.fit.restarts << " "
        << a.fit.max_evals << " " << a.continuous_starts << "\nbounds=" << detail::fmt(a.fit.bounds.lengthscale_lo)
        << " " << detail::fmt(a.fit.bounds.lengthscale_hi) << " " << detail::fmt(a.fit.bounds.variance_lo) << " "
        << detail::fmt(a.fit.bounds.variance_hi) << " " << detail::fmt(a.fit.bounds.time_lo) << " "
        << detail::fmt(a.fit.bounds.time_hi) << " " << detail::fmt(a.fit.bounds.noise_lo) << " "
        << detail::fmt(a.fit.bounds.noise_hi) << "\ntrain=" << cfg.train.iterations << " "
        << detail::fmt(cfg.train.learning_rate) << " " << cfg.train.train_opacity << " " << cfg.train.train_color
        << " " << detail::fmt(cfg.init.initial_opacity) << "\n";

  // Global scene keys act as defaults; with no sections the globals describe a single scene.
  RawSection global_scene;
  for (const auto& [k, v] : global)
    if (detail::scene_keys().count(k)) global_scene[k] = v;
  for (const auto& [k, v] : global_scene) g.find(k);
  g.reject_unknown();

  if (sections.empty()) sections.push_back({"scene", {}});
  for (const auto& [name, raw] : sections) {
    detail::KeyReader r(raw, &global_scene, "scene '" + name + "'");
    SceneSetup s = detail::read_scene(r, name, canon);
    r.reject_unknown();
    if (!s.continuous) {
      const int need = cfg.budget + 2 + cfg.n_test;
      if (need > s.ring.count)
        throw ConfigInvalid("scene '" + name + "': T + 2 + n_test = " + std::to_string(need) +
                            " exceeds the candidate pool size " + std::to_string(s.ring.count));
    } else {
      if (cfg.n_test > s.ring.count)
        throw ConfigInvalid("scene '" + name + "': n_test exceeds the held-out ring size");
      for (const auto& m : cfg.methods)
        if (m != "active")
          throw ConfigInvalid("scene '" + name + "': method '" + m + "' needs finite (ring) candidates");
    }
    cfg.scenes.push_back(std::move(s));
  }
  cfg.canonical = canon.str();
  return cfg;
}

inline ExperimentConfig parse_experiment_config(const std::string& text) {
  std::istringstream is(text);
  return parse_experiment_config(is);
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoFailure("cannot open config '" + path + "'");
  return parse_experiment_config(f);
}

}  // namespace activesplat
