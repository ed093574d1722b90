#include "activesplat/experiment.hpp"
#include "activesplat/ply.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

using namespace activesplat;

namespace {

int run_command(const std::string& config_path, const std::string& out_override, bool quiet) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  ExperimentOptions opt;
  opt.output_dir = out_override.empty() ? cfg.output_dir : out_override;
  if (!quiet) opt.progress = [](const std::string& s) { std::cerr << "[run] " << s << "\n"; };
  const RunReport report = run_experiment(cfg, opt);

  std::cout << "config " << report.config_hash << "  (" << report.protocol_note << ")\n";
  for (const auto& scene : report.scenes) {
    std::cout << scene.name << " [" << scene.generator << ", " << scene.primitives << " primitives]\n";
    for (const auto& m : scene.methods) {
      std::cout << "  " << std::left << std::setw(17) << m.method << std::right << std::fixed
                << " r_q " << std::setw(10) << std::setprecision(2) << m.median_final_r_q
                << "  PSNR " << std::setw(6) << std::setprecision(2) << m.median_psnr << "  SSIM "
                << std::setprecision(4) << m.median_ssim << "  it95 " << std::setprecision(1)
                << m.median_iterations_to_95 << "\n";
      for (const auto& s : m.splits)
        if (s.error) std::cout << "    split " << s.split << " failed: " << *s.error << "\n";
    }
  }
  std::cout << "report: " << (std::filesystem::path(opt.output_dir) / "report.json").string() << "\n";
  return 0;
}

int plot_command(const std::string& report_path, const std::string& outdir) {
  const RunReport report = read_report(report_path);
  for (const auto& f : emit_trace_plots(report, outdir)) std::cout << f << "\n";
  return 0;
}

int ingest_command(const std::string& ply_path, const std::string& splat_out) {
  const PointCloud pc = ingest_external_cloud(ply_path);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  for (const auto& p : pc.points) {
    lo = lo.cwiseMin(p.position);
    hi = hi.cwiseMax(p.position);
  }
  std::cout << pc.size() << " points";
  if (!pc.empty()) std::cout << ", bounds [" << lo.transpose() << "] .. [" << hi.transpose() << "]";
  std::cout << "\n";
  if (!splat_out.empty()) {
    write_splat_ply(init_from_cloud(pc), splat_out);
    std::cout << "initial splat model: " << splat_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"View selection for splat initialization: experiments, trace export and cloud ingestion"};
  app.require_subcommand(1);

  std::string config_path, out_override, report_path, plot_dir, ply_path, splat_out;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run every method of an experiment config and write report.json");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("-o,--out", out_override, "Output directory (overrides output_dir)");
  run->add_flag("-q,--quiet", quiet, "No progress messages");

  auto* plot = app.add_subcommand("plot", "Write per-metric trace CSVs from a report");
  plot->add_option("report", report_path, "report.json")->required();
  plot->add_option("outdir", plot_dir, "Output directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Read an external ASCII PLY point cloud");
  ingest->add_option("ply", ply_path, "Point cloud (x y z red green blue)")->required();
  ingest->add_option("--splat-out", splat_out, "Write the initialized splat model as PLY");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_override, quiet);
    if (*plot) return plot_command(report_path, plot_dir);
    if (*ingest) return ingest_command(ply_path, splat_out);
  } catch (const ConfigInvalid& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const IoFailure& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 3;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
