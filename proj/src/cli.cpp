#include "couplevar/cli.hpp"

#include "couplevar/altmin.hpp"
#include "couplevar/bregman.hpp"
#include "couplevar/edges.hpp"
#include "couplevar/imaging.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace couplevar::cli {

namespace {

std::string num(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const char* boolean(bool b) { return b ? "true" : "false"; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct SolverOptions {
  int order = 1;
  double alpha = 100;
  double beta = 40;
  double epsilon = 1e-6;
  double lambda = 0;
  double tol = 1e-6;
  int max_iter = 10000;
  int sweeps = 10;
  std::string mode = "coupled";
  bool channels_parallel = false;
  double noise_sigma = 0;
  std::uint64_t seed = 0;
};

void add_solver_options(CLI::App* app, SolverOptions& o, bool with_mode = true) {
  app->add_option("--order", o.order, "Model order (1 or 2)")->check(CLI::IsMember({1, 2}));
  app->add_option("--alpha", o.alpha, "Smoothness weight alpha");
  app->add_option("--beta", o.beta, "Coupling weight beta");
  app->add_option("--epsilon", o.epsilon, "Penaliser regularisation epsilon");
  app->add_option("--lambda", o.lambda, "Split Bregman penalty (0 selects order * beta)");
  app->add_option("--tol", o.tol, "Relative residual tolerance");
  app->add_option("--max-iter", o.max_iter, "Outer iteration cap");
  app->add_option("--sweeps", o.sweeps, "Jacobi sweeps per subproblem");
  if (with_mode) {
    app->add_option("--mode", o.mode, "Solver mode")->check(CLI::IsMember({"coupled", "tv", "quadratic", "altmin"}));
  }
  app->add_flag("--channels-parallel", o.channels_parallel, "Advance colour channels in parallel");
  app->add_option("--noise-sigma", o.noise_sigma, "Add Gaussian noise of this deviation to the input first");
  app->add_option("--seed", o.seed, "Noise seed");
}

SolverConfig<double> make_config(const SolverOptions& o) {
  SolverConfig<double> config;
  config.params.order = model_order_from_int(o.order);
  config.params.alpha = o.alpha;
  config.params.beta = o.beta;
  config.params.epsilon = o.epsilon;
  if (o.lambda != 0) config.lambda = o.lambda;
  config.tolerance = o.tol;
  config.max_iterations = o.max_iter;
  config.sweeps = o.sweeps;
  config.parallel_channels = o.channels_parallel;
  if (o.mode == "tv") config.mode = SolverMode::tv_limit;
  if (o.mode == "quadratic") config.mode = SolverMode::quadratic_coupling;
  config.validate();
  return config;
}

Image load_input(const std::string& path, const SolverOptions& o) {
  Image f = read_any(path);
  if (o.noise_sigma > 0) f = add_gaussian_noise(f, o.noise_sigma, o.seed);
  return f;
}

SolveResult<double> run_solver(const Image& f, const SolverOptions& o, const SolverConfig<double>& config) {
  return o.mode == "altmin" ? solve_altmin(f, config) : solve(f, config);
}

bool has_extension(const std::string& path, const char* ext) {
  return std::filesystem::path(path).extension() == ext;
}

std::string replace_extension(const std::string& path, const char* ext) {
  return std::filesystem::path(path).replace_extension(ext).string();
}

Grid channel_mean(const Image& img) {
  Grid g = img[0];
  for (Index c = 1; c < img.channels(); ++c) g += img[c];
  g *= 1.0 / static_cast<double>(img.channels());
  return g;
}

double time_to_tolerance(const ConvergenceTrace& trace, double tol) {
  for (const auto& e : trace) {
    if (e.relative_residual <= tol) return e.elapsed_ms;
  }
  return trace.empty() ? 0.0 : trace.back().elapsed_ms;
}

struct EdgeOptions {
  std::string detector = "coupling";
  double sigma = 2.0;
  double low = 0.80;
  double high = 0.95;
  bool absolute = false;
  int connectivity = 8;
};

HysteresisThresholds thresholds_of(const EdgeOptions& e) { return {e.low, e.high, !e.absolute}; }

Connectivity connectivity_of(const EdgeOptions& e) {
  return e.connectivity == 4 ? Connectivity::four : Connectivity::eight;
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  std::string config_path;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config") {
      if (k + 1 >= args.size()) throw CLI::ArgumentMismatch("--config requires a file");
      config_path = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      config_path = args[k].substr(9);
    } else {
      out.push_back(args[k]);
    }
  }
  if (config_path.empty()) return out;

  std::ifstream in(config_path);
  if (!in) throw IoError("cannot open config file " + config_path);
  auto given = [&out](const std::string& flag) {
    return std::any_of(out.begin(), out.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CLI::ConversionError("config line without '=': " + line);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (given(flag)) continue;
    if (value == "true") {
      out.push_back(flag);
    } else if (value != "false") {
      out.push_back(flag);
      out.push_back(value);
    }
  }
  return out;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupling-model denoising, segmentation and edge detection"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  app.footer("Exit codes: 0 success, 1 usage error, 2 I/O error, 3 not converged (output still written).\n"
             "Any subcommand accepts --config FILE with key=value lines; explicit flags take precedence.");

  // denoise
  SolverOptions dn;
  std::string dn_input, dn_output, dn_trace, dn_edges, dn_gt;
  auto* denoise = app.add_subcommand("denoise", "Denoise an image with a coupling model");
  denoise->add_option("--input", dn_input, "Input PGM/PPM/FGRID")->required();
  denoise->add_option("--output", dn_output, "Output image (PGM/PPM, or .fgrid for raw values)")->required();
  add_solver_options(denoise, dn);
  denoise->add_option("--trace", dn_trace, "CSV convergence trace");
  denoise->add_option("--edges", dn_edges, "Coupling-term edges: .fgrid strength or binary PGM");
  denoise->add_option("--gt", dn_gt, "Ground truth for MSE/PSNR");

  // edges
  SolverOptions ed;
  EdgeOptions eo;
  std::string ed_input, ed_output, ed_strength;
  auto* edges = app.add_subcommand("edges", "Edge set from the coupling term or the Canny baseline");
  edges->add_option("--input", ed_input, "Input PGM/PPM/FGRID")->required();
  edges->add_option("--output", ed_output, "Binary edge map (PGM)")->required();
  edges->add_option("--strength", ed_strength, "Edge strength map (FGRID); defaults to the output path with .fgrid");
  add_solver_options(edges, ed);
  edges->add_option("--detector", eo.detector, "Detector")->check(CLI::IsMember({"coupling", "canny"}));
  edges->add_option("--sigma", eo.sigma, "Canny presmoothing deviation");
  edges->add_option("--hyst-low", eo.low, "Low hysteresis threshold (quantile unless --hyst-absolute)");
  edges->add_option("--hyst-high", eo.high, "High hysteresis threshold (quantile unless --hyst-absolute)");
  edges->add_flag("--hyst-absolute", eo.absolute, "Interpret hysteresis thresholds as absolute strengths");
  edges->add_option("--connectivity", eo.connectivity, "Hysteresis connectivity")->check(CLI::IsMember({4, 8}));

  // bench
  SolverOptions bn;
  std::string bn_input, bn_out;
  double bn_budget = 20;
  auto* bench = app.add_subcommand("bench", "Compare split Bregman with alternating minimisation");
  bench->add_option("--input", bn_input, "Input PGM/PPM/FGRID")->required();
  bench->add_option("--out", bn_out, "CSV trace prefix (writes <prefix>_bregman.csv and <prefix>_altmin.csv)")->required();
  add_solver_options(bench, bn, false);
  bench->add_option("--altmin-budget", bn_budget,
                    "Stop the baseline after this multiple of the split Bregman time (0 = no limit)");

  // synth
  long sy_width = 256, sy_height = 256;
  std::string sy_spec = "affine", sy_output, sy_clean;
  double sy_sigma = 0;
  std::uint64_t sy_seed = 0;
  auto* synth = app.add_subcommand("synth", "Generate a piecewise-affine test image");
  synth->add_option("--width", sy_width, "Width");
  synth->add_option("--height", sy_height, "Height");
  synth->add_option("--spec", sy_spec, "Preset (step, twostep, affine), region string, or a file holding one");
  synth->add_option("--noise-sigma", sy_sigma, "Gaussian noise deviation");
  synth->add_option("--seed", sy_seed, "Noise seed");
  synth->add_option("--output", sy_output, "Output image (PGM or .fgrid)")->required();
  synth->add_option("--clean", sy_clean, "Also write the noise-free image here");

  // metrics
  std::string mt_a, mt_b;
  auto* metrics = app.add_subcommand("metrics", "MSE and PSNR between two images");
  metrics->add_option("--a", mt_a, "First image")->required();
  metrics->add_option("--b", mt_b, "Second image")->required();

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsageError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  }

  try {
    if (denoise->parsed()) {
      const SolverConfig<double> config = [&] {
        auto c = make_config(dn);
        c.record_trace = !dn_trace.empty();
        return c;
      }();
      const Image f = load_input(dn_input, dn);
      const SolveResult<double> result = run_solver(f, dn, config);
      write_any(result.u, dn_output);
      if (!dn_trace.empty()) write_trace_csv(result.trace, dn_trace);
      if (!dn_edges.empty()) {
        const Grid strength = edge_map(result.u, result.v);
        if (has_extension(dn_edges, ".fgrid")) {
          write_fgrid(Image(strength), dn_edges);
        } else {
          write_mask(hysteresis(strength, HysteresisThresholds{}), dn_edges);
        }
      }
      std::string mse_text = "na";
      if (!dn_gt.empty()) mse_text = num(mse(result.u, read_any(dn_gt)));
      out << "converged=" << boolean(result.converged) << " iters=" << result.iterations << " mse=" << mse_text
          << "\n";
      return result.converged ? kSuccess : kNotConverged;
    }

    if (edges->parsed()) {
      const Image f = load_input(ed_input, ed);
      const std::string strength_path = ed_strength.empty() ? replace_extension(ed_output, ".fgrid") : ed_strength;
      bool converged = true;
      int iterations = 0;
      Grid strength;
      BinaryMap mask;
      if (eo.detector == "canny") {
        CannyResult c = canny(channel_mean(f), eo.sigma, thresholds_of(eo), connectivity_of(eo));
        strength = std::move(c.strength);
        mask = std::move(c.edges);
      } else {
        const SolverConfig<double> config = make_config(ed);
        const SolveResult<double> result = run_solver(f, ed, config);
        converged = result.converged;
        iterations = result.iterations;
        strength = edge_map(result.u, result.v);
        mask = hysteresis(strength, thresholds_of(eo), connectivity_of(eo));
      }
      write_fgrid(Image(strength), strength_path);
      write_mask(mask, ed_output);
      out << "edges=" << mask.count() << " converged=" << boolean(converged) << " iters=" << iterations << "\n";
      return converged ? kSuccess : kNotConverged;
    }

    if (bench->parsed()) {
      SolverConfig<double> config = make_config(bn);
      config.record_trace = true;
      const Image f = load_input(bn_input, bn);
      const SolveResult<double> fast = solve(f, config);
      if (bn_budget > 0) config.time_limit_ms = bn_budget * std::max(fast.elapsed_ms, 1.0);
      const SolveResult<double> slow = solve_altmin(f, config);

      std::string stem = bn_out;
      if (has_extension(stem, ".csv")) stem = replace_extension(stem, "");
      write_trace_csv(fast.trace, stem + "_bregman.csv");
      write_trace_csv(slow.trace, stem + "_altmin.csv");

      const double t_fast = time_to_tolerance(fast.trace, config.tolerance);
      const double t_slow = time_to_tolerance(slow.trace, config.tolerance);
      out << "bregman converged=" << boolean(fast.converged) << " iters=" << fast.iterations
          << " rel_residual=" << num(fast.relative_residual) << " time_ms=" << num(t_fast) << "\n";
      out << "altmin converged=" << boolean(slow.converged) << " iters=" << slow.iterations
          << " rel_residual=" << num(slow.relative_residual) << " time_ms=" << num(t_slow) << "\n";
      out << "inner_cg tol=" << num(config.cg_tolerance) << " (relative to the initial inner residual, warm start)"
          << " max_iter=" << config.cg_max_iterations << "\n";
      out << "speedup=" << num(t_fast > 0 ? t_slow / t_fast : 0.0) << "\n";
      if (!slow.converged) out << "speedup_is_lower_bound=true\n";
      return fast.converged ? kSuccess : kNotConverged;
    }

    if (synth->parsed()) {
      std::string text = sy_spec;
      if (std::filesystem::is_regular_file(sy_spec)) {
        std::ifstream in(sy_spec);
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
      }
      const RegionSpec spec = parse_region_spec(text, sy_width, sy_height);
      const Image clean(synth_affine(sy_width, sy_height, spec, &err));
      if (!sy_clean.empty()) write_any(clean, sy_clean);
      write_any(add_gaussian_noise(clean, sy_sigma, sy_seed), sy_output);
      return kSuccess;
    }

    if (metrics->parsed()) {
      const Image a = read_any(mt_a);
      const Image b = read_any(mt_b);
      out << "mse=" << num(mse(a, b)) << " psnr=" << num(psnr(a, b)) << "\n";
      return kSuccess;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace couplevar::cli
