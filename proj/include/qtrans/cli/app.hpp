#pragma once

// Command-line front end: solve, validate and matrix subcommands.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "qtrans/bounds.hpp"
#include "qtrans/cli/config.hpp"
#include "qtrans/error.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/measure.hpp"
#include "qtrans/oracle.hpp"
#include "qtrans/solver.hpp"

namespace qtrans::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kCertificationError = 3,
  kValidationFailure = 4,
};

namespace detail {

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, data.data(), data.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int k = 0; k < len; ++k) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[k]);
  return os.str();
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string time_label(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", t);
  return buf;
}

/// Lifted law in original workload units (undoes the speed normalization).
inline LiftedDistribution to_workload_units(const LiftedDistribution& m, double speed) {
  if (speed == 1.0) return m;
  LiftedDistribution out = m;
  out.grid = Grid(m.grid.delta * speed, m.grid.m_delta, m.grid.zero_state);
  return out;
}

/// Collects output files so their digests can go into the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << content;
    digests_[name] = sha256_hex(content);
  }

  const nlohmann::json& digests() const { return digests_; }
  const std::filesystem::path& path() const { return dir_; }

 private:
  std::filesystem::path dir_;
  nlohmann::json digests_ = nlohmann::json::object();
};

struct Options {
  std::string config_path;
  std::string out_dir;
  std::string bound_mode;
  unsigned threads = 0;
};

inline RunConfig prepare(const Options& opt) {
  RunConfig rc = load_config(opt.config_path);
  if (!opt.bound_mode.empty()) {
    const auto m = parse_bound_mode(opt.bound_mode);
    if (!m) throw ConfigError("--bound-mode: expected basic, refined or refined-worst");
    rc.mode = *m;
    rc.echo["bound_mode"] = to_string(*m);
  }
  if (!opt.out_dir.empty()) {
    rc.output_dir = opt.out_dir;
    rc.echo["output"] = opt.out_dir;
  }
  return rc;
}

inline void write_manifest(OutputDir& out, const RunConfig& rc, const std::string& command,
                           const nlohmann::json& extra) {
  nlohmann::json m;
  m["tool"] = "qtrans";
  m["command"] = command;
  m["config"] = rc.echo;
  m["outputs"] = out.digests();
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  const std::string text = m.dump(2) + "\n";
  std::ofstream f(out.path() / "manifest.json", std::ios::binary);
  f << text;
}

struct SolveOutcome {
  TransientResult result;
  double elapsed_seconds = 0.0;
};

inline SolveOutcome run_solver(const RunConfig& rc) {
  const auto t0 = std::chrono::steady_clock::now();
  const TransitionKernel kernel = TransitionKernel::build(rc.spec, rc.grid);
  SolveOptions so;
  so.horizon_steps = rc.horizon_steps;
  so.snapshot_steps = rc.snapshot_steps;
  so.mode = rc.mode;
  SolveOutcome out{solve(kernel, rc.initial, so), 0.0};
  out.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline void emit_solution(OutputDir& out, const RunConfig& rc, const TransientResult& res, std::ostream& os) {
  const double r = rc.speed;
  for (std::size_t s = 0; s < res.steps.size(); ++s) {
    std::ostringstream csv;
    write_density_csv(csv, to_workload_units(res.distributions[s], r));
    out.write("density_t" + time_label(res.times[s]) + ".csv", csv.str());
  }
  {
    std::ostringstream csv;
    BoundLedger scaled = res.ledger;
    if (r != 1.0) {
      scaled.b0 *= r;
      for (auto& st : scaled.steps) {
        st.e_jmpagg *= r;
        st.e_jmpcut *= r;
        st.e_trunc_weighted *= r;
        st.slack *= r;
      }
      for (double& c : scaled.cumulative) c *= r;
    }
    scaled.write_csv(csv, res.grid.delta);
    out.write("ledger.csv", csv.str());
  }

  os << "model: " << (rc.spec.kind == ProcessKind::mg1 ? "M/G/1 workload" : "spectrally negative queue")
     << (rc.spec.absorbing_zero ? " (absorbing zero)" : "") << ", lambda=" << rc.spec.lambda
     << ", job=" << rc.spec.job.family_name() << ", delta=" << rc.delta.value() << ", M=" << rc.m.value()
     << ", bound mode=" << to_string(res.mode) << (res.refinement_used || res.mode == BoundMode::basic ? "" : " (fell back to basic)")
     << "\n";
  if (!res.certified)
    os << "note: the absorbing-zero variant is not covered by the coupling argument; bounds are indicative only\n";
  char line[160];
  std::snprintf(line, sizeof line, "%12s %16s %14s %14s\n", "time", "W1 bound", "P(Q=0)", "mean");
  os << line;
  for (std::size_t s = 0; s < res.steps.size(); ++s) {
    const auto& d = res.distributions[s];
    std::snprintf(line, sizeof line, "%12.6g %16.8g %14.8g %14.8g\n", res.times[s],
                  r * res.bound_at_step(res.steps[s]), d.atom0, r * d.mean());
    os << line;
  }
  if (!rc.queries.empty()) {
    os << "certified tail queries P(Q > x):\n";
    for (const auto& q : rc.queries) {
      const TailBracket b = certified_tail(res, q.step, q.threshold / r, q.slack / r);
      std::snprintf(line, sizeof line, "  t=%-10.6g x=%-10.6g slack=%-8.4g  [%.6g, %.6g]\n", q.time,
                    q.threshold, q.slack, b.lower, b.upper);
      os << line;
    }
  }
}

inline int cmd_solve(const Options& opt, std::ostream& os) {
  const RunConfig rc = prepare(opt);
  const SolveOutcome so = run_solver(rc);
  OutputDir out(rc.output_dir);
  emit_solution(out, rc, so.result, os);
  write_manifest(out, rc, "solve",
                 {{"certified", so.result.certified},
                  {"final_bound", rc.speed * so.result.ledger.cumulative.back()},
                  {"elapsed_seconds", so.elapsed_seconds}});
  os << "wrote " << out.path().string() << " (" << so.elapsed_seconds << " s)\n";
  return kOk;
}

inline int cmd_validate(const Options& opt, std::ostream& os) {
  RunConfig rc = prepare(opt);
  const SolveOutcome so = run_solver(rc);
  const TransientResult& res = so.result;
  OutputDir out(rc.output_dir);
  emit_solution(out, rc, res, os);

  std::ostringstream csv;
  csv << "time,n_paths,empirical_wd,std_error,certified_bound,pass\n";
  bool all_pass = true;
  char line[200];
  os << "Monte Carlo validation (" << rc.validation.n_paths << " paths):\n";
  for (std::size_t v = 0; v < rc.validation.steps.size(); ++v) {
    const int k = rc.validation.steps[v];
    SimConfig sc;
    sc.spec = rc.spec;
    sc.mu0 = rc.initial;
    sc.t = k * rc.grid.delta;
    sc.n_paths = rc.validation.n_paths;
    sc.seed = rc.validation.seed + static_cast<std::uint64_t>(k);
    sc.threads = opt.threads;
    const auto samples = simulate(sc);
    const EmpiricalDistance ed =
        empirical_wasserstein(samples, res.snapshot(k), rc.validation.resamples, rc.validation.seed);
    const double bound = res.bound_at_step(k);
    const bool pass = ed.estimate <= bound + 3 * ed.std_error;
    all_pass = all_pass && pass;
    const double r = rc.speed;
    csv << fmt(rc.validation.times[v]) << "," << rc.validation.n_paths << "," << fmt(r * ed.estimate) << ","
        << fmt(r * ed.std_error) << "," << fmt(r * bound) << "," << (pass ? "pass" : "fail") << "\n";
    std::snprintf(line, sizeof line, "  t=%-10.6g empirical W1=%.6g (se %.2g)  bound=%.6g  %s\n",
                  rc.validation.times[v], r * ed.estimate, r * ed.std_error, r * bound, pass ? "PASS" : "FAIL");
    os << line;
  }
  out.write("validation.csv", csv.str());
  write_manifest(out, rc, "validate",
                 {{"certified", res.certified},
                  {"final_bound", rc.speed * res.ledger.cumulative.back()},
                  {"validation_passed", all_pass}});
  return all_pass ? kOk : kValidationFailure;
}

inline int cmd_matrix(const Options& opt, std::ostream& os) {
  const RunConfig rc = prepare(opt);
  if (rc.grid.m_delta > 2000)
    throw ConfigError(opt.config_path + ": grid too large for a dense matrix dump (M/delta = " +
                      std::to_string(rc.grid.m_delta) + " > 2000)");
  const TransitionKernel k = TransitionKernel::build(rc.spec, rc.grid);
  const std::vector<double> P = k.dense();
  const std::size_t n = rc.grid.size();
  std::string text;
  text.reserve(n * n * 8);
  text += "state";
  for (std::size_t j = 0; j < n; ++j) text += "," + std::to_string(j);
  text += "\n";
  for (std::size_t i = 0; i < n; ++i) {
    text += std::to_string(i);
    for (std::size_t j = 0; j < n; ++j) text += "," + fmt(P[i * n + j]);
    text += "\n";
  }
  OutputDir out(rc.output_dir);
  out.write("matrix.csv", text);
  write_manifest(out, rc, "matrix", {{"states", n}});
  os << "wrote " << n << "x" << n << " transition matrix to " << (out.path() / "matrix.csv").string() << "\n";
  return kOk;
}

}  // namespace detail

/// Entry point of the qtrans tool; returns the process exit code.
inline int run(int argc, const char* const* argv, std::ostream& os, std::ostream& es) {
  CLI::App app{"Transient distributions of M/G/1 and spectrally negative queues with certified Wasserstein bounds"};
  app.require_subcommand(1);
  detail::Options opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", opt.config_path, "JSON run configuration (or a run manifest)")->required();
    sub->add_option("--out", opt.out_dir, "output directory (overrides the config)");
    sub->add_option("--bound-mode", opt.bound_mode, "basic | refined | refined-worst");
    sub->add_option("--threads", opt.threads, "worker threads for simulation (0 = all cores)");
  };
  CLI::App* solve_cmd = app.add_subcommand("solve", "compute transient densities and the certified bound");
  CLI::App* validate_cmd = app.add_subcommand("validate", "solve, then compare against exact Monte Carlo paths");
  CLI::App* matrix_cmd = app.add_subcommand("matrix", "dump the dense transition matrix (small grids)");
  add_common(solve_cmd);
  add_common(validate_cmd);
  add_common(matrix_cmd);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    os << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    es << "error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    if (solve_cmd->parsed()) return detail::cmd_solve(opt, os);
    if (validate_cmd->parsed()) return detail::cmd_validate(opt, os);
    return detail::cmd_matrix(opt, os);
  } catch (const ConfigError& e) {
    es << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const CertificationError& e) {
    es << "error: " << e.what() << " (the M/G/1 Wasserstein bound needs a finite mean job size)\n";
    return kCertificationError;
  } catch (const DomainError& e) {
    es << "error: " << opt.config_path << ": " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace qtrans::cli
