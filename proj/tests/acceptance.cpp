// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qtrans/qtrans.hpp"

using namespace qtrans;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ModelSpec uniform_model() { return {ProcessKind::mg1, 0.25, JobSize::uniform(1, 5), false}; }
ModelSpec erlang_model() { return {ProcessKind::mg1, 0.4, JobSize::erlang(6, 2.0), false}; }
ModelSpec pareto_model() { return {ProcessKind::spectrally_negative, 1.0 / 3, JobSize::pareto(1, 1.5), false}; }

TransientResult run(const ModelSpec& spec, double delta, double m, const GeneralMeasure& mu0, double t_end,
                    std::vector<double> snapshots = {}, BoundMode mode = BoundMode::refined) {
  SolveOptions o;
  o.horizon_steps = static_cast<int>(std::lround(t_end / delta));
  for (double t : snapshots) o.snapshot_steps.push_back(static_cast<int>(std::lround(t / delta)));
  o.mode = mode;
  return solve(spec, spec.grid(delta, static_cast<int>(std::lround(m / delta))), mu0, o);
}

double bound_without_trunc(const BoundLedger& l, std::size_t k) {
  double s = l.b0;
  for (std::size_t i = 0; i < k; ++i) s += l.steps[i].total() - l.steps[i].e_trunc_weighted;
  return s;
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string format(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Randomized {
  ModelSpec spec;
  double delta;
  int m_delta;
};

Randomized random_small(oracle::Rng& r, int max_states) {
  Randomized c;
  const bool sn = r.coin();
  c.spec = {sn ? ProcessKind::spectrally_negative : ProcessKind::mg1, r.uniform(0.05, 3.0), oracle::random_job(r),
            sn && r.integer(0, 3) == 0};
  c.delta = 1.0 / r.integer(2, 50);
  c.m_delta = r.integer(2, max_states);
  return c;
}

void criterion_1() {
  const auto [p, b0] = discretize_initial(GeneralMeasure::dirac(1), Grid(1.0 / 500, 25000, true));
  report(1, std::abs(b0 - 0.001) <= 1e-12 && p.p[500] == 1.0, format("b0 = %.17g", b0));
}

void criterion_2() {
  const auto t0 = Clock::now();
  const auto res = run(uniform_model(), 1.0 / 500, 50, GeneralMeasure::dirac(1), 30, {1, 5, 10});
  const double secs = seconds_since(t0);
  const auto& c = res.ledger.cumulative;
  const double d = 1.0 / 500;
  // Least-squares line through (k delta, b_k), k = 0..15000.
  double st = 0, sb = 0, stt = 0, stb = 0;
  const double n = static_cast<double>(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double t = k * d;
    st += t;
    sb += c[k];
    stt += t * t;
    stb += t * c[k];
  }
  const double slope = (n * stb - st * sb) / (n * stt - st * st);
  const double icpt = (sb - slope * st) / n;
  double worst = 0;
  for (std::size_t k = 0; k < c.size(); ++k) worst = std::max(worst, std::abs(c[k] - (icpt + slope * k * d)));
  const double b30 = c.back();
  const double rel = worst / b30;
  const bool pass = b30 >= 0.009 && b30 <= 0.015 && rel <= 0.05 && secs <= 600 && res.refinement_used;
  report(2, pass, format("b(30) = %.6g, linear-fit max residual / b(30) = %.3g, %.1f s", b30, rel, secs));
}

void criterion_3() {
  const auto t0 = Clock::now();
  const auto res = run(uniform_model(), 1.0 / 10, 50, GeneralMeasure::dirac(1), 30, {1, 5, 10});
  const double secs = seconds_since(t0);
  report(3, secs <= 5.0, format("delta = 1/10, t = 30: %.3f s, b(30) = %.6g", secs, res.ledger.cumulative.back()));
}

void criterion_4() {
  const auto t0 = Clock::now();
  const double d = 1.0 / 100;
  const auto res = run(erlang_model(), d, 20, GeneralMeasure::dirac(0), 10, {5});
  const double secs = seconds_since(t0);
  // Bound sampled every 0.5 time units over [5, 10]: increasing with
  // non-decreasing increments.
  std::vector<double> b;
  for (int k = 500; k <= 1000; k += 50) b.push_back(res.bound_at_step(k));
  bool convex = true, increasing = true;
  for (std::size_t i = 1; i < b.size(); ++i) increasing = increasing && b[i] > b[i - 1];
  for (std::size_t i = 2; i < b.size(); ++i) convex = convex && (b[i] - b[i - 1]) >= (b[i - 1] - b[i - 2]);
  report(4, secs <= 60 && convex && increasing,
         format("%.2f s, b(5) = %.6g, b(10) = %.6g, convex-increasing on [5,10]: ", secs, b.front(), b.back()) +
             (convex && increasing ? "yes" : "no"));
}

void criterion_5() {
  std::vector<double> b;
  for (int n : {50, 100, 200}) {
    const auto res = run(uniform_model(), 1.0 / n, 50, GeneralMeasure::dirac(1), 1);
    b.push_back(bound_without_trunc(res.ledger, static_cast<std::size_t>(n)));
  }
  const double f1 = b[0] / b[1], f2 = b[1] / b[2];
  const bool pass = f1 >= 1.7 && f1 <= 2.3 && f2 >= 1.7 && f2 <= 2.3;
  report(5, pass, format("b(1) = %.4g, %.4g, %.4g; factors %.3f", b[0], b[1], b[2], f1) + format(", %.3f", f2));
}

void criterion_6() {
  const auto t0 = Clock::now();
  struct Case {
    const char* name;
    ModelSpec spec;
    double delta, m;
    GeneralMeasure mu0;
    double t;
  };
  const Case cases[] = {{"uniform M/G/1", uniform_model(), 1.0 / 500, 50, GeneralMeasure::dirac(1), 1},
                        {"Erlang M/G/1", erlang_model(), 1.0 / 100, 20, GeneralMeasure::dirac(0), 5},
                        {"Pareto spectrally negative", pareto_model(), 1.0 / 100, 55, GeneralMeasure::dirac(5), 3}};
  bool pass = true;
  std::string detail;
  std::uint64_t seed = 1;
  for (const Case& c : cases) {
    const auto res = run(c.spec, c.delta, c.m, c.mu0, c.t);
    const int k = res.steps.back();
    const auto samples = simulate({c.spec, c.mu0, c.t, 100000, seed++, 0});
    const auto ed = empirical_wasserstein(samples, res.snapshot(k), 200, seed);
    const double bound = res.bound_at_step(k);
    const bool ok = ed.estimate <= bound + 3 * ed.std_error;
    pass = pass && ok;
    detail += std::string(c.name) + format(" t=%g: W=%.4g se=%.2g bound=%.4g; ", c.t, ed.estimate, ed.std_error, bound);
  }
  const double secs = seconds_since(t0);
  report(6, pass && secs <= 300, detail + format("%.1f s", secs));
}

void criterion_7() {
  oracle::Rng r(7001);
  double worst = 0;
  int kinds[2] = {0, 0};
  for (int c = 0; c < 50; ++c) {
    const auto cfg = random_small(r, 200);
    ++kinds[cfg.spec.kind == ProcessKind::mg1 ? 0 : 1];
    auto k = TransitionKernel::build(cfg.spec, cfg.spec.grid(cfg.delta, cfg.m_delta));
    const auto dense = k.dense();
    DiscreteDist p(k.grid());
    double s = 0;
    for (int i = k.grid().first_state(); i <= cfg.m_delta; ++i) s += p.p[i] = r.uniform(0, 1);
    for (double& x : p.p) x /= s;
    const auto ref = oracle::vec_mat(p.p, dense);
    for (std::size_t limit : {std::size_t{0}, std::size_t{1} << 20}) {
      k.set_direct_band_limit(limit);
      const auto q = k.apply(p);
      for (std::size_t j = 0; j < ref.size(); ++j) worst = std::max(worst, std::abs(q.p[j] - ref[j]));
    }
  }
  report(7, worst <= 1e-12 && kinds[0] > 0 && kinds[1] > 0,
         format("max |apply - dense| = %.3g over 50 configs (%g M/G/1, %g spectrally negative)", worst, kinds[0],
                kinds[1]));
}

void criterion_8() {
  oracle::Rng r(8001);
  double worst_sum = 0, min_d = 0;
  for (int c = 0; c < 200; ++c) {
    const auto cfg = random_small(r, 200);
    const auto k = TransitionKernel::build(cfg.spec, cfg.spec.grid(cfg.delta, cfg.m_delta));
    for (int i = k.grid().first_state(); i <= cfg.m_delta; ++i) {
      long double s = 0;
      for (int j = 0; j <= cfg.m_delta; ++j) s += k.entry(i, j);
      worst_sum = std::max(worst_sum, static_cast<double>(std::abs(s - 1.0L)));
      min_d = std::min(min_d, k.diag()[i]);
    }
  }
  report(8, worst_sum <= 1e-12 && min_d >= 0,
         format("max |row sum - 1| = %.3g, min D = %.3g over 200 configs", worst_sum, min_d));
}

void criterion_9() {
  oracle::Rng r(9001);
  double worst_coupling = 0, worst_triangle = 0, worst_sym = 0;
  bool nonneg = true, identity = true;
  auto random_atoms = [&r]() {
    std::vector<std::pair<double, double>> v;
    const int n = r.integer(1, 6);
    double s = 0;
    for (int k = 0; k < n; ++k) {
      v.push_back({r.coin() ? r.uniform(0, 10) : r.integer(0, 5), r.uniform(0.01, 1)});
      s += v.back().second;
    }
    for (auto& [x, w] : v) w /= s;
    return v;
  };
  auto to_measure = [](const std::vector<std::pair<double, double>>& v) {
    GeneralMeasure m;
    for (auto [x, w] : v) m.atoms.push_back({x, w});
    return m;
  };
  for (int c = 0; c < 500; ++c) {
    const auto a = random_atoms(), b = random_atoms(), m = random_atoms();
    const auto ma = to_measure(a), mb = to_measure(b), mm = to_measure(m);
    const double ab = wasserstein(ma, mb);
    worst_coupling = std::max(worst_coupling, std::abs(ab - oracle::quantile_coupling(a, b)));
    worst_sym = std::max(worst_sym, std::abs(ab - wasserstein(mb, ma)));
    worst_triangle = std::max(worst_triangle, ab - wasserstein(ma, mm) - wasserstein(mm, mb));
    nonneg = nonneg && ab >= 0;
    identity = identity && wasserstein(ma, ma) == 0.0;
  }
  const bool pass = worst_coupling <= 1e-10 && worst_sym <= 1e-10 && worst_triangle <= 1e-10 && nonneg && identity;
  report(9, pass,
         format("500 cases: max coupling gap %.3g, symmetry gap %.3g, triangle excess %.3g", worst_coupling, worst_sym,
                worst_triangle));
}

void criterion_10() {
  const double d = 1.0 / 100;
  const auto res = run(pareto_model(), d, 55, GeneralMeasure::dirac(5), 3);
  const int k = res.steps.back();
  const double mass = res.snapshot(k).interval_mass[800 - 1];
  const double lower = std::exp(-1.0) - res.ledger.cut_mass[k];
  report(10, mass >= lower, format("mass on (7.99, 8] = %.10g, lower bound %.10g", mass, lower));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
