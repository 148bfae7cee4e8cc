#pragma once

// JSON run configuration: parsing, validation with line-numbered
// diagnostics, and exact rational handling of grid parameters.

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qtrans/bounds.hpp"
#include "qtrans/error.hpp"
#include "qtrans/job_size.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/measure.hpp"

namespace qtrans::cli {

using json = nlohmann::json;

/// Invalid configuration; what() carries "source:line: message".
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Exact rational num/den with den > 0, reduced.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  long double exact() const { return static_cast<long double>(num) / static_cast<long double>(den); }

  static Rational make(__int128 n, __int128 d) {
    if (d == 0) throw std::invalid_argument("zero denominator");
    if (d < 0) {
      n = -n;
      d = -d;
    }
    __int128 a = n < 0 ? -n : n, b = d;
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    const __int128 lim = std::numeric_limits<std::int64_t>::max();
    if (n > lim || -n > lim || d > lim) throw std::invalid_argument("rational out of range");
    return {static_cast<std::int64_t>(n), static_cast<std::int64_t>(d)};
  }
};

/// Parses "3", "-0.25", "1e-3", "1/500" or "2.5/3" exactly.
inline Rational parse_rational(const std::string& text) {
  auto parse_decimal = [](std::string s) -> Rational {
    if (s.empty()) throw std::invalid_argument("empty number");
    int exp10 = 0;
    const auto epos = s.find_first_of("eE");
    if (epos != std::string::npos) {
      const std::string e = s.substr(epos + 1);
      std::size_t used = 0;
      exp10 = std::stoi(e, &used);
      if (used != e.size()) throw std::invalid_argument("bad exponent");
      s = s.substr(0, epos);
    }
    bool neg = false;
    if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
      neg = s[0] == '-';
      s = s.substr(1);
    }
    __int128 n = 0, d = 1;
    bool seen_dot = false, seen_digit = false;
    for (char c : s) {
      if (c == '.') {
        if (seen_dot) throw std::invalid_argument("bad number");
        seen_dot = true;
      } else if (c >= '0' && c <= '9') {
        seen_digit = true;
        n = n * 10 + (c - '0');
        if (seen_dot) d *= 10;
        if (n > (static_cast<__int128>(1) << 100) || d > (static_cast<__int128>(1) << 100))
          throw std::invalid_argument("too many digits");
      } else {
        throw std::invalid_argument("bad number");
      }
    }
    if (!seen_digit) throw std::invalid_argument("bad number");
    for (; exp10 > 0; --exp10) n *= 10;
    for (; exp10 < 0; ++exp10) d *= 10;
    return Rational::make(neg ? -n : n, d);
  };
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  const Rational a = parse_decimal(s.substr(0, slash));
  const Rational b = parse_decimal(s.substr(slash + 1));
  if (b.num == 0) throw std::invalid_argument("division by zero");
  return Rational::make(static_cast<__int128>(a.num) * b.den, static_cast<__int128>(a.den) * b.num);
}

struct TailQuery {
  double time;
  int step;
  double threshold;
  double slack;
};

struct ValidationConfig {
  bool enabled = false;
  std::size_t n_paths = 100000;
  std::uint64_t seed = 1;
  int resamples = 200;
  std::vector<double> times;
  std::vector<int> steps;
};

struct RunConfig {
  ModelSpec spec;         // unit-speed model the solver runs on
  double speed = 1.0;     // workload values scale back by this factor
  Rational delta;         // as given (original workload units)
  Rational m;
  Grid grid;              // in unit-speed units
  GeneralMeasure initial; // in unit-speed units
  double t_end = 0.0;
  int horizon_steps = 0;
  std::vector<double> snapshot_times;
  std::vector<int> snapshot_steps;
  BoundMode mode = BoundMode::refined;
  std::vector<TailQuery> queries;
  ValidationConfig validation;
  std::string output_dir = "out";
  json echo;  // the configuration as given, with command-line overrides
};

namespace detail {

/// Line of the first occurrence of each path segment (as a quoted key),
/// searched in order; a rough but useful locator for semantic errors.
inline int locate_line(const std::string& raw, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const std::string& key : path) {
    if (key.empty() || std::isdigit(static_cast<unsigned char>(key[0]))) continue;
    const auto hit = raw.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit;
  }
  return 1 + static_cast<int>(std::count(raw.begin(), raw.begin() + static_cast<long>(pos), '\n'));
}

class Reader {
 public:
  Reader(const std::string& raw, std::string source) : raw_(raw), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& p : path) dotted += (dotted.empty() ? "" : ".") + p;
    std::ostringstream os;
    os << source_ << ":" << locate_line(raw_, path) << ": " << (dotted.empty() ? "" : dotted + ": ") << msg;
    throw ConfigError(os.str());
  }

  const json& need(const json& obj, const std::vector<std::string>& path, const std::string& key) const {
    auto p = path;
    p.push_back(key);
    if (!obj.is_object() || !obj.contains(key)) fail(p, "missing required field");
    return obj.at(key);
  }

  Rational rational(const json& v, const std::vector<std::string>& path) const {
    try {
      if (v.is_number_integer()) return Rational::make(v.get<std::int64_t>(), 1);
      if (v.is_number_float()) {
        const double d = v.get<double>();
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, d);
        return parse_rational(std::string(buf, r.ptr));
      }
      if (v.is_string()) return parse_rational(v.get<std::string>());
    } catch (const std::exception& e) {
      fail(path, std::string("not a valid number (") + e.what() + ")");
    }
    fail(path, "expected a number or a numeric string such as \"1/500\"");
  }

  double number(const json& v, const std::vector<std::string>& path) const {
    return rational(v, path).value();
  }

  double number(const json& obj, const std::vector<std::string>& path, const std::string& key) const {
    auto p = path;
    p.push_back(key);
    return number(need(obj, path, key), p);
  }

  double number_or(const json& obj, const std::vector<std::string>& path, const std::string& key,
                   double fallback) const {
    if (!obj.contains(key)) return fallback;
    return number(obj, path, key);
  }

  std::int64_t integer(const json& obj, const std::vector<std::string>& path, const std::string& key) const {
    auto p = path;
    p.push_back(key);
    const Rational r = rational(need(obj, path, key), p);
    if (r.den != 1) fail(p, "expected an integer");
    return r.num;
  }

  std::string string(const json& obj, const std::vector<std::string>& path, const std::string& key) const {
    auto p = path;
    p.push_back(key);
    const json& v = need(obj, path, key);
    if (!v.is_string()) fail(p, "expected a string");
    return v.get<std::string>();
  }

  const std::string& raw() const { return raw_; }

 private:
  const std::string& raw_;
  std::string source_;
};

inline JobSize parse_job(const Reader& r, const json& j, const std::vector<std::string>& path) {
  const std::string fam = r.string(j, path, "family");
  auto p = path;
  try {
    if (fam == "uniform") return JobSize::uniform(r.number(j, path, "lo"), r.number(j, path, "hi"));
    if (fam == "exponential") return JobSize::exponential(r.number(j, path, "rate"));
    if (fam == "erlang") {
      const auto shape = r.integer(j, path, "shape");
      if (shape < 1 || shape > 100000) r.fail(path, "erlang shape must be a positive integer");
      return JobSize::erlang(static_cast<int>(shape), r.number(j, path, "rate"));
    }
    if (fam == "pareto") return JobSize::pareto(r.number(j, path, "x_min"), r.number(j, path, "alpha"));
    if (fam == "deterministic") return JobSize::deterministic(r.number(j, path, "value"));
    if (fam == "tabulated") {
      const json& xs = r.need(j, path, "x");
      const json& fs = r.need(j, path, "cdf");
      if (!xs.is_array() || !fs.is_array()) r.fail(path, "tabulated CDF needs arrays \"x\" and \"cdf\"");
      std::vector<double> x, f;
      for (std::size_t k = 0; k < xs.size(); ++k) x.push_back(r.number(xs[k], {path[0], path[1], "x"}));
      for (std::size_t k = 0; k < fs.size(); ++k) f.push_back(r.number(fs[k], {path[0], path[1], "cdf"}));
      return JobSize::tabulated(std::move(x), std::move(f));
    }
  } catch (const DomainError& e) {
    r.fail(path, e.what());
  }
  p.push_back("family");
  r.fail(p, "unknown job size family \"" + fam +
                "\" (expected uniform, exponential, erlang, pareto, deterministic or tabulated)");
}

inline GeneralMeasure parse_initial(const Reader& r, const json& j, const std::vector<std::string>& path) {
  GeneralMeasure m;
  if (j.is_number() || j.is_string()) return GeneralMeasure::dirac(r.number(j, path));
  if (!j.is_object()) r.fail(path, "expected an object describing the initial law");
  if (j.contains("dirac")) return GeneralMeasure::dirac(r.number(j, path, "dirac"));
  if (j.contains("uniform")) {
    const json& u = j.at("uniform");
    if (!u.is_array() || u.size() != 2) r.fail(path, "uniform expects [a, b]");
    return GeneralMeasure::uniform(r.number(u[0], path), r.number(u[1], path));
  }
  if (j.contains("atoms")) {
    for (const json& a : j.at("atoms")) m.atoms.push_back({r.number(a, {path[0], "atoms"}, "x"), r.number(a, {path[0], "atoms"}, "mass")});
  }
  if (j.contains("pieces")) {
    for (const json& p : j.at("pieces"))
      m.pieces.push_back({r.number(p, {path[0], "pieces"}, "a"), r.number(p, {path[0], "pieces"}, "b"),
                          r.number(p, {path[0], "pieces"}, "mass")});
  }
  if (m.atoms.empty() && m.pieces.empty())
    r.fail(path, "initial law needs one of dirac, uniform, atoms, pieces");
  try {
    m.validate();
  } catch (const DomainError& e) {
    r.fail(path, e.what());
  }
  return m;
}

/// Number of grid steps in t, requiring t to be a multiple of delta within
/// 1e-9 relative.
inline std::optional<int> steps_of(long double t, long double delta) {
  const long double r = t / delta;
  const long double ri = std::round(r);
  if (std::abs(r - ri) > 1e-9L * std::max<long double>(1.0L, ri)) return std::nullopt;
  if (ri < 0 || ri > 1e9L) return std::nullopt;
  return static_cast<int>(ri);
}

}  // namespace detail

/// Parses a run configuration (or a run manifest, whose "config" member is
/// used). `source` names the input in diagnostics.
inline RunConfig parse_config(const std::string& raw, const std::string& source = "<config>") {
  json root;
  try {
    root = json::parse(raw);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, raw.size());
    const int line = 1 + static_cast<int>(std::count(raw.begin(), raw.begin() + static_cast<long>(byte ? byte - 1 : 0), '\n'));
    throw ConfigError(source + ":" + std::to_string(line) + ": JSON syntax error: " + e.what());
  }
  const detail::Reader r(raw, source);
  if (!root.is_object()) r.fail({}, "top level must be an object");
  const json& cfg = root.contains("config") && root.contains("outputs") ? root.at("config") : root;

  RunConfig rc;
  rc.echo = cfg;

  const json& model = r.need(cfg, {}, "model");
  const std::string kind = r.string(model, {"model"}, "kind");
  ModelSpec spec;
  if (kind == "mg1" || kind == "M/G/1") spec.kind = ProcessKind::mg1;
  else if (kind == "spectrally_negative" || kind == "specneg") spec.kind = ProcessKind::spectrally_negative;
  else r.fail({"model", "kind"}, "unknown kind \"" + kind + "\" (expected mg1 or spectrally_negative)");
  spec.lambda = r.number(model, {"model"}, "lambda");
  if (!(spec.lambda > 0)) r.fail({"model", "lambda"}, "arrival rate must be positive");
  spec.job = detail::parse_job(r, r.need(model, {"model"}, "job"), {"model", "job"});
  if (model.contains("absorbing_zero")) {
    if (!model.at("absorbing_zero").is_boolean()) r.fail({"model", "absorbing_zero"}, "expected true or false");
    spec.absorbing_zero = model.at("absorbing_zero").get<bool>();
    if (spec.absorbing_zero && spec.kind == ProcessKind::mg1)
      r.fail({"model", "absorbing_zero"}, "only the spectrally negative queue has an absorbing variant");
  }
  rc.speed = r.number_or(model, {"model"}, "speed", 1.0);
  if (!(rc.speed > 0)) r.fail({"model", "speed"}, "service speed must be positive");
  rc.spec = normalize_speed(spec, rc.speed);

  const json& grid = r.need(cfg, {}, "grid");
  rc.delta = r.rational(r.need(grid, {"grid"}, "delta"), {"grid", "delta"});
  rc.m = r.rational(r.need(grid, {"grid"}, "m"), {"grid", "m"});
  if (rc.delta.num <= 0) r.fail({"grid", "delta"}, "delta must be positive");
  if (rc.m.num <= 0) r.fail({"grid", "m"}, "m must be positive");
  const auto md = detail::steps_of(rc.m.exact(), rc.delta.exact());
  if (!md || *md < 1) r.fail({"grid", "m"}, "m must be an integer multiple of delta");
  rc.grid = rc.spec.grid(rc.delta.value() / rc.speed, *md);

  GeneralMeasure init = detail::parse_initial(r, r.need(cfg, {}, "initial"), {"initial"});
  for (auto& a : init.atoms) a.x /= rc.speed;
  for (auto& p : init.pieces) {
    p.a /= rc.speed;
    p.b /= rc.speed;
  }
  rc.initial = init;

  // Time is not rescaled: the unit-speed model runs on the same clock.
  const json& hz = r.need(cfg, {}, "horizon");
  const Rational t_end = r.rational(r.need(hz, {"horizon"}, "t_end"), {"horizon", "t_end"});
  rc.t_end = t_end.value();
  const long double step_time = rc.delta.exact() / rc.speed;
  const auto hs = detail::steps_of(t_end.exact(), step_time);
  if (!hs || t_end.num < 0) r.fail({"horizon", "t_end"}, "t_end must be a non-negative multiple of delta");
  rc.horizon_steps = *hs;
  auto add_snapshot = [&](const json& v, const std::vector<std::string>& path) {
    const Rational t = r.rational(v, path);
    const auto k = detail::steps_of(t.exact(), step_time);
    if (!k || t.num < 0) r.fail(path, "snapshot time must be a non-negative multiple of delta");
    if (*k > rc.horizon_steps) r.fail(path, "snapshot time lies beyond t_end");
    return *k;
  };
  if (hz.contains("snapshot_times")) {
    for (const json& v : hz.at("snapshot_times")) {
      const int k = add_snapshot(v, {"horizon", "snapshot_times"});
      rc.snapshot_steps.push_back(k);
    }
  }
  rc.snapshot_steps.push_back(0);
  rc.snapshot_steps.push_back(rc.horizon_steps);

  if (cfg.contains("bound_mode")) {
    const auto mode = parse_bound_mode(r.string(cfg, {}, "bound_mode"));
    if (!mode) r.fail({"bound_mode"}, "expected basic, refined or refined-worst");
    rc.mode = *mode;
  }

  if (cfg.contains("queries")) {
    for (const json& q : cfg.at("queries")) {
      TailQuery tq;
      tq.step = add_snapshot(r.need(q, {"queries"}, "time"), {"queries", "time"});
      tq.threshold = r.number(q, {"queries"}, "threshold");
      tq.slack = r.number(q, {"queries"}, "slack");
      if (!(tq.slack > 0)) r.fail({"queries", "slack"}, "slack must be positive");
      rc.snapshot_steps.push_back(tq.step);
      rc.queries.push_back(tq);
    }
  }

  if (cfg.contains("validation")) {
    const json& v = cfg.at("validation");
    const std::vector<std::string> vp{"validation"};
    if (v.contains("enabled")) rc.validation.enabled = v.at("enabled").get<bool>();
    if (v.contains("n_paths")) {
      const auto n = r.integer(v, vp, "n_paths");
      if (n < 2) r.fail({"validation", "n_paths"}, "need at least 2 paths");
      rc.validation.n_paths = static_cast<std::size_t>(n);
    }
    if (v.contains("seed")) rc.validation.seed = static_cast<std::uint64_t>(r.integer(v, vp, "seed"));
    if (v.contains("resamples")) rc.validation.resamples = static_cast<int>(r.integer(v, vp, "resamples"));
    if (v.contains("times")) {
      for (const json& t : v.at("times")) {
        const int k = add_snapshot(t, {"validation", "times"});
        rc.validation.steps.push_back(k);
        rc.snapshot_steps.push_back(k);
      }
    }
  }
  std::sort(rc.snapshot_steps.begin(), rc.snapshot_steps.end());
  rc.snapshot_steps.erase(std::unique(rc.snapshot_steps.begin(), rc.snapshot_steps.end()),
                          rc.snapshot_steps.end());
  if (rc.validation.steps.empty())
    for (int k : rc.snapshot_steps)
      if (k > 0) rc.validation.steps.push_back(k);
  for (int k : rc.snapshot_steps) rc.snapshot_times.push_back(k * rc.delta.value() / rc.speed);
  for (int k : rc.validation.steps) rc.validation.times.push_back(k * rc.delta.value() / rc.speed);
  for (auto& q : rc.queries) q.time = q.step * rc.delta.value() / rc.speed;

  if (cfg.contains("output")) rc.output_dir = r.string(cfg, {}, "output");
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace qtrans::cli
