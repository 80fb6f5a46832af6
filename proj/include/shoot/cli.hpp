#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "shoot/oracles.hpp"
#include "shoot/spectra.hpp"

namespace shoot::cli {

using json = nlohmann::json;
using oracles::OracleValue;

enum class Command { eval, eigs, count, oracle_compare, width, order, convergence, oracle };

inline std::optional<Command> parse_command(std::string_view s) {
  if (s == "eval") return Command::eval;
  if (s == "eigs") return Command::eigs;
  if (s == "count") return Command::count;
  if (s == "oracle-compare") return Command::oracle_compare;
  if (s == "width") return Command::width;
  if (s == "order") return Command::order;
  if (s == "convergence") return Command::convergence;
  if (s == "oracle") return Command::oracle;
  return std::nullopt;
}

/// Parsed and validated run description. `raw` keeps the JSON it came from
/// (after command/threads overrides) for hashing.
struct RunConfig {
  json raw;
  Command command = Command::eval;
  PotentialSpec potential;
  bool has_potential = false;
  Config cfg;
  std::vector<cplx> energies;
  double E_min = 0.0, E_max = 0.0, delta = 1.0;
  int n = 0;
  Rect rect{};
  std::vector<double> levels, r, b;
  std::vector<int> indices;
  json oracle;
  unsigned threads = 1;
};

// ---------------------------------------------------------------------------
// formatting

inline std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) fail(ErrorFamily::config, "output", "cannot write " + path.string());
    out_ << header << '\n';
  }
  template <class... T>
  void row(const T&... cols) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(const std::string& v) { return v; }
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorFamily::config, "output", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// parsing

namespace detail {

inline double num(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) fail(ErrorFamily::config, "config", std::string("missing number '") + key + "'");
  const double v = j[key].get<double>();
  if (!std::isfinite(v)) fail(ErrorFamily::config, "config", std::string("'") + key + "' is not finite");
  return v;
}

inline const json& object(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_object()) fail(ErrorFamily::config, "config", std::string("missing object '") + key + "'");
  return j[key];
}

inline cplx energy(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(ErrorFamily::config, "config", "an energy is a number or [re, im]");
}

template <class T>
std::vector<T> list(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].empty())
    fail(ErrorFamily::config, "config", std::string("'") + key + "' must be a nonempty array");
  std::vector<T> out;
  for (const auto& v : j[key]) {
    if (!v.is_number()) fail(ErrorFamily::config, "config", std::string("'") + key + "' holds a non-number");
    out.push_back(v.get<T>());
  }
  return out;
}

inline PotentialSpec potential(const json& j, const std::filesystem::path& base) {
  if (j.contains("builtin")) {
    std::optional<double> kappa;
    if (j.contains("kappa")) kappa = num(j, "kappa");
    return make_builtin(j["builtin"].get<std::string>(), kappa);
  }
  if (j.contains("csv")) {
    std::filesystem::path path = j["csv"].get<std::string>();
    if (path.is_relative()) path = base / path;
    const std::string dom = j.value("domain", "half_line");
    Domain d;
    if (dom == "half_line")
      d = HalfLineHardWall{j.contains("wall") ? num(j, "wall") : 0.0};
    else if (dom == "whole_line")
      d = WholeLine{};
    else
      fail(ErrorFamily::config, "config", "domain must be half_line or whole_line");
    PotentialSpec p = load_potential_csv(path.string(), d);
    require_valid(p);
    return p;
  }
  fail(ErrorFamily::config, "config", "potential needs 'builtin' or 'csv'");
}

inline std::vector<cplx> energies(const json& j) {
  std::vector<cplx> out;
  if (j.contains("energies")) {
    if (!j["energies"].is_array() || j["energies"].empty())
      fail(ErrorFamily::config, "config", "'energies' must be a nonempty array");
    for (const auto& e : j["energies"]) out.push_back(energy(e));
    return out;
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    const double lo = num(g, "re_min"), hi = num(g, "re_max");
    const int n = static_cast<int>(num(g, "n"));
    const double im = g.contains("im") ? num(g, "im") : 0.0;
    if (n < 1 || (n > 1 && !(lo < hi))) fail(ErrorFamily::config, "config", "grid must have n >= 1 and re_min < re_max");
    for (int i = 0; i < n; ++i) out.emplace_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1), im);
    return out;
  }
  fail(ErrorFamily::config, "config", "need 'energies' or 'grid'");
}

}  // namespace detail

/// Builds a RunConfig from JSON. Relative CSV paths resolve against `base`.
inline RunConfig parse_run_config(json j, const std::filesystem::path& base = ".") {
  RunConfig rc;
  if (!j.is_object()) fail(ErrorFamily::config, "config", "top level must be an object");
  const auto cmd = parse_command(j.value("command", ""));
  if (!cmd) fail(ErrorFamily::config, "config", "unknown command '" + j.value("command", "") + "'");
  rc.command = *cmd;

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    for (auto [key, dst] : {std::pair{"tol", &rc.cfg.tol}, {"res_tol", &rc.cfg.res_tol}, {"tail_tol", &rc.cfg.tail_tol},
                            {"norm_tol", &rc.cfg.norm_tol}, {"ode_rel", &rc.cfg.ode_rel}, {"ode_abs", &rc.cfg.ode_abs}})
      if (t.contains(key)) *dst = detail::num(t, key);
  }
  if (j.contains("constants")) {
    const json& c = j["constants"];
    if (c.contains("c")) rc.cfg.c = detail::num(c, "c");
    if (c.contains("eps")) rc.cfg.eps = detail::num(c, "eps");
  }
  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    if (m.contains("density")) rc.cfg.mesh_density = detail::num(m, "density");
    if (m.contains("x_max_extra")) rc.cfg.x_max_extra = detail::num(m, "x_max_extra");
  }
  rc.cfg.validate();
  if (j.contains("threads")) rc.threads = static_cast<unsigned>(std::max(1.0, detail::num(j, "threads")));

  if (rc.command != Command::oracle) {
    if (!j.contains("potential")) fail(ErrorFamily::config, "config", "missing 'potential'");
    rc.potential = detail::potential(j["potential"], base);
    rc.has_potential = true;
  }

  switch (rc.command) {
    case Command::eval:
    case Command::oracle_compare:
      rc.energies = detail::energies(j);
      if (rc.command == Command::oracle_compare && rc.energies.size() < 2)
        fail(ErrorFamily::config, "config", "oracle-compare needs at least two energies");
      break;
    case Command::eigs: {
      const json& g = detail::object(j, "range");
      rc.E_min = detail::num(g, "E_min");
      rc.E_max = detail::num(g, "E_max");
      rc.n = static_cast<int>(g.contains("n") ? detail::num(g, "n") : 400);
      rc.delta = g.contains("delta") ? detail::num(g, "delta") : 1.0;
      if (!(rc.E_min < rc.E_max) || rc.n < 2 || !(rc.delta > 0))
        fail(ErrorFamily::config, "config", "range needs E_min < E_max, n >= 2, delta > 0");
      break;
    }
    case Command::count: {
      const json& g = detail::object(j, "rect");
      rc.rect = {detail::num(g, "re_lo"), detail::num(g, "re_hi"), detail::num(g, "im_lo"), detail::num(g, "im_hi")};
      if (!(rc.rect.re_lo < rc.rect.re_hi && rc.rect.im_lo < rc.rect.im_hi))
        fail(ErrorFamily::config, "config", "rect is empty");
      break;
    }
    case Command::width:
      rc.levels = detail::list<double>(j, "levels");
      break;
    case Command::order:
      rc.r = j.contains("r") ? detail::list<double>(j, "r") : std::vector<double>{1e2, 1e3, 1e4, 1e5, 1e6};
      break;
    case Command::convergence:
      rc.indices = detail::list<int>(j, "indices");
      rc.b = detail::list<double>(j, "b");
      rc.E_max = detail::num(j, "E_max");
      break;
    case Command::oracle:
      if (!j.contains("oracle") || !j["oracle"].is_object()) fail(ErrorFamily::config, "config", "missing 'oracle'");
      rc.oracle = j["oracle"];
      break;
  }
  rc.raw = std::move(j);
  return rc;
}

// ---------------------------------------------------------------------------
// commands

struct Certificates {
  double truncation = 0.0, norm_closure = 0.0, raw_tail_bound = 0.0, riccati_residual = 0.0;
  int max_iters = 0;
  void add(const CharacteristicSample& s) {
    truncation = std::max(truncation, s.diag.truncation);
    norm_closure = std::max(norm_closure, s.diag.norm_closure);
    raw_tail_bound = std::max(raw_tail_bound, s.diag.raw_tail_bound);
    riccati_residual = std::max(riccati_residual, s.diag.riccati_residual);
    max_iters = std::max(max_iters, s.diag.iters);
  }
  json to_json() const {
    return {{"truncation", truncation}, {"norm_closure", norm_closure}, {"raw_tail_bound", raw_tail_bound},
            {"riccati_residual", riccati_residual}, {"max_contraction_iters", max_iters}};
  }
};

struct RunResult {
  int exit_code = 0;
  json summary;
  json meta;
};

namespace detail {

inline cplx scaled_ratio(const CharacteristicSample& a, const CharacteristicSample& ref) {
  return a.P / ref.P * std::exp(a.log_scale - ref.log_scale);
}

inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline void run_eval(const RunConfig& rc, const std::filesystem::path& out, json& summary, json& meta) {
  CharacteristicFunction f(rc.potential, rc.cfg);
  f.prepare(rc.energies);
  meta["shift"] = f.shift();
  meta["x0"] = f.x0();
  const auto samples = parallel_map<CharacteristicSample>(
      rc.energies.size(), [&](std::size_t i) { return f.evaluate(rc.energies[i]); }, rc.threads);
  CsvWriter csv(out / "eval.csv", "Re_E,Im_E,Re_P,Im_P,Re_dP,Im_dP,log_scale,x0,iters");
  Certificates cert;
  for (const auto& s : samples) {
    csv.row(s.E.real(), s.E.imag(), s.P.real(), s.P.imag(), s.dP.real(), s.dP.imag(), s.log_scale, s.x0,
            s.diag.iters);
    cert.add(s);
  }
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < samples.size(); i += 20) picks.push_back(i);
  const auto checks = parallel_map<double>(
      picks.size(),
      [&](std::size_t k) {
        const auto& s = samples[picks[k]];
        const double h = 1e-4 * std::max(1.0, std::abs(s.E));
        const auto p = f.evaluate(s.E + h), m = f.evaluate(s.E - h);
        const cplx fd = (p.P * std::exp(p.log_scale - s.log_scale) - m.P * std::exp(m.log_scale - s.log_scale)) / (2 * h);
        return std::abs(fd - s.dP) / std::abs(s.dP);
      },
      rc.threads);
  double worst = 0.0;
  for (double c : checks) worst = std::max(worst, c);
  summary["rows"] = samples.size();
  summary["dP_checks"] = checks.size();
  summary["dP_worst_rel_err"] = worst;
  summary["dP_checks_pass"] = worst <= 1e-5;
  meta["certificates"] = cert.to_json();
  if (!(worst <= 1e-5)) fail(ErrorFamily::certificate, "eval", "dP disagrees with central differences");
}

inline void run_eigs(const RunConfig& rc, const std::filesystem::path& out, json& summary, json& meta) {
  CharacteristicFunction f(rc.potential, rc.cfg);
  const Rect rect{rc.E_min, rc.E_max, -rc.delta, rc.delta};
  prepare_region(f, {rect.re_lo - 0.01, rect.re_hi + 0.01, rect.im_lo - 0.01, rect.im_hi + 0.01});
  meta["shift"] = f.shift();
  meta["x0"] = f.x0();
  RealScan scan;
  const auto recs = real_eigenvalues(f, rc.E_min, rc.E_max, rc.n, rc.threads, &scan);
  CsvWriter csv(out / "eigenvalues.csv", "index,Re_E,Im_E,residual,newton_steps");
  for (std::size_t i = 0; i < recs.size(); ++i)
    csv.row(static_cast<int>(i + 1), recs[i].E.real(), recs[i].E.imag(), recs[i].residual, recs[i].newton_steps);
  const ContourCount c = count_zeros_rectangle(f, rect, rc.threads);
  Certificates cert;
  for (const auto& s : scan.samples) cert.add(s);
  summary["eigenvalues"] = recs.size();
  summary["brackets"] = scan.brackets.size();
  summary["max_imag_ratio"] = scan.max_imag_ratio;
  double worst = 0.0;
  for (const auto& r : recs) worst = std::max(worst, r.residual);
  summary["max_residual"] = worst;
  summary["contour"] = {{"count", c.count}, {"raw", c.raw}, {"winding", c.winding}, {"samples", c.samples},
                        {"perturbations", c.perturbations}};
  summary["complete"] = c.count == static_cast<int>(recs.size());
  meta["certificates"] = cert.to_json();
  meta["certificates"]["contour_raw"] = c.raw;
  if (c.count != static_cast<int>(recs.size()))
    fail(ErrorFamily::certificate, "eigs", "contour count " + std::to_string(c.count) + " differs from " +
                                               std::to_string(recs.size()) + " eigenvalues found");
}

inline void run_count(const RunConfig& rc, json& summary, json& meta) {
  CharacteristicFunction f(rc.potential, rc.cfg);
  const Rect& r = rc.rect;
  prepare_region(f, {r.re_lo - 0.01, r.re_hi + 0.01, r.im_lo - 0.01, r.im_hi + 0.01});
  meta["shift"] = f.shift();
  const ContourCount c = count_zeros_rectangle(f, r, rc.threads);
  summary = {{"count", c.count}, {"raw", c.raw}, {"winding", c.winding}, {"samples", c.samples},
             {"perturbations", c.perturbations}};
  meta["certificates"] = {{"contour_raw", c.raw}};
}

inline OracleValue oracle_for(const PotentialSpec& p, cplx E) {
  switch (p.oracle) {
    case OracleTag::bessel_wall: return oracles::exp_wall(E);
    case OracleTag::symmetric_bessel: return oracles::symmetric_exp(E);
    case OracleTag::whittaker_morse: return oracles::truncated_morse(p.kappa, E);
    default: fail(ErrorFamily::config, "oracle-compare", "potential '" + p.label + "' has no closed-form oracle");
  }
}

inline void run_oracle_compare(const RunConfig& rc, const std::filesystem::path& out, json& summary, json& meta) {
  CharacteristicFunction f(rc.potential, rc.cfg);
  f.prepare(rc.energies);
  meta["shift"] = f.shift();
  const auto samples = parallel_map<CharacteristicSample>(
      rc.energies.size(), [&](std::size_t i) { return f.evaluate(rc.energies[i]); }, rc.threads);
  const auto orc = parallel_map<OracleValue>(
      rc.energies.size(), [&](std::size_t i) { return oracle_for(rc.potential, rc.energies[i]); }, rc.threads);
  CsvWriter csv(out / "oracle_compare.csv", "Re_E,Im_E,Re_ratio,Im_ratio,Re_oracle_ratio,Im_oracle_ratio,rel_err");
  Certificates cert;
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const cplx rp = scaled_ratio(samples[i], samples[0]);
    const cplx ro = orc[i].value / orc[0].value;
    const double err = std::abs(rp - ro) / std::abs(ro);
    worst = std::max(worst, err);
    csv.row(rc.energies[i].real(), rc.energies[i].imag(), rp.real(), rp.imag(), ro.real(), ro.imag(), err);
    cert.add(samples[i]);
  }
  summary["max_rel_err"] = worst;
  summary["pass"] = worst <= 1e-6;
  summary["reference_E"] = cplx_json(rc.energies[0]);
  meta["certificates"] = cert.to_json();
}

inline void run_width(const RunConfig& rc, const std::filesystem::path& out, json& summary) {
  CsvWriter csv(out / "width.csv", "v,width,log_term,scaled_residual");
  double worst = 0.0;
  for (double v : rc.levels) {
    const double w = width(rc.potential, v);
    const double lt = std::log(std::sqrt(v) / (2 * std::numbers::pi));
    const double sc = v > 1.0 ? std::abs(w - lt) * std::sqrt(v) / std::log(v) : 0.0;
    worst = std::max(worst, sc);
    csv.row(v, w, lt, sc);
  }
  summary["max_scaled_residual"] = worst;
}

inline void run_order(const RunConfig& rc, const std::filesystem::path& out, json& summary) {
  const GrowthFit g = growth_order_estimate(rc.potential, rc.r, rc.cfg, rc.threads);
  CsvWriter csv(out / "order.csv", "r,log_abs");
  for (std::size_t i = 0; i < g.r.size(); ++i) csv.row(g.r[i], g.log_abs[i]);
  summary = {{"exponent", g.exponent}, {"ci_half_width", g.ci_half_width},
             {"in_range", g.exponent >= 0.4 && g.exponent <= 1.1}};
}

inline void run_convergence(const RunConfig& rc, const std::filesystem::path& out, json& summary, json& meta) {
  const ConvergenceReport rep =
      convergence_report(rc.potential, rc.indices, rc.b, rc.E_max, rc.cfg, 2.0, 100, rc.threads);
  CsvWriter csv(out / "convergence.csv", "index,b,E_naive,E_exact,error");
  for (const auto& r : rep.rows) csv.row(r.index, r.b, r.E_naive, rep.exact[r.index - 1], r.error);
  summary = {{"monotone", rep.monotone}, {"exact_shift_under_extension", rep.max_shift}, {"exact", rep.exact}};
  meta["certificates"] = {{"exact_shift", rep.max_shift}};
}

inline void run_oracle(const RunConfig& rc, const std::filesystem::path& out, json& summary) {
  const json& o = rc.oracle;
  const std::string fn = o.value("function", "");
  OracleValue v;
  if (fn == "bessel_k")
    v = oracles::bessel_k(energy(o.value("nu", json())), num(o, "z"));
  else if (fn == "bessel_k_prime")
    v = oracles::bessel_k_prime(energy(o.value("nu", json())), num(o, "z"));
  else if (fn == "whittaker_w")
    v = oracles::whittaker_w(num(o, "kappa"), energy(o.value("mu", json())), num(o, "z"));
  else if (fn == "whittaker_w_continued")
    v = oracles::whittaker_w_continued(num(o, "kappa"), energy(o.value("mu", json())), num(o, "z"));
  else if (fn == "whittaker_logderiv_asymptotic")
    v = oracles::whittaker_logderiv_asymptotic(num(o, "kappa"), num(o, "E"));
  else
    fail(ErrorFamily::config, "oracle", "unknown oracle function '" + fn + "'");
  CsvWriter csv(out / "oracle.csv", "function,Re_value,Im_value,abs_err_estimate,method,warning");
  csv.row(fn, v.value.real(), v.value.imag(), v.abs_err_estimate, std::string(oracles::method_name(v.method)),
          std::string(v.warning ? "1" : "0"));
  summary = {{"value", cplx_json(v.value)}, {"abs_err_estimate", v.abs_err_estimate},
             {"method", oracles::method_name(v.method)}, {"warning", v.warning}};
}

}  // namespace detail

/// Executes the command, writing CSV outputs, summary.json and meta.json into
/// `out`. Errors are caught and mapped to their family's exit code; meta.json
/// is written in either case.
inline RunResult run(const RunConfig& rc, const std::filesystem::path& out) {
  RunResult res;
  std::filesystem::create_directories(out);
  json& meta = res.meta;
  meta["config_hash"] = config_hash(rc.raw);
  meta["command"] = rc.raw.value("command", "");
  meta["threads"] = rc.threads;
  meta["constants"] = {{"c", rc.cfg.c}, {"eps", rc.cfg.eps}, {"alpha", rc.cfg.alpha()},
                       {"first_step_bound", rc.cfg.first_step_bound()}};
  if (rc.has_potential) meta["potential"] = rc.potential.label;
  try {
    switch (rc.command) {
      case Command::eval: detail::run_eval(rc, out, res.summary, meta); break;
      case Command::eigs: detail::run_eigs(rc, out, res.summary, meta); break;
      case Command::count: detail::run_count(rc, res.summary, meta); break;
      case Command::oracle_compare: detail::run_oracle_compare(rc, out, res.summary, meta); break;
      case Command::width: detail::run_width(rc, out, res.summary); break;
      case Command::order: detail::run_order(rc, out, res.summary); break;
      case Command::convergence: detail::run_convergence(rc, out, res.summary, meta); break;
      case Command::oracle: detail::run_oracle(rc, out, res.summary); break;
    }
  } catch (const Error& e) {
    res.exit_code = e.exit_code();
    meta["error"] = {{"family", family_name(e.family())}, {"stage", e.stage()}, {"message", e.what()}};
    if (e.has_energy()) meta["error"]["E"] = detail::cplx_json(e.energy());
  }
  meta["exit_code"] = res.exit_code;
  if (!meta.contains("shift")) meta["shift"] = 0.0;
  write_json(out / "summary.json", res.summary);
  write_json(out / "meta.json", meta);
  return res;
}

}  // namespace shoot::cli
