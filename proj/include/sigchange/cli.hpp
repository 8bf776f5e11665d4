#pragma once

// Command implementations behind the `sigchange` executable. Each command
// writes its human-readable report (or, with json, a JSON document) to
// `out`, diagnostics to `err`, and returns the process exit code:
//   0 pass, 1 analytic verdict failure, 2 usage, parse or schema error.
// CSV and JSON artifacts go to the --out path when one is given.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigchange/catalog.hpp"
#include "sigchange/errors.hpp"
#include "sigchange/geodesic.hpp"
#include "sigchange/metric.hpp"
#include "sigchange/normal_coords.hpp"
#include "sigchange/quad_smooth.hpp"
#include "sigchange/space_file.hpp"

namespace sigchange {

enum ExitCode : int { kExitPass = 0, kExitVerdict = 1, kExitUsage = 2 };

struct OutputFlags {
  bool json = false;
  std::string out;  // artifact path; empty for none
};

struct CheckArgs {
  std::string space;
  OutputFlags output;
  int grid = 5;                 // Sigma samples per axis
  double tol = 1e-3;            // relative agreement of the one-sided slopes
  std::optional<double> alpha;  // exponent to test instead of the declared one
};

struct BaldomeroArgs {
  double r = 1.0;
  std::string psi = "1";
  std::vector<double> lambda;
  int orders = 3;
  double tol = 1e-5;            // relative, F'(0) estimate against the closed form
  OutputFlags output;
};

struct GeodesicArgs {
  std::string space;
  std::vector<double> start;
  std::vector<double> velocity;
  std::vector<double> tspan{0.0, 1.0};
  std::size_t samples = 101;
  double tol = 1e-10;
  std::optional<double> det_floor;
  OutputFlags output;
};

struct NormalizeArgs {
  std::string space;
  std::string field = "rho";
  std::vector<double> patch;    // Sigma_0 centre (first m - 1 coordinates)
  double half_width = 0.5;
  double epsilon = 0.6;
  int grid = 7;                 // verification samples per axis
  double tol = 1e-4;
  double band_floor = 0.05;
  OutputFlags output;
};

struct ExportArgs {
  std::string name;
  std::vector<std::string> params;  // key=value
  std::optional<std::uint64_t> seed;
  OutputFlags output;
};

namespace cli_detail {

using json = nlohmann::ordered_json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt(const Vec& v) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
  return s + ")";
}

/// Writes text to path; false (with a message on err) when the file cannot
/// be written.
inline bool write_file(const std::string& path, const std::string& text, std::ostream& err) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    err << "error: cannot write '" << path << "'\n";
    return false;
  }
  f << text;
  return static_cast<bool>(f);
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

/// Loads a space file, reporting failures as usage errors.
inline std::optional<SpaceDescriptor> load(const std::string& path, std::ostream& err) {
  try {
    return load_space_file(path);
  } catch (const Error& e) {
    err << "error: " << path << ": " << e.what() << "\n";
    return std::nullopt;
  }
}

inline std::optional<Vec> point_arg(const std::vector<double>& values, std::size_t m, const char* what,
                                    std::ostream& err) {
  if (values.size() != m) {
    err << "error: " << what << " needs " << m << " components, got " << values.size() << "\n";
    return std::nullopt;
  }
  return to_vec(values);
}

}  // namespace cli_detail

/// Transversality, radical direction and signature diagnostics on Sigma.
inline int cmd_check(const CheckArgs& args, std::ostream& out, std::ostream& err) {
  using cli_detail::json;
  const auto space = cli_detail::load(args.space, err);
  if (!space) return kExitUsage;
  if (args.grid < 1) {
    err << "error: --grid must be positive\n";
    return kExitUsage;
  }
  const MetricField& M = space->metric;
  TransversalityOptions topt;
  topt.alpha = args.alpha;
  topt.rel_tol = args.tol;

  json doc;
  doc["space"] = space->name;
  doc["alpha"] = args.alpha.value_or(M.alpha());
  doc["samples"] = json::array();
  std::ostringstream text;
  text << "space " << space->name << " (m = " << M.dim() << ", alpha = " << cli_detail::fmt(doc["alpha"].get<double>())
       << ")\n";

  bool pass = true;
  const auto points = sigma_samples(M, args.grid);
  if (points.empty()) {
    pass = false;
    text << "no sign change of det g found in the domain\n";
  }
  for (std::size_t k = 0; k < points.size(); ++k) {
    const Vec& p = points[k];
    json s;
    s["point"] = cli_detail::to_json(p);
    bool ok = false;
    try {
      const RadicalDirection rad = radical_direction(M, p);
      const TransversalityReport t = transversality_report(M, p, topt);
      const InducedMetricReport induced = induced_metric_check(M, p);
      s["radical"] = cli_detail::to_json(rad.direction);
      s["radical_transverse"] = rad.transverse;
      s["det"] = t.det_value;
      s["left"] = t.left.value;
      s["right"] = t.right.value;
      s["extension_c1"] = t.extension_c1;
      s["differential_nonzero"] = t.differential_nonzero;
      s["induced_min_eigenvalue"] = induced.min_eigenvalue;
      ok = t.pass && rad.transverse && induced.positive_definite;
      std::string reason = t.reason;
      if (reason.empty() && !rad.transverse) reason = "radical direction tangent to Sigma";
      if (reason.empty() && !induced.positive_definite) reason = "induced metric on Sigma not positive definite";
      s["reason"] = reason;
      text << "sample " << k + 1 << " at " << cli_detail::fmt(p) << ": slopes " << cli_detail::fmt(t.left.value)
           << " (left) " << cli_detail::fmt(t.right.value) << " (right), radical " << cli_detail::fmt(rad.direction)
           << ": " << (ok ? "pass" : "fail (" + reason + ")") << "\n";
    } catch (const Error& e) {
      s["reason"] = e.what();
      text << "sample " << k + 1 << " at " << cli_detail::fmt(p) << ": fail (" << e.what() << ")\n";
    }
    s["pass"] = ok;
    pass = pass && ok;
    doc["samples"].push_back(s);
  }
  const SignatureReport sig = signature_check(M);
  doc["signature"] = {{"samples", sig.samples}, {"skipped", sig.skipped}, {"mismatches", sig.mismatches},
                      {"pass", sig.pass}};
  text << "signature: " << sig.samples << " cells, " << sig.mismatches << " mismatches: "
       << (sig.pass ? "pass" : "fail") << "\n";
  pass = pass && sig.pass;
  doc["pass"] = pass;
  text << "verdict: " << (pass ? "pass" : "fail") << "\n";

  out << (args.output.json ? cli_detail::dump(doc) : text.str());
  if (!args.output.out.empty() && !cli_detail::write_file(args.output.out, cli_detail::dump(doc), err)) {
    return kExitUsage;
  }
  return pass ? kExitPass : kExitVerdict;
}

/// F(t) for r and psi: F'(0) by extrapolated differences against the closed
/// form, the smoothness verdict at 0, and a CSV table of F, F' and the
/// one-sided difference quotients of each order over the step ladder.
inline int cmd_baldomero(const BaldomeroArgs& args, std::ostream& out, std::ostream& err) {
  using cli_detail::json;
  if (args.orders < 1 || args.orders > 4) {
    err << "error: --orders must be in 1..4\n";
    return kExitUsage;
  }
  std::optional<BaldomeroSpec> spec;
  std::vector<std::pair<double, double>> box;
  for (double l : args.lambda) box.emplace_back(l, l);
  try {
    spec = make_baldomero_spec(args.r, args.psi, box);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  const std::span<const double> lambda(args.lambda);
  auto F = [&](double t) { return baldomero_F(*spec, lambda, t); };
  try {
    const double formula = f_prime_zero_formula(*spec, lambda);
    const double estimate = central_derivative(F, 0.0);
    const double rel = std::fabs(estimate - formula) / std::fabs(formula);
    const StepLadder ladder;
    const SmoothnessReport probe = smoothness_probe(F, 0.0, args.orders, ladder);
    const bool pass = rel <= args.tol;

    json doc;
    doc["r"] = args.r;
    doc["psi"] = spec->psi.to_string();
    doc["lambda"] = args.lambda;
    doc["f_prime_zero_estimate"] = estimate;
    doc["f_prime_zero_formula"] = formula;
    doc["relative_error"] = rel;
    doc["smoothness_verdict"] = probe.verdict;
    doc["orders"] = json::array();
    for (const auto& o : probe.orders) {
      doc["orders"].push_back({{"order", o.order},
                               {"left", o.left.value},
                               {"right", o.right.value},
                               {"left_exists", o.left_exists},
                               {"right_exists", o.right_exists},
                               {"agree", o.agree}});
    }
    doc["pass"] = pass;

    std::ostringstream text;
    text << "F'(0) estimate " << cli_detail::fmt(estimate) << ", closed form " << cli_detail::fmt(formula)
         << ", relative error " << cli_detail::fmt(rel) << "\n";
    for (const auto& o : probe.orders) {
      text << "order " << o.order << ": left " << cli_detail::fmt(o.left.value) << ", right "
           << cli_detail::fmt(o.right.value) << (o.agree ? " (agree)" : " (disagree)") << "\n";
    }
    text << "smoothness verdict: " << (probe.verdict < 0 ? std::string("discontinuous") : "C^" + std::to_string(probe.verdict))
         << "\nverdict: " << (pass ? "pass" : "fail") << "\n";
    out << (args.output.json ? cli_detail::dump(doc) : text.str());

    if (!args.output.out.empty()) {
      std::ostringstream csv;
      csv << "t,F,dF";
      for (int k = 1; k <= args.orders; ++k) csv << ",left_" << k << ",right_" << k;
      csv << "\n";
      char buf[32];
      auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        csv << buf;
      };
      // Ascending rows: -h0, -h0/2, ..., 0, ..., h0/2, h0.
      std::vector<double> rows;
      for (int k = 0; k < ladder.levels; ++k) rows.push_back(-std::ldexp(ladder.h0, -k));
      rows.push_back(0.0);
      for (int k = ladder.levels; k-- > 0;) rows.push_back(std::ldexp(ladder.h0, -k));
      for (double t : rows) {
        num(t);
        csv << ',';
        num(F(t));
        csv << ',';
        num(baldomero_F_derivative(*spec, lambda, t));
        for (int k = 1; k <= args.orders; ++k) {
          // Raw one-sided quotients with step |t|: one level of the ladder.
          const double step = std::fabs(t);
          for (int side : {-1, +1}) {
            csv << ',';
            if (step > 0.0) {
              num(one_sided_derivative(F, 0.0, k, side, StepLadder{step, 1}).value);
            }
          }
        }
        csv << "\n";
      }
      if (!cli_detail::write_file(args.output.out, csv.str(), err)) return kExitUsage;
    }
    return pass ? kExitPass : kExitVerdict;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerdict;
  }
}

/// Geodesic from (start, velocity) with the pregeodesic residual per sample.
inline int cmd_geodesic(const GeodesicArgs& args, std::ostream& out, std::ostream& err) {
  using cli_detail::json;
  const auto space = cli_detail::load(args.space, err);
  if (!space) return kExitUsage;
  const MetricField& M = space->metric;
  const auto x0 = cli_detail::point_arg(args.start, M.dim(), "--start", err);
  const auto v0 = cli_detail::point_arg(args.velocity, M.dim(), "--velocity", err);
  if (!x0 || !v0) return kExitUsage;
  if (args.tspan.size() != 2 || !(args.tspan[0] != args.tspan[1]) || args.samples < 2) {
    err << "error: --tspan needs two distinct values and --samples at least 2\n";
    return kExitUsage;
  }
  if (!M.domain().contains(*x0)) {
    err << "error: --start lies outside the domain\n";
    return kExitUsage;
  }
  GeodesicOptions opt;
  opt.tol = args.tol;
  opt.samples = args.samples;
  opt.det_floor = args.det_floor.value_or(-1.0);
  GeodesicTrace trace;
  try {
    trace = integrate_geodesic(M, *x0, *v0, args.tspan[0], args.tspan[1], opt);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitVerdict;
  }
  double max_residual = 0.0;
  for (const auto& r : trace.residuals) {
    if (r) max_residual = std::max(max_residual, *r);
  }
  const bool halted = trace.status == TraceStatus::HaltedNearSigma;
  json doc;
  doc["space"] = space->name;
  doc["start"] = args.start;
  doc["velocity"] = args.velocity;
  doc["tspan"] = args.tspan;
  doc["samples"] = trace.size();
  doc["status"] = halted ? "halted_near_sigma" : "completed";
  if (halted) {
    doc["halt_param"] = *trace.halt_param;
    doc["halt_point"] = cli_detail::to_json(*trace.halt_point);
  }
  doc["max_residual"] = max_residual;
  std::ostringstream text;
  text << trace.size() << " samples, max pregeodesic residual " << cli_detail::fmt(max_residual) << "\n";
  if (halted) {
    text << "halted near Sigma at t = " << cli_detail::fmt(*trace.halt_param) << ", x = "
         << cli_detail::fmt(*trace.halt_point) << "\n";
  }
  out << (args.output.json ? cli_detail::dump(doc) : text.str());
  if (!args.output.out.empty()) {
    std::ostringstream csv;
    write_trace_csv(csv, trace);
    if (!cli_detail::write_file(args.output.out, csv.str(), err)) return kExitUsage;
  }
  return halted ? kExitVerdict : kExitPass;
}

/// Normal chart for a field of the space, verified on a grid; the chart
/// samples and the report go to --out as JSON.
inline int cmd_normalize(const NormalizeArgs& args, std::ostream& out, std::ostream& err) {
  using cli_detail::json;
  const auto space = cli_detail::load(args.space, err);
  if (!space) return kExitUsage;
  const MetricField& M = space->metric;
  if (!space->fields.count(args.field)) {
    err << "error: space '" << space->name << "' has no field named '" << args.field << "'\n";
    return kExitUsage;
  }
  NormalChartConfig config;
  config.half_width = args.half_width;
  config.epsilon = args.epsilon;
  if (!args.patch.empty()) {
    const auto c = cli_detail::point_arg(args.patch, M.dim() - 1, "--patch", err);
    if (!c) return kExitUsage;
    config.center = *c;
  }
  if (args.grid < 2 || !(args.half_width > 0.0) || !(args.epsilon > 0.0)) {
    err << "error: --grid must be at least 2, --half-width and --epsilon positive\n";
    return kExitUsage;
  }
  VerifyOptions vopt;
  vopt.grid = static_cast<std::size_t>(args.grid);
  vopt.tol = args.tol;
  vopt.band_floor = args.band_floor;

  json doc;
  doc["space"] = space->name;
  doc["field"] = args.field;
  doc["alpha"] = M.alpha();
  try {
    const ChartTransform ct = build_normal_chart(M, space->field(args.field), config);
    const NormalChartReport rep = verify_normal_chart(ct, vopt);
    doc["flipped"] = ct.flipped();
    doc["patch"] = {{"center", cli_detail::to_json(ct.patch().center)}, {"half_width", ct.patch().half_width}};
    doc["epsilon"] = config.epsilon;
    json grid = json::array();
    json points = json::array();
    for (std::size_t i = 0; i < ct.base_chart().sigma_grid().size(); ++i) {
      grid.push_back(cli_detail::to_json(ct.base_chart().sigma_grid()[i]));
      json row = json::array();
      for (const Vec& x : ct.base_chart().map()[i]) row.push_back(cli_detail::to_json(x));
      points.push_back(row);
    }
    doc["sigma_grid"] = grid;
    doc["t_grid"] = ct.base_chart().t_grid();
    doc["points"] = points;
    doc["psi"] = ct.psi_samples();
    doc["s"] = ct.s_samples();
    doc["ds_dt"] = ct.ds_dt_samples();
    doc["report"] = {{"gmm_error", rep.gmm_error},      {"gim_error", rep.gim_error},
                     {"gim_sigma_error", rep.gim_sigma_error}, {"gij_posdef", rep.gij_posdef},
                     {"band", rep.band},                 {"tol", args.tol},
                     {"pass", rep.pass},                 {"details", rep.details}};
    doc["pass"] = rep.pass;
    std::ostringstream text;
    text << "normal chart for field " << args.field << (ct.flipped() ? " (reversed)" : "") << " on " << space->name
         << "\n"
         << rep.details << "\nverdict: " << (rep.pass ? "pass" : "fail") << "\n";
    out << (args.output.json ? cli_detail::dump(doc) : text.str());
    if (!args.output.out.empty() && !cli_detail::write_file(args.output.out, cli_detail::dump(doc), err)) {
      return kExitUsage;
    }
    return rep.pass ? kExitPass : kExitVerdict;
  } catch (const Error& e) {
    doc["pass"] = false;
    doc["error"] = e.what();
    err << "error: " << e.what() << "\n";
    if (args.output.json) out << cli_detail::dump(doc);
    if (!args.output.out.empty()) cli_detail::write_file(args.output.out, cli_detail::dump(doc), err);
    return kExitVerdict;
  }
}

/// Writes a catalog space as a space file (stdout when no --out).
inline int cmd_export(const ExportArgs& args, std::ostream& out, std::ostream& err) {
  SpaceParams params;
  for (const std::string& kv : args.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      err << "error: --param expects key=value, got '" << kv << "'\n";
      return kExitUsage;
    }
    params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  if (args.seed) params["seed"] = std::to_string(*args.seed);
  try {
    const std::string text = cli_detail::dump(space_to_json(builtin_space(args.name, params)));
    if (args.output.out.empty()) {
      out << text;
    } else if (!cli_detail::write_file(args.output.out, text, err)) {
      return kExitUsage;
    }
    return kExitPass;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace sigchange
