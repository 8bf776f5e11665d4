// sigchange: diagnostics and normal charts for metrics that change
// signature across a hypersurface. See `sigchange --help`.

#include <iostream>

#include <CLI11.hpp>

#include "sigchange/cli.hpp"

namespace {

void add_output(CLI::App* cmd, sigchange::OutputFlags& flags, const char* out_help) {
  cmd->add_flag("--json", flags.json, "Print the report as JSON");
  cmd->add_option("--out", flags.out, out_help);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sigchange;
  CLI::App app{"Diagnostics for signature-changing metrics"};
  app.require_subcommand(1);

  CheckArgs check;
  auto* c = app.add_subcommand("check", "Transversality and radical-direction checks on Sigma");
  c->add_option("space", check.space, "Space file (JSON)")->required();
  c->add_option("--grid", check.grid, "Sigma samples per axis")->capture_default_str();
  c->add_option("--tol", check.tol, "Relative agreement of one-sided slopes")->capture_default_str();
  c->add_option("--alpha", check.alpha, "Exponent to test instead of the declared one");
  add_output(c, check.output, "Write the JSON report to this path");

  BaldomeroArgs bald;
  auto* b = app.add_subcommand("baldomero", "Derivative at 0 and smoothness of the normalized integral F");
  b->add_option("--r", bald.r, "Exponent r > -1")->required();
  b->add_option("--psi", bald.psi, "psi(l1..ln, x)")->capture_default_str();
  b->add_option("--lambda", bald.lambda, "Parameter values l1..ln")->delimiter(',');
  b->add_option("--orders", bald.orders, "Highest derivative order probed (1..4)")->capture_default_str();
  b->add_option("--tol", bald.tol, "Relative tolerance on F'(0)")->capture_default_str();
  add_output(b, bald.output, "Write the CSV table to this path");

  GeodesicArgs geo;
  auto* g = app.add_subcommand("geodesic", "Integrate a geodesic off Sigma");
  g->add_option("space", geo.space, "Space file (JSON)")->required();
  g->add_option("--start", geo.start, "Start point, comma separated")->delimiter(',')->required();
  g->add_option("--velocity", geo.velocity, "Initial velocity, comma separated")->delimiter(',')->required();
  g->add_option("--tspan", geo.tspan, "Parameter interval t0,t1")->delimiter(',')->expected(2);
  g->add_option("--samples", geo.samples, "Output samples")->capture_default_str();
  g->add_option("--tol", geo.tol, "Integrator tolerance")->capture_default_str();
  g->add_option("--det-floor", geo.det_floor, "Halt when |det g| falls to this value");
  add_output(g, geo.output, "Write the CSV trace to this path");

  NormalizeArgs norm;
  auto* n = app.add_subcommand("normalize", "Build and verify normal coordinates from a radical field");
  n->add_option("space", norm.space, "Space file (JSON)")->required();
  n->add_option("--field", norm.field, "Name of the field in the space file")->capture_default_str();
  n->add_option("--patch", norm.patch, "Sigma patch centre (first m-1 coordinates)")->delimiter(',');
  n->add_option("--half-width", norm.half_width, "Sigma patch half width")->capture_default_str();
  n->add_option("--epsilon", norm.epsilon, "Flow parameter range")->capture_default_str();
  n->add_option("--grid", norm.grid, "Verification samples per axis")->capture_default_str();
  n->add_option("--tol", norm.tol, "Tolerance on the transformed metric")->capture_default_str();
  n->add_option("--band-floor", norm.band_floor, "Excluded band |s| below this")->capture_default_str();
  add_output(n, norm.output, "Write the chart and report JSON to this path");

  ExportArgs exp;
  auto* e = app.add_subcommand("export", "Write a catalog space as a space file");
  e->add_option("name", exp.name, "Catalog name")->required();
  e->add_option("--param", exp.params, "Catalog parameter key=value (repeatable)");
  e->add_option("--seed", exp.seed, "Seed for randomized catalog spaces");
  add_output(e, exp.output, "Write the space file to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitUsage;
  }

  if (*c) return cmd_check(check, std::cout, std::cerr);
  if (*b) return cmd_baldomero(bald, std::cout, std::cerr);
  if (*g) return cmd_geodesic(geo, std::cout, std::cerr);
  if (*n) return cmd_normalize(norm, std::cout, std::cerr);
  if (*e) return cmd_export(exp, std::cout, std::cerr);
  return kExitUsage;
}
