#include <cstdio>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "stovlab/stovlab.hpp"

using namespace stovlab;

namespace {

// Raw flag values; only flags actually given override the config file.
struct Flags {
  std::string config;
  std::string grid;
  std::string extent;
  std::string mode;
  double eta = 1.0;
  std::string out;
  int q = 0;
  std::string terms;
  double delta = 0.0;
  std::string pairs;
  double qwp = 45.0;
  double lp = 0.0;
  std::size_t angles = 37;
  std::size_t pad = 4;
  std::size_t phases = 16;
};

std::pair<std::size_t, std::size_t> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  std::size_t a = 0, b = 0;
  const auto read = [&](const std::string& part, std::size_t& v) {
    const auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    return !part.empty() && ec == std::errc() && p == part.data() + part.size();
  };
  if (x == std::string::npos || !read(s.substr(0, x), a) || !read(s.substr(x + 1), b))
    throw std::invalid_argument("invalid --grid '" + s + "' (expected NxM)");
  return {a, b};
}

std::pair<double, double> parse_extent(const std::string& s) {
  const auto c = s.find(':');
  try {
    if (c == std::string::npos) throw std::invalid_argument("");
    std::size_t n1 = 0, n2 = 0;
    const std::string a = s.substr(0, c), b = s.substr(c + 1);
    const double u = std::stod(a, &n1), w = std::stod(b, &n2);
    if (n1 != a.size() || n2 != b.size()) throw std::invalid_argument("");
    return {u, w};
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid --extent '" + s + "' (expected U:W)");
  }
}

struct Command {
  CLI::App* app;
  std::function<ScenarioResult(const RunConfig&, const CommandArgs&)> run;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file; flags given on the command line override it");
  sub->add_option("--grid", f.grid, "grid samples NxM (u x w)")->default_str("256x256");
  sub->add_option("--extent", f.extent, "grid half-extents U:W")->default_str("4:4");
  sub->add_option("--mode", f.mode, "canonical | phase_only")->default_str("canonical");
  sub->add_option("--eta", f.eta, "w-envelope scale (1 = matched widths)")->default_str("1");
  sub->add_option("--out", f.out, "output directory")->default_str("out");
}

void apply_flags(const CLI::App* sub, const Flags& f, RunConfig& cfg, CommandArgs& args) {
  const auto given = [&](const char* name) {
    try {
      return sub->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };
  if (given("--grid")) std::tie(cfg.n_u, cfg.n_w) = parse_grid(f.grid);
  if (given("--extent")) std::tie(cfg.u_half, cfg.w_half) = parse_extent(f.extent);
  if (given("--mode")) cfg.mode = mode_from_string(f.mode);
  if (given("--eta")) cfg.eta = f.eta;
  if (given("--out")) cfg.out = f.out;
  if (given("--q")) args.q = f.q;
  if (given("--terms")) args.terms = f.terms;
  if (given("--delta")) args.delta = f.delta;
  if (given("--pairs")) args.pairs = f.pairs;
  if (given("--qwp")) args.qwp_deg = f.qwp;
  if (given("--lp")) args.lp_deg = f.lp;
  if (given("--angles")) args.angles = f.angles;
  if (given("--pad")) args.pad = f.pad;
  if (given("--phases")) args.phases = f.phases;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stovlab: spatiotemporal vortex and mode-entanglement simulator"};
  app.require_subcommand(1);
  Flags f;
  std::vector<Command> commands;

  const auto make = [&](const char* name, const char* help, auto run) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, f);
    commands.push_back({sub, run});
    return sub;
  };

  auto* synth = make("synth", "single mode |q>: field dump, intensity and phase images", cmd_synth);
  synth->add_option("--q", f.q, "topological charge")->default_str("0");

  auto* sup = make("superpose", "scalar superposition |q1> + e^{i delta}|q2> + ...", cmd_superpose);
  sup->add_option("--terms", f.terms, "comma-separated charges")->default_str("0,+1");
  sup->add_option("--delta", f.delta, "phase on the second term (rad)")->default_str("0");

  auto* ent = make("entangle", "vector state sum_k |q_k>|pol_k>: field dump, Stokes maps, oracle report", cmd_entangle);
  ent->add_option("--terms", f.terms, "terms q:LABEL, labels S P H V D A R L")->default_str("+1:R,-1:L");
  ent->add_option("--delta", f.delta, "phase on the second term (rad)")->default_str("0");

  auto* orth = make("orthogonality", "pairwise phase scans and overlap matrix", cmd_orthogonality);
  orth->add_option("--pairs", f.pairs, "charge pairs qa:qb")->default_str(kDefaultPairs);
  orth->add_option("--phases", f.phases, "phase samples per scan")->default_str("16");

  auto* pol = make("polscan", "QWP -> rotating HWP -> LP power scan", cmd_polscan);
  pol->add_option("--terms", f.terms, "terms q:LABEL")->default_str("+1:R,-1:L");
  pol->add_option("--delta", f.delta, "phase on the second term (rad)")->default_str("0");
  pol->add_option("--qwp", f.qwp, "QWP fast axis (deg)")->default_str("45");
  pol->add_option("--lp", f.lp, "polarizer axis (deg)")->default_str("0");
  pol->add_option("--angles", f.angles, "HWP angles over 0..180 deg")->default_str("37");

  auto* spec = make("spectrometer", "x-omega spectrogram and charge readout", cmd_spectrometer);
  spec->add_option("--q", f.q, "charge of a single scalar mode (ignored with --terms)")->default_str("0");
  spec->add_option("--terms", f.terms, "vector state terms q:LABEL");
  spec->add_option("--delta", f.delta, "phase on the second term (rad)")->default_str("0");
  spec->add_option("--pad", f.pad, "zero-padding factor along w")->default_str("4");

  make("fig2", "superposition morphology panels", [](const RunConfig& c, const CommandArgs&) { return cmd_fig2(c); });
  make("fig3", "polarization analyzer panels", [](const RunConfig& c, const CommandArgs&) { return cmd_fig3(c); });
  make("fig4", "spectrometer and reference panels", [](const RunConfig& c, const CommandArgs&) { return cmd_fig4(c); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "stovlab: error: " << e.what() << "\n";
    return 2;
  }

  for (const Command& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      RunConfig cfg;
      CommandArgs args;
      if (!f.config.empty()) load_config(f.config, cfg, args);
      apply_flags(c.app, f, cfg, args);
      const ScenarioResult res = c.run(cfg, args);
      if (!res.ok()) {
        std::string names;
        for (const std::string& n : res.failed) names += (names.empty() ? "" : ", ") + n;
        std::cerr << "stovlab: " << c.app->get_name() << ": check failed: " << names << "\n";
        return 1;
      }
      std::cout << c.app->get_name() << ": wrote " << cfg.out.string() << "\n";
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "stovlab: error: " << e.what() << "\n";
      return 2;
    }
  }
  return 2;
}
