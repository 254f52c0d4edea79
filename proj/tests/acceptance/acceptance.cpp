// Acceptance runner. `acceptance` runs every criterion, `acceptance N` runs
// one. Prints one PASS/FAIL line per criterion; exit status 1 if any failed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stovlab/stovlab.hpp"

using namespace stovlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

ScalarField mode(int q, const GridSpec& g, double eta = 1.0, ModeKind kind = ModeKind::canonical) {
  StovParams p;
  p.q = q;
  p.eta = eta;
  p.mode = kind;
  return synthesize_mode(p, g);
}

double peak(const ScalarField& f) {
  double m = 0.0;
  for (const cplx& v : f.values().data()) m = std::max(m, std::norm(v));
  return m;
}

double row_max(const ScalarField& f, std::size_t i) {
  double m = 0.0;
  for (std::size_t j = 0; j < f.grid().n_w(); ++j) m = std::max(m, std::norm(f(i, j)));
  return m;
}

double col_max(const ScalarField& f, std::size_t j) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.grid().n_u(); ++i) m = std::max(m, std::norm(f(i, j)));
  return m;
}

// 1 -------------------------------------------------------------------------
Outcome orthogonality() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec g = make_grid(256, 256, 4, 4);
  std::map<int, ScalarField> modes;
  for (int q = -3; q <= 3; ++q) modes.emplace(q, mode(q, g));
  double worst_ip = 0.0, worst_v = 0.0, min_same = 1.0;
  for (int a = -3; a <= 3; ++a)
    for (int b = a; b <= 3; ++b) {
      const VisibilityResult vis = phase_scan(modes.at(a), modes.at(b), 16);
      if (a == b) {
        min_same = std::min(min_same, vis.v);
      } else {
        worst_ip = std::max(worst_ip, std::abs(inner_product(modes.at(a), modes.at(b))));
        worst_v = std::max(worst_v, vis.v);
      }
    }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.detail << "max|<a,b>|=" << worst_ip << " max v(a!=b)=" << worst_v << " min v(a=a)=" << min_same
           << " runtime=" << secs << "s";
  o.require(worst_ip <= 1e-9, "|<a,b>| <= 1e-9");
  o.require(worst_v <= 1e-6, "v <= 1e-6 for distinct charges");
  o.require(min_same >= 0.999999, "v >= 0.999999 for identical modes");
  o.require(secs < 10.0, "runtime < 10 s");
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome visibility_formula() {
  Outcome o;
  const double v = visibility(2.7, 0.9);
  o.detail.precision(17);
  o.detail << "visibility(2.7, 0.9)=" << v;
  o.require(v == 0.5, "exactly 0.5");
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome morphology() {
  Outcome o;
  const GridSpec g = make_grid(257, 257, 4, 4);
  const std::size_t c = 128;  // u = 0 row, w = 0 column
  const ScalarField p1 = mode(1, g), m1 = mode(-1, g);
  const ScalarField in = superpose({{p1, 1.0}, {m1, 1.0}});
  const ScalarField out = superpose({{p1, 1.0}, {m1, -1.0}});
  const double in_line = row_max(in, c) / peak(in);
  const double out_line = col_max(out, c) / peak(out);
  const std::vector<double> prof = row_power(out);
  const auto argmax = static_cast<std::size_t>(std::max_element(prof.begin(), prof.end()) - prof.begin());
  o.detail << "in-phase u=0 line " << in_line << ", out-of-phase w=0 line " << out_line
           << ", out-of-phase projection peak at u=" << g.u(argmax);
  o.require(in_line <= 1e-12, "in-phase u=0 line <= 1e-12 of peak");
  o.require(out_line <= 1e-12, "out-of-phase w=0 line <= 1e-12 of peak");
  o.require(argmax == c, "out-of-phase projection maximal at u=0");
  for (ModeKind kind : {ModeKind::canonical, ModeKind::phase_only}) {
    const ScalarField a = mode(0, g, 1.0, kind), b = mode(1, g, 1.0, kind);
    const double ci = u_centroid(superpose({{a, 1.0}, {b, 1.0}}));
    const double co = u_centroid(superpose({{a, 1.0}, {b, -1.0}}));
    o.detail << "; |0>+-|1> " << to_string(kind) << " centroids " << ci << " / " << co;
    o.require(ci > 0.0 && co < 0.0, std::string("centroid flip (") + to_string(kind) + ")");
  }
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome polarization_oracle() {
  Outcome o;
  const GridSpec g = make_grid(257, 257, 4, 4);
  const std::size_t c = 128, m = 32;  // radius 32 cells = 1.0
  struct Entry {
    int du, dw;  // direction in cells
    PolLabel in, out;
  };
  // azimuth 0, pi/2, pi, 3pi/2, pi/4, -pi/4, 3pi/4, -3pi/4
  const Entry table[] = {
      {1, 0, PolLabel::P, PolLabel::S},   {0, 1, PolLabel::S, PolLabel::P},  {-1, 0, PolLabel::P, PolLabel::S},
      {0, -1, PolLabel::S, PolLabel::P},  {1, 1, PolLabel::A, PolLabel::D},  {1, -1, PolLabel::D, PolLabel::A},
      {-1, 1, PolLabel::D, PolLabel::A},  {-1, -1, PolLabel::A, PolLabel::D},
  };
  double worst_table = 1.0, worst_random = 1.0;
  std::size_t random_checked = 0;
  for (Parity par : {Parity::in_phase, Parity::out_of_phase}) {
    const EntangledStateSpec spec = vortex_pair_state(1, par == Parity::in_phase ? 0.0 : kPi);
    const VectorField vf = realize(spec, g);
    for (const Entry& e : table) {
      const JonesVector here = vf.at(c + e.du * static_cast<long>(m), c + e.dw * static_cast<long>(m));
      worst_table = std::min(worst_table, alignment(here, ket(par == Parity::in_phase ? e.in : e.out)));
    }
    std::mt19937 rng(par == Parity::in_phase ? 7u : 8u);
    std::uniform_int_distribution<std::size_t> idx(48, 208);
    std::vector<std::pair<std::size_t, std::size_t>> samples;
    while (samples.size() < 64) {
      const std::size_t i = idx(rng), j = idx(rng);
      if (i == c && j == c) continue;  // singular center
      samples.emplace_back(i, j);
    }
    const OracleReport rep = oracle_check(spec, g, samples);
    o.require(rep.parity == par, "parity classification");
    o.require(rep.checked == 64 && rep.flagged == 0, "64 non-degenerate samples");
    random_checked += rep.checked;
    worst_random = std::min(worst_random, rep.min_alignment);
  }
  o.detail << "table min alignment " << 1.0 - worst_table << " below 1, random (" << random_checked
           << " samples) min alignment " << 1.0 - worst_random << " below 1";
  o.require(worst_table >= 1.0 - 1e-9, "tabulated entries");
  o.require(worst_random >= 1.0 - 1e-9, "random samples");
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome analyzer() {
  Outcome o;
  const GridSpec g = make_grid(256, 256, 4, 4);
  const double qwp = kPi / 4.0, lp = 0.0;
  const std::vector<double> angles = default_hwp_angles(37);
  const auto scan = [&](const EntangledStateSpec& s) { return polarization_analyzer(realize(s, g), qwp, angles, lp); };
  const PolScanResult r = scan({{StateTerm(1, PolLabel::R)}, 0.0, {}});
  const PolScanResult l = scan({{StateTerm(-1, PolLabel::L)}, 0.0, {}});
  const PolScanResult ein = scan(vortex_pair_state(1, 0.0));
  const PolScanResult eout = scan(vortex_pair_state(1, kPi));
  StovParams wide;
  wide.eta = 2.0;
  const PolScanResult e2 = scan(vortex_pair_state(1, 0.0, wide));

  const auto argmax = [](const PolScanResult& s) {
    return static_cast<std::size_t>(std::max_element(s.powers.begin(), s.powers.end()) - s.powers.begin());
  };
  const bool interleaved = l.powers[argmax(r)] - l.p_min <= 1e-6 * l.p_max &&
                           r.powers[argmax(l)] - r.p_min <= 1e-6 * r.p_max;
  // context only: the same eta=2 state with the first plate on the S/P axes
  const double e2_aligned = polarization_analyzer(realize(vortex_pair_state(1, 0.0, wide), g), 0.0, angles, lp).v;
  o.detail << "v(+1,R)=" << r.v << " v(-1,L)=" << l.v << " v(entangled, in/out)=" << ein.v << "/" << eout.v
           << " v(entangled, eta=2)=" << e2.v << " (QWP at 0 deg: " << e2_aligned << ")";
  o.require(r.v >= 0.999, "v(+1,R) >= 0.999");
  o.require(l.v >= 0.999, "v(-1,L) >= 0.999");
  o.require(interleaved, "maxima/minima interleaved");
  o.require(std::max(ein.v, eout.v) <= 1e-6, "v(entangled, eta=1) <= 1e-6");
  o.require(e2.v > 0.05, "v(entangled, eta=2) > 0.05");
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome spectrometer_charge() {
  Outcome o;
  const GridSpec g = make_grid(256, 256, 4, 4);
  double worst_parseval = 0.0, min_conf = 1.0;
  for (int q : {1, -1, 2, -2, 3, -3}) {
    const ScalarField f = mode(q, g);
    const Spectrogram sp = spectrometer(f);
    worst_parseval = std::max(worst_parseval, std::abs(sp.total_power() - total_power(f)) / total_power(f));
    const ChargeEstimate e = estimate_charge(sp);
    min_conf = std::min(min_conf, e.confidence);
    const bool ok = e.dark_regions == std::abs(q) && e.magnitude == std::abs(q) && e.sign == (q > 0 ? 1 : -1) &&
                    e.confidence >= 0.9;
    o.require(ok, "q=" + std::to_string(q) + " read as " + std::to_string(e.sign * e.magnitude) + " (dark " +
                      std::to_string(e.dark_regions) + ", confidence " + std::to_string(e.confidence) + ")");
  }
  for (int q : {1, 2, 3})
    for (double delta : {0.0, kPi}) {
      const VectorField vf = realize(vortex_pair_state(q, delta), g);
      const Spectrogram sp = spectrometer(vf);
      worst_parseval = std::max(worst_parseval, std::abs(sp.total_power() - total_power(vf)) / total_power(vf));
      const ChargeEstimate e = estimate_charge(sp);
      o.require(e.magnitude == q && e.sign == 0,
                "entangled q=" + std::to_string(q) + " read as |q|=" + std::to_string(e.magnitude) +
                    " sign " + std::to_string(e.sign));
    }
  o.detail << "six single-term beams and six entangled pairs; min confidence " << min_conf
           << ", worst Parseval relative error " << worst_parseval;
  o.require(worst_parseval <= 1e-9, "Parseval <= 1e-9");
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome reference() {
  Outcome o;
  const GridSpec g = make_grid(257, 257, 4, 4);
  const ScalarField ref = mode(1, g), plus = mode(1, g), minus = mode(-1, g);
  const double same_in = reference_compare(plus, ref, Parity::in_phase).power;
  const double same_out = reference_compare(plus, ref, Parity::out_of_phase).power;
  const double opp_in = reference_compare(minus, ref, Parity::in_phase).power;
  const double opp_out = reference_compare(minus, ref, Parity::out_of_phase).power;
  const ScalarField sin = superpose({{minus, 1.0}, {ref, 1.0}});
  const ScalarField sout = superpose({{minus, 1.0}, {ref, -1.0}});
  const double line_in = row_max(sin, 128) / peak(sin), line_out = row_max(sout, 128) / peak(sout);
  o.detail << "(+1,+1) powers " << same_in << " : " << same_out << "; (-1,+1) powers " << opp_in << " / " << opp_out
           << "; u=0 line " << line_in << " (in) vs " << line_out << " (out)";
  o.require(std::abs(same_in - 4.0) <= 1e-9, "(+1,+1) in-phase power 4");
  o.require(same_out <= 1e-12, "(+1,+1) out-of-phase power <= 1e-12");
  o.require(std::abs(opp_in - 2.0) <= 1e-9 && std::abs(opp_out - 2.0) <= 1e-9, "(-1,+1) power 2 for both parities");
  o.require(line_in <= 1e-12 && line_out >= 0.1, "morphologies distinguished by the u=0 line");
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome stokes_profile() {
  Outcome o;
  const GridSpec g = make_grid(256, 256, 4, 4);
  const auto in = time_averaged_stokes_profile(realize(vortex_pair_state(1, 0.0), g));
  const auto out = time_averaged_stokes_profile(realize(vortex_pair_state(1, kPi), g));
  double worst23 = 0.0, worst_neg = 0.0;
  for (std::size_t i = 0; i < g.n_u(); ++i) {
    worst23 = std::max({worst23, std::abs(in[i].s2) / in[i].s0, std::abs(in[i].s3) / in[i].s0,
                        std::abs(out[i].s2) / out[i].s0, std::abs(out[i].s3) / out[i].s0});
    worst_neg = std::max(worst_neg, std::abs(out[i].s1 + in[i].s1) / in[i].s0);
  }
  // sign changes of the in-phase s1 on either side of the center
  std::vector<double> crossings;
  for (std::size_t i = 0; i + 1 < g.n_u(); ++i) {
    const double a = in[i].s1, b = in[i + 1].s1;
    if (std::signbit(a) != std::signbit(b)) crossings.push_back(g.u(i) + g.du() * a / (a - b));
  }
  o.detail << "max |s2|,|s3| / s0 = " << worst23 << ", s1 crossings at";
  for (double x : crossings) o.detail << " " << x;
  o.detail << ", max |s1_out + s1_in| / s0 = " << worst_neg;
  o.require(worst23 <= 1e-10, "s2 = s3 = 0 per row");
  o.require(crossings.size() == 2, "two s1 zero crossings");
  for (double x : crossings) o.require(std::abs(std::abs(x) - 0.5) <= 0.02, "crossing at |u| = 0.5 +- 0.02");
  o.require(worst_neg <= 1e-12, "out-of-phase s1 is the negation");
  return o;
}

// 9 -------------------------------------------------------------------------
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).generic_string()] = {std::istreambuf_iterator<char>(in),
                                                          std::istreambuf_iterator<char>()};
  }
  return out;
}

bool same_bits(const ScalarField& a, const ScalarField& b) {
  return a.grid() == b.grid() && a.y0() == b.y0() &&
         std::memcmp(a.values().data().data(), b.values().data().data(), a.values().size() * sizeof(cplx)) == 0;
}

Outcome determinism() {
  Outcome o;
  const fs::path base = fs::temp_directory_path() / "stovlab_acceptance_9";
  fs::remove_all(base);
  std::size_t files = 0;
  for (const char* fig : {"fig2", "fig3", "fig4"}) {
    std::map<std::string, std::string> runs[2];
    for (int k = 0; k < 2; ++k) {
      RunConfig cfg;
      cfg.out = base / ("run" + std::to_string(k)) / fig;
      const ScenarioResult res = std::string(fig) == "fig2"   ? cmd_fig2(cfg)
                                 : std::string(fig) == "fig3" ? cmd_fig3(cfg)
                                                              : cmd_fig4(cfg);
      o.require(res.ok(), std::string(fig) + " embedded checks");
      runs[k] = tree(cfg.out);
    }
    files += runs[0].size();
    o.require(!runs[0].empty() && runs[0] == runs[1], std::string(fig) + " trees byte-identical");
  }

  const GridSpec g = make_grid(256, 256, 4, 4);
  const ScalarField f = mode(1, g);
  write_field(f, base / "f.json");
  const ScalarField fb = std::get<ScalarField>(read_field(base / "f.json"));
  write_field(fb, base / "f2.json");
  const VectorField vf = realize(vortex_pair_state(1, 0.0), g);
  write_field(vf, base / "v.json");
  const VectorField vb = std::get<VectorField>(read_field(base / "v.json"));
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  };
  std::string h1 = slurp(base / "f.json"), h2 = slurp(base / "f2.json");
  h2.replace(h2.find("\"f2.bin\""), 8, "\"f.bin\"");
  o.require(same_bits(f, fb), "scalar round trip bit-exact");
  o.require(h1 == h2, "header reproduced");
  o.require(same_bits(vf.s_field(), vb.s_field()) && same_bits(vf.p_field(), vb.p_field()),
            "vector round trip bit-exact");
  o.detail << files << " files compared across two runs of fig2/fig3/fig4; scalar and vector dumps round-tripped";
  fs::remove_all(base);
  return o;
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"orthogonality of distinct charges", orthogonality},
    {"visibility formula", visibility_formula},
    {"superposition morphology", morphology},
    {"local polarization oracle", polarization_oracle},
    {"polarization analyzer visibilities", analyzer},
    {"spectrometer charge readout", spectrometer_charge},
    {"reference disambiguation", reference},
    {"time-averaged Stokes profile", stokes_profile},
    {"determinism and round trips", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  if (argc > 1) {
    for (int k = 1; k < argc; ++k) which.push_back(std::atoi(argv[k]));
  } else {
    for (int k = 1; k <= 9; ++k) which.push_back(k);
  }
  int failures = 0;
  for (int n : which) {
    if (n < 1 || n > 9) {
      std::cerr << "acceptance: no criterion " << n << "\n";
      return 2;
    }
    const Criterion& c = kCriteria[n - 1];
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << "criterion " << n << " (" << c.name << "): " << (o.pass ? "PASS" : "FAIL") << " - "
              << o.detail.str() << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
