// aperiodic_lab: build disk towers, verify them, branch them, draw them.
//
// Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 for bad
// configuration, unreadable or malformed input, and infeasible builds.

#include "aperiodic/serialize.hpp"
#include "aperiodic/tower.hpp"
#include "aperiodic/verifier.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace aperiodic;

namespace {

constexpr int kPass = 0, kFail = 1, kBadInput = 2;
constexpr int kMaxWordDepth = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  int dim = 3;
  int depth = 3;
  std::vector<int> branching{3};
  std::int64_t m1 = 2;
  std::vector<double> delta;  // explicit schedule, overrides the ratio
  double delta_ratio = 0.5;
  std::int64_t m0 = 1;
  double tol = 1e-9;
  int horizon = 0;
  unsigned seed = 1;
  std::string out;

  void validate() const {
    if (dim != 2 && dim != 3) throw ConfigError("--dim must be 2 or 3");
    if (depth < 1) throw ConfigError("--depth must be at least 1");
    if (branching.empty()) throw ConfigError("--branch needs at least one factor");
    for (int b : branching)
      if (b < 2) throw ConfigError("branching factors must be at least 2");
    if (m1 < 1 || m0 < 1) throw ConfigError("--m1 and --m0 must be positive");
    if (!delta.empty()) {
      if (static_cast<int>(delta.size()) != depth)
        throw ConfigError("--delta lists " + std::to_string(delta.size()) + " values for depth " + std::to_string(depth));
      for (std::size_t i = 0; i < delta.size(); ++i) {
        if (!(delta[i] > 0)) throw ConfigError("delta values must be positive");
        if (i > 0 && !(delta[i] < delta[i - 1])) throw ConfigError("delta schedule must be strictly decreasing");
      }
    }
    if (!(delta_ratio > 0 && delta_ratio < 1)) throw ConfigError("--delta-ratio must lie in (0, 1)");
    if (!(tol > 0)) throw ConfigError("--tol must be positive");
    if (horizon < 0) throw ConfigError("--horizon must be non-negative");
  }
};

fs::path output_dir(const RunConfig& cfg) {
  fs::path p = ".";
  if (!cfg.out.empty())
    p = cfg.out;
  else if (const char* env = std::getenv("APERIODIC_LAB_OUT"); env && *env)
    p = env;
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + p.string() + ": " + ec.message());
  return p;
}

Tower build_from(const RunConfig& cfg) {
  if (cfg.delta.empty()) {
    BuildConfig b;
    b.dim = cfg.dim;
    b.depth = cfg.depth;
    b.branching = cfg.branching;
    b.m1 = cfg.m1;
    b.delta_ratio = cfg.delta_ratio;
    b.m0 = cfg.m0;
    return build_tower(b);
  }
  SaddleModel m = cfg.dim == 3 ? make_model_3d(false) : make_model_2d(false);
  Tower t = seed_stage(m, cfg.m1, cfg.delta.front());
  for (int n = 1; n < cfg.depth; ++n) {
    auto k = std::min<std::size_t>(static_cast<std::size_t>(n - 1), cfg.branching.size() - 1);
    t = refine(t, cfg.branching[k], cfg.delta[static_cast<std::size_t>(n)], cfg.m0);
  }
  return t;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void print_report(const VerdictReport& r) {
  std::printf("%s: %s\n", r.subject.c_str(), r.all_pass() ? "pass" : "FAIL");
  for (const auto& v : r.items) {
    std::printf("  %-4s %-24s margin %.6g\n", v.pass ? "ok" : "FAIL", v.id.c_str(), v.margin);
    if (!v.pass && !v.witness.empty()) std::printf("       witness: %s\n", v.witness.c_str());
  }
}

// ----- build ----------------------------------------------------------------

int cmd_build(const RunConfig& cfg) {
  cfg.validate();
  fs::path dir = output_dir(cfg);
  Tower t = build_from(cfg);
  TowerCheckOptions opt;
  opt.orbit_tol = cfg.tol;
  auto rep = check_theorem21(t, opt);
  const auto& bud = rep.at(check::budget);

  write_file((dir / "tower.json").string(), dump(to_json(t)));
  write_file((dir / "build_report.json").string(), dump(to_json(rep)));
  write_file((dir / "spectra.csv").string(), spectra_csv(t));
  write_file((dir / "cantor.csv").string(), cantor_csv(t));

  std::printf("%5s %8s %12s %10s %10s %10s %10s %10s\n", "stage", "m_n", "max diam", "chi-", "chi_c", "chi+",
              "Jf margin", "inv margin");
  for (const auto& s : t.stages) {
    const auto& v = s.cert.spectrum.values;
    std::string key = "stage" + std::to_string(s.level);
    char centre[32] = "-";
    if (v.size() == 3) std::snprintf(centre, sizeof centre, "%.4f", v[1]);
    std::printf("%5d %8lld %12.4e %10.4f %10s %10.4f %10.4f %10.4f\n", s.level, static_cast<long long>(s.period),
                max_diameter(s), v.back(), centre, v.front(), 1 - bud.value(key + "_max_log_det"),
                2 - bud.value(key + "_max_log_inv_norm"));
  }
  print_report(rep);
  std::printf("wrote %s\n", (dir / "tower.json").string().c_str());
  return rep.all_pass() ? kPass : kFail;
}

// ----- verify ---------------------------------------------------------------

// a corrupted dump can send an orbit out of the domain; that is a failed
// verdict, not an input error
template <class F>
VerdictReport guarded_report(const char* subject, F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    VerdictReport r;
    r.subject = subject;
    CheckVerdict v;
    v.id = "evaluation";
    v.margin = -1;
    v.witness = e.what();
    r.add(v);
    return r;
  }
}

int cmd_verify(const RunConfig& cfg, const std::string& path) {
  cfg.validate();
  fs::path dir = output_dir(cfg);
  Tower t = tower_from_json(parse_json(read_file(path)));
  if (t.stages.empty()) throw FormatError("tower has no stages to verify");

  TowerCheckOptions opt;
  opt.orbit_tol = cfg.tol;
  auto thm = check_theorem21(t, opt);
  Json out;
  out["tower"] = path;
  out["theorem"] = to_json(thm);
  bool pass = thm.all_pass();
  print_report(thm);

  if (t.depth() >= 2) {
    auto semi = guarded_report("exponent chain", [&] { return check_semicontinuity_chain(t); });
    out["semicontinuity"] = to_json(semi);
    pass = pass && semi.all_pass();
    print_report(semi);
  } else {
    out["semicontinuity"] = nullptr;
    std::printf("exponent chain: skipped, a single stage has no chain\n");
  }

  auto p22 = prop22_from_tower(t, thm);
  out["prop22"] = to_json(p22);
  pass = pass && p22.pass;
  std::printf("centre exponent: %s (%s)\n", p22.pass ? "pass" : "FAIL", p22.reason.c_str());

  auto weak = guarded_report("weak-* convergence", [&] { return check_weak_star(t); });
  out["weak_star"] = to_json(weak);
  pass = pass && weak.all_pass();
  print_report(weak);

  TrivialityOptions topt;
  topt.horizon = cfg.horizon;
  topt.seed = cfg.seed;
  auto triv = guarded_report("trivial dynamics", [&] { return check_triviality(t, topt); });
  out["triviality"] = to_json(triv);
  pass = pass && triv.all_pass();
  print_report(triv);

  out["verdict"] = pass ? "pass" : "fail";
  write_file((dir / "verdict.json").string(), dump(out));
  std::printf("verdict: %s, wrote %s\n", pass ? "pass" : "FAIL", (dir / "verdict.json").string().c_str());
  return pass ? kPass : kFail;
}

// ----- branch ---------------------------------------------------------------

int cmd_branch(const RunConfig& cfg, int word_depth) {
  cfg.validate();
  if (word_depth < 0) throw ConfigError("--word-depth must be non-negative");
  if (word_depth > kMaxWordDepth)
    throw ConfigError("--word-depth is capped at " + std::to_string(kMaxWordDepth) + "; one more doubles the " +
                      std::to_string(1 << kMaxWordDepth) + " leaves");
  fs::path dir = output_dir(cfg);
  BuildConfig seed_cfg;
  seed_cfg.dim = cfg.dim;
  seed_cfg.depth = 1;
  seed_cfg.m1 = cfg.m1;
  Tower seed = build_tower(seed_cfg);
  auto leaves = branch_forest(seed, word_depth, cfg.branching.front(), cfg.delta_ratio, cfg.m0);

  Json forest;
  forest["word_depth"] = word_depth;
  forest["leaves"] = Json::array();
  bool pass = true;
  for (const auto& leaf : leaves) {
    auto rep = check_theorem21(leaf);
    std::string name = "leaf_" + (leaf.word.empty() ? std::string("root") : leaf.word) + ".json";
    write_file((dir / name).string(), dump(to_json(leaf)));
    Json lj;
    lj["word"] = leaf.word;
    lj["file"] = name;
    lj["schedule"] = to_json(conjugacy_from_tower(leaf));
    lj["theorem"] = rep.all_pass() ? "pass" : "fail";
    forest["leaves"].push_back(lj);
    pass = pass && rep.all_pass();
    std::printf("leaf %-6s depth %d  %s\n", leaf.word.empty() ? "-" : leaf.word.c_str(), leaf.depth(),
                rep.all_pass() ? "pass" : "FAIL");
  }

  const std::size_t n = leaves.size();
  Json sep = Json::array();
  int pairs = 0, disjoint = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        row.push_back(nullptr);
        continue;
      }
      double g = class_separation(leaves[i], leaves[j]);
      row.push_back(g);
      if (j > i) {
        ++pairs;
        if (g > 0) ++disjoint;
      }
    }
    sep.push_back(row);
  }
  forest["pairs"] = pairs;
  forest["disjoint_pairs"] = disjoint;
  forest["separation"] = sep;
  pass = pass && disjoint == pairs;
  forest["verdict"] = pass ? "pass" : "fail";
  write_file((dir / "forest.json").string(), dump(forest));
  std::printf("%zu leaves, %d of %d pairs disjoint, wrote %s\n", n, disjoint, pairs,
              (dir / "forest.json").string().c_str());
  return pass ? kPass : kFail;
}

// ----- plot -----------------------------------------------------------------

std::pair<int, int> parse_plane(const std::string& p) {
  if (p == "xy") return {0, 1};
  if (p == "xz") return {0, 2};
  if (p == "yz") return {1, 2};
  throw ConfigError("--plane must be xy, xz or yz");
}

std::string svg(const Tower& t, std::pair<int, int> plane) {
  const auto [a, b] = t.dim == 2 ? std::pair<int, int>{0, 1} : plane;
  if (std::max(a, b) >= std::max(t.dim, 2)) throw ConfigError("projection plane outside the dimension");
  const double W = 800, pad = 40;
  double half = 1;
  if (!t.stages.empty()) {
    half = 0;
    for (const auto& d : t.stage(1).attracting.disks)
      half = std::max({half, std::abs(d.center(a)) + d.radius, std::abs(d.center(b)) + d.radius});
    half *= 1.05;
  }
  const double k = (W - 2 * pad) / (2 * half);
  auto px = [&](double x) { return pad + (x + half) * k; };
  auto py = [&](double y) { return W - pad - (y + half) * k; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os.precision(10);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << W << "\" viewBox=\"0 0 " << W
     << ' ' << W << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const char* names = "xyz";
  os << "<g stroke=\"#999\" stroke-width=\"1\">\n"
     << "<line x1=\"" << pad << "\" y1=\"" << py(0) << "\" x2=\"" << W - pad << "\" y2=\"" << py(0) << "\"/>\n"
     << "<line x1=\"" << px(0) << "\" y1=\"" << pad << "\" x2=\"" << px(0) << "\" y2=\"" << W - pad << "\"/>\n"
     << "</g>\n";
  os << "<text x=\"" << W - pad << "\" y=\"" << py(0) - 6 << "\" font-size=\"14\">" << names[a] << "</text>\n";
  os << "<text x=\"" << px(0) + 6 << "\" y=\"" << pad << "\" font-size=\"14\">" << names[b] << "</text>\n";

  for (const auto& s : t.stages) {
    const char* col = colors[(s.level - 1) % 6];
    os << "<g class=\"stage" << s.level << "\" stroke=\"" << col << "\" fill=\"none\" stroke-width=\"1\">\n";
    for (const auto& d : s.attracting.disks)
      os << "<circle cx=\"" << px(d.center(a)) << "\" cy=\"" << py(d.center(b)) << "\" r=\"" << d.radius * k
         << "\"/>\n";
    // p_n visits the centres in index order
    os << "<polyline stroke-dasharray=\"4 3\" points=\"";
    for (std::size_t i = 0; i <= s.centers.size(); ++i) {
      const auto& c = s.centers[i % s.centers.size()];
      os << px(c(a)) << ',' << py(c(b)) << ' ';
    }
    os << "\"/>\n</g>\n";
  }
  if (!t.stages.empty()) {
    os << "<g fill=\"black\">\n";
    for (const auto& x : limit_set_sample(t, t.stages.back().period))
      os << "<rect x=\"" << px(x(a)) - 1.5 << "\" y=\"" << py(x(b)) - 1.5 << "\" width=\"3\" height=\"3\"/>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

int cmd_plot(const RunConfig& cfg, const std::string& path, const std::string& plane) {
  auto pl = parse_plane(plane);
  fs::path dir = output_dir(cfg);
  Tower t = tower_from_json(parse_json(read_file(path)));
  fs::path file = dir / "tower.svg";
  write_file(file.string(), svg(t, pl));
  std::printf("wrote %s\n", file.string().c_str());
  return kPass;
}

void add_common(CLI::App* c, RunConfig& cfg) {
  c->add_option("--out", cfg.out, "output directory (default $APERIODIC_LAB_OUT or .)");
  c->add_option("--tol", cfg.tol, "orbit tolerance of the certificate check");
}

void add_build_options(CLI::App* c, RunConfig& cfg) {
  c->add_option("--dim", cfg.dim, "dimension, 2 or 3");
  c->add_option("--branch", cfg.branching, "branching factor per refinement, the last one repeats");
  c->add_option("--delta-ratio", cfg.delta_ratio, "diameter bound of each stage relative to the last");
  c->add_option("--m0", cfg.m0, "the new period is a multiple of m0 times the old one");
  c->add_option("--m1", cfg.m1, "period of the seed stage");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  CLI::App app{"build, verify, branch and plot aperiodic disk towers"};
  app.require_subcommand(1);

  auto* build = app.add_subcommand("build", "build a tower and dump it");
  add_common(build, cfg);
  add_build_options(build, cfg);
  build->add_option("--depth", cfg.depth, "number of stages");
  build->add_option("--delta", cfg.delta, "explicit strictly decreasing diameter schedule, one value per stage");

  std::string dump_path;
  auto* verify = app.add_subcommand("verify", "re-measure a tower dump");
  add_common(verify, cfg);
  verify->add_option("dump", dump_path, "tower JSON")->required();
  verify->add_option("--horizon", cfg.horizon, "orbit horizon of the triviality probes (default 10 m_K)");
  verify->add_option("--seed", cfg.seed, "seed of the sampled probes");

  int word_depth = 2;
  auto* branch = app.add_subcommand("branch", "grow every binary word of towers from one seed");
  add_common(branch, cfg);
  add_build_options(branch, cfg);
  branch->add_option("--word-depth", word_depth, "length of the branch words (at most 4)");

  std::string plane = "xy";
  auto* plot = app.add_subcommand("plot", "draw a tower dump as SVG");
  add_common(plot, cfg);
  plot->add_option("dump", dump_path, "tower JSON")->required();
  plot->add_option("--plane", plane, "projection plane for 3D towers: xy, xz or yz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*build) return cmd_build(cfg);
    if (*verify) return cmd_verify(cfg, dump_path);
    if (*branch) return cmd_branch(cfg, word_depth);
    if (*plot) return cmd_plot(cfg, dump_path, plane);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
  } catch (const FormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
  } catch (const TowerError& e) {
    std::fprintf(stderr, "build failed: %s\n", e.what());
  } catch (const ModelError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
  }
  return kBadInput;
}
