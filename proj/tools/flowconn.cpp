// flowconn: batch experiment runner for connection-form recovery from
// stochastic flows.  Subcommands: christoffel, verify-identities, theorem,
// recover, contour-drift.  Exit codes: 0 pass, 1 quantitative failure,
// 2 usage/config error.

#include <flowconn/flowconn.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace flowconn;

namespace {

ConfigMap default_config() {
  return {
      {"manifold", "sphere:n=3"},
      {"curve", "quarter-great-circle"},
      {"nodes", "200"},
      {"scheme", "stratonovich-heun"},
      {"h", ""},  // empty -> min(1e-4, dt/10)
      {"dt", "0.001"},
      {"paths", "200000"},
      {"seed", "42"},
      {"mode", "oracle"},
      {"out", ""},
      {"format", "json"},
      {"antithetic", "true"},
      {"richardson", "false"},
      {"bias_constant", "10"},
      {"oracle_tol", "1e-10"},
      {"q_source", "analytic"},
      {"q_paths", "0"},
      {"points", "1000"},
      {"point", ""},
      {"direction", ""},
      {"epsilons", "0.04,0.02,0.01"},
      {"rhos", ""},
      {"field", "specialization:i=1,j=2"},
      {"cross_check", "false"},
  };
}

void load_config_file(const std::string& path, ConfigMap& cfg) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        " is not key=value");
    const std::string key = line.substr(0, eq);
    if (cfg.find(key) == cfg.end())
      throw ConfigError("unknown config key '" + key + "'");
    cfg[key] = line.substr(eq + 1);
  }
}

struct Resolved {
  ConfigMap map;

  std::string str(const std::string& k) const { return map.at(k); }
  double real(const std::string& k) const {
    return flowconn::detail::parse_real(k, map.at(k));
  }
  long integer(const std::string& k) const {
    return static_cast<long>(flowconn::detail::parse_real(k, map.at(k)));
  }
  bool flag(const std::string& k) const {
    const std::string& v = map.at(k);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + k + "' expects a boolean, got '" + v + "'");
  }

  double step_h() const {
    const std::string& v = map.at("h");
    if (v.empty()) return std::min(1e-4, real("dt") / 10.0);
    return flowconn::detail::parse_real("h", v);
  }

  Vec point(const std::string& key, int dim) const {
    const std::string& v = map.at(key);
    if (v.empty()) throw ConfigError("missing required key '" + key + "'");
    const auto parts = flowconn::detail::split(v, ',');
    if (static_cast<int>(parts.size()) != dim)
      throw ConfigError("key '" + key + "' expects " + std::to_string(dim) +
                        " comma-separated coordinates");
    Vec x(dim);
    for (int i = 0; i < dim; ++i)
      x[i] = flowconn::detail::parse_real(key, parts[i]);
    return x;
  }

  std::vector<double> ladder(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : flowconn::detail::split(map.at(key), ','))
      if (!s.empty()) out.push_back(flowconn::detail::parse_real(key, s));
    return out;
  }

  FlowConfig flow() const {
    FlowConfig f;
    f.scheme = parse_scheme(str("scheme"));
    f.h = step_h();
    if (!(f.h > 0)) throw ConfigError("h must be positive");
    return f;
  }

  TheoremOptions theorem_options() const {
    TheoremOptions t;
    const std::string mode = str("mode");
    if (mode == "oracle") t.mode = VerifyMode::oracle;
    else if (mode == "monte-carlo") t.mode = VerifyMode::monte_carlo;
    else throw ConfigError("mode must be oracle|monte-carlo");
    t.paths = static_cast<uint64_t>(integer("paths"));
    t.dt = real("dt");
    if (!(t.dt > 0)) throw ConfigError("dt must be positive");
    t.flow = flow();
    t.seed = static_cast<uint64_t>(integer("seed"));
    t.antithetic = flag("antithetic");
    t.richardson = flag("richardson");
    const std::string qs = str("q_source");
    if (qs == "analytic") t.q_source = QSource::analytic;
    else if (qs == "monte-carlo") t.q_source = QSource::monte_carlo;
    else throw ConfigError("q_source must be analytic|monte-carlo");
    t.q_paths = static_cast<uint64_t>(integer("q_paths"));
    t.bias_constant = real("bias_constant");
    t.oracle_tol = real("oracle_tol");
    return t;
  }

  /// Fully resolved map (derived defaults substituted) for report provenance.
  ConfigMap provenance() const {
    ConfigMap out = map;
    out["h"] = format_real(step_h());
    return out;
  }
};

struct CommonFlags {
  std::string config_file;
  std::map<std::string, std::string> provided;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "flat key=value config file");
    for (const auto& kv : default_config()) {
      const std::string key = kv.first;
      std::string flag = key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      auto* opt = cmd->add_option("--" + flag);
      opt->description("override config key '" + key + "'");
      opt->each([this, key](const std::string& v) { provided[key] = v; });
    }
  }

  Resolved resolve() const {
    Resolved r{default_config()};
    if (!config_file.empty()) load_config_file(config_file, r.map);
    for (const auto& [k, v] : provided) r.map[k] = v;  // flags win
    return r;
  }
};

void print_entry_table(const TheoremReport& rep) {
  std::printf("%2s %2s %12s %12s %10s %12s  %s\n", "i", "j", "lhs", "rhs",
              "rhs_se", "residual", "pass");
  for (const auto& e : rep.entries)
    std::printf("%2d %2d %12.6f %12.6f %10.2e %12.4e  %s\n", e.i, e.j, e.lhs,
                e.rhs, e.rhs_se, e.residual, e.pass ? "yes" : "NO");
}

int cmd_christoffel(const Resolved& cfg) {
  const ManifoldModel m = parse_manifold(cfg.str("manifold"));
  const Vec x = cfg.point("point", m.ambient_dim);
  const ChristoffelTensor g = christoffel(m, x);

  std::ostringstream os;
  for (const auto& [k, v] : cfg.provenance()) os << "# " << k << "=" << v << "\n";
  os << "i,j,k,value\n";
  for (int i = 0; i < m.ambient_dim; ++i)
    for (int j = 0; j < m.ambient_dim; ++j)
      for (int k = 0; k < m.ambient_dim; ++k)
        if (std::abs(g(i, j, k)) > 1e-12)
          os << i + 1 << "," << j + 1 << "," << k + 1 << ","
             << format_real(g(i, j, k)) << "\n";
  std::fputs(os.str().c_str(), stdout);
  const std::string out = cfg.str("out");
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + out + "'");
    f << os.str();
  }
  return 0;
}

int cmd_verify_identities(const Resolved& cfg) {
  const ManifoldModel m = parse_manifold(cfg.str("manifold"));
  const int points = static_cast<int>(cfg.integer("points"));
  if (points < 1) throw ConfigError("points must be >= 1");
  const IdentityReport rep =
      run_identity_suite(m, points, static_cast<uint64_t>(cfg.integer("seed")));
  std::printf("identity suite on %s (%d points, %s derivatives)\n",
              m.name.c_str(), points,
              m.derivative_kind == DerivativeKind::analytic ? "analytic" : "fd");
  for (const auto& c : rep.checks)
    std::printf("  %-26s max violation %.3e  (tol %.1e)  %s\n", c.name.c_str(),
                c.max_violation, c.tolerance, c.pass ? "pass" : "FAIL");
  return rep.all_pass ? 0 : 1;
}

int cmd_theorem(const Resolved& cfg) {
  const ManifoldModel m = parse_manifold(cfg.str("manifold"));
  const int nodes = static_cast<int>(cfg.integer("nodes"));
  const Curve c = sample_curve(m, cfg.str("curve"), nodes);
  const TheoremOptions opts = cfg.theorem_options();
  const TheoremReport rep = verify_theorem(m, c, opts, cfg.str("curve"));
  print_entry_table(rep);
  const std::string out = cfg.str("out");
  if (!out.empty()) write_report(rep, cfg.provenance(), out, cfg.str("format"));
  return rep.all_pass() ? 0 : 1;
}

int cmd_recover(const Resolved& cfg) {
  const ManifoldModel m = parse_manifold(cfg.str("manifold"));
  const int nodes = static_cast<int>(cfg.integer("nodes"));
  const TheoremOptions opts = cfg.theorem_options();
  const Vec x = cfg.point("point", m.ambient_dim);
  const std::vector<double> rhos = cfg.ladder("rhos");
  const bool loop_mode = !rhos.empty();

  std::ostringstream os;
  for (const auto& [k, v] : cfg.provenance()) os << "# " << k << "=" << v << "\n";

  const int n = m.ambient_dim;
  if (loop_mode) {
    os << "rho,area,i,j,circulation_per_area\n";
    for (double rho : rhos) {
      const LoopRecovery rec = recover_curvature_loop(m, x, rho, opts, nodes);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j)
            os << format_real(rho) << "," << format_real(rec.area) << ","
               << i + 1 << "," << j + 1 << ","
               << format_real(rec.per_area(i, j)) << "\n";
    }
  } else {
    const Vec v = cfg.point("direction", m.ambient_dim);
    const std::vector<double> epsilons = cfg.ladder("epsilons");
    if (epsilons.empty()) throw ConfigError("epsilons ladder is empty");
    os << "eps,i,j,estimate\n";
    for (double eps : epsilons) {
      const SegmentRecovery rec =
          recover_christoffel_segment(m, x, v, eps, opts, nodes);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j)
            os << format_real(eps) << "," << i + 1 << "," << j + 1 << ","
               << format_real(rec.estimate(i, j)) << "\n";
    }
  }
  std::fputs(os.str().c_str(), stdout);
  const std::string out = cfg.str("out");
  if (!out.empty()) {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw ConfigError("cannot open output file '" + out + "'");
    f << os.str();
  }
  return 0;
}

int cmd_contour_drift(const Resolved& cfg) {
  const ManifoldModel m = parse_manifold(cfg.str("manifold"));
  const int n = m.ambient_dim;
  const int nodes = static_cast<int>(cfg.integer("nodes"));
  const Curve c = sample_curve(m, cfg.str("curve"), nodes);

  const std::string field = cfg.str("field");
  const auto colon = field.find(':');
  const std::string head = field.substr(0, colon);
  auto kv = flowconn::detail::parse_kv(
      colon == std::string::npos ? "" : field.substr(colon + 1));

  double value = 0.0;
  std::optional<double> reference;
  if (head == "specialization") {
    int i = 1, j = 2;
    if (auto it = kv.find("i"); it != kv.end()) {
      i = flowconn::detail::parse_int("i", it->second);
      kv.erase(it);
    }
    if (auto it = kv.find("j"); it != kv.end()) {
      j = flowconn::detail::parse_int("j", it->second);
      kv.erase(it);
    }
    if (!kv.empty())
      throw ConfigError("unknown field parameter '" + kv.begin()->first + "'");
    if (i < 1 || i > n || j < 1 || j > n)
      throw ConfigError("field indices out of range 1.." + std::to_string(n));
    value = contour_ito_drift(area_functional_field(n, i - 1, j - 1),
                              manifold_drift_field(m),
                              manifold_projection_field(m), c);
    if (cfg.flag("cross_check"))
      reference = oracle_psi_derivative(m, c)(i - 1, j - 1);
  } else if (head == "constant") {
    if (!kv.empty())
      throw ConfigError("field 'constant' takes no parameters");
    value = contour_ito_drift(constant_field(Vec::Ones(n)), zero_drift(n),
                              identity_diffusion(n), c);
    if (cfg.flag("cross_check")) reference = 0.0;
  } else if (head == "gradient") {
    if (!kv.empty())
      throw ConfigError("field 'gradient' takes no parameters");
    value = contour_ito_drift(position_field(n), zero_drift(n),
                              identity_diffusion(n), c);
    if (cfg.flag("cross_check")) reference = 0.0;
  } else {
    throw ConfigError("unknown field '" + head +
                      "' (use specialization:i=..,j=..|constant|gradient)");
  }

  std::printf("contour drift = %s\n", format_real(value).c_str());
  if (reference) {
    const double diff = std::abs(value - *reference);
    std::printf("reference     = %s  |diff| = %.3e\n",
                format_real(*reference).c_str(), diff);
    return diff <= 1e-10 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"connection-form recovery from stochastic flows of Brownian motion"};
  app.set_help_flag("--help", "print help");  // frees -h for the step-size flag
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommonFlags flags;
    int (*run)(const Resolved&);
  };
  std::vector<Sub> subs;
  subs.reserve(8);  // attach() lambdas capture addresses into the vector
  auto add = [&](const std::string& name, const std::string& desc,
                 int (*run)(const Resolved&)) {
    Sub& s = subs.emplace_back();
    s.cmd = app.add_subcommand(name, desc);
    s.cmd->set_help_flag("--help", "print help");
    s.run = run;
    s.flags.attach(s.cmd);
  };

  add("christoffel", "print the nonzero Christoffel symbols at a point",
      cmd_christoffel);
  add("verify-identities",
      "check the projector/connection identities at random points",
      cmd_verify_identities);
  add("theorem", "verify the connection-form identity on a curve", cmd_theorem);
  add("recover",
      "recover connection data from shrinking segments (--direction) or loops (--rhos)",
      cmd_recover);
  add("contour-drift",
      "evaluate the contour drift functional for a catalog field",
      cmd_contour_drift);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (auto& s : subs)
      if (s.cmd->parsed()) return s.run(s.flags.resolve());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const PointOffManifoldError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
