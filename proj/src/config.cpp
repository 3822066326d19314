#include "nsmc/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <random>
#include <sstream>
#include <type_traits>

#include "nsmc/errors.hpp"
#include "nsmc/io.hpp"

namespace nsmc {

const char* to_string(Subcommand s) {
  switch (s) {
    case Subcommand::Solve: return "solve";
    case Subcommand::Poisson: return "poisson";
    case Subcommand::Parabolic: return "parabolic";
    case Subcommand::Apriori: return "apriori";
    case Subcommand::Validate: return "validate";
    case Subcommand::Bench: return "bench";
  }
  return "?";
}

Subcommand subcommand_from_string(const std::string& s) {
  for (auto c : {Subcommand::Solve, Subcommand::Poisson, Subcommand::Parabolic, Subcommand::Apriori,
                 Subcommand::Validate, Subcommand::Bench}) {
    if (s == to_string(c)) return c;
  }
  throw ConfigError("unknown subcommand '" + s + "'");
}

std::vector<Vec3> PointSet::resolve(std::uint64_t seed) const {
  if (!explicit_points.empty()) return explicit_points;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double x = u(rng), y = u(rng), z = u(rng);
    out.emplace_back(x, y, z);
  }
  return out;
}

namespace {

std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "";
  return " (line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1) + ")";
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& what) { throw ConfigError(what + where(n)); }

void require_map(const YAML::Node& n, const std::string& name) {
  if (!n.IsMap()) fail(n, "'" + name + "' must be a mapping");
}

void check_keys(const YAML::Node& n, const std::string& name, std::initializer_list<const char*> allowed) {
  require_map(n, name);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(kv.first, "unknown key '" + key + "' in '" + name + "'");
  }
}

template <class T>
T scalar(const YAML::Node& n, const std::string& name) {
  if (!n.IsScalar()) fail(n, "'" + name + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, "'" + name + "' has an invalid value '" + n.Scalar() + "'");
  }
}

template <class T>
void read(const YAML::Node& parent, const char* key, const std::string& scope, T& out) {
  if (const auto n = parent[key]) out = scalar<T>(n, scope + "." + key);
}

Vec3 vec3(const YAML::Node& n, const std::string& name) {
  if (!n.IsSequence() || n.size() != 3) fail(n, "'" + name + "' must be a list of 3 numbers");
  return {scalar<double>(n[0], name), scalar<double>(n[1], name), scalar<double>(n[2], name)};
}

void read_vec(const YAML::Node& parent, const char* key, const std::string& scope, Vec3& out) {
  if (const auto n = parent[key]) out = vec3(n, scope + "." + key);
}

std::string family_of(const YAML::Node& n, const std::string& name) {
  require_map(n, name);
  const auto f = n["family"];
  if (!f) fail(n, "'" + name + "' needs a 'family' key");
  return scalar<std::string>(f, name + ".family");
}

VectorField vector_field(const YAML::Node& n, const std::string& name, std::string* family_out = nullptr) {
  const auto fam = family_of(n, name);
  if (family_out) *family_out = fam;
  if (fam == "beltrami") {
    check_keys(n, name, {"family", "a", "b", "c", "nu"});
    Beltrami b;
    read(n, "a", name, b.a);
    read(n, "b", name, b.b);
    read(n, "c", name, b.c);
    read(n, "nu", name, b.nu);
    return VectorField(b);
  }
  if (fam == "taylor_green") {
    check_keys(n, name, {"family", "nu"});
    TaylorGreen tg;
    read(n, "nu", name, tg.nu);
    return VectorField(tg);
  }
  if (fam == "constant") {
    check_keys(n, name, {"family", "value"});
    ConstantVector c;
    read_vec(n, "value", name, c.value);
    return VectorField(c);
  }
  if (fam == "zero") {
    check_keys(n, name, {"family"});
    return VectorField(ZeroVector{});
  }
  if (fam == "rigid_rotation") {
    check_keys(n, name, {"family", "omega"});
    RigidRotation r;
    read_vec(n, "omega", name, r.omega);
    return VectorField(r);
  }
  if (fam == "linear") {
    check_keys(n, name, {"family", "matrix", "offset"});
    LinearVector l;
    if (const auto m = n["matrix"]) {
      if (!m.IsSequence() || m.size() != 3) fail(m, "'" + name + ".matrix' must be 3 rows of 3 numbers");
      for (int i = 0; i < 3; ++i) l.matrix.row(i) = vec3(m[static_cast<std::size_t>(i)], name + ".matrix").transpose();
    }
    read_vec(n, "offset", name, l.offset);
    return VectorField(l);
  }
  if (fam == "gaussian_bump") {
    check_keys(n, name, {"family", "center", "width", "amplitude"});
    GaussianBumpVector g;
    read_vec(n, "center", name, g.center);
    read(n, "width", name, g.width);
    read_vec(n, "amplitude", name, g.amplitude);
    return VectorField(g);
  }
  fail(n["family"], "unknown vector family '" + fam + "' in '" + name + "'");
}

ScalarField scalar_field(const YAML::Node& n, const std::string& name) {
  const auto fam = family_of(n, name);
  if (fam == "zero") {
    check_keys(n, name, {"family"});
    return ScalarField(ZeroScalar{});
  }
  if (fam == "constant") {
    check_keys(n, name, {"family", "value"});
    ConstantScalar c;
    read(n, "value", name, c.value);
    return ScalarField(c);
  }
  if (fam == "cosine_mode") {
    check_keys(n, name, {"family", "wavevector", "amplitude", "phase"});
    CosineMode c;
    read_vec(n, "wavevector", name, c.wavevector);
    read(n, "amplitude", name, c.amplitude);
    read(n, "phase", name, c.phase);
    return ScalarField(c);
  }
  if (fam == "gaussian_bump") {
    check_keys(n, name, {"family", "center", "width", "amplitude"});
    GaussianBump g;
    read_vec(n, "center", name, g.center);
    read(n, "width", name, g.width);
    read(n, "amplitude", name, g.amplitude);
    return ScalarField(g);
  }
  if (fam == "uniform_ball") {
    check_keys(n, name, {"family", "center", "radius", "density"});
    UniformBall b;
    read_vec(n, "center", name, b.center);
    read(n, "radius", name, b.radius);
    read(n, "density", name, b.density);
    return ScalarField(b);
  }
  fail(n["family"], "unknown scalar family '" + fam + "' in '" + name + "'");
}

Domain domain(const YAML::Node& n) {
  require_map(n, "problem.domain");
  std::string type = "periodic_cube";
  read(n, "type", "problem.domain", type);
  if (type == "periodic_cube") {
    check_keys(n, "problem.domain", {"type", "side", "grid_n"});
    PeriodicCube c;
    read(n, "side", "problem.domain", c.side);
    read(n, "grid_n", "problem.domain", c.grid_n);
    return c;
  }
  if (type == "whole_space") {
    check_keys(n, "problem.domain", {"type", "support_radius"});
    WholeSpace w;
    read(n, "support_radius", "problem.domain", w.support_radius);
    return w;
  }
  fail(n["type"], "unknown domain type '" + type + "'");
}

PointSet points(const YAML::Node& n, const std::string& name) {
  PointSet p;
  if (n.IsSequence()) {
    for (const auto& e : n) p.explicit_points.push_back(vec3(e, name));
    if (p.explicit_points.empty()) fail(n, "'" + name + "' must not be empty");
    return p;
  }
  check_keys(n, name, {"count", "lo", "hi"});
  read(n, "count", name, p.count);
  read(n, "lo", name, p.lo);
  read(n, "hi", name, p.hi);
  if (p.count < 1) fail(n, "'" + name + ".count' must be >= 1");
  if (!(p.hi > p.lo)) fail(n, "'" + name + "' needs hi > lo");
  return p;
}

// Range errors name the field; the line is attached when the key exists.
void positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(field) + " must be finite and > 0");
}

}  // namespace

RunConfig parse_config(const std::string& text, std::optional<Subcommand> subcommand) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("malformed YAML at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  cfg.source_text = text;
  if (subcommand) cfg.subcommand = *subcommand;
  if (root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  check_keys(root, "config", {"subcommand", "seed", "output", "problem", "solver", "poisson", "parabolic", "apriori", "bench"});

  if (const auto n = root["subcommand"]) {
    const auto name = scalar<std::string>(n, "subcommand");
    try {
      if (!subcommand) cfg.subcommand = subcommand_from_string(name);
    } catch (const ConfigError& e) {
      fail(n, e.what());
    }
  }
  read(root, "seed", "config", cfg.seed);
  if (const auto n = root["output"]) cfg.output = scalar<std::string>(n, "output");

  if (const auto p = root["problem"]) {
    check_keys(p, "problem", {"field", "sigma", "t_final", "domain"});
    if (const auto f = p["field"]) cfg.problem.u0 = vector_field(f, "problem.field", &cfg.field_family);
    read(p, "sigma", "problem", cfg.problem.sigma);
    read(p, "t_final", "problem", cfg.problem.t_final);
    if (const auto d = p["domain"]) cfg.problem.domain = domain(d);
  }

  if (const auto s = root["solver"]) {
    check_keys(s, "solver", {"grid_n", "time_grid_n", "dt", "n_paths", "tol", "k_max", "inner_tol", "inner_max",
                             "backend", "antithetic", "q", "m"});
    auto& c = cfg.solver;
    read(s, "grid_n", "solver", c.grid_n);
    read(s, "time_grid_n", "solver", c.time_grid_n);
    read(s, "dt", "solver", c.dt);
    read(s, "n_paths", "solver", c.n_paths);
    read(s, "tol", "solver", c.tol);
    read(s, "k_max", "solver", c.k_max);
    read(s, "inner_tol", "solver", c.inner_tol);
    read(s, "inner_max", "solver", c.inner_max);
    read(s, "antithetic", "solver", c.antithetic);
    read(s, "q", "solver", c.q);
    read(s, "m", "solver", c.m);
    if (const auto b = s["backend"]) {
      try {
        c.backend = backend_from_string(scalar<std::string>(b, "solver.backend"));
      } catch (const ConfigError& e) {
        fail(b, e.what());
      }
    }
  }

  if (const auto s = root["poisson"]) {
    check_keys(s, "poisson", {"gamma", "t", "points", "n_paths", "dt_bm", "t_max", "antithetic", "gradient"});
    auto& r = cfg.poisson;
    if (const auto g = s["gamma"]) r.gamma = scalar_field(g, "poisson.gamma");
    read(s, "t", "poisson", r.t);
    if (const auto pts = s["points"]) r.points = points(pts, "poisson.points");
    read(s, "n_paths", "poisson", r.mc.n_paths);
    read(s, "dt_bm", "poisson", r.mc.dt_bm);
    read(s, "t_max", "poisson", r.mc.t_max);
    read(s, "antithetic", "poisson", r.mc.antithetic);
    read(s, "gradient", "poisson", r.gradient);
  }

  if (const auto s = root["parabolic"]) {
    check_keys(s, "parabolic", {"drift", "f0", "source", "t_start", "points", "dt", "n_paths"});
    auto& r = cfg.parabolic;
    if (const auto f = s["drift"]) r.drift = vector_field(f, "parabolic.drift");
    if (const auto f = s["f0"]) r.f0 = scalar_field(f, "parabolic.f0");
    if (const auto f = s["source"]) r.source = scalar_field(f, "parabolic.source");
    read(s, "t_start", "parabolic", r.t_start);
    if (const auto pts = s["points"]) r.points = points(pts, "parabolic.points");
    read(s, "dt", "parabolic", r.dt);
    read(s, "n_paths", "parabolic", r.n_paths);
  }

  if (const auto s = root["apriori"]) {
    check_keys(s, "apriori", {"K01", "beta0", "C_qm", "C1_qm", "t", "ds"});
    auto& r = cfg.apriori;
    read(s, "K01", "apriori", r.params.K01);
    read(s, "beta0", "apriori", r.params.beta0);
    read(s, "C_qm", "apriori", r.params.C_qm);
    read(s, "C1_qm", "apriori", r.params.C1_qm);
    read(s, "t", "apriori", r.t);
    read(s, "ds", "apriori", r.ds);
  }

  if (const auto s = root["bench"]) {
    check_keys(s, "bench", {"n_paths", "n_points"});
    if (const auto n = s["n_paths"]) {
      if (!n.IsSequence() || n.size() == 0) fail(n, "'bench.n_paths' must be a non-empty list");
      cfg.bench.n_paths.clear();
      for (const auto& e : n) cfg.bench.n_paths.push_back(scalar<int>(e, "bench.n_paths"));
    }
    read(s, "n_points", "bench", cfg.bench.n_points);
  }

  // Attach the line of the offending key to range errors where possible.
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* section : {"solver", "problem", "poisson", "parabolic", "apriori", "bench"}) {
      const auto s = root[section];
      if (!s || !s.IsMap()) continue;
      for (const auto& kv : s) {
        const auto key = kv.first.as<std::string>();
        if (msg.rfind(std::string(section) + "." + key + " ", 0) == 0) throw ConfigError(msg + where(kv.first));
      }
    }
    throw;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::optional<Subcommand> subcommand) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), subcommand);
}

double predicted_velocity_std_err(const NSProblem& prob, const PicardConfig& cfg, double k) {
  const PeriodicGrid grid(cfg.grid_n, std::get<PeriodicCube>(prob.domain).side);
  double g = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) g = std::max(g, prob.u0.gradient(0.0, grid.point(i)).norm());
  return k * prob.sigma * std::sqrt(prob.t_final) * g / std::sqrt(static_cast<double>(cfg.n_paths));
}

void RunConfig::validate() const {
  auto rethrow_as = [](const char* prefix, auto&& body) {
    try {
      body();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(prefix) + e.what());
    }
  };
  switch (subcommand) {
    case Subcommand::Solve: {
      rethrow_as("solver.", [&] { solver.validate(); });
      if (!is_periodic(problem.domain)) throw ConfigError("problem.domain must be periodic_cube for solve");
      positive(problem.t_final, "problem.t_final");
      if (!(problem.sigma >= 0.0) || !std::isfinite(problem.sigma)) throw ConfigError("problem.sigma must be >= 0");
      problem.validate(solver.grid_n);
      if (problem.sigma > 0.0) {
        const double se = predicted_velocity_std_err(problem, solver);
        if (solver.tol < 3.0 * se) {
          throw ConfigError("solver.tol " + std::to_string(solver.tol) + " is below 3x the predicted velocity std_err " +
                            std::to_string(se) + " for n_paths = " + std::to_string(solver.n_paths));
        }
      }
      break;
    }
    case Subcommand::Poisson:
      rethrow_as("poisson.", [&] { poisson.mc.validate(); });
      if (!(poisson.t >= 0.0)) throw ConfigError("poisson.t must be >= 0");
      nsmc::validate(problem.domain);
      break;
    case Subcommand::Parabolic:
      positive(parabolic.dt, "parabolic.dt");
      if (parabolic.n_paths < 1) throw ConfigError("parabolic.n_paths must be >= 1");
      if (!(parabolic.t_start >= 0.0) || !(parabolic.t_start <= problem.t_final))
        throw ConfigError("parabolic.t_start must lie in [0, problem.t_final]");
      positive(problem.t_final, "problem.t_final");
      if (!(problem.sigma >= 0.0) || !std::isfinite(problem.sigma)) throw ConfigError("problem.sigma must be >= 0");
      break;
    case Subcommand::Apriori:
      rethrow_as("", [&] { apriori.params.validate(); });
      if (!(apriori.t >= 0.0) || !std::isfinite(apriori.t)) throw ConfigError("apriori.t must be finite and >= 0");
      positive(apriori.ds, "apriori.ds");
      break;
    case Subcommand::Validate:
      break;
    case Subcommand::Bench:
      for (int n : bench.n_paths) {
        if (n < 2) throw ConfigError("bench.n_paths entries must be >= 2");
      }
      if (bench.n_points < 1) throw ConfigError("bench.n_points must be >= 1");
      rethrow_as("solver.", [&] { solver.validate(); });
      if (!is_periodic(problem.domain)) throw ConfigError("problem.domain must be periodic_cube for bench");
      break;
  }
}

namespace {

struct Emit {
  YAML::Emitter& out;

  void num(const char* key, double v) { out << YAML::Key << key << YAML::Value << format_double(v); }
  void vec(const char* key, const Vec3& v) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq << format_double(v.x())
        << format_double(v.y()) << format_double(v.z()) << YAML::EndSeq;
  }
  void family(const char* name) { out << YAML::Key << "family" << YAML::Value << name; }

  void vector_field(const char* key, const VectorField& f) {
    const auto* fam = f.family();
    if (!fam) throw ConfigError(std::string(key) + ": sampled fields have no YAML form");
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Beltrami>) {
            family("beltrami");
            num("a", v.a);
            num("b", v.b);
            num("c", v.c);
            num("nu", v.nu);
          } else if constexpr (std::is_same_v<T, TaylorGreen>) {
            family("taylor_green");
            num("nu", v.nu);
          } else if constexpr (std::is_same_v<T, ConstantVector>) {
            family("constant");
            vec("value", v.value);
          } else if constexpr (std::is_same_v<T, ZeroVector>) {
            family("zero");
          } else if constexpr (std::is_same_v<T, RigidRotation>) {
            family("rigid_rotation");
            vec("omega", v.omega);
          } else if constexpr (std::is_same_v<T, LinearVector>) {
            family("linear");
            out << YAML::Key << "matrix" << YAML::Value << YAML::BeginSeq;
            for (int i = 0; i < 3; ++i) {
              out << YAML::Flow << YAML::BeginSeq;
              for (int j = 0; j < 3; ++j) out << format_double(v.matrix(i, j));
              out << YAML::EndSeq;
            }
            out << YAML::EndSeq;
            vec("offset", v.offset);
          } else if constexpr (std::is_same_v<T, GaussianBumpVector>) {
            family("gaussian_bump");
            vec("center", v.center);
            num("width", v.width);
            vec("amplitude", v.amplitude);
          } else {
            throw ConfigError(std::string(key) + ": custom fields have no YAML form");
          }
        },
        *fam);
    out << YAML::EndMap;
  }

  void scalar_field(const char* key, const ScalarField& f) {
    const auto* fam = f.family();
    if (!fam) throw ConfigError(std::string(key) + ": sampled fields have no YAML form");
    out << YAML::Key << key << YAML::Value << YAML::BeginMap;
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ZeroScalar>) {
            family("zero");
          } else if constexpr (std::is_same_v<T, ConstantScalar>) {
            family("constant");
            num("value", v.value);
          } else if constexpr (std::is_same_v<T, CosineMode>) {
            family("cosine_mode");
            vec("wavevector", v.wavevector);
            num("amplitude", v.amplitude);
            num("phase", v.phase);
          } else if constexpr (std::is_same_v<T, GaussianBump>) {
            family("gaussian_bump");
            vec("center", v.center);
            num("width", v.width);
            num("amplitude", v.amplitude);
          } else if constexpr (std::is_same_v<T, UniformBall>) {
            family("uniform_ball");
            vec("center", v.center);
            num("radius", v.radius);
            num("density", v.density);
          } else {
            throw ConfigError(std::string(key) + ": custom fields have no YAML form");
          }
        },
        *fam);
    out << YAML::EndMap;
  }

  void points(const PointSet& p) {
    out << YAML::Key << "points" << YAML::Value;
    if (!p.explicit_points.empty()) {
      out << YAML::BeginSeq;
      for (const auto& x : p.explicit_points)
        out << YAML::Flow << YAML::BeginSeq << format_double(x.x()) << format_double(x.y()) << format_double(x.z())
            << YAML::EndSeq;
      out << YAML::EndSeq;
      return;
    }
    out << YAML::BeginMap << YAML::Key << "count" << YAML::Value << p.count;
    num("lo", p.lo);
    num("hi", p.hi);
    out << YAML::EndMap;
  }
};

}  // namespace

std::string to_yaml(const RunConfig& cfg) {
  YAML::Emitter out;
  Emit e{out};
  out << YAML::BeginMap;
  out << YAML::Key << "subcommand" << YAML::Value << to_string(cfg.subcommand);
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "output" << YAML::Value << cfg.output.string();

  out << YAML::Key << "problem" << YAML::Value << YAML::BeginMap;
  e.vector_field("field", cfg.problem.u0);
  e.num("sigma", cfg.problem.sigma);
  e.num("t_final", cfg.problem.t_final);
  out << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  if (const auto* c = std::get_if<PeriodicCube>(&cfg.problem.domain)) {
    out << YAML::Key << "type" << YAML::Value << "periodic_cube";
    e.num("side", c->side);
    out << YAML::Key << "grid_n" << YAML::Value << c->grid_n;
  } else {
    out << YAML::Key << "type" << YAML::Value << "whole_space";
    e.num("support_radius", std::get<WholeSpace>(cfg.problem.domain).support_radius);
  }
  out << YAML::EndMap << YAML::EndMap;

  const auto& s = cfg.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "grid_n" << YAML::Value << s.grid_n;
  out << YAML::Key << "time_grid_n" << YAML::Value << s.time_grid_n;
  e.num("dt", s.dt);
  out << YAML::Key << "n_paths" << YAML::Value << s.n_paths;
  e.num("tol", s.tol);
  out << YAML::Key << "k_max" << YAML::Value << s.k_max;
  e.num("inner_tol", s.inner_tol);
  out << YAML::Key << "inner_max" << YAML::Value << s.inner_max;
  out << YAML::Key << "backend" << YAML::Value << to_string(s.backend);
  out << YAML::Key << "antithetic" << YAML::Value << s.antithetic;
  e.num("q", s.q);
  e.num("m", s.m);
  out << YAML::EndMap;

  const auto& po = cfg.poisson;
  out << YAML::Key << "poisson" << YAML::Value << YAML::BeginMap;
  e.scalar_field("gamma", po.gamma);
  e.num("t", po.t);
  e.points(po.points);
  out << YAML::Key << "n_paths" << YAML::Value << po.mc.n_paths;
  e.num("dt_bm", po.mc.dt_bm);
  e.num("t_max", po.mc.t_max);
  out << YAML::Key << "antithetic" << YAML::Value << po.mc.antithetic;
  out << YAML::Key << "gradient" << YAML::Value << po.gradient;
  out << YAML::EndMap;

  const auto& pa = cfg.parabolic;
  out << YAML::Key << "parabolic" << YAML::Value << YAML::BeginMap;
  e.vector_field("drift", pa.drift);
  e.scalar_field("f0", pa.f0);
  e.scalar_field("source", pa.source);
  e.num("t_start", pa.t_start);
  e.points(pa.points);
  e.num("dt", pa.dt);
  out << YAML::Key << "n_paths" << YAML::Value << pa.n_paths;
  out << YAML::EndMap;

  const auto& ap = cfg.apriori;
  out << YAML::Key << "apriori" << YAML::Value << YAML::BeginMap;
  e.num("K01", ap.params.K01);
  e.num("beta0", ap.params.beta0);
  e.num("C_qm", ap.params.C_qm);
  e.num("C1_qm", ap.params.C1_qm);
  e.num("t", ap.t);
  e.num("ds", ap.ds);
  out << YAML::EndMap;

  out << YAML::Key << "bench" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_paths" << YAML::Value << YAML::Flow << cfg.bench.n_paths;
  out << YAML::Key << "n_points" << YAML::Value << cfg.bench.n_points;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace nsmc
