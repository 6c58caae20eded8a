#include "kld/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace kld {

namespace {

struct Entry {
  std::string key;
  std::string value;
  bool quoted = false;
  int line = 0;
  bool used = false;
};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

class Section {
public:
  Section(std::string name, std::string origin) : name_(std::move(name)), origin_(std::move(origin)) {}

  void add(Entry e) {
    for (const auto& prev : entries_)
      if (prev.key == e.key)
        throw ConfigError(where(e) + "duplicate key '" + e.key + "' in [" + name_ + "] (first set on line " +
                          std::to_string(prev.line) + ")");
    entries_.push_back(std::move(e));
  }

  Entry* find(const std::string& key) {
    for (auto& e : entries_)
      if (e.key == key) {
        e.used = true;
        return &e;
      }
    return nullptr;
  }
  bool has(const std::string& key) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.key == key; });
  }

  [[noreturn]] void fail(const Entry& e, const std::string& msg) const {
    throw ConfigError(where(e) + "key '" + e.key + "' in [" + name_ + "]: " + msg);
  }

  double number(const Entry& e, const std::string& text) const {
    const std::string t = trim(text);
    if (t.empty()) fail(e, "expected a number");
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
      fail(e, "'" + t + "' is not a finite number");
    return v;
  }

  void get(const std::string& key, double& out) {
    if (Entry* e = find(key)) out = number(*e, e->value);
  }
  void get(const std::string& key, std::size_t& out) {
    if (Entry* e = find(key)) out = count(*e, e->value);
  }
  void get(const std::string& key, std::uint64_t& out, bool) {
    if (Entry* e = find(key)) out = count(*e, e->value);
  }
  void get(const std::string& key, bool& out) {
    if (Entry* e = find(key)) {
      std::string v = e->value;
      std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
      if (v == "true" || v == "yes" || v == "1") out = true;
      else if (v == "false" || v == "no" || v == "0") out = false;
      else fail(*e, "expected true or false");
    }
  }
  void get(const std::string& key, std::string& out) {
    if (Entry* e = find(key)) out = e->value;
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (Entry* e = find(key)) {
      out.clear();
      for (const auto& part : split(e->value, ',')) out.push_back(number(*e, part));
    }
  }
  void get(const std::string& key, std::vector<std::size_t>& out) {
    if (Entry* e = find(key)) {
      out.clear();
      for (const auto& part : split(e->value, ',')) out.push_back(count(*e, part));
    }
  }
  void get(const std::string& key, std::vector<std::vector<double>>& out) {
    if (Entry* e = find(key)) {
      out.clear();
      for (const auto& vec : split(e->value, ';')) {
        std::vector<double> p;
        for (const auto& part : split(vec, ',')) p.push_back(number(*e, part));
        out.push_back(std::move(p));
      }
    }
  }
  expr::Expr expression(const std::string& key, const std::vector<std::string>& vars) {
    Entry* e = find(key);
    if (!e) return {};
    try {
      return expr::parse(e->value, vars);
    } catch (const expr::ParseError& err) {
      fail(*e, err.what());
    }
  }

  void check_unused() const {
    for (const auto& e : entries_)
      if (!e.used) throw ConfigError(where(e) + "unknown key '" + e.key + "' in [" + name_ + "]");
  }

  const std::string& name() const { return name_; }
  std::string where(const Entry& e) const { return origin_ + ":" + std::to_string(e.line) + ": "; }

private:
  std::size_t count(const Entry& e, const std::string& text) const {
    const double v = number(e, text);
    if (v < 0.0 || v != std::floor(v) || v > 9.0e15) fail(e, "expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  std::string name_;
  std::string origin_;
  std::vector<Entry> entries_;
};

const std::set<std::string> kSections{"model", "grid", "hamiltonian", "kinetic", "hj", "simulate"};

std::vector<std::string> model_variables(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::Interval: return {"v"};
    case ManifoldKind::Ring: return {"theta"};
    case ManifoldKind::Sphere: return {"theta", "phi"};
  }
  return {};
}

Quadrature quadrature_from(const std::string& s) {
  if (s == "default") return Quadrature::Default;
  if (s == "trapezoid") return Quadrature::Trapezoid;
  if (s == "gauss-legendre") return Quadrature::GaussLegendre;
  throw std::invalid_argument("expected default, trapezoid or gauss-legendre");
}

[[noreturn]] void schema(const std::string& origin, const std::string& msg) { throw ConfigError(origin + ": " + msg); }

void require_min(const std::string& origin, const char* key, std::size_t value, std::size_t min) {
  if (value < min) schema(origin, std::string(key) + " below minimum " + std::to_string(min));
}

void require_positive(const std::string& origin, const std::string& key, double value) {
  if (!(value > 0.0)) schema(origin, key + " must be positive");
}

}  // namespace

VelocityModel RunConfig::build_model() const {
  if (!model.builtin.empty()) {
    VelocityModel m = builtin_model(model.builtin);
    return m;
  }
  return VelocityModel(model.kind, model.density, model.force, model.alpha,
                       model.name.empty() ? to_string(model.kind) : model.name);
}

std::vector<Axis> RunConfig::table_axes(int dim) const {
  const auto d = static_cast<std::size_t>(dim);
  auto pick = [&](const auto& v, const char* key) {
    if (v.size() != 1 && v.size() != d)
      throw ConfigError(source.string() + ": key '" + key + "' in [hamiltonian] has " + std::to_string(v.size()) +
                        " entries, expected 1 or " + std::to_string(d));
    return v;
  };
  const auto lo = pick(hamiltonian.p_min, "p_min");
  const auto hi = pick(hamiltonian.p_max, "p_max");
  const auto n = pick(hamiltonian.p_steps, "p_steps");
  std::vector<Axis> axes;
  for (std::size_t k = 0; k < d; ++k)
    axes.push_back({lo[lo.size() == 1 ? 0 : k], hi[hi.size() == 1 ? 0 : k], n[n.size() == 1 ? 0 : k]});
  return axes;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  std::map<std::string, Section> sections;
  Section* current = nullptr;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    // strip a trailing comment that is not inside quotes
    bool in_quotes = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_quotes = !in_quotes;
      if (raw[i] == '#' && !in_quotes) {
        cut = i;
        break;
      }
    }
    const std::string line = trim(std::string_view(raw).substr(0, cut));
    const std::string here = origin + ":" + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(here + "malformed section header");
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!kSections.count(name)) throw ConfigError(here + "unknown section [" + name + "]");
      if (sections.count(name)) throw ConfigError(here + "section [" + name + "] appears twice");
      current = &sections.emplace(name, Section(name, origin)).first->second;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(here + "expected 'key = value'");
    if (!current) throw ConfigError(here + "key outside of any section");
    Entry e;
    e.key = trim(std::string_view(line).substr(0, eq));
    e.value = trim(std::string_view(line).substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) throw ConfigError(here + "empty key");
    if (!e.value.empty() && e.value.front() == '"') {
      if (e.value.size() < 2 || e.value.back() != '"' || e.value.find('"', 1) != e.value.size() - 1)
        throw ConfigError(here + "unterminated string for key '" + e.key + "'");
      e.value = e.value.substr(1, e.value.size() - 2);
      e.quoted = true;
    }
    current->add(std::move(e));
  }

  RunConfig cfg;
  cfg.source = origin;
  auto section = [&](const std::string& name) -> Section& {
    return sections.try_emplace(name, Section(name, origin)).first->second;
  };

  Section& m = section("model");
  m.get("builtin", cfg.model.builtin);
  m.get("name", cfg.model.name);
  if (!cfg.model.builtin.empty()) {
    const auto names = builtin_model_names();
    if (std::find(names.begin(), names.end(), cfg.model.builtin) == names.end())
      m.fail(*m.find("builtin"), "unknown built-in model '" + cfg.model.builtin + "'");
    for (const char* k : {"kind", "M", "gamma", "gamma_theta", "gamma_phi", "alpha"})
      if (m.has(k)) m.fail(*m.find(k), "cannot be combined with builtin");
  } else {
    if (!m.has("kind")) schema(origin, "[model] needs either builtin or kind");
    Entry* kind = m.find("kind");
    try {
      cfg.model.kind = manifold_kind_from_string(kind->value);
    } catch (const ModelError& err) {
      m.fail(*kind, err.what());
    }
    const auto vars = model_variables(cfg.model.kind);
    if (!m.has("M")) schema(origin, "[model] is missing key 'M'");
    cfg.model.density = m.expression("M", vars);
    const std::vector<std::string> force_keys = cfg.model.kind == ManifoldKind::Sphere
                                                    ? std::vector<std::string>{"gamma_theta", "gamma_phi"}
                                                    : std::vector<std::string>{"gamma"};
    for (const auto& k : force_keys) {
      if (!m.has(k)) schema(origin, "[model] is missing key '" + k + "'");
      cfg.model.force.push_back(m.expression(k, vars));
    }
    if (!m.has("alpha")) schema(origin, "[model] is missing key 'alpha'");
    m.get("alpha", cfg.model.alpha);
    require_positive(origin, "alpha", cfg.model.alpha);
  }

  Section& g = section("grid");
  g.get("nv", cfg.grid.nv);
  g.get("bands", cfg.grid.bands);
  g.get("nx", cfg.grid.nx);
  g.get("L", cfg.grid.L);
  if (Entry* q = g.find("quadrature")) {
    try {
      cfg.grid.quadrature = quadrature_from(q->value);
    } catch (const std::invalid_argument& err) {
      g.fail(*q, err.what());
    }
  }
  require_min(origin, "nv", cfg.grid.nv, 8);
  if (cfg.grid.bands != 0) require_min(origin, "bands", cfg.grid.bands, 8);
  require_min(origin, "nx", cfg.grid.nx, 8);
  require_positive(origin, "L", cfg.grid.L);

  Section& h = section("hamiltonian");
  auto& hc = cfg.hamiltonian.controls;
  h.get("p_min", cfg.hamiltonian.p_min);
  h.get("p_max", cfg.hamiltonian.p_max);
  h.get("p_steps", cfg.hamiltonian.p_steps);
  h.get("bisect_tol", hc.bisect_tol);
  h.get("probe_rel", hc.probe_rel);
  h.get("exponent_cap", hc.exponent_cap);
  h.get("rate_eps", hc.rate_eps);
  h.get("flow_dt", hc.flow.dt);
  h.get("x_points", cfg.hamiltonian.x_points);
  for (const auto& [key, v] : {std::pair<const char*, double>{"bisect_tol", hc.bisect_tol},
                               {"probe_rel", hc.probe_rel},
                               {"exponent_cap", hc.exponent_cap},
                               {"rate_eps", hc.rate_eps},
                               {"flow_dt", hc.flow.dt}})
    require_positive(origin, key, v);
  for (std::size_t s : cfg.hamiltonian.p_steps) require_min(origin, "p_steps", s, 1);
  if (cfg.hamiltonian.x_points != 0) require_min(origin, "x_points", cfg.hamiltonian.x_points, 8);

  Section& k = section("kinetic");
  k.get("eps", cfg.kinetic.eps);
  k.get("dt", cfg.kinetic.dt);
  k.get("T", cfg.kinetic.T);
  k.get("snapshots", cfg.kinetic.snapshots);
  k.get("nv", cfg.kinetic.nv);
  cfg.kinetic.phi0 = k.has("phi0") ? k.expression("phi0", {"x", "L"}) : expr::parse("0.5*(1-cos(2*pi*x/L))", {"x", "L"});
  for (double e : cfg.kinetic.eps) require_positive(origin, "eps", e);
  require_positive(origin, "kinetic T", cfg.kinetic.T);
  if (cfg.kinetic.dt < 0.0) schema(origin, "kinetic dt must be non-negative");
  if (cfg.kinetic.nv != 0) require_min(origin, "nv", cfg.kinetic.nv, 8);

  Section& j = section("hj");
  j.get("dt", cfg.hj.dt);
  j.get("T", cfg.hj.T);
  j.get("alpha", cfg.hj.alpha);
  j.get("snapshots", cfg.hj.snapshots);
  require_positive(origin, "hj T", cfg.hj.T);
  require_positive(origin, "hj alpha", cfg.hj.alpha);
  if (cfg.hj.dt < 0.0) schema(origin, "hj dt must be non-negative");

  Section& s = section("simulate");
  s.get("n", cfg.simulate.n);
  s.get("t_final", cfg.simulate.t_final);
  s.get("p", cfg.simulate.p);
  s.get("seed", cfg.simulate.seed, true);
  s.get("endpoints", cfg.simulate.endpoints);
  require_min(origin, "n", cfg.simulate.n, 1000);
  require_positive(origin, "t_final", cfg.simulate.t_final);

  for (const auto& [name, sec] : sections) sec.check_unused();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

}  // namespace kld
