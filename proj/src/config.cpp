#include "hsie/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <system_error>

namespace hsie {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

double to_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (!std::isfinite(v)) throw ConfigError(line, "non-finite value '" + s + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + s + "'");
  }
}

std::size_t to_size(const std::string& s, std::size_t line) {
  const double v = to_double(s, line);
  if (v < 0.0 || v != std::floor(v))
    throw ConfigError(line, "expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

int to_int(const std::string& s, std::size_t line) {
  const double v = to_double(s, line);
  if (v != std::floor(v)) throw ConfigError(line, "expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::vector<std::size_t> to_size_list(const std::string& s, std::size_t line) {
  std::vector<std::size_t> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      const std::string item = trim(cur);
      if (!item.empty()) out.push_back(to_size(item, line));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

const char* bc_name(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::Neumann:
      return "neumann";
    case BoundaryCondition::Dirichlet:
      return "dirichlet";
    case BoundaryCondition::Port:
      return "port";
  }
  return "neumann";
}

}  // namespace

ConfigError::ConfigError(std::size_t line_, const std::string& message)
    : std::runtime_error(line_ ? "line " + std::to_string(line_) + ": " + message : message),
      line(line_) {}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::size_t section_line = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      section_line = line_no;
      if (section == "material") {
        cfg.materials.emplace_back();
      } else if (section == "block") {
        cfg.blocks.emplace_back();
      } else if (section == "boundary") {
        cfg.boundaries.emplace_back();
      } else if (section == "port") {
        cfg.ports.emplace_back();
        cfg.ports.back().id = static_cast<int>(cfg.ports.size()) - 1;
        cfg.port_material.push_back(0);
      } else if (section == "shift") {
        cfg.analysis.shifts.emplace_back(0.0, 0.0);
      } else if (section == "twin") {
        cfg.analysis.run_twin = true;
      } else if (section == "stress") {
        cfg.analysis.has_stress_region = true;
      } else if (section != "run" && section != "poles" && section != "analysis" &&
                 section != "output") {
        throw ConfigError(line_no, "unknown section [" + section + "]");
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (section.empty()) throw ConfigError(line_no, "key outside of any section");

    if (section == "run") {
      if (key == "command")
        cfg.command = value;
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [run]");
    } else if (section == "material") {
      Material& m = cfg.materials.back();
      if (key == "E")
        m.E = to_double(value, line_no);
      else if (key == "nu")
        m.nu = to_double(value, line_no);
      else if (key == "rho")
        m.rho = to_double(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [material]");
    } else if (section == "block") {
      MeshBlock& b = cfg.blocks.back();
      if (key == "x0")
        b.x0 = to_double(value, line_no);
      else if (key == "x1")
        b.x1 = to_double(value, line_no);
      else if (key == "y0")
        b.y0 = to_double(value, line_no);
      else if (key == "y1")
        b.y1 = to_double(value, line_no);
      else if (key == "nx")
        b.nx = to_size(value, line_no);
      else if (key == "ny")
        b.ny = to_size(value, line_no);
      else if (key == "material")
        b.material = to_size(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [block]");
    } else if (section == "boundary") {
      BoundarySegment& s = cfg.boundaries.back();
      if (key == "axis") {
        if (value != "x" && value != "y") throw ConfigError(line_no, "axis must be x or y");
        s.axis = value[0];
      } else if (key == "value")
        s.value = to_double(value, line_no);
      else if (key == "lo")
        s.lo = to_double(value, line_no);
      else if (key == "hi")
        s.hi = to_double(value, line_no);
      else if (key == "bc") {
        if (value == "dirichlet")
          s.bc = BoundaryCondition::Dirichlet;
        else if (value == "neumann")
          s.bc = BoundaryCondition::Neumann;
        else if (value == "port")
          s.bc = BoundaryCondition::Port;
        else
          throw ConfigError(line_no, "unknown boundary condition '" + value + "'");
      } else if (key == "port")
        s.port_id = to_int(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [boundary]");
    } else if (section == "port") {
      WaveguidePort& p = cfg.ports.back();
      if (key == "axis") {
        if (value != "x" && value != "y") throw ConfigError(line_no, "axis must be x or y");
        p.axis = value[0];
      } else if (key == "value")
        p.value = to_double(value, line_no);
      else if (key == "lo")
        p.lo = to_double(value, line_no);
      else if (key == "hi")
        p.hi = to_double(value, line_no);
      else if (key == "outward") {
        const int o = to_int(value, line_no);
        if (o != 1 && o != -1) throw ConfigError(line_no, "outward must be 1 or -1");
        p.outward = o;
      } else if (key == "material")
        cfg.port_material.back() = to_size(value, line_no);
      else if (key == "s0_re")
        p.params.s0 = Complex(to_double(value, line_no), p.params.s0.imag());
      else if (key == "s0_im")
        p.params.s0 = Complex(p.params.s0.real(), to_double(value, line_no));
      else if (key == "s1_re")
        p.params.s1 = Complex(to_double(value, line_no), p.params.s1.imag());
      else if (key == "s1_im")
        p.params.s1 = Complex(p.params.s1.real(), to_double(value, line_no));
      else if (key == "n_long")
        p.n_long = to_size(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [port]");
    } else if (section == "twin") {
      PoleParams& t = cfg.analysis.twin;
      if (key == "s0_re")
        t.s0 = Complex(to_double(value, line_no), t.s0.imag());
      else if (key == "s0_im")
        t.s0 = Complex(t.s0.real(), to_double(value, line_no));
      else if (key == "s1_re")
        t.s1 = Complex(to_double(value, line_no), t.s1.imag());
      else if (key == "s1_im")
        t.s1 = Complex(t.s1.real(), to_double(value, line_no));
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [twin]");
    } else if (section == "poles") {
      PoleParams& t = cfg.analysis.poles;
      if (key == "s0_re")
        t.s0 = Complex(to_double(value, line_no), t.s0.imag());
      else if (key == "s0_im")
        t.s0 = Complex(t.s0.real(), to_double(value, line_no));
      else if (key == "s1_re")
        t.s1 = Complex(to_double(value, line_no), t.s1.imag());
      else if (key == "s1_im")
        t.s1 = Complex(t.s1.real(), to_double(value, line_no));
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [poles]");
    } else if (section == "shift") {
      Complex& sh = cfg.analysis.shifts.back();
      if (key == "re")
        sh = Complex(to_double(value, line_no), sh.imag());
      else if (key == "im")
        sh = Complex(sh.real(), to_double(value, line_no));
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [shift]");
    } else if (section == "stress") {
      InterfaceRect& r = cfg.analysis.stress_region;
      if (key == "x0")
        r.x0 = to_double(value, line_no);
      else if (key == "x1")
        r.x1 = to_double(value, line_no);
      else if (key == "y0")
        r.y0 = to_double(value, line_no);
      else if (key == "y1")
        r.y1 = to_double(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [stress]");
    } else if (section == "analysis") {
      AnalysisConfig& a = cfg.analysis;
      if (key == "omega")
        a.omega = to_double(value, line_no);
      else if (key == "omega_lo")
        a.omega_lo = to_double(value, line_no);
      else if (key == "omega_hi")
        a.omega_hi = to_double(value, line_no);
      else if (key == "n_omega")
        a.n_omega = to_size(value, line_no);
      else if (key == "order")
        a.order = to_size(value, line_no);
      else if (key == "order_list")
        a.order_list = to_size_list(value, line_no);
      else if (key == "n_long_list")
        a.n_long_list = to_size_list(value, line_no);
      else if (key == "krylov_dim")
        a.krylov_dim = to_size(value, line_no);
      else if (key == "n_wanted")
        a.n_wanted = to_size(value, line_no);
      else if (key == "box_re_lo")
        a.box.re_lo = to_double(value, line_no);
      else if (key == "box_re_hi")
        a.box.re_hi = to_double(value, line_no);
      else if (key == "box_im_lo")
        a.box.im_lo = to_double(value, line_no);
      else if (key == "box_im_hi")
        a.box.im_hi = to_double(value, line_no);
      else if (key == "half_width")
        a.half_width = to_double(value, line_no);
      else if (key == "r_lo")
        a.r_lo = to_double(value, line_no);
      else if (key == "r_hi")
        a.r_hi = to_double(value, line_no);
      else if (key == "n_samples")
        a.n_samples = to_size(value, line_no);
      else if (key == "omega_re_max")
        a.omega_re_max = to_double(value, line_no);
      else if (key == "n_symmetric")
        a.n_symmetric = to_size(value, line_no);
      else if (key == "n_antisymmetric")
        a.n_antisymmetric = to_size(value, line_no);
      else if (key == "classify_tol")
        a.classify_tol = to_double(value, line_no);
      else if (key == "neumann_re")
        a.neumann_datum = Complex(to_double(value, line_no), a.neumann_datum.imag());
      else if (key == "neumann_im")
        a.neumann_datum = Complex(a.neumann_datum.real(), to_double(value, line_no));
      else if (key == "n_list")
        a.n_list = to_size_list(value, line_no);
      else if (key == "incident_port")
        a.incident_port = to_size(value, line_no);
      else if (key == "amplitude")
        a.amplitude = to_double(value, line_no);
      else if (key == "field_dump")
        a.field_dump = to_int(value, line_no) != 0;
      else if (key == "theta")
        a.theta = to_double(value, line_no);
      else if (key == "dir_re")
        a.dir_re = to_double(value, line_no);
      else if (key == "dir_im")
        a.dir_im = to_double(value, line_no);
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [analysis]");
    } else if (section == "output") {
      if (key == "prefix")
        cfg.output.prefix = value;
      else
        throw ConfigError(line_no, "unknown key '" + key + "' in [output]");
    } else {
      throw ConfigError(line_no, "key in unknown section");
    }
  }
  (void)section_line;

  for (std::size_t i = 0; i < cfg.blocks.size(); ++i)
    if (cfg.blocks[i].material >= cfg.materials.size())
      throw ConfigError(0, "block " + std::to_string(i) + " references material " +
                               std::to_string(cfg.blocks[i].material) + " of " +
                               std::to_string(cfg.materials.size()));
  for (std::size_t i = 0; i < cfg.ports.size(); ++i) {
    if (cfg.port_material[i] >= cfg.materials.size())
      throw ConfigError(0, "port " + std::to_string(i) + " references material " +
                               std::to_string(cfg.port_material[i]) + " of " +
                               std::to_string(cfg.materials.size()));
    cfg.ports[i].material = cfg.materials[cfg.port_material[i]];
  }
  for (std::size_t i = 0; i < cfg.boundaries.size(); ++i) {
    const BoundarySegment& s = cfg.boundaries[i];
    if (s.bc == BoundaryCondition::Port &&
        (s.port_id < 0 || static_cast<std::size_t>(s.port_id) >= cfg.ports.size()))
      throw ConfigError(0, "boundary " + std::to_string(i) + " references undefined port " +
                               std::to_string(s.port_id));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  if (!cfg.command.empty()) out += "[run]\ncommand = " + cfg.command + "\n\n";
  for (const Material& m : cfg.materials) {
    out += "[material]\n";
    out += "E = " + fmt(m.E) + "\n";
    out += "nu = " + fmt(m.nu) + "\n";
    out += "rho = " + fmt(m.rho) + "\n\n";
  }
  for (const MeshBlock& b : cfg.blocks) {
    out += "[block]\n";
    out += "x0 = " + fmt(b.x0) + "\nx1 = " + fmt(b.x1) + "\n";
    out += "y0 = " + fmt(b.y0) + "\ny1 = " + fmt(b.y1) + "\n";
    out += "nx = " + std::to_string(b.nx) + "\nny = " + std::to_string(b.ny) + "\n";
    out += "material = " + std::to_string(b.material) + "\n\n";
  }
  for (const BoundarySegment& s : cfg.boundaries) {
    out += "[boundary]\n";
    out += std::string("axis = ") + s.axis + "\n";
    out += "value = " + fmt(s.value) + "\n";
    out += "lo = " + fmt(s.lo) + "\nhi = " + fmt(s.hi) + "\n";
    out += std::string("bc = ") + bc_name(s.bc) + "\n";
    if (s.bc == BoundaryCondition::Port) out += "port = " + std::to_string(s.port_id) + "\n";
    out += "\n";
  }
  for (std::size_t i = 0; i < cfg.ports.size(); ++i) {
    const WaveguidePort& p = cfg.ports[i];
    out += "[port]\n";
    out += std::string("axis = ") + p.axis + "\n";
    out += "value = " + fmt(p.value) + "\n";
    out += "lo = " + fmt(p.lo) + "\nhi = " + fmt(p.hi) + "\n";
    out += "outward = " + std::to_string(p.outward) + "\n";
    out += "material = " + std::to_string(cfg.port_material[i]) + "\n";
    out += "s0_re = " + fmt(p.params.s0.real()) + "\ns0_im = " + fmt(p.params.s0.imag()) + "\n";
    out += "s1_re = " + fmt(p.params.s1.real()) + "\ns1_im = " + fmt(p.params.s1.imag()) + "\n";
    out += "n_long = " + std::to_string(p.n_long) + "\n\n";
  }
  const AnalysisConfig& a = cfg.analysis;
  if (a.run_twin) {
    out += "[twin]\n";
    out += "s0_re = " + fmt(a.twin.s0.real()) + "\ns0_im = " + fmt(a.twin.s0.imag()) + "\n";
    out += "s1_re = " + fmt(a.twin.s1.real()) + "\ns1_im = " + fmt(a.twin.s1.imag()) + "\n\n";
  }
  if (a.poles.s0 != Complex(0.0, 0.0) || a.poles.s1 != Complex(0.0, 0.0)) {
    out += "[poles]\n";
    out += "s0_re = " + fmt(a.poles.s0.real()) + "\ns0_im = " + fmt(a.poles.s0.imag()) + "\n";
    out += "s1_re = " + fmt(a.poles.s1.real()) + "\ns1_im = " + fmt(a.poles.s1.imag()) + "\n\n";
  }
  for (Complex sh : a.shifts) {
    out += "[shift]\n";
    out += "re = " + fmt(sh.real()) + "\nim = " + fmt(sh.imag()) + "\n\n";
  }
  if (a.has_stress_region) {
    out += "[stress]\n";
    out += "x0 = " + fmt(a.stress_region.x0) + "\nx1 = " + fmt(a.stress_region.x1) + "\n";
    out += "y0 = " + fmt(a.stress_region.y0) + "\ny1 = " + fmt(a.stress_region.y1) + "\n\n";
  }
  out += "[analysis]\n";
  out += "omega = " + fmt(a.omega) + "\n";
  out += "omega_lo = " + fmt(a.omega_lo) + "\nomega_hi = " + fmt(a.omega_hi) + "\n";
  out += "n_omega = " + std::to_string(a.n_omega) + "\n";
  out += "order = " + std::to_string(a.order) + "\n";
  if (!a.order_list.empty()) out += "order_list = " + fmt_list(a.order_list) + "\n";
  if (!a.n_long_list.empty()) out += "n_long_list = " + fmt_list(a.n_long_list) + "\n";
  if (!a.n_list.empty()) out += "n_list = " + fmt_list(a.n_list) + "\n";
  out += "krylov_dim = " + std::to_string(a.krylov_dim) + "\n";
  out += "n_wanted = " + std::to_string(a.n_wanted) + "\n";
  out += "box_re_lo = " + fmt(a.box.re_lo) + "\nbox_re_hi = " + fmt(a.box.re_hi) + "\n";
  out += "box_im_lo = " + fmt(a.box.im_lo) + "\nbox_im_hi = " + fmt(a.box.im_hi) + "\n";
  out += "half_width = " + fmt(a.half_width) + "\n";
  out += "r_lo = " + fmt(a.r_lo) + "\nr_hi = " + fmt(a.r_hi) + "\n";
  out += "n_samples = " + std::to_string(a.n_samples) + "\n";
  out += "omega_re_max = " + fmt(a.omega_re_max) + "\n";
  out += "n_symmetric = " + std::to_string(a.n_symmetric) + "\n";
  out += "n_antisymmetric = " + std::to_string(a.n_antisymmetric) + "\n";
  out += "classify_tol = " + fmt(a.classify_tol) + "\n";
  out += "neumann_re = " + fmt(a.neumann_datum.real()) + "\n";
  out += "neumann_im = " + fmt(a.neumann_datum.imag()) + "\n";
  out += "incident_port = " + std::to_string(a.incident_port) + "\n";
  out += "amplitude = " + fmt(a.amplitude) + "\n";
  out += "field_dump = " + std::string(a.field_dump ? "1" : "0") + "\n";
  out += "theta = " + fmt(a.theta) + "\n";
  out += "dir_re = " + fmt(a.dir_re) + "\ndir_im = " + fmt(a.dir_im) + "\n";
  out += "\n[output]\nprefix = " + cfg.output.prefix + "\n";
  return out;
}

BlockMesh block_mesh_of(const RunConfig& cfg) {
  BlockMesh bm;
  bm.blocks = cfg.blocks;
  bm.materials = cfg.materials;
  bm.boundary_overrides = cfg.boundaries;
  return bm;
}

std::string config_hash(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace hsie
