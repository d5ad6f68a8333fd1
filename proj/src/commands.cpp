#include "hsie/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "CLI11.hpp"
#include "hsie/config.hpp"
#include "hsie/curve.hpp"
#include "hsie/fem.hpp"
#include "hsie/hardy1d.hpp"
#include "hsie/spectral.hpp"
#include "hsie/waveguide.hpp"

namespace hsie {

namespace {

// Runs fn(0..n-1) on n_threads workers. Each index writes only its own
// output slot, so the result does not depend on the thread count.
void parallel_for(std::size_t n, std::size_t n_threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n_workers = std::min(n_threads, n);
  pool.reserve(n_workers);
  for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Gauss-Lobatto nodes on [-1,1]: endpoints plus the extrema of P_p.
std::vector<double> lobatto_nodes(std::size_t p) {
  if (p == 0) return {0.0};
  std::vector<double> nodes(p + 1);
  nodes[0] = -1.0;
  nodes[p] = 1.0;
  const double dp = static_cast<double>(p);
  for (std::size_t k = 1; k < p; ++k) {
    double x = std::cos(M_PI * static_cast<double>(p - k) / dp);
    for (int it = 0; it < 60; ++it) {
      double pm = 1.0, pc = x;
      for (std::size_t m = 2; m <= p; ++m) {
        const double pn = ((2.0 * m - 1.0) * x * pc - (m - 1.0) * pm) / static_cast<double>(m);
        pm = pc;
        pc = pn;
      }
      const double d1 = dp * (pm - x * pc) / (1.0 - x * x);
      const double d2 = (2.0 * x * d1 - dp * (dp + 1.0) * pc) / (1.0 - x * x);
      const double step = d1 / d2;
      x -= step;
      if (std::abs(step) < 1e-15) break;
    }
    nodes[k] = x;
  }
  return nodes;
}

SearchBox auto_box(const DispersionContext& ctx, double omega, double im_half) {
  const double kmax = 1.45 * omega / ctx.c_T + 1.0;
  return SearchBox{-kmax, kmax, -im_half, im_half};
}

bool box_set(const SearchBox& b) { return b.re_lo < b.re_hi && b.im_lo < b.im_hi; }

std::vector<double> omega_grid(const AnalysisConfig& a) {
  std::vector<double> grid(a.n_omega);
  for (std::size_t i = 0; i < a.n_omega; ++i)
    grid[i] = a.omega_lo + (static_cast<double>(i) + 1.0) * (a.omega_hi - a.omega_lo) /
                               static_cast<double>(a.n_omega);
  return grid;
}

void require(bool cond, const std::string& message) {
  if (!cond) throw ConfigError(0, message);
}

DispersionContext port_context(const RunConfig& cfg, std::size_t port_index) {
  const WaveguidePort& p = cfg.ports[port_index];
  return make_context(p.material, 0.5 * (p.hi - p.lo));
}

InterfaceRect blocks_bounding_box(const RunConfig& cfg) {
  InterfaceRect r{cfg.blocks[0].x0, cfg.blocks[0].x1, cfg.blocks[0].y0, cfg.blocks[0].y1};
  for (const MeshBlock& b : cfg.blocks) {
    r.x0 = std::min(r.x0, b.x0);
    r.x1 = std::max(r.x1, b.x1);
    r.y0 = std::min(r.y0, b.y0);
    r.y1 = std::max(r.y1, b.y1);
  }
  return r;
}

// Dirichlet mask/value pair over the global dof vector of an assembled
// system; values come from a full-length interior displacement vector.
void dirichlet_data(const DofMap& dofs, const std::vector<Complex>& interior_values,
                    std::size_t n_global, std::vector<char>& fixed,
                    std::vector<Complex>& values) {
  fixed.assign(n_global, 0);
  values.assign(n_global, Complex(0.0, 0.0));
  for (std::size_t g = 0; g < dofs.n_scalar; ++g) {
    if (!dofs.dirichlet[g]) continue;
    for (int c = 0; c < 2; ++c) {
      const std::size_t d = displacement_dof(g, c);
      fixed[d] = 1;
      if (d < interior_values.size()) values[d] = interior_values[d];
    }
  }
}

bool any_dirichlet(const DofMap& dofs) {
  for (char c : dofs.dirichlet)
    if (c) return true;
  return false;
}

int label_code(SpectrumLabel label) {
  switch (label) {
    case SpectrumLabel::ResonanceCandidate:
      return 1;
    case SpectrumLabel::EssentialCluster:
      return 2;
    case SpectrumLabel::Unclassified:
      return 0;
  }
  return 0;
}

struct MeshBundle {
  MeshTopology mesh;
  DofMap dofs;
  InteriorSystem interior;
  explicit MeshBundle(const RunConfig& cfg, std::size_t p)
      : mesh(block_mesh_of(cfg)),
        dofs(build_dof_map(mesh, p)),
        interior(assemble_interior(mesh, dofs)) {}
};

}  // namespace

ResultTable cmd_dispersion(const RunConfig& cfg, std::size_t n_threads) {
  require(!cfg.materials.empty(), "dispersion requires a [material] section");
  const AnalysisConfig& a = cfg.analysis;
  ResultTable table({"omega", "branch", "kappa_re", "kappa_im", "group_velocity", "vg_sign"});
  const std::vector<double> grid = omega_grid(a);
  const DispersionContext ctx = make_context(cfg.materials[0], a.half_width);

  std::vector<std::vector<std::vector<double>>> slots(grid.size());
  parallel_for(grid.size(), n_threads, [&](std::size_t i) {
    const double om = grid[i];
    if (om <= 0.0) return;
    const SearchBox box = box_set(a.box) ? a.box : auto_box(ctx, om, 0.5);
    std::vector<ClassifiedWavenumber> roots;
    try {
      roots = lamb_roots(ctx, om, box);
    } catch (const std::runtime_error&) {
      return;  // degenerate frequency (ZGV point); the sweep continues
    }
    for (const ClassifiedWavenumber& r : roots) {
      if (!is_propagating(r.mode_class)) continue;
      const double vg = r.group_velocity.value_or(0.0);
      const double sign = vg > 0.0 ? 1.0 : (vg < 0.0 ? -1.0 : 0.0);
      slots[i].push_back({om, r.branch == ModeBranch::Symmetric ? 0.0 : 1.0, r.kappa.real(),
                          r.kappa.imag(), vg, sign});
    }
  });
  for (const auto& rows : slots)
    for (const auto& row : rows) table.add_row(row);
  return table;
}

ResultTable cmd_converge(const RunConfig& cfg, std::size_t n_threads) {
  const AnalysisConfig& a = cfg.analysis;
  require(!cfg.materials.empty(), "converge requires a [material] section");
  require(!cfg.blocks.empty(), "converge requires a [block] section");
  require(!cfg.ports.empty(), "converge requires a [port] section");
  require(!a.n_long_list.empty(), "converge requires analysis.n_long_list");
  require(a.omega > 0.0, "converge requires analysis.omega > 0");

  const DispersionContext ctx = port_context(cfg, 0);
  const ReferenceFieldSum ref = reference_field(ctx, a.omega, a.n_symmetric, a.n_antisymmetric);
  const VectorField ref_trace = [&ref](double x, double y) {
    const FieldValue v = ref(x, y);
    return std::array<Complex, 2>{v.u[0], v.u[1]};
  };
  const InterfaceRect region = blocks_bounding_box(cfg);
  const std::vector<std::size_t> orders = a.order_list.empty()
                                              ? std::vector<std::size_t>{a.order}
                                              : a.order_list;

  struct Job {
    std::size_t order;
    std::size_t n_long;
    std::size_t bundle;
  };
  std::vector<Job> jobs;
  std::vector<std::shared_ptr<MeshBundle>> bundles;
  std::vector<std::vector<Complex>> lifts;
  for (std::size_t ip = 0; ip < orders.size(); ++ip) {
    bundles.push_back(std::make_shared<MeshBundle>(cfg, orders[ip]));
    lifts.push_back(project_dirichlet(bundles.back()->mesh, bundles.back()->dofs, ref_trace));
    for (std::size_t n_long : a.n_long_list) jobs.push_back({orders[ip], n_long, ip});
  }

  std::vector<std::array<double, 5>> slots(jobs.size());
  parallel_for(jobs.size(), n_threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    const MeshBundle& bundle = *bundles[job.bundle];
    std::vector<WaveguidePort> ports = cfg.ports;
    for (WaveguidePort& p : ports) p.n_long = job.n_long;
    const AssembledSystem system =
        assemble_global(bundle.mesh, bundle.dofs, bundle.interior, ports);
    std::vector<char> fixed;
    std::vector<Complex> values;
    dirichlet_data(bundle.dofs, lifts[job.bundle], system.a.n_rows, fixed, values);
    const std::vector<Complex> rhs(system.a.n_rows, Complex(0.0, 0.0));
    const ScatteringSolution sol = scattering_solve(system, Complex(a.omega, 0.0), rhs, fixed,
                                                    values);
    const double err = h1_relative_error(bundle.mesh, bundle.dofs, sol.coefficients, ref, region);
    slots[i] = {static_cast<double>(job.order), static_cast<double>(job.n_long),
                static_cast<double>(system.a.n_rows), err, sol.residual};
  });

  ResultTable table({"order", "n_long", "n_unknowns", "h1_error", "residual"});
  for (const auto& row : slots)
    table.add_row({row[0], row[1], row[2], row[3], row[4]});
  return table;
}

CommandResult cmd_resonances(const RunConfig& cfg, std::size_t n_threads) {
  (void)n_threads;
  const AnalysisConfig& a = cfg.analysis;
  require(!a.shifts.empty(), "resonances requires at least one [shift] section");
  require(!cfg.materials.empty(), "resonances requires a [material] section");
  require(!cfg.blocks.empty(), "resonances requires a [block] section");

  MeshBundle bundle(cfg, a.order);

  auto run_once = [&](const std::vector<WaveguidePort>& ports) {
    const AssembledSystem system =
        assemble_global(bundle.mesh, bundle.dofs, bundle.interior, ports);
    SpectrumResult result;
    if (any_dirichlet(bundle.dofs)) {
      std::vector<char> fixed;
      std::vector<Complex> values;
      dirichlet_data(bundle.dofs, {}, system.a.n_rows, fixed, values);
      const ReducedSystem red = dirichlet_lift(system.a, system.b, fixed, values);
      AssembledSystem reduced{red.a, red.b, red.a.n_rows, {}};
      result = resonances(reduced, a.shifts, a.krylov_dim, a.n_wanted);
    } else {
      result = resonances(system, a.shifts, a.krylov_dim, a.n_wanted);
    }
    if (!system.ports.empty()) {
      const PortLayout& layout = system.ports.front();
      result.essential =
          essential_spectrum(layout.desc.params, layout.trans_mats, layout.desc.material, a.r_lo,
                             a.r_hi, a.n_samples, a.omega_re_max);
    }
    return result;
  };

  SpectrumResult run_a = run_once(cfg.ports);
  if (a.run_twin) {
    require(!cfg.ports.empty(), "twin run requires a [port] section");
    std::vector<WaveguidePort> twin_ports = cfg.ports;
    for (WaveguidePort& p : twin_ports) p.params = a.twin;
    const SpectrumResult run_b = run_once(twin_ports);
    run_a = classify_spectrum(run_a, run_b, a.classify_tol);
  }

  CommandResult out{ResultTable({"omega_re", "omega_im", "residual", "label"}), {}};
  for (std::size_t i = 0; i < run_a.eigenvalues.size(); ++i)
    out.table.add_row({run_a.eigenvalues[i].real(), run_a.eigenvalues[i].imag(),
                       run_a.residuals[i], static_cast<double>(label_code(run_a.classification[i]))});

  ResultTable ess({"curve", "r", "omega_re", "omega_im"});
  for (std::size_t c = 0; c < run_a.essential.size(); ++c)
    for (std::size_t k = 0; k < run_a.essential[c].r.size(); ++k)
      ess.add_row({static_cast<double>(c), run_a.essential[c].r[k],
                   run_a.essential[c].omega[k].real(), run_a.essential[c].omega[k].imag()});
  if (!ess.rows().empty()) out.extra.emplace_back("essential", std::move(ess));
  return out;
}

ResultTable cmd_essential(const RunConfig& cfg, std::size_t n_threads) {
  (void)n_threads;
  const AnalysisConfig& a = cfg.analysis;
  PoleParams params;
  Material material;
  double R = a.half_width;
  if (!cfg.ports.empty()) {
    params = cfg.ports[0].params;
    material = cfg.ports[0].material;
    R = 0.5 * (cfg.ports[0].hi - cfg.ports[0].lo);
  } else {
    require(!cfg.materials.empty(), "essential requires a [material] section");
    params = a.poles;
    material = cfg.materials[0];
  }
  require(params.s0 != Complex(0.0, 0.0) || params.s1 != Complex(0.0, 0.0),
          "essential requires pole parameters ([port] or [poles])");
  require(a.n_samples >= 1, "essential requires n_samples >= 1");

  const TransverseMatrices trans = transverse_matrices(a.order, {-R, R});
  ResultTable table({"curve", "r", "kappa_re", "kappa_im", "omega_re", "omega_im"});

  if (a.n_samples == 1) {
    const Complex kappa = Complex(0.0, -1.0) * gamma_point(params, a.r_lo);
    const std::vector<Complex> ws = transverse_modal_evp(trans, material, kappa);
    std::vector<Complex> omegas;
    for (Complex w2 : ws) {
      Complex w = std::sqrt(w2);
      if (w.real() < 0.0) w = -w;
      if (w.real() <= a.omega_re_max) omegas.push_back(w);
    }
    std::sort(omegas.begin(), omegas.end(), [](Complex l, Complex r) {
      return l.real() != r.real() ? l.real() < r.real() : l.imag() < r.imag();
    });
    for (std::size_t i = 0; i < omegas.size(); ++i)
      table.add_row({static_cast<double>(i), a.r_lo, kappa.real(), kappa.imag(), omegas[i].real(),
                     omegas[i].imag()});
    return table;
  }

  const std::vector<EssentialCurve> curves =
      essential_spectrum(params, trans, material, a.r_lo, a.r_hi, a.n_samples, a.omega_re_max);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    for (std::size_t k = 0; k < curves[c].r.size(); ++k) {
      const Complex kappa = Complex(0.0, -1.0) * gamma_point(params, curves[c].r[k]);
      table.add_row({static_cast<double>(c), curves[c].r[k], kappa.real(), kappa.imag(),
                     curves[c].omega[k].real(), curves[c].omega[k].imag()});
    }
  }
  return table;
}

CommandResult cmd_scatter(const RunConfig& cfg, std::size_t n_threads) {
  const AnalysisConfig& a = cfg.analysis;
  require(!cfg.materials.empty(), "scatter requires a [material] section");
  require(!cfg.blocks.empty(), "scatter requires a [block] section");
  require(!cfg.ports.empty(), "scatter requires a [port] section");
  require(a.has_stress_region, "scatter requires a [stress] section");
  require(a.incident_port < cfg.ports.size(), "incident_port out of range");

  std::vector<double> grid = omega_grid(a);
  if (grid.empty() && a.omega > 0.0) grid.push_back(a.omega);

  const DispersionContext ctx = port_context(cfg, a.incident_port);
  MeshBundle bundle(cfg, a.order);
  const AssembledSystem system =
      assemble_global(bundle.mesh, bundle.dofs, bundle.interior, cfg.ports);
  std::vector<char> fixed;
  std::vector<Complex> values;
  const bool has_dirichlet = any_dirichlet(bundle.dofs);
  if (has_dirichlet) dirichlet_data(bundle.dofs, {}, system.a.n_rows, fixed, values);

  struct PointResult {
    std::vector<double> row;
    std::vector<std::vector<double>> field;
  };
  std::vector<PointResult> slots(grid.size());
  const std::vector<double> lob = lobatto_nodes(a.order);

  parallel_for(grid.size(), n_threads, [&](std::size_t i) {
    const double om = grid[i];
    PointResult& out = slots[i];
    std::vector<ClassifiedWavenumber> roots;
    try {
      const SearchBox box = box_set(a.box) ? a.box : auto_box(ctx, om, 0.5);
      roots = lamb_roots(ctx, om, box);
    } catch (const std::runtime_error&) {
      out.row = {om, 0.0, 0.0, 0.0, 1.0};
      return;
    }
    std::vector<IncidentMode> modes;
    for (const ClassifiedWavenumber& r : roots) {
      if (r.mode_class != ModeClass::IncomingPropagating) continue;
      IncidentMode mode;
      mode.wavenumber = r;
      mode.amplitude = Complex(a.amplitude, 0.0);
      const ModeBranch branch = r.branch;
      const Complex kappa = r.kappa;
      mode.shape = [ctx, branch, kappa, om](double eta) {
        const std::array<Complex, 2> w = lamb_mode(ctx, branch, kappa, om, eta);
        const std::array<Complex, 2> d = lamb_mode_derivative(ctx, branch, kappa, om, eta);
        return std::array<Complex, 4>{w[0], w[1], d[0], d[1]};
      };
      modes.push_back(std::move(mode));
    }
    if (modes.empty()) return;
    try {
      const std::vector<Complex> rhs = incident_rhs(system, a.incident_port, modes,
                                                    Complex(om, 0.0));
      const ScatteringSolution sol =
          has_dirichlet ? scattering_solve(system, Complex(om, 0.0), rhs, fixed, values)
                        : scattering_solve(system, Complex(om, 0.0), rhs);
      const double stress = stress_norm(bundle.mesh, bundle.dofs, sol.coefficients,
                                        a.stress_region);
      out.row = {om, static_cast<double>(modes.size()), stress, sol.residual, 0.0};
      if (a.field_dump) {
        for (const MeshElement& e : bundle.mesh.elements()) {
          for (double ty : lob) {
            for (double tx : lob) {
              const double x = 0.5 * (e.x0 + e.x1) + 0.5 * (e.x1 - e.x0) * tx;
              const double y = 0.5 * (e.y0 + e.y1) + 0.5 * (e.y1 - e.y0) * ty;
              const FieldSample s = evaluate(bundle.mesh, bundle.dofs, sol.coefficients, x, y);
              out.field.push_back({x, y, s.u[0].real(), s.u[0].imag(), s.u[1].real(),
                                   s.u[1].imag()});
            }
          }
        }
      }
    } catch (const std::runtime_error&) {
      out.row = {om, static_cast<double>(modes.size()), 0.0, 0.0, 1.0};
    }
  });

  CommandResult out{ResultTable({"omega", "n_incident", "stress_norm", "residual", "status"}),
                    {}};
  std::size_t n_fields = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].row.empty()) continue;
    out.table.add_row(slots[i].row);
    if (!slots[i].field.empty()) {
      ResultTable field({"x", "y", "u1_re", "u1_im", "u2_re", "u2_im"});
      for (const auto& row : slots[i].field) field.add_row(row);
      char name[32];
      std::snprintf(name, sizeof(name), "field-%03zu", n_fields++);
      out.extra.emplace_back(grid.size() == 1 ? "field" : name, std::move(field));
    }
  }
  return out;
}

ResultTable cmd_convected1d(const RunConfig& cfg, std::size_t n_threads) {
  (void)n_threads;
  const AnalysisConfig& a = cfg.analysis;
  require(!a.n_list.empty(), "convected1d requires analysis.n_list");
  require(a.poles.s0 != Complex(0.0, 0.0) || a.poles.s1 != Complex(0.0, 0.0),
          "convected1d requires a [poles] section");

  // Characteristic roots of s^2 - s + omega^2; the Galerkin limit is the
  // exponential exp(lam x) whose root sits closer to the poles in the
  // Moebius metric, i.e. the one with the smaller g value.
  const Complex omega(a.omega, 0.0);
  const Complex disc = std::sqrt(Complex(1.0, 0.0) - 4.0 * omega * omega);
  const Complex lam_a = 0.5 * (Complex(1.0, 0.0) + disc);
  const Complex lam_b = 0.5 * (Complex(1.0, 0.0) - disc);
  const Complex lam = g_value(a.poles, lam_a) <= g_value(a.poles, lam_b) ? lam_a : lam_b;
  const Complex exact = a.neumann_datum / lam;

  ResultTable table({"n", "trace_re", "trace_im", "error", "status"});
  for (std::size_t n : a.n_list) {
    try {
      const Convected1dSolution sol = solve_convected_1d(a.poles, omega, a.neumann_datum, n);
      table.add_row({static_cast<double>(n), sol.trace_value.real(), sol.trace_value.imag(),
                     std::abs(sol.trace_value - exact), 0.0});
    } catch (const std::runtime_error&) {
      table.add_row({static_cast<double>(n), 0.0, 0.0, 0.0, 1.0});
    }
  }
  table.set_meta("exact_re", std::to_string(exact.real()));
  table.set_meta("exact_im", std::to_string(exact.imag()));
  return table;
}

ResultTable cmd_dirichlet_eig(const RunConfig& cfg, std::size_t n_threads) {
  (void)n_threads;
  require(!cfg.materials.empty(), "dirichlet-eig requires a [material] section");
  require(!cfg.blocks.empty(), "dirichlet-eig requires a [block] section");
  const MeshBlock& block = cfg.blocks[0];
  const DirichletEigs eigs = dirichlet_eigenvalues(block, cfg.materials[block.material],
                                                   cfg.analysis.order, cfg.analysis.n_wanted);
  ResultTable table({"index", "omega"});
  for (std::size_t i = 0; i < eigs.omega.size(); ++i)
    table.add_row({static_cast<double>(i), eigs.omega[i]});
  return table;
}

ResultTable cmd_choose_params(const RunConfig& cfg, std::size_t n_threads) {
  (void)n_threads;
  const AnalysisConfig& a = cfg.analysis;
  require(a.omega > 0.0, "choose-params requires analysis.omega > 0");
  DispersionContext ctx;
  if (!cfg.ports.empty()) {
    ctx = port_context(cfg, 0);
  } else {
    require(!cfg.materials.empty(), "choose-params requires a [material] section");
    ctx = make_context(cfg.materials[0], a.half_width);
  }

  const SearchBox box = box_set(a.box) ? a.box : auto_box(ctx, a.omega, 6.5);
  const std::vector<ClassifiedWavenumber> spectrum = lamb_roots(ctx, a.omega, box);

  bool backward = false;
  for (const ClassifiedWavenumber& r : spectrum)
    if (r.mode_class == ModeClass::OutgoingPropagating && r.kappa.real() < 0.0) backward = true;

  PoleParams params;
  double theta = 0.0;
  if (backward) {
    theta = a.theta > 0.0 ? a.theta : choose_theta(spectrum);
    const PoleParams fallback{Complex(-1.0, -1.0), Complex(-1.0, 2.0)};
    const PoleParams seed = admissible(a.poles) ? a.poles : fallback;
    params = params_case2(theta, seed, spectrum);
  } else {
    params = params_case1(a.dir_re, a.dir_im);
  }
  const auto [ok, margin] = separates(params, spectrum);
  const double z = backward ? zeta(params) : 0.0;

  ResultTable table({"omega", "backward", "theta", "s0_re", "s0_im", "s1_re", "s1_im", "zeta",
                     "margin", "separates"});
  table.add_row({a.omega, backward ? 1.0 : 0.0, theta, params.s0.real(), params.s0.imag(),
                 params.s1.real(), params.s1.imag(), z, margin, ok ? 1.0 : 0.0});
  return table;
}

namespace {

CommandResult dispatch(const std::string& name, const RunConfig& cfg, std::size_t n_threads) {
  if (name == "dispersion") return {cmd_dispersion(cfg, n_threads), {}};
  if (name == "converge") return {cmd_converge(cfg, n_threads), {}};
  if (name == "resonances") return cmd_resonances(cfg, n_threads);
  if (name == "essential") return {cmd_essential(cfg, n_threads), {}};
  if (name == "scatter") return cmd_scatter(cfg, n_threads);
  if (name == "convected1d") return {cmd_convected1d(cfg, n_threads), {}};
  if (name == "dirichlet-eig") return {cmd_dirichlet_eig(cfg, n_threads), {}};
  if (name == "choose-params") return {cmd_choose_params(cfg, n_threads), {}};
  throw ConfigError(0, "unknown command '" + name + "'");
}

void write_table(const std::filesystem::path& path, const ResultTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << table.to_csv();
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Waveguide scattering and resonance toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::size_t n_threads = 1;
  std::size_t seed = 0;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"dispersion", "Real dispersion curves over a frequency sweep"},
      {"converge", "Reference-solution convergence study in the exterior order"},
      {"resonances", "Resonance eigenvalues with optional twin-run classification"},
      {"essential", "Essential-spectrum curves traced by the pole parameters"},
      {"scatter", "Incident-mode scattering sweep with stress output"},
      {"convected1d", "Half-line convected Helmholtz benchmark"},
      {"dirichlet-eig", "Fixed-boundary rectangle eigenfrequencies"},
      {"choose-params", "Pole parameters separating the spectrum at one frequency"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "Path to the run configuration")->required();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--threads", n_threads, "Worker threads for sweeps");
    sub->add_option("--seed", seed, "Recorded in the output metadata");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError(0, "cannot open config file '" + config_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    RunConfig cfg = parse_config(text);
    if (!cfg.command.empty() && cfg.command != name)
      throw ConfigError(0, "config command '" + cfg.command + "' does not match subcommand '" +
                               name + "'");

    CommandResult result = dispatch(name, cfg, std::max<std::size_t>(1, n_threads));
    result.table.set_meta("command", name);
    result.table.set_meta("config_hash", config_hash(text));
    result.table.set_meta("seed", std::to_string(seed));

    std::filesystem::create_directories(out_dir);
    const std::filesystem::path base = std::filesystem::path(out_dir) /
                                       (cfg.output.prefix + "-" + name);
    write_table(base.string() + ".csv", result.table);
    for (auto& [suffix, extra] : result.extra) {
      extra.set_meta("command", name);
      extra.set_meta("config_hash", config_hash(text));
      write_table(base.string() + "-" + suffix + ".csv", extra);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace hsie
