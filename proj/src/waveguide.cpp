#include "hsie/waveguide.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hsie {

namespace {

struct PortFrame {
  std::array<int, 2> comp_index;
  std::array<double, 2> comp_sign;
  bool reversed;  // eta runs against the ascending mesh coordinate
};

PortFrame frame_of(char axis, int outward) {
  if (axis == 'x') {
    if (outward > 0) return {{0, 1}, {+1.0, +1.0}, false};
    return {{0, 1}, {-1.0, -1.0}, true};
  }
  if (outward > 0) return {{1, 0}, {+1.0, -1.0}, true};
  return {{1, 0}, {-1.0, +1.0}, false};
}

std::size_t flat_index(std::size_t n_long, std::size_t n_t, std::size_t comp, std::size_t layer,
                       std::size_t trans) {
  return (comp * n_long + layer) * n_t + trans;
}

}  // namespace

std::pair<SparseComplexMatrix, SparseComplexMatrix> assemble_port(
    const Material& material, const LongitudinalMatrices& longitudinal,
    const TransverseMatrices& transverse) {
  const std::size_t nl = longitudinal.n;
  const std::size_t nt = transverse.n;
  if (nl == 0 || nt == 0) throw std::invalid_argument("port element matrices need nonzero sizes");
  if (longitudinal.mass.n_rows != nl || transverse.mass.n_rows != nt)
    throw std::invalid_argument("port element matrix dimension mismatch");

  const auto [mu, lambda] = lame_from(material.E, material.nu);
  const double mpl = 2.0 * mu + lambda;
  const std::size_t n = 2 * nl * nt;

  std::vector<Triplet> ta, tb;
  for (std::size_t j = 0; j < nl; ++j)
    for (std::size_t jp = 0; jp < nl; ++jp) {
      const Complex ml = longitudinal.mass(j, jp);
      const Complex sl = longitudinal.stiffness(j, jp);
      const Complex dl = longitudinal.drift(j, jp);
      const Complex dlt = longitudinal.drift(jp, j);
      if (ml == Complex(0.0) && sl == Complex(0.0) && dl == Complex(0.0) && dlt == Complex(0.0))
        continue;
      for (std::size_t l = 0; l < nt; ++l)
        for (std::size_t lp = 0; lp < nt; ++lp) {
          const Complex mt = transverse.mass(l, lp);
          const Complex st = transverse.stiffness(l, lp);
          const Complex dt = transverse.drift(l, lp);
          const Complex dtt = transverse.drift(lp, l);

          // rows are test indices (j,l); both D factors carry the derivative
          // on their row index
          const Complex a11 = mpl * sl * mt + mu * ml * st;
          const Complex a22 = mpl * ml * st + mu * sl * mt;
          const Complex a12 = mu * dlt * dt + lambda * dl * dtt;
          const Complex a21 = mu * dl * dtt + lambda * dlt * dt;
          const Complex bv = material.rho * ml * mt;

          const std::size_t r1 = flat_index(nl, nt, 0, j, l);
          const std::size_t r2 = flat_index(nl, nt, 1, j, l);
          const std::size_t c1 = flat_index(nl, nt, 0, jp, lp);
          const std::size_t c2 = flat_index(nl, nt, 1, jp, lp);
          if (a11 != Complex(0.0)) ta.push_back({r1, c1, a11});
          if (a22 != Complex(0.0)) ta.push_back({r2, c2, a22});
          if (a12 != Complex(0.0)) ta.push_back({r1, c2, a12});
          if (a21 != Complex(0.0)) ta.push_back({r2, c1, a21});
          if (bv != Complex(0.0)) {
            tb.push_back({r1, c1, bv});
            tb.push_back({r2, c2, bv});
          }
        }
    }
  return {SparseComplexMatrix::from_triplets(n, n, ta),
          SparseComplexMatrix::from_triplets(n, n, tb)};
}

AssembledSystem assemble_global(const MeshTopology& mesh, const DofMap& dofs,
                                const InteriorSystem& interior,
                                const std::vector<WaveguidePort>& ports,
                                const std::vector<SparseComplexMatrix>& interface_terms) {
  AssembledSystem out;
  out.n_interior = 2 * dofs.n_scalar;
  if (interior.a.n_rows != out.n_interior)
    throw std::invalid_argument("interior system does not match the dof map");

  std::size_t dim = out.n_interior;
  for (const WaveguidePort& p : ports) {
    if (p.n_long < 2)
      throw std::invalid_argument("port " + std::to_string(p.id) + " needs n_long >= 2");
    PortLayout layout;
    layout.desc = p;
    const PortFrame frame = frame_of(p.axis, p.outward);
    layout.comp_index = frame.comp_index;
    layout.comp_sign = frame.comp_sign;
    try {
      layout.trace = trace_line(mesh, dofs, p.axis == 'x' ? 'x' : 'y', p.value, p.lo, p.hi,
                                frame.reversed);
    } catch (const std::exception& e) {
      throw std::invalid_argument("coupling error at port " + std::to_string(p.id) + ": " +
                                  e.what());
    }
    const double r_half = 0.5 * (p.hi - p.lo);
    layout.eta_breaks.resize(layout.trace.breaks.size());
    for (std::size_t i = 0; i < layout.trace.breaks.size(); ++i)
      layout.eta_breaks[i] = layout.trace.breaks[i] - r_half;
    layout.n_t = layout.trace.scalar_dofs.size();
    layout.order = dofs.order;
    layout.long_mats = assemble_long(p.params, p.n_long);
    layout.trans_mats = transverse_matrices(dofs.order, layout.eta_breaks);
    if (layout.trans_mats.n != layout.n_t)
      throw std::invalid_argument("coupling error at port " + std::to_string(p.id) +
                                  ": transverse dof count mismatch");

    // port plane must be an exterior boundary with the exterior on the
    // outward side
    {
      const double mid = 0.5 * (p.lo + p.hi);
      const double probe = p.value + (p.outward > 0 ? 1.0 : -1.0) * 1e-7;
      bool exterior_free = true;
      try {
        (void)(p.axis == 'x' ? mesh.locate(probe, mid) : mesh.locate(mid, probe));
        exterior_free = false;
      } catch (const std::exception&) {
      }
      if (!exterior_free)
        throw std::invalid_argument("coupling error at port " + std::to_string(p.id) +
                                    ": interior elements lie on the outward side");
    }

    auto [a_ext, b_ext] = assemble_port(p.material, layout.long_mats, layout.trans_mats);
    layout.a_ext = std::move(a_ext);
    layout.b_ext = std::move(b_ext);

    layout.base = dim;
    dim += 2 * (p.n_long - 1) * layout.n_t;

    const std::size_t n_flat = 2 * p.n_long * layout.n_t;
    layout.global_index.resize(n_flat);
    layout.global_sign.resize(n_flat);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < p.n_long; ++j)
        for (std::size_t l = 0; l < layout.n_t; ++l) {
          const std::size_t flat = flat_index(p.n_long, layout.n_t, i, j, l);
          if (j == 0) {
            layout.global_index[flat] =
                2 * layout.trace.scalar_dofs[l] +
                static_cast<std::size_t>(layout.comp_index[i]);
            layout.global_sign[flat] = layout.comp_sign[i] * layout.trace.signs[l];
          } else {
            layout.global_index[flat] =
                layout.base + (i * (p.n_long - 1) + (j - 1)) * layout.n_t + l;
            layout.global_sign[flat] = 1.0;
          }
        }
    out.ports.push_back(std::move(layout));
  }

  std::vector<Triplet> ta, tb;
  auto emit = [](std::vector<Triplet>& t, const SparseComplexMatrix& m) {
    for (std::size_t r = 0; r < m.n_rows; ++r)
      for (std::size_t idx = m.row_offsets[r]; idx < m.row_offsets[r + 1]; ++idx)
        t.push_back({r, m.cols[idx], m.vals[idx]});
  };
  emit(ta, interior.a);
  emit(tb, interior.b);
  for (const SparseComplexMatrix& term : interface_terms) {
    if (term.n_rows != out.n_interior)
      throw std::invalid_argument("interface term dimension mismatch");
    emit(ta, term);
  }
  for (const PortLayout& layout : out.ports) {
    auto fold = [&](std::vector<Triplet>& t, const SparseComplexMatrix& m) {
      for (std::size_t r = 0; r < m.n_rows; ++r)
        for (std::size_t idx = m.row_offsets[r]; idx < m.row_offsets[r + 1]; ++idx) {
          const std::size_t c = m.cols[idx];
          const double sgn = layout.global_sign[r] * layout.global_sign[c];
          t.push_back({layout.global_index[r], layout.global_index[c], sgn * m.vals[idx]});
        }
    };
    fold(ta, layout.a_ext);
    fold(tb, layout.b_ext);
  }
  out.a = SparseComplexMatrix::from_triplets(dim, dim, ta);
  out.b = SparseComplexMatrix::from_triplets(dim, dim, tb);
  return out;
}

ScatteringSolution scattering_solve(const AssembledSystem& system, Complex omega,
                                    const std::vector<Complex>& rhs,
                                    const std::vector<char>& fixed,
                                    const std::vector<Complex>& fixed_values) {
  const std::size_t n = system.a.n_rows;
  if (rhs.size() != n) throw std::invalid_argument("load vector length mismatch");
  const SparseComplexMatrix k = add_scaled(system.a, Complex(1.0), system.b, -omega * omega);

  auto factor = [&](const SparseComplexMatrix& m) {
    try {
      return lu_factor(m);
    } catch (const std::exception& e) {
      throw std::runtime_error("system is singular at this frequency (omega = " +
                               std::to_string(omega.real()) + "+" + std::to_string(omega.imag()) +
                               "i): " + e.what());
    }
  };

  ScatteringSolution out;
  if (fixed.empty()) {
    const LuFactorization lu = factor(k);
    out.coefficients = lu.solve(rhs);
    const std::vector<Complex> res = k.apply(out.coefficients);
    double rn = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      rn += std::norm(res[i] - rhs[i]);
      fn += std::norm(rhs[i]);
    }
    out.residual = std::sqrt(rn) / std::max(std::sqrt(fn), 1e-300);
    if (fn == 0.0) out.residual = std::sqrt(rn);
    return out;
  }

  const ReducedSystem red = dirichlet_lift(k, system.b, fixed, fixed_values);
  std::vector<Complex> rhs_red(red.to_full.size());
  for (std::size_t i = 0; i < red.to_full.size(); ++i)
    rhs_red[i] = rhs[red.to_full[i]] + red.rhs_correction[i];
  const LuFactorization lu = factor(red.a);
  const std::vector<Complex> x = lu.solve(rhs_red);
  out.coefficients = expand_reduced(red, x);
  const std::vector<Complex> res = red.a.apply(x);
  double rn = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    rn += std::norm(res[i] - rhs_red[i]);
    fn += std::norm(rhs_red[i]);
  }
  out.residual = std::sqrt(rn) / std::max(std::sqrt(fn), 1e-300);
  if (fn == 0.0) out.residual = std::sqrt(rn);
  return out;
}

std::vector<Complex> incident_rhs(const AssembledSystem& system, std::size_t port_index,
                                  const std::vector<IncidentMode>& modes, Complex omega) {
  if (port_index >= system.ports.size()) throw std::invalid_argument("port index out of range");
  const PortLayout& port = system.ports[port_index];
  std::vector<Complex> out(system.a.n_rows, Complex(0.0, 0.0));
  if (modes.empty()) return out;
  for (const IncidentMode& m : modes)
    if (m.wavenumber.mode_class != ModeClass::IncomingPropagating)
      throw std::invalid_argument("incident mode is not incoming propagating");

  const auto [mu, lambda] = lame_from(port.desc.material.E, port.desc.material.nu);
  const double mpl = 2.0 * mu + lambda;
  const std::size_t order = port.order;
  const std::size_t n_t = port.n_t;
  std::vector<Complex> g1(n_t, Complex(0.0)), g2(n_t, Complex(0.0));  // integral g_i psi_l
  std::vector<Complex> f1(n_t, Complex(0.0)), f2(n_t, Complex(0.0));  // integral t_i psi_l

  const std::size_t nseg = port.eta_breaks.size() - 1;
  const std::size_t nq = std::max<std::size_t>(2 * order + 2, 16);
  const QuadratureRule quad = gauss_legendre(nq, -1.0, 1.0);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double ea = port.eta_breaks[s];
    const double eb = port.eta_breaks[s + 1];
    const double h = eb - ea;
    for (std::size_t iq = 0; iq < quad.nodes.size(); ++iq) {
      const double t = quad.nodes[iq];
      const double w = 0.5 * h * quad.weights[iq];
      const double eta = 0.5 * (1.0 - t) * ea + 0.5 * (1.0 + t) * eb;
      Complex u1(0.0), u2(0.0), t1(0.0), t2(0.0);
      for (const IncidentMode& m : modes) {
        const std::array<Complex, 4> sh = m.shape(eta);
        const Complex ik = Complex(0.0, 1.0) * m.wavenumber.kappa;
        u1 += m.amplitude * sh[0];
        u2 += m.amplitude * sh[1];
        t1 += m.amplitude * (mpl * ik * sh[0] + lambda * sh[3]);
        t2 += m.amplitude * (mu * (sh[2] + ik * sh[1]));
      }
      const Shape1d shape = shape1d(order, t);
      for (std::size_t k = 0; k <= order; ++k) {
        std::size_t l;
        if (k == 0)
          l = s;
        else if (k == 1)
          l = s + 1;
        else
          l = nseg + 1 + (k - 2) * nseg + s;
        const double v = shape.value[k];
        g1[l] += w * v * u1;
        g2[l] += w * v * u2;
        f1[l] += w * v * t1;
        f2[l] += w * v * t2;
      }
    }
  }

  // transverse coefficients of the incident Dirichlet trace
  DenseComplexMatrix rhs_g(n_t, 2);
  for (std::size_t l = 0; l < n_t; ++l) {
    rhs_g(l, 0) = g1[l];
    rhs_g(l, 1) = g2[l];
  }
  const DenseComplexMatrix coeff = dense_lu_solve(port.trans_mats.mass, rhs_g);

  const std::size_t nl = port.desc.n_long;
  std::vector<Complex> g_pad(2 * nl * n_t, Complex(0.0, 0.0));
  for (std::size_t l = 0; l < n_t; ++l) {
    g_pad[flat_index(nl, n_t, 0, 0, l)] = coeff(l, 0);
    g_pad[flat_index(nl, n_t, 1, 0, l)] = coeff(l, 1);
  }
  const std::vector<Complex> ka = port.a_ext.apply(g_pad);
  const std::vector<Complex> kb = port.b_ext.apply(g_pad);
  for (std::size_t r = 0; r < ka.size(); ++r) {
    const Complex v = ka[r] - omega * omega * kb[r];
    out[port.global_index[r]] += port.global_sign[r] * v;
  }
  for (std::size_t l = 0; l < n_t; ++l) {
    const std::size_t r1 = flat_index(nl, n_t, 0, 0, l);
    const std::size_t r2 = flat_index(nl, n_t, 1, 0, l);
    out[port.global_index[r1]] += port.global_sign[r1] * f1[l];
    out[port.global_index[r2]] += port.global_sign[r2] * f2[l];
  }
  return out;
}

FieldSample evaluate(const MeshTopology& mesh, const DofMap& dofs,
                     const std::vector<Complex>& coefficients, double x, double y) {
  if (coefficients.size() < 2 * dofs.n_scalar)
    throw std::invalid_argument("coefficient vector shorter than the interior block");
  const std::vector<Complex> interior(coefficients.begin(),
                                      coefficients.begin() +
                                          static_cast<std::ptrdiff_t>(2 * dofs.n_scalar));
  return evaluate_displacement(mesh, dofs, interior, x, y);
}

namespace {

template <typename Body>
void quadrature_over_region(const MeshTopology& mesh, const DofMap& dofs,
                            const InterfaceRect& region, const Body& body) {
  const std::size_t p = dofs.order;
  const std::size_t nq = std::max<std::size_t>(2 * p + 2, 10);
  const QuadratureRule quad = gauss_legendre(nq, -1.0, 1.0);
  for (std::size_t e = 0; e < mesh.elements().size(); ++e) {
    const MeshElement& el = mesh.elements()[e];
    const double x0 = std::max(el.x0, region.x0);
    const double x1 = std::min(el.x1, region.x1);
    const double y0 = std::max(el.y0, region.y0);
    const double y1 = std::min(el.y1, region.y1);
    if (!(x1 - x0 > 1e-14) || !(y1 - y0 > 1e-14)) continue;
    for (std::size_t iy = 0; iy < nq; ++iy)
      for (std::size_t ix = 0; ix < nq; ++ix) {
        const double x = 0.5 * (1.0 - quad.nodes[ix]) * x0 + 0.5 * (1.0 + quad.nodes[ix]) * x1;
        const double y = 0.5 * (1.0 - quad.nodes[iy]) * y0 + 0.5 * (1.0 + quad.nodes[iy]) * y1;
        const double w = 0.25 * (x1 - x0) * (y1 - y0) * quad.weights[ix] * quad.weights[iy];
        body(e, x, y, w);
      }
  }
}

FieldSample sample_in_element(const MeshTopology& mesh, const DofMap& dofs,
                              const std::vector<Complex>& interior, std::size_t e, double x,
                              double y) {
  // same evaluation as evaluate_displacement but with the element pinned (the
  // clipped quadrature point may sit on a seam)
  const MeshElement& el = mesh.elements()[e];
  const double hx = el.x1 - el.x0;
  const double hy = el.y1 - el.y0;
  const double xi = 2.0 * (x - el.x0) / hx - 1.0;
  const double eta = 2.0 * (y - el.y0) / hy - 1.0;
  const std::size_t p = dofs.order;
  const Shape1d sx = shape1d(p, xi);
  const Shape1d sy = shape1d(p, eta);
  const std::vector<std::size_t>& loc = dofs.element_scalars[e];
  FieldSample out;
  for (std::size_t iy = 0; iy <= p; ++iy)
    for (std::size_t ix = 0; ix <= p; ++ix) {
      const std::size_t g = loc[iy * (p + 1) + ix];
      const double v = sx.value[ix] * sy.value[iy];
      const double dx = sx.deriv[ix] * (2.0 / hx) * sy.value[iy];
      const double dy = sx.value[ix] * sy.deriv[iy] * (2.0 / hy);
      for (int c = 0; c < 2; ++c) {
        const Complex coeff = interior[2 * g + static_cast<std::size_t>(c)];
        out.u[static_cast<std::size_t>(c)] += coeff * v;
        out.grad[static_cast<std::size_t>(c)][0] += coeff * dx;
        out.grad[static_cast<std::size_t>(c)][1] += coeff * dy;
      }
    }
  return out;
}

}  // namespace

double stress_norm(const MeshTopology& mesh, const DofMap& dofs,
                   const std::vector<Complex>& coefficients, const InterfaceRect& region) {
  if (coefficients.size() < 2 * dofs.n_scalar)
    throw std::invalid_argument("coefficient vector shorter than the interior block");
  double acc = 0.0;
  quadrature_over_region(mesh, dofs, region, [&](std::size_t e, double x, double y, double w) {
    const FieldSample s = sample_in_element(mesh, dofs, coefficients, e, x, y);
    const Material& mat = mesh.material_of(mesh.elements()[e]);
    const auto [mu, lambda] = lame_from(mat.E, mat.nu);
    const Complex e11 = s.grad[0][0];
    const Complex e22 = s.grad[1][1];
    const Complex e12 = 0.5 * (s.grad[0][1] + s.grad[1][0]);
    const Complex tr = e11 + e22;
    const Complex s11 = 2.0 * mu * e11 + lambda * tr;
    const Complex s22 = 2.0 * mu * e22 + lambda * tr;
    const Complex s12 = 2.0 * mu * e12;
    acc += w * (std::norm(s11) + std::norm(s22) + 2.0 * std::norm(s12));
  });
  return std::sqrt(acc);
}

double h1_relative_error(const MeshTopology& mesh, const DofMap& dofs,
                         const std::vector<Complex>& coefficients, const ReferenceField& reference,
                         const InterfaceRect& region) {
  if (coefficients.size() < 2 * dofs.n_scalar)
    throw std::invalid_argument("coefficient vector shorter than the interior block");
  double err = 0.0, ref = 0.0;
  quadrature_over_region(mesh, dofs, region, [&](std::size_t e, double x, double y, double w) {
    const FieldSample s = sample_in_element(mesh, dofs, coefficients, e, x, y);
    const FieldValue r = reference(x, y);
    for (int c = 0; c < 2; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      err += w * std::norm(s.u[cc] - r.u[cc]);
      ref += w * std::norm(r.u[cc]);
      for (int d = 0; d < 2; ++d) {
        const auto dd = static_cast<std::size_t>(d);
        err += w * std::norm(s.grad[cc][dd] - r.grad[cc][dd]);
        ref += w * std::norm(r.grad[cc][dd]);
      }
    }
  });
  if (ref == 0.0) return std::sqrt(err);
  return std::sqrt(err / ref);
}

}  // namespace hsie
