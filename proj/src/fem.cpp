#include "hsie/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace hsie {

namespace {

constexpr double kSnapScale = 1e9;  // coordinate quantization for vertex identification

std::int64_t quantize(double v) { return static_cast<std::int64_t>(std::llround(v * kSnapScale)); }

std::vector<double> legendre_values(std::size_t max_degree, double t) {
  std::vector<double> p(max_degree + 1);
  p[0] = 1.0;
  if (max_degree >= 1) p[1] = t;
  for (std::size_t k = 1; k + 1 <= max_degree; ++k)
    p[k + 1] = ((2.0 * k + 1.0) * t * p[k] - static_cast<double>(k) * p[k - 1]) / (k + 1.0);
  return p;
}

struct Mats1d {
  std::size_t n = 0;
  std::vector<double> mass, drift, stiffness;  // row-major, drift[i][j] = integral f_i' f_j
  double& at(std::vector<double>& m, std::size_t i, std::size_t j) { return m[i * n + j]; }
};

void snap_small(std::vector<double>& m) {
  double mx = 0.0;
  for (double v : m) mx = std::max(mx, std::abs(v));
  const double cut = 1e-13 * mx;
  for (double& v : m)
    if (std::abs(v) < cut) v = 0.0;
}

// reference-interval matrices: mass/drift as printed, stiffness without the
// h-scaling applied later
Mats1d reference_mats(std::size_t p) {
  Mats1d out;
  out.n = p + 1;
  out.mass.assign(out.n * out.n, 0.0);
  out.drift.assign(out.n * out.n, 0.0);
  out.stiffness.assign(out.n * out.n, 0.0);
  const QuadratureRule q = gauss_legendre(2 * p + 2, -1.0, 1.0);
  for (std::size_t iq = 0; iq < q.nodes.size(); ++iq) {
    const Shape1d s = shape1d(p, q.nodes[iq]);
    const double w = q.weights[iq];
    for (std::size_t i = 0; i < out.n; ++i)
      for (std::size_t j = 0; j < out.n; ++j) {
        out.mass[i * out.n + j] += w * (s.value[i] * s.value[j]);
        out.drift[i * out.n + j] += w * (s.deriv[i] * s.value[j]);
        out.stiffness[i * out.n + j] += w * (s.deriv[i] * s.deriv[j]);
      }
  }
  snap_small(out.mass);
  snap_small(out.drift);
  snap_small(out.stiffness);
  return out;
}

Mats1d scaled_mats(const Mats1d& ref, double h) {
  Mats1d out = ref;
  for (double& v : out.mass) v *= 0.5 * h;
  for (double& v : out.stiffness) v *= 2.0 / h;
  return out;
}

}  // namespace

double Material::mu() const { return lame_from(E, nu).first; }
double Material::lambda() const { return lame_from(E, nu).second; }

std::pair<double, double> lame_from(double E, double nu) {
  if (!(E > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
  if (!(nu > 0.0)) throw std::invalid_argument("Poisson ratio must be positive");
  if (!(nu < 0.5))
    throw std::invalid_argument("incompressible material: Poisson ratio must be below 1/2");
  const double mu = E / (2.0 * (1.0 + nu));
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return {mu, lambda};
}

Shape1d shape1d(std::size_t p, double t) {
  Shape1d s;
  s.value.assign(p + 1, 0.0);
  s.deriv.assign(p + 1, 0.0);
  s.value[0] = 0.5 * (1.0 - t);
  s.deriv[0] = -0.5;
  if (p >= 1) {
    s.value[1] = 0.5 * (1.0 + t);
    s.deriv[1] = 0.5;
  }
  if (p >= 2) {
    const std::vector<double> leg = legendre_values(p, t);
    for (std::size_t k = 2; k <= p; ++k) {
      const double norm = std::sqrt(2.0 * (2.0 * k - 1.0));
      s.value[k] = (leg[k] - leg[k - 2]) / norm;
      s.deriv[k] = (2.0 * k - 1.0) / norm * leg[k - 1];
    }
  }
  return s;
}

MeshTopology::MeshTopology(const BlockMesh& spec) : spec_(spec) {
  if (spec_.blocks.empty()) throw std::invalid_argument("mesh has no blocks");
  if (spec_.materials.empty()) throw std::invalid_argument("mesh has no materials");

  double scale = 0.0;
  std::size_t elem_count = 0;
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const MeshBlock& blk = spec_.blocks[b];
    if (!(blk.x1 > blk.x0) || !(blk.y1 > blk.y0) || blk.nx == 0 || blk.ny == 0)
      throw std::invalid_argument("degenerate element geometry at element " +
                                  std::to_string(elem_count) + " (block " + std::to_string(b) +
                                  ")");
    if (blk.material >= spec_.materials.size())
      throw std::invalid_argument("block " + std::to_string(b) + " references unknown material");
    scale = std::max({scale, std::abs(blk.x0), std::abs(blk.x1), std::abs(blk.y0),
                      std::abs(blk.y1)});
    elem_count += blk.nx * blk.ny;
  }
  const double tol = 1e-9 * std::max(1.0, scale);
  for (std::size_t a = 0; a < spec_.blocks.size(); ++a)
    for (std::size_t b = a + 1; b < spec_.blocks.size(); ++b) {
      const MeshBlock& pa = spec_.blocks[a];
      const MeshBlock& pb = spec_.blocks[b];
      const double ox = std::min(pa.x1, pb.x1) - std::max(pa.x0, pb.x0);
      const double oy = std::min(pa.y1, pb.y1) - std::max(pa.y0, pb.y0);
      if (ox > tol && oy > tol)
        throw std::invalid_argument("blocks " + std::to_string(a) + " and " + std::to_string(b) +
                                    " overlap");
    }

  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> vertex_ids;
  auto vertex_of = [&](double x, double y) {
    const auto key = std::make_pair(quantize(x), quantize(y));
    auto it = vertex_ids.find(key);
    if (it != vertex_ids.end()) return it->second;
    const std::size_t id = vertices_.size();
    vertices_.push_back({x, y});
    vertex_ids.emplace(key, id);
    return id;
  };

  block_elem_offset_.reserve(spec_.blocks.size());
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const MeshBlock& blk = spec_.blocks[b];
    block_elem_offset_.push_back(elements_.size());
    auto xc = [&](std::size_t i) {
      return blk.x0 + (static_cast<double>(i) * (blk.x1 - blk.x0)) / static_cast<double>(blk.nx);
    };
    auto yc = [&](std::size_t j) {
      return blk.y0 + (static_cast<double>(j) * (blk.y1 - blk.y0)) / static_cast<double>(blk.ny);
    };
    for (std::size_t j = 0; j < blk.ny; ++j)
      for (std::size_t i = 0; i < blk.nx; ++i) {
        MeshElement e;
        e.block = b;
        e.material = blk.material;
        e.x0 = xc(i);
        e.x1 = xc(i + 1);
        e.y0 = yc(j);
        e.y1 = yc(j + 1);
        e.corners = {vertex_of(e.x0, e.y0), vertex_of(e.x1, e.y0), vertex_of(e.x0, e.y1),
                     vertex_of(e.x1, e.y1)};
        elements_.push_back(e);
      }
  }

  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_ids;
  auto edge_of = [&](std::size_t va, std::size_t vb, bool horizontal) {
    const auto key = std::make_pair(std::min(va, vb), std::max(va, vb));
    auto it = edge_ids.find(key);
    if (it != edge_ids.end()) return it->second;
    MeshEdge e;
    e.horizontal = horizontal;
    if (horizontal) {
      e.v0 = vertices_[va][0] <= vertices_[vb][0] ? va : vb;
    } else {
      e.v0 = vertices_[va][1] <= vertices_[vb][1] ? va : vb;
    }
    e.v1 = (e.v0 == va) ? vb : va;
    const std::size_t id = edges_.size();
    edges_.push_back(e);
    edge_ids.emplace(key, id);
    return id;
  };

  element_edges_.resize(elements_.size());
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const MeshElement& el = elements_[e];
    const std::size_t bottom = edge_of(el.corners[0], el.corners[1], true);
    const std::size_t top = edge_of(el.corners[2], el.corners[3], true);
    const std::size_t left = edge_of(el.corners[0], el.corners[2], false);
    const std::size_t right = edge_of(el.corners[1], el.corners[3], false);
    element_edges_[e] = {bottom, top, left, right};
    edges_[bottom].elem_hi = static_cast<std::ptrdiff_t>(e);
    edges_[top].elem_lo = static_cast<std::ptrdiff_t>(e);
    edges_[left].elem_hi = static_cast<std::ptrdiff_t>(e);
    edges_[right].elem_lo = static_cast<std::ptrdiff_t>(e);
  }

  auto inside_some_block = [&](double x, double y) {
    for (const MeshBlock& blk : spec_.blocks)
      if (x > blk.x0 + tol && x < blk.x1 - tol && y > blk.y0 + tol && y < blk.y1 - tol) return true;
    return false;
  };

  for (MeshEdge& e : edges_) {
    e.boundary = (e.elem_lo < 0) != (e.elem_hi < 0);
    if (!e.boundary) continue;
    const auto& a = vertices_[e.v0];
    const auto& b = vertices_[e.v1];
    const double mx = 0.5 * (a[0] + b[0]);
    const double my = 0.5 * (a[1] + b[1]);
    const double eps = 10.0 * tol;
    const double px = e.horizontal ? mx : (e.elem_lo < 0 ? mx - eps : mx + eps);
    const double py = e.horizontal ? (e.elem_lo < 0 ? my - eps : my + eps) : my;
    if (inside_some_block(px, py))
      throw std::invalid_argument("shared block edges have mismatched subdivisions near (" +
                                  std::to_string(mx) + ", " + std::to_string(my) + ")");
  }

  for (const BoundarySegment& seg : spec_.boundary_overrides) {
    if (seg.axis != 'x' && seg.axis != 'y')
      throw std::invalid_argument("boundary segment axis must be 'x' or 'y'");
    bool hit = false;
    for (MeshEdge& e : edges_) {
      if (!e.boundary) continue;
      const auto& a = vertices_[e.v0];
      const auto& b = vertices_[e.v1];
      if (seg.axis == 'x') {
        if (e.horizontal) continue;
        if (std::abs(a[0] - seg.value) > tol) continue;
        if (a[1] < seg.lo - tol || b[1] > seg.hi + tol) continue;
      } else {
        if (!e.horizontal) continue;
        if (std::abs(a[1] - seg.value) > tol) continue;
        if (a[0] < seg.lo - tol || b[0] > seg.hi + tol) continue;
      }
      e.bc = seg.bc;
      e.port_id = seg.port_id;
      hit = true;
    }
    if (!hit)
      throw std::invalid_argument("boundary segment matches no exterior edge (axis " +
                                  std::string(1, seg.axis) + " at " + std::to_string(seg.value) +
                                  ")");
  }
}

const Material& MeshTopology::material_of(const MeshElement& e) const {
  return spec_.materials[e.material];
}

std::size_t MeshTopology::locate(double x, double y) const {
  double scale = 1.0;
  for (const MeshBlock& blk : spec_.blocks)
    scale = std::max({scale, std::abs(blk.x0), std::abs(blk.x1), std::abs(blk.y0),
                      std::abs(blk.y1)});
  const double tol = 1e-9 * scale;
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const MeshBlock& blk = spec_.blocks[b];
    if (x < blk.x0 - tol || x > blk.x1 + tol || y < blk.y0 - tol || y > blk.y1 + tol) continue;
    const double hx = (blk.x1 - blk.x0) / static_cast<double>(blk.nx);
    const double hy = (blk.y1 - blk.y0) / static_cast<double>(blk.ny);
    auto clamp_idx = [](double v, std::size_t n) {
      const auto i = static_cast<std::ptrdiff_t>(std::floor(v));
      return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0,
                                                                 static_cast<std::ptrdiff_t>(n) -
                                                                     1));
    };
    const std::size_t i = clamp_idx((x - blk.x0) / hx, blk.nx);
    const std::size_t j = clamp_idx((y - blk.y0) / hy, blk.ny);
    return block_elem_offset_[b] + j * blk.nx + i;
  }
  throw std::invalid_argument("point (" + std::to_string(x) + ", " + std::to_string(y) +
                              ") lies outside the mesh");
}

DofMap build_dof_map(const MeshTopology& mesh, std::size_t p) {
  if (p < 1) throw std::invalid_argument("basis order must be at least 1");
  DofMap map;
  map.order = p;
  map.n_vertices = mesh.vertices().size();
  const std::size_t n_edge = p - 1;
  const std::size_t edge_base = map.n_vertices;
  const std::size_t cell_base = edge_base + mesh.edges().size() * n_edge;
  map.n_scalar = cell_base + mesh.elements().size() * n_edge * n_edge;

  map.edge_scalars.resize(mesh.edges().size());
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    map.edge_scalars[e].resize(n_edge);
    for (std::size_t k = 0; k < n_edge; ++k) map.edge_scalars[e][k] = edge_base + e * n_edge + k;
  }

  map.element_scalars.resize(mesh.elements().size());
  for (std::size_t e = 0; e < mesh.elements().size(); ++e) {
    const MeshElement& el = mesh.elements()[e];
    const auto& edges = mesh.element_edges(e);
    std::vector<std::size_t>& loc = map.element_scalars[e];
    loc.assign((p + 1) * (p + 1), 0);
    for (std::size_t iy = 0; iy <= p; ++iy)
      for (std::size_t ix = 0; ix <= p; ++ix) {
        std::size_t g;
        if (ix <= 1 && iy <= 1) {
          g = el.corners[iy * 2 + ix];
        } else if (iy <= 1) {
          g = map.edge_scalars[edges[iy]][ix - 2];  // 0 = bottom, 1 = top
        } else if (ix <= 1) {
          g = map.edge_scalars[edges[2 + ix]][iy - 2];  // 2 = left, 3 = right
        } else {
          g = cell_base + e * n_edge * n_edge + (iy - 2) * n_edge + (ix - 2);
        }
        loc[iy * (p + 1) + ix] = g;
      }
  }

  map.dirichlet.assign(map.n_scalar, 0);
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const MeshEdge& edge = mesh.edges()[e];
    if (!edge.boundary || edge.bc != BoundaryCondition::Dirichlet) continue;
    map.dirichlet[edge.v0] = 1;
    map.dirichlet[edge.v1] = 1;
    for (std::size_t g : map.edge_scalars[e]) map.dirichlet[g] = 1;
  }
  return map;
}

InteriorSystem assemble_interior(const MeshTopology& mesh, const DofMap& dofs) {
  const std::size_t p = dofs.order;
  const std::size_t n1 = p + 1;
  const Mats1d ref = reference_mats(p);

  std::map<std::int64_t, Mats1d> cache;
  auto mats_for = [&](double h) -> const Mats1d& {
    const std::int64_t key = static_cast<std::int64_t>(std::llround(h * 1e12));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, scaled_mats(ref, h)).first;
    return it->second;
  };

  std::vector<Triplet> ta, tb;
  for (std::size_t e = 0; e < mesh.elements().size(); ++e) {
    const MeshElement& el = mesh.elements()[e];
    const double hx = el.x1 - el.x0;
    const double hy = el.y1 - el.y0;
    if (!(hx > 0.0) || !(hy > 0.0))
      throw std::invalid_argument("degenerate element geometry at element " + std::to_string(e));
    const Mats1d& mx = mats_for(hx);
    const Mats1d& my = mats_for(hy);
    const Material& mat = mesh.material_of(el);
    const auto [mu, lambda] = lame_from(mat.E, mat.nu);
    const double mpl = 2.0 * mu + lambda;
    const std::vector<std::size_t>& loc = dofs.element_scalars[e];

    for (std::size_t iy = 0; iy < n1; ++iy)
      for (std::size_t ix = 0; ix < n1; ++ix) {
        const std::size_t r = loc[iy * n1 + ix];
        for (std::size_t ky = 0; ky < n1; ++ky)
          for (std::size_t kx = 0; kx < n1; ++kx) {
            const std::size_t c = loc[ky * n1 + kx];
            const double sx = mx.stiffness[ix * n1 + kx];
            const double sy = my.stiffness[iy * n1 + ky];
            const double mxv = mx.mass[ix * n1 + kx];
            const double myv = my.mass[iy * n1 + ky];
            const double a11 = mpl * sx * myv + mu * mxv * sy;
            const double a22 = mpl * mxv * sy + mu * sx * myv;
            const double a12 = mu * mx.drift[kx * n1 + ix] * my.drift[iy * n1 + ky] +
                               lambda * mx.drift[ix * n1 + kx] * my.drift[ky * n1 + iy];
            const double a21 = mu * mx.drift[ix * n1 + kx] * my.drift[ky * n1 + iy] +
                               lambda * mx.drift[kx * n1 + ix] * my.drift[iy * n1 + ky];
            const double bval = mat.rho * mxv * myv;
            if (a11 != 0.0) ta.push_back({2 * r, 2 * c, Complex(a11, 0.0)});
            if (a22 != 0.0) ta.push_back({2 * r + 1, 2 * c + 1, Complex(a22, 0.0)});
            if (a12 != 0.0) ta.push_back({2 * r, 2 * c + 1, Complex(a12, 0.0)});
            if (a21 != 0.0) ta.push_back({2 * r + 1, 2 * c, Complex(a21, 0.0)});
            if (bval != 0.0) {
              tb.push_back({2 * r, 2 * c, Complex(bval, 0.0)});
              tb.push_back({2 * r + 1, 2 * c + 1, Complex(bval, 0.0)});
            }
          }
      }
  }

  InteriorSystem out;
  const std::size_t n = 2 * dofs.n_scalar;
  out.a = SparseComplexMatrix::from_triplets(n, n, ta);
  out.b = SparseComplexMatrix::from_triplets(n, n, tb);
  return out;
}

SparseComplexMatrix interface_mass(const MeshTopology& mesh, const DofMap& dofs,
                                   std::size_t interface_index, Complex alpha) {
  if (interface_index >= mesh.spec().interfaces.size())
    throw std::invalid_argument("interface index out of range");
  const InterfaceRect rect = mesh.spec().interfaces[interface_index];
  if (!(rect.x1 > rect.x0) || !(rect.y1 > rect.y0))
    throw std::invalid_argument("interface rectangle is degenerate");

  double scale = std::max({std::abs(rect.x0), std::abs(rect.x1), std::abs(rect.y0),
                           std::abs(rect.y1), 1.0});
  const double tol = 1e-9 * scale;

  struct Side {
    char axis;
    double value, lo, hi;
    double covered = 0.0;
  };
  std::array<Side, 4> sides = {Side{'y', rect.y0, rect.x0, rect.x1},
                               Side{'y', rect.y1, rect.x0, rect.x1},
                               Side{'x', rect.x0, rect.y0, rect.y1},
                               Side{'x', rect.x1, rect.y0, rect.y1}};

  std::vector<std::size_t> chain;
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const MeshEdge& edge = mesh.edges()[e];
    const auto& a = mesh.vertices()[edge.v0];
    const auto& b = mesh.vertices()[edge.v1];
    for (Side& side : sides) {
      const int along = (side.axis == 'y') ? 0 : 1;
      const int fixed = 1 - along;
      if (edge.horizontal != (side.axis == 'y')) continue;
      if (std::abs(a[fixed] - side.value) > tol) continue;
      if (a[along] < side.lo - tol || b[along] > side.hi + tol) continue;
      chain.push_back(e);
      side.covered += b[along] - a[along];
      break;
    }
  }
  for (const Side& side : sides)
    if (std::abs(side.covered - (side.hi - side.lo)) > tol)
      throw std::invalid_argument(
          "interface chain is not closed: rectangle side not covered by element edges");

  const std::size_t p = dofs.order;
  const Mats1d ref = reference_mats(p);
  std::vector<Triplet> triplets;
  for (std::size_t e : chain) {
    const MeshEdge& edge = mesh.edges()[e];
    const auto& a = mesh.vertices()[edge.v0];
    const auto& b = mesh.vertices()[edge.v1];
    const double h = edge.horizontal ? (b[0] - a[0]) : (b[1] - a[1]);
    std::vector<std::size_t> loc;
    loc.push_back(edge.v0);
    loc.push_back(edge.v1);
    for (std::size_t g : dofs.edge_scalars[e]) loc.push_back(g);
    for (std::size_t i = 0; i < loc.size(); ++i)
      for (std::size_t j = 0; j < loc.size(); ++j) {
        const double m = 0.5 * h * ref.mass[i * ref.n + j];
        if (m == 0.0) continue;
        const Complex v = alpha * m;
        if (v == Complex(0.0, 0.0)) continue;
        triplets.push_back({2 * loc[i], 2 * loc[j], v});
        triplets.push_back({2 * loc[i] + 1, 2 * loc[j] + 1, v});
      }
  }
  const std::size_t n = 2 * dofs.n_scalar;
  return SparseComplexMatrix::from_triplets(n, n, triplets);
}

TransverseMatrices transverse_matrices(std::size_t p, const std::vector<double>& breakpoints) {
  if (p < 1) throw std::invalid_argument("basis order must be at least 1");
  if (breakpoints.size() < 2) throw std::invalid_argument("transverse interval needs two endpoints");
  for (std::size_t s = 0; s + 1 < breakpoints.size(); ++s)
    if (!(breakpoints[s + 1] > breakpoints[s]))
      throw std::invalid_argument("transverse breakpoints must be strictly increasing");

  const std::size_t nseg = breakpoints.size() - 1;
  const std::size_t nvert = nseg + 1;
  const std::size_t n = nvert + (p - 1) * nseg;

  TransverseMatrices out;
  out.n = n;
  out.mass = DenseComplexMatrix(n, n);
  out.drift = DenseComplexMatrix(n, n);
  out.stiffness = DenseComplexMatrix(n, n);

  const Mats1d ref = reference_mats(p);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double h = breakpoints[s + 1] - breakpoints[s];
    std::vector<std::size_t> loc(p + 1);
    loc[0] = s;
    loc[1] = s + 1;
    for (std::size_t k = 2; k <= p; ++k) loc[k] = nvert + (k - 2) * nseg + s;
    for (std::size_t i = 0; i <= p; ++i)
      for (std::size_t j = 0; j <= p; ++j) {
        out.mass(loc[i], loc[j]) += 0.5 * h * ref.mass[i * ref.n + j];
        out.drift(loc[i], loc[j]) += ref.drift[i * ref.n + j];
        out.stiffness(loc[i], loc[j]) += (2.0 / h) * ref.stiffness[i * ref.n + j];
      }
  }
  return out;
}

TraceLine trace_line(const MeshTopology& mesh, const DofMap& dofs, char axis, double value,
                     double lo, double hi, bool reversed) {
  if (axis != 'x' && axis != 'y') throw std::invalid_argument("trace axis must be 'x' or 'y'");
  if (!(hi > lo)) throw std::invalid_argument("trace interval is empty");
  const double tol = 1e-9 * std::max({1.0, std::abs(value), std::abs(lo), std::abs(hi)});

  struct Seg {
    double a, b;
    std::size_t edge;
    std::size_t va, vb;  // vertex at a, vertex at b
  };
  std::vector<Seg> segs;
  double covered = 0.0;
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const MeshEdge& edge = mesh.edges()[e];
    if (edge.horizontal != (axis == 'y')) continue;
    const auto& pa = mesh.vertices()[edge.v0];
    const auto& pb = mesh.vertices()[edge.v1];
    const int along = (axis == 'y') ? 0 : 1;
    const int fixed = 1 - along;
    if (std::abs(pa[fixed] - value) > tol) continue;
    if (pa[along] < lo - tol || pb[along] > hi + tol) continue;
    segs.push_back({pa[along], pb[along], e, edge.v0, edge.v1});
    covered += pb[along] - pa[along];
  }
  if (std::abs(covered - (hi - lo)) > tol)
    throw std::invalid_argument("trace line is not covered by element edges");
  std::sort(segs.begin(), segs.end(), [](const Seg& l, const Seg& r) { return l.a < r.a; });
  if (reversed) {
    std::reverse(segs.begin(), segs.end());
    for (Seg& s : segs) {
      std::swap(s.a, s.b);
      std::swap(s.va, s.vb);
      s.a = hi - s.a + lo;  // keep in traversal parameter below
      s.b = hi - s.b + lo;
    }
  }

  const std::size_t p = dofs.order;
  const std::size_t nseg = segs.size();
  const std::size_t nvert = nseg + 1;
  TraceLine out;
  out.breaks.resize(nvert);
  out.scalar_dofs.assign(nvert + (p - 1) * nseg, 0);
  out.signs.assign(nvert + (p - 1) * nseg, 1.0);

  for (std::size_t s = 0; s < nseg; ++s) {
    out.breaks[s] = segs[s].a - lo;
    out.scalar_dofs[s] = segs[s].va;
    if (s + 1 == nseg) {
      out.breaks[s + 1] = segs[s].b - lo;
      out.scalar_dofs[s + 1] = segs[s].vb;
    }
    for (std::size_t k = 2; k <= p; ++k) {
      const std::size_t idx = nvert + (k - 2) * nseg + s;
      out.scalar_dofs[idx] = dofs.edge_scalars[segs[s].edge][k - 2];
      out.signs[idx] = (reversed && (k % 2 == 1)) ? -1.0 : 1.0;
    }
  }
  return out;
}

std::vector<Complex> project_dirichlet(const MeshTopology& mesh, const DofMap& dofs,
                                       const VectorField& field) {
  std::vector<Complex> out(2 * dofs.n_scalar, Complex(0.0, 0.0));
  const std::size_t p = dofs.order;
  const QuadratureRule q = gauss_legendre(2 * p + 2, -1.0, 1.0);

  std::vector<char> vertex_done(mesh.vertices().size(), 0);
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const MeshEdge& edge = mesh.edges()[e];
    if (!edge.boundary || edge.bc != BoundaryCondition::Dirichlet) continue;
    for (std::size_t v : {edge.v0, edge.v1}) {
      if (vertex_done[v]) continue;
      vertex_done[v] = 1;
      const auto val = field(mesh.vertices()[v][0], mesh.vertices()[v][1]);
      out[2 * v] = val[0];
      out[2 * v + 1] = val[1];
    }
  }

  if (p < 2) return out;
  const std::size_t nb = p - 1;
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const MeshEdge& edge = mesh.edges()[e];
    if (!edge.boundary || edge.bc != BoundaryCondition::Dirichlet) continue;
    const auto& a = mesh.vertices()[edge.v0];
    const auto& b = mesh.vertices()[edge.v1];

    DenseComplexMatrix gram(nb, nb);
    DenseComplexMatrix rhs(nb, 2);
    for (std::size_t iq = 0; iq < q.nodes.size(); ++iq) {
      const double t = q.nodes[iq];
      const double w = q.weights[iq];
      const Shape1d s = shape1d(p, t);
      const double x = 0.5 * (1.0 - t) * a[0] + 0.5 * (1.0 + t) * b[0];
      const double y = 0.5 * (1.0 - t) * a[1] + 0.5 * (1.0 + t) * b[1];
      const auto val = field(x, y);
      const Complex res0 = val[0] - s.value[0] * out[2 * edge.v0] - s.value[1] * out[2 * edge.v1];
      const Complex res1 =
          val[1] - s.value[0] * out[2 * edge.v0 + 1] - s.value[1] * out[2 * edge.v1 + 1];
      for (std::size_t i = 0; i < nb; ++i) {
        rhs(i, 0) += w * s.value[i + 2] * res0;
        rhs(i, 1) += w * s.value[i + 2] * res1;
        for (std::size_t j = 0; j < nb; ++j)
          gram(i, j) += Complex(w * s.value[i + 2] * s.value[j + 2], 0.0);
      }
    }
    const DenseComplexMatrix coeff = dense_lu_solve(gram, rhs);
    for (std::size_t i = 0; i < nb; ++i) {
      const std::size_t g = dofs.edge_scalars[e][i];
      out[2 * g] = coeff(i, 0);
      out[2 * g + 1] = coeff(i, 1);
    }
  }
  return out;
}

ReducedSystem dirichlet_lift(const SparseComplexMatrix& a, const SparseComplexMatrix& b,
                             const std::vector<char>& fixed_displacement,
                             const std::vector<Complex>& values) {
  const std::size_t n = a.n_rows;
  if (fixed_displacement.size() != n)
    throw std::invalid_argument("Dirichlet mask length does not match the system");
  if (values.size() != n)
    throw std::invalid_argument("missing Dirichlet values: expected one value per unknown");
  for (std::size_t i = 0; i < n; ++i)
    if (fixed_displacement[i] && (std::isnan(values[i].real()) || std::isnan(values[i].imag())))
      throw std::invalid_argument("missing Dirichlet value at dof " + std::to_string(i));

  ReducedSystem out;
  std::vector<std::ptrdiff_t> full_to_red(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (fixed_displacement[i]) continue;
    full_to_red[i] = static_cast<std::ptrdiff_t>(out.to_full.size());
    out.to_full.push_back(i);
  }
  out.lift.assign(n, Complex(0.0, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    if (fixed_displacement[i]) out.lift[i] = values[i];

  auto reduce = [&](const SparseComplexMatrix& m) {
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < m.n_rows; ++r) {
      if (full_to_red[r] < 0) continue;
      for (std::size_t idx = m.row_offsets[r]; idx < m.row_offsets[r + 1]; ++idx) {
        const std::size_t c = m.cols[idx];
        if (full_to_red[c] < 0) continue;
        t.push_back({static_cast<std::size_t>(full_to_red[r]),
                     static_cast<std::size_t>(full_to_red[c]), m.vals[idx]});
      }
    }
    return SparseComplexMatrix::from_triplets(out.to_full.size(), out.to_full.size(), t);
  };
  out.a = reduce(a);
  out.b = reduce(b);

  const std::vector<Complex> a_lift = a.apply(out.lift);
  out.rhs_correction.resize(out.to_full.size());
  for (std::size_t i = 0; i < out.to_full.size(); ++i)
    out.rhs_correction[i] = -a_lift[out.to_full[i]];
  return out;
}

std::vector<Complex> expand_reduced(const ReducedSystem& sys, const std::vector<Complex>& reduced) {
  if (reduced.size() != sys.to_full.size())
    throw std::invalid_argument("reduced vector length mismatch");
  std::vector<Complex> full = sys.lift;
  for (std::size_t i = 0; i < reduced.size(); ++i) full[sys.to_full[i]] = reduced[i];
  return full;
}

FieldSample evaluate_displacement(const MeshTopology& mesh, const DofMap& dofs,
                                  const std::vector<Complex>& full_solution, double x, double y) {
  if (full_solution.size() != 2 * dofs.n_scalar)
    throw std::invalid_argument("solution vector length mismatch");
  const std::size_t e = mesh.locate(x, y);
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
        const Complex coeff = full_solution[2 * g + static_cast<std::size_t>(c)];
        out.u[static_cast<std::size_t>(c)] += coeff * v;
        out.grad[static_cast<std::size_t>(c)][0] += coeff * dx;
        out.grad[static_cast<std::size_t>(c)][1] += coeff * dy;
      }
    }
  return out;
}

}  // namespace hsie
