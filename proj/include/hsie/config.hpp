#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsie/curve.hpp"
#include "hsie/fem.hpp"
#include "hsie/spectral.hpp"
#include "hsie/waveguide.hpp"

namespace hsie {

// Parse or validation failure; `line` is 1-based, 0 when the problem is not
// tied to a specific config line.
struct ConfigError : std::runtime_error {
  std::size_t line = 0;
  ConfigError(std::size_t line_, const std::string& message);
};

struct AnalysisConfig {
  double omega = 0.0;
  double omega_lo = 0.0;
  double omega_hi = 0.0;
  std::size_t n_omega = 0;
  std::size_t order = 4;
  std::vector<std::size_t> order_list;
  std::vector<std::size_t> n_long_list;
  std::size_t krylov_dim = 300;
  std::size_t n_wanted = 20;
  std::vector<Complex> shifts;
  SearchBox box{0.0, 0.0, 0.0, 0.0};  // empty box = automatic
  double half_width = 1.0;
  double r_lo = -5.0;
  double r_hi = 0.0;
  std::size_t n_samples = 300;
  double omega_re_max = 2.2;
  std::size_t n_symmetric = 5;
  std::size_t n_antisymmetric = 4;
  double classify_tol = 0.02;
  PoleParams twin{};
  bool run_twin = false;
  Complex neumann_datum{1.0, 0.0};
  PoleParams poles{};
  std::vector<std::size_t> n_list;
  InterfaceRect stress_region{};
  bool has_stress_region = false;
  std::size_t incident_port = 0;
  double amplitude = 1.0;
  bool field_dump = false;
  double theta = 0.0;  // choose-params override; 0 = automatic
  double dir_re = -1.0;
  double dir_im = 1.0;
};

struct OutputConfig {
  std::string prefix = "run";
};

struct RunConfig {
  std::string command;  // optional tag; must match the invoked subcommand when set
  std::vector<Material> materials;
  std::vector<MeshBlock> blocks;
  std::vector<BoundarySegment> boundaries;
  std::vector<WaveguidePort> ports;
  std::vector<std::size_t> port_material;  // parallel to ports, index into materials
  AnalysisConfig analysis;
  OutputConfig output;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical form; parse(serialize(parse(text))) == parse(text).
std::string serialize(const RunConfig& config);

// Mesh description assembled from the problem sections.
BlockMesh block_mesh_of(const RunConfig& config);

std::string config_hash(const std::string& text);

}  // namespace hsie
