#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hsie/config.hpp"
#include "hsie/table.hpp"

namespace hsie {

// A command's primary table plus any secondary files (name suffix, table).
struct CommandResult {
  ResultTable table;
  std::vector<std::pair<std::string, ResultTable>> extra;
};

// Frequency sweep of real Lamb roots per branch with group-velocity sign.
ResultTable cmd_dispersion(const RunConfig& config, std::size_t n_threads = 1);

// Half-strip Dirichlet problem over (order, n_long) lists; relative H1 errors
// against the outgoing reference sum.
ResultTable cmd_converge(const RunConfig& config, std::size_t n_threads = 1);

// Shift-invert eigenvalue runs, essential-spectrum samples, and (with a
// [twin] section) the perturbed-parameter classification.
CommandResult cmd_resonances(const RunConfig& config, std::size_t n_threads = 1);

// (r, kappa, omega, curve id) samples of the essential-spectrum curves.
ResultTable cmd_essential(const RunConfig& config, std::size_t n_threads = 1);

// Frequency sweep of scattering solves with incident propagating modes;
// emits (omega, stress_norm, residual, status) and optionally a field dump.
CommandResult cmd_scatter(const RunConfig& config, std::size_t n_threads = 1);

// Hardy-basis solve of the convected half-line problem over an n list with
// errors against the closed form.
ResultTable cmd_convected1d(const RunConfig& config, std::size_t n_threads = 1);

// Dirichlet eigenvalues of a single rectangular block.
ResultTable cmd_dirichlet_eig(const RunConfig& config, std::size_t n_threads = 1);

// Pole-parameter selection at a frequency: straight line when all real
// outgoing wavenumbers are positive, separating curve otherwise.
ResultTable cmd_choose_params(const RunConfig& config, std::size_t n_threads = 1);

// Full driver behind the `hsie` binary: subcommand dispatch, --config/--out/
// --threads/--seed flags, CSV emission. Exit codes: 0 success, 2 config
// error, 3 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace hsie
