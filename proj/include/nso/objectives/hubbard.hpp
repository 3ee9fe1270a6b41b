#pragma once
// Fermi-Hubbard model on a periodic grid, restricted to a fixed (n_up, n_down)
// sector, and the energy landscape of a Hamiltonian-variational ansatz.
//
// Basis: up-spin occupations major, down-spin minor; each species enumerated
// as increasing bitmasks (bit s = site s, s = x + nx*y). Fermionic signs follow
// a Jordan-Wigner ordering within each species.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "nso/design.hpp"

namespace nso {

struct HubbardSpec {
  int nx = 2;
  int ny = 1;
  int n_up = 1;
  int n_down = 1;
  double t = 1.0;
  double u = 2.0;
  int layers = 1;

  int sites() const { return nx * ny; }
  std::size_t sector_dim() const;
  /// Throws std::invalid_argument on bad shape, filling or a sector larger
  /// than kMaxSectorDim.
  void validate() const;

  static constexpr std::size_t kMaxSectorDim = 4096;
};

/// Nearest-neighbour bonds (i < j) of the periodic grid, each listed once.
std::vector<std::pair<int, int>> lattice_bonds(int nx, int ny);

/// Occupation bitmasks with `count` bits set among `sites`, increasing.
std::vector<std::uint32_t> occupations(int sites, int count);

struct HubbardOperators {
  Eigen::SparseMatrix<double> hopping;      // -t sum (c+_i c_j + h.c.)
  Eigen::SparseMatrix<double> interaction;  // U sum n_up n_down (diagonal)
  Eigen::SparseMatrix<double> total() const { return hopping + interaction; }
};

HubbardOperators hubbard_operators(const HubbardSpec& spec);
Eigen::SparseMatrix<double> hubbard_hamiltonian(const HubbardSpec& spec);

/// Lowest eigenvalue by dense diagonalization.
double ground_energy(const HubbardSpec& spec);

/// E(theta) = <psi|H|psi> with
///   psi = prod_l exp(-i theta[2l] H_t) exp(-i theta[2l+1] H_U) |psi0>,
/// layers applied in order l = 0, 1, ..., and psi0 the ground state of H_t.
/// Each layer starts with the interaction factor: psi0 is an eigenstate of
/// H_t, so a hopping factor first would only contribute a global phase.
/// With n_params = 2*layers - 1 the last interaction angle is fixed to 0.
class HvaEnergy {
 public:
  explicit HvaEnergy(const HubbardSpec& spec);
  HvaEnergy(const HubbardSpec& spec, std::size_t n_params);

  std::size_t n_params() const { return n_params_; }
  const HubbardSpec& spec() const { return spec_; }

  /// Throws std::invalid_argument on a wrong parameter count.
  double operator()(std::span<const double> theta) const;
  Eigen::VectorXcd state(std::span<const double> theta) const;

  const Eigen::VectorXd& initial_state() const { return psi0_; }
  double ground_energy() const { return spectrum_.front(); }
  /// Sector eigenvalues, ascending.
  const std::vector<double>& spectrum() const { return spectrum_; }

 private:
  HubbardSpec spec_;
  std::size_t n_params_;
  Eigen::MatrixXd h_;         // full sector Hamiltonian
  Eigen::MatrixXd t_vecs_;    // eigenvectors of H_t
  Eigen::VectorXd t_vals_;
  Eigen::VectorXd u_diag_;    // H_U is diagonal in the occupation basis
  Eigen::VectorXd psi0_;
  std::vector<double> spectrum_;
};

}  // namespace nso
