#include "nso/objectives/hubbard.hpp"

#include <algorithm>
#include <bit>
#include <complex>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

namespace nso {
namespace {

std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

// Jordan-Wigner sign of c+_i c_j on `mask`: occupied modes strictly between i and j.
double hop_sign(std::uint32_t mask, int i, int j) {
  const int lo = std::min(i, j);
  const int hi = std::max(i, j);
  const std::uint32_t between = ((1u << hi) - 1u) & ~((1u << (lo + 1)) - 1u);
  return (std::popcount(mask & between) % 2 == 0) ? 1.0 : -1.0;
}

// Single-species hopping: for each mask and bond, the masks it connects to.
struct Hop {
  std::size_t from;
  std::size_t to;
  double sign;
};

std::vector<Hop> species_hops(const std::vector<std::uint32_t>& masks,
                              const std::vector<std::pair<int, int>>& bonds) {
  std::vector<Hop> hops;
  for (std::size_t a = 0; a < masks.size(); ++a) {
    const std::uint32_t m = masks[a];
    for (const auto& [i, j] : bonds) {
      for (const auto& [src, dst] : {std::pair{j, i}, std::pair{i, j}}) {
        if (!(m >> src & 1u) || (m >> dst & 1u)) continue;
        const std::uint32_t moved = m ^ (1u << src) ^ (1u << dst);
        const auto b = static_cast<std::size_t>(
            std::lower_bound(masks.begin(), masks.end(), moved) - masks.begin());
        hops.push_back({a, b, hop_sign(m, dst, src)});
      }
    }
  }
  return hops;
}

}  // namespace

std::size_t HubbardSpec::sector_dim() const {
  return binomial(sites(), n_up) * binomial(sites(), n_down);
}

void HubbardSpec::validate() const {
  if (nx < 1 || ny < 1) throw std::invalid_argument("hubbard: grid shape must be positive");
  if (sites() > 16) throw std::invalid_argument("hubbard: at most 16 sites are supported");
  if (n_up < 0 || n_down < 0 || n_up > sites() || n_down > sites()) {
    throw std::invalid_argument(
        fmt::format("hubbard: filling ({}, {}) impossible on {} sites", n_up, n_down, sites()));
  }
  if (layers < 1) throw std::invalid_argument("hubbard: layers must be positive");
  if (sector_dim() > kMaxSectorDim) {
    throw std::invalid_argument(
        fmt::format("hubbard: sector dimension {} exceeds {}", sector_dim(), kMaxSectorDim));
  }
}

std::vector<std::pair<int, int>> lattice_bonds(int nx, int ny) {
  std::set<std::pair<int, int>> bonds;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      const int s = x + nx * y;
      for (int n : {(x + 1) % nx + nx * y, x + nx * ((y + 1) % ny)}) {
        if (n != s) bonds.insert({std::min(s, n), std::max(s, n)});
      }
    }
  }
  return {bonds.begin(), bonds.end()};
}

std::vector<std::uint32_t> occupations(int sites, int count) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < (1u << sites); ++m) {
    if (std::popcount(m) == count) out.push_back(m);
  }
  return out;
}

HubbardOperators hubbard_operators(const HubbardSpec& spec) {
  spec.validate();
  const auto up = occupations(spec.sites(), spec.n_up);
  const auto dn = occupations(spec.sites(), spec.n_down);
  const auto bonds = lattice_bonds(spec.nx, spec.ny);
  const std::size_t nd = dn.size();
  const auto dim = static_cast<Eigen::Index>(up.size() * nd);

  std::vector<Eigen::Triplet<double>> hop;
  for (const Hop& h : species_hops(up, bonds)) {
    for (std::size_t b = 0; b < nd; ++b) {
      hop.emplace_back(static_cast<Eigen::Index>(h.to * nd + b),
                       static_cast<Eigen::Index>(h.from * nd + b), -spec.t * h.sign);
    }
  }
  for (const Hop& h : species_hops(dn, bonds)) {
    for (std::size_t a = 0; a < up.size(); ++a) {
      hop.emplace_back(static_cast<Eigen::Index>(a * nd + h.to),
                       static_cast<Eigen::Index>(a * nd + h.from), -spec.t * h.sign);
    }
  }
  std::vector<Eigen::Triplet<double>> inter;
  for (std::size_t a = 0; a < up.size(); ++a) {
    for (std::size_t b = 0; b < nd; ++b) {
      const int doubles = std::popcount(up[a] & dn[b]);
      if (doubles > 0) {
        const auto idx = static_cast<Eigen::Index>(a * nd + b);
        inter.emplace_back(idx, idx, spec.u * doubles);
      }
    }
  }

  HubbardOperators ops;
  ops.hopping.resize(dim, dim);
  ops.hopping.setFromTriplets(hop.begin(), hop.end());
  ops.interaction.resize(dim, dim);
  ops.interaction.setFromTriplets(inter.begin(), inter.end());
  return ops;
}

Eigen::SparseMatrix<double> hubbard_hamiltonian(const HubbardSpec& spec) {
  return hubbard_operators(spec).total();
}

double ground_energy(const HubbardSpec& spec) {
  const Eigen::MatrixXd h = Eigen::MatrixXd(hubbard_hamiltonian(spec));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

HvaEnergy::HvaEnergy(const HubbardSpec& spec)
    : HvaEnergy(spec, 2 * static_cast<std::size_t>(spec.layers)) {}

HvaEnergy::HvaEnergy(const HubbardSpec& spec, std::size_t n_params)
    : spec_(spec), n_params_(n_params) {
  const std::size_t full = 2 * static_cast<std::size_t>(spec.layers);
  if (n_params != full && n_params + 1 != full) {
    throw std::invalid_argument(
        fmt::format("hva: {} parameters do not fit {} layers", n_params, spec.layers));
  }
  const HubbardOperators ops = hubbard_operators(spec);
  const Eigen::MatrixXd ht(ops.hopping);
  h_ = ht + Eigen::MatrixXd(ops.interaction);
  u_diag_ = Eigen::MatrixXd(ops.interaction).diagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(ht);
  t_vals_ = et.eigenvalues();
  t_vecs_ = et.eigenvectors();
  psi0_ = t_vecs_.col(0);
  Eigen::Index arg = 0;
  psi0_.cwiseAbs().maxCoeff(&arg);
  if (psi0_(arg) < 0.0) psi0_ = -psi0_;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eh(h_, Eigen::EigenvaluesOnly);
  spectrum_.assign(eh.eigenvalues().data(), eh.eigenvalues().data() + eh.eigenvalues().size());
}

Eigen::VectorXcd HvaEnergy::state(std::span<const double> theta) const {
  if (theta.size() != n_params_) {
    throw std::invalid_argument(
        fmt::format("hva: expected {} parameters, got {}", n_params_, theta.size()));
  }
  using cd = std::complex<double>;
  Eigen::VectorXcd psi = psi0_.cast<cd>();
  for (int l = 0; l < spec_.layers; ++l) {
    const std::size_t iu = 2 * static_cast<std::size_t>(l) + 1;
    const double phi_u = iu < theta.size() ? theta[iu] : 0.0;
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) *= std::polar(1.0, -phi_u * u_diag_(i));

    const double phi_t = theta[2 * static_cast<std::size_t>(l)];
    Eigen::VectorXcd c = t_vecs_.transpose().cast<cd>() * psi;
    for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::polar(1.0, -phi_t * t_vals_(i));
    psi = t_vecs_.cast<cd>() * c;
  }
  return psi;
}

double HvaEnergy::operator()(std::span<const double> theta) const {
  const Eigen::VectorXcd psi = state(theta);
  const Eigen::VectorXcd hpsi = h_.cast<std::complex<double>>() * psi;
  return psi.dot(hpsi).real() / psi.squaredNorm();
}

}  // namespace nso
