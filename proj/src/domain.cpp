#include "rwre/domain.hpp"

#include "rwre/check.hpp"

namespace rwre {

AbsorbingSystem::AbsorbingSystem(const ChainTopology& topo, SolveRoute route)
    : topo_(topo), n_(topo.n_interior), nb_(topo.n_boundary),
      two_d_(2 * topo.d) {
  RWRE_CHECK(n_ > 0);
  RWRE_CHECK(nb_ > 0);
  nbr_.resize(static_cast<size_t>(n_) * two_d_);
  rows_.resize(static_cast<size_t>(n_) * two_d_);
  brates_.resize(n_);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<size_t>(n_) * (two_d_ + 1));
  for (int s = 0; s < n_; ++s) {
    const double* r = topo_.row(s);
    trip.emplace_back(s, s, 1.0);
    for (int k = 0; k < two_d_; ++k) {
      NeighborRef nb = topo_.neighbor(s, k);
      nbr_[static_cast<size_t>(s) * two_d_ + k] = nb;
      rows_[static_cast<size_t>(s) * two_d_ + k] = r[k];
      if (nb.boundary) {
        RWRE_CHECK(nb.index >= 0 && nb.index < nb_);
        brates_[s].emplace_back(nb.index, r[k]);
      } else {
        RWRE_CHECK(nb.index >= 0 && nb.index < n_);
        trip.emplace_back(s, nb.index, -r[k]);
      }
    }
  }
  solver_ = std::make_unique<LinearSolver>(n_, trip, route);
}

Eigen::VectorXd AbsorbingSystem::green_row(int start) const {
  RWRE_CHECK(start >= 0 && start < n_);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
  e[start] = 1.0;
  // g(start, y) = [(I-Q)^{-1}]_{start,y}: one adjoint solve gives the row.
  return solver_->solve_transpose(e);
}

Eigen::VectorXd AbsorbingSystem::exit_law_from_green(
    const Eigen::VectorXd& g) const {
  Eigen::VectorXd law = Eigen::VectorXd::Zero(nb_);
  for (int s = 0; s < n_; ++s)
    for (const auto& [b, rate] : brates_[s]) law[b] += g[s] * rate;
  return law;
}

Eigen::VectorXd AbsorbingSystem::exit_law(int start) const {
  return exit_law_from_green(green_row(start));
}

Eigen::VectorXd AbsorbingSystem::absorption_column(int b) const {
  RWRE_CHECK(b >= 0 && b < nb_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
  for (int s = 0; s < n_; ++s)
    for (const auto& [bi, rate] : brates_[s])
      if (bi == b) rhs[s] += rate;
  return solver_->solve(rhs);
}

Eigen::VectorXd AbsorbingSystem::expected_exit_time() const {
  return solver_->solve(Eigen::VectorXd::Ones(n_));
}

std::array<double, kMaxDirs> AbsorbingSystem::doob_row(
    int s, const Eigen::VectorXd& target_h, int target_b) const {
  RWRE_CHECK(s >= 0 && s < n_);
  std::array<double, kMaxDirs> out{};
  for (int k = 0; k < two_d_; ++k) {
    NeighborRef nb = nbr_[static_cast<size_t>(s) * two_d_ + k];
    double rate = rows_[static_cast<size_t>(s) * two_d_ + k];
    double h;
    if (nb.boundary)
      h = (nb.index == target_b) ? 1.0 : 0.0;
    else
      h = target_h[nb.index];
    out[k] = rate * h;
  }
  return out;
}

Eigen::VectorXd AbsorbingSystem::dirichlet(const Eigen::VectorXd& boundary_data) const {
  RWRE_CHECK(boundary_data.size() == nb_);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n_);
  for (int s = 0; s < n_; ++s) {
    for (const auto& [b, rate] : brates_[static_cast<size_t>(s)]) {
      rhs[s] += rate * boundary_data[b];
    }
  }
  return solver_->solve(rhs);
}

SiteListSystem::SiteListSystem(int d, std::vector<Point> interior,
                               const std::function<LocalEnv(const Point&)>& row_at,
                               SolveRoute route)
    : d_(d), interior_(std::move(interior)) {
  RWRE_CHECK(d_ >= 1 && d_ <= kMaxDim);
  RWRE_CHECK(!interior_.empty());
  const int n = static_cast<int>(interior_.size());
  const int two_d = 2 * d_;
  imap_.reserve(static_cast<size_t>(n) * 2);
  for (int s = 0; s < n; ++s) {
    auto [it, fresh] = imap_.emplace(interior_[static_cast<size_t>(s)], s);
    RWRE_CHECK_MSG(fresh, "duplicate interior site");
  }
  rows_.reserve(static_cast<size_t>(n));
  for (int s = 0; s < n; ++s) rows_.push_back(row_at(interior_[static_cast<size_t>(s)]));
  // boundary states in discovery order
  std::vector<NeighborRef> nbr(static_cast<size_t>(n) * two_d);
  for (int s = 0; s < n; ++s) {
    for (int dir = 0; dir < two_d; ++dir) {
      Point q = step(interior_[static_cast<size_t>(s)], dir);
      auto it = imap_.find(q);
      if (it != imap_.end()) {
        nbr[static_cast<size_t>(s) * two_d + dir] = {false, it->second};
      } else {
        auto [bit, fresh] = bmap_.emplace(q, static_cast<int>(boundary_.size()));
        if (fresh) boundary_.push_back(q);
        nbr[static_cast<size_t>(s) * two_d + dir] = {true, bit->second};
      }
    }
  }
  ChainTopology topo;
  topo.d = d_;
  topo.n_interior = n;
  topo.n_boundary = static_cast<int>(boundary_.size());
  topo.neighbor = [nbr = std::move(nbr), two_d](int s, int dir) {
    return nbr[static_cast<size_t>(s) * two_d + dir];
  };
  topo.row = [this](int s) { return rows_[static_cast<size_t>(s)].p.data(); };
  sys_ = std::make_unique<AbsorbingSystem>(topo, route);
}

int SiteListSystem::interior_index(const Point& p) const {
  auto it = imap_.find(p);
  return it == imap_.end() ? -1 : it->second;
}

int SiteListSystem::boundary_index(const Point& p) const {
  auto it = bmap_.find(p);
  return it == bmap_.end() ? -1 : it->second;
}

}  // namespace rwre
