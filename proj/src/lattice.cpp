#include "rwre/lattice.hpp"

#include <cmath>
#include <stdexcept>

#include "rwre/check.hpp"

namespace rwre {

namespace {

constexpr double kRowTol = 1e-12;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_dim(int d) { require(d >= 2 && d <= kMaxDim, "dimension must be in [2,4]"); }

}  // namespace

std::array<double, kMaxDim> LocalEnv::drift() const { return local_drift(p.data(), d); }

bool LocalEnv::balanced(double tol) const {
  auto b = drift();
  for (int i = 0; i < d; ++i)
    if (std::abs(b[i]) > tol) return false;
  return true;
}

void LocalEnv::validate() const {
  check_dim(d);
  require(kappa > 0.0 && kappa <= 1.0 / (2.0 * d), "kappa must lie in (0, 1/(2d)]");
  double sum = 0.0;
  for (int e = 0; e < dirs(); ++e) {
    require(p[e] >= kappa - kRowTol, "jump probability below kappa");
    require(p[e] <= 1.0 + kRowTol, "jump probability above 1");
    sum += p[e];
  }
  require(std::abs(sum - 1.0) <= kRowTol, "jump row does not sum to 1");
}

std::array<double, kMaxDim> PerturbCell::drift() const { return local_drift(xi.data(), d); }

void PerturbCell::validate() const {
  check_dim(d);
  double sum = 0.0;
  for (int e = 0; e < dirs(); ++e) {
    require(std::abs(xi[e]) <= 1.0 + kRowTol, "perturbation entry outside [-1,1]");
    sum += xi[e];
  }
  require(std::abs(sum) <= kRowTol, "perturbation row does not sum to 0");
}

std::array<double, kMaxDim> local_drift(const double* f, int d) {
  std::array<double, kMaxDim> b{0.0, 0.0, 0.0, 0.0};
  for (int e = 0; e < 2 * d; ++e) b[dir_axis(e)] += f[e] * dir_sign(e);
  return b;
}

LocalEnv perturb(const SitePair& zeta, double lambda) {
  const LocalEnv& w = zeta.omega;
  if (!(lambda >= 0.0 && lambda < w.kappa / 2.0))
    throw std::invalid_argument("lambda must lie in [0, kappa/2)");
  RWRE_CHECK(zeta.xi.d == w.d);
  LocalEnv out = w;
  double sum = 0.0;
  for (int e = 0; e < w.dirs(); ++e) {
    out.p[e] = w.p[e] + lambda * zeta.xi.xi[e];
    // |xi| <= 1 and omega >= kappa force entries into (kappa/2, 1].
    RWRE_CHECK_MSG(out.p[e] > w.kappa / 2.0 - kRowTol, "perturbed entry fell to kappa/2");
    sum += out.p[e];
  }
  RWRE_CHECK_MSG(std::abs(sum - 1.0) <= 10 * kRowTol, "perturbed row does not sum to 1");
  return out;
}

void EnvDistribution::validate() const {
  check_dim(d);
  require(kappa > 0.0 && kappa <= 1.0 / (2.0 * d), "kappa must lie in (0, 1/(2d)]");
  auto check_weights = [&](const std::vector<double>& w, size_t n, const char* what) {
    require(w.size() == n, std::string(what) + ": weights size mismatch");
    double sum = 0.0;
    for (double v : w) {
      require(v >= 0.0, std::string(what) + ": negative weight");
      sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-9, std::string(what) + ": weights must sum to 1");
  };
  auto check_omega = [&](const LocalEnv& w) {
    require(w.d == d, "omega atom dimension mismatch");
    require(std::abs(w.kappa - kappa) <= kRowTol, "omega atom kappa mismatch");
    w.validate();
  };
  switch (kind) {
    case DistKind::homogeneous:
      require(atoms.size() == 1, "homogeneous law needs exactly one atom");
      break;
    case DistKind::finite_support:
      require(!atoms.empty(), "finite-support law needs atoms");
      check_weights(weights, atoms.size(), "atoms");
      break;
    case DistKind::proportional:
      require(!omega_atoms.empty(), "proportional law needs omega atoms");
      check_weights(omega_weights, omega_atoms.size(), "omega");
      break;
    case DistKind::independent_product:
      require(!omega_atoms.empty() && !xi_atoms.empty(),
              "product law needs omega and xi atoms");
      check_weights(omega_weights, omega_atoms.size(), "omega");
      check_weights(xi_weights, xi_atoms.size(), "xi");
      break;
  }
  if (kind == DistKind::homogeneous || kind == DistKind::finite_support) {
    for (const auto& a : atoms) {
      check_omega(a.omega);
      require(a.xi.d == d, "xi atom dimension mismatch");
      a.xi.validate();
    }
  }
  if (kind == DistKind::proportional) {
    double norm = 0.0;
    for (int i = 0; i < d; ++i) norm += ell[i] * ell[i];
    require(std::abs(norm - 1.0) <= 1e-9, "ell must be a unit vector");
    for (const auto& w : omega_atoms) {
      check_omega(w);
      proportional_cell(w, ell).validate();  // in particular sums to 0
    }
  }
  if (kind == DistKind::independent_product) {
    for (const auto& w : omega_atoms) check_omega(w);
    for (const auto& x : xi_atoms) {
      require(x.d == d, "xi atom dimension mismatch");
      x.validate();
    }
  }
}

bool EnvDistribution::balanced(double tol) const {
  auto rows_balanced = [&](const std::vector<LocalEnv>& rows) {
    for (const auto& w : rows)
      if (!w.balanced(tol)) return false;
    return true;
  };
  switch (kind) {
    case DistKind::homogeneous:
    case DistKind::finite_support: {
      for (const auto& a : atoms)
        if (!a.omega.balanced(tol)) return false;
      return true;
    }
    case DistKind::proportional:
      return rows_balanced(omega_atoms);
    case DistKind::independent_product:
      return rows_balanced(omega_atoms);
  }
  return false;
}

std::array<double, kMaxDim> EnvDistribution::mean_xi_drift() const {
  std::array<double, kMaxDim> out{0.0, 0.0, 0.0, 0.0};
  auto add = [&](const PerturbCell& x, double w) {
    auto b = x.drift();
    for (int i = 0; i < d; ++i) out[i] += w * b[i];
  };
  switch (kind) {
    case DistKind::homogeneous:
      add(atoms[0].xi, 1.0);
      break;
    case DistKind::finite_support:
      for (size_t i = 0; i < atoms.size(); ++i) add(atoms[i].xi, weights[i]);
      break;
    case DistKind::proportional:
      for (size_t i = 0; i < omega_atoms.size(); ++i)
        add(proportional_cell(omega_atoms[i], ell), omega_weights[i]);
      break;
    case DistKind::independent_product:
      for (size_t i = 0; i < xi_atoms.size(); ++i) add(xi_atoms[i], xi_weights[i]);
      break;
  }
  return out;
}

EnvDistribution EnvDistribution::homogeneous_cell(const LocalEnv& w, const PerturbCell& x) {
  EnvDistribution dist;
  dist.kind = DistKind::homogeneous;
  dist.d = w.d;
  dist.kappa = w.kappa;
  dist.atoms = {SitePair{w, x}};
  dist.weights = {1.0};
  dist.validate();
  return dist;
}

EnvDistribution EnvDistribution::proportional(std::vector<LocalEnv> omega_atoms,
                                              std::vector<double> omega_weights,
                                              const std::array<double, kMaxDim>& ell,
                                              double kappa) {
  EnvDistribution dist;
  dist.kind = DistKind::proportional;
  dist.d = omega_atoms.at(0).d;
  dist.kappa = kappa;
  dist.omega_atoms = std::move(omega_atoms);
  dist.omega_weights = std::move(omega_weights);
  dist.ell = ell;
  dist.validate();
  return dist;
}

LocalEnv simple_walk_cell(int d) {
  LocalEnv w;
  w.d = d;
  w.kappa = 1.0 / (2.0 * d);
  for (int e = 0; e < 2 * d; ++e) w.p[e] = 1.0 / (2.0 * d);
  return w;
}

PerturbCell proportional_cell(const LocalEnv& w, const std::array<double, kMaxDim>& ell) {
  PerturbCell x;
  x.d = w.d;
  for (int e = 0; e < w.dirs(); ++e) x.xi[e] = w.p[e] * dot_ell(e, ell);
  return x;
}

EnvironmentField::EnvironmentField(EnvDistribution dist, uint64_t master_seed)
    : dist_(std::move(dist)), seed_(master_seed) {
  dist_.validate();
  omega_key_ = role_key(seed_, Role::site_omega);
  xi_key_ = role_key(seed_, Role::site_xi);
}

SitePair EnvironmentField::site(const Point& x) const {
  auto site_uniform = [&](uint64_t role_k) {
    uint64_t h = role_k;
    for (int i = 0; i < dist_.d; ++i) h = key_fold(h, static_cast<uint64_t>(x[i]));
    return to_unit(mix64(h));
  };
  auto pick = [](double u, const std::vector<double>& w) {
    double acc = 0.0;
    int last = static_cast<int>(w.size()) - 1;
    for (int i = 0; i < last; ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return last;
  };
  switch (dist_.kind) {
    case DistKind::homogeneous:
      return dist_.atoms[0];
    case DistKind::finite_support:
      return dist_.atoms[pick(site_uniform(omega_key_), dist_.weights)];
    case DistKind::proportional: {
      const LocalEnv& w =
          dist_.omega_atoms[pick(site_uniform(omega_key_), dist_.omega_weights)];
      return SitePair{w, proportional_cell(w, dist_.ell)};
    }
    case DistKind::independent_product: {
      const LocalEnv& w =
          dist_.omega_atoms[pick(site_uniform(omega_key_), dist_.omega_weights)];
      const PerturbCell& x =
          dist_.xi_atoms[pick(site_uniform(xi_key_), dist_.xi_weights)];
      return SitePair{w, x};
    }
  }
  throw std::logic_error("unreachable");
}

SitePair ParticleView::at(const Point& rel) const {
  Point y = x_;
  for (int i = 0; i < kMaxDim; ++i) y[i] += rel[i];
  return field_->site(y);
}

PerturbedView::PerturbedView(const EnvironmentField& field, double lambda)
    : field_(&field), lambda_(lambda) {
  if (!(lambda >= 0.0 && lambda < field.kappa() / 2.0))
    throw std::invalid_argument("lambda must lie in [0, kappa/2)");
}

}  // namespace rwre
