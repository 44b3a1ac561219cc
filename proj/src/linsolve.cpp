#include "rwre/linsolve.hpp"

#include <stdexcept>

#include "rwre/check.hpp"

namespace rwre {

LinearSolver::LinearSolver(int n, const std::vector<Triplet>& entries,
                           SolveRoute route)
    : n_(n) {
  RWRE_CHECK(n > 0);
  dense_ = (route == SolveRoute::dense) ||
           (route == SolveRoute::automatic && n <= kDenseCutoff);
  asp_.resize(n, n);
  asp_.setFromTriplets(entries.begin(), entries.end());
  asp_.makeCompressed();
  if (dense_) {
    aden_ = Eigen::MatrixXd(asp_);
    dlu_ = std::make_unique<Eigen::PartialPivLU<Eigen::MatrixXd>>(aden_);
  } else {
    slu_ = std::make_unique<Eigen::SparseLU<SpMat>>();
    slu_->analyzePattern(asp_);
    slu_->factorize(asp_);
    if (slu_->info() != Eigen::Success)
      throw std::runtime_error("sparse LU factorization failed");
    asp_t_ = SpMat(asp_.transpose());
    asp_t_.makeCompressed();
    slu_t_ = std::make_unique<Eigen::SparseLU<SpMat>>();
    slu_t_->analyzePattern(asp_t_);
    slu_t_->factorize(asp_t_);
    if (slu_t_->info() != Eigen::Success)
      throw std::runtime_error("sparse LU transpose factorization failed");
  }
}

Eigen::VectorXd LinearSolver::solve(const Eigen::VectorXd& b) const {
  RWRE_CHECK(b.size() == n_);
  Eigen::VectorXd x;
  if (dense_) {
    x = dlu_->solve(b);
  } else {
    x = slu_->solve(b);
    if (slu_->info() != Eigen::Success)
      throw std::runtime_error("sparse solve failed");
  }
  check_residual(x, b, false);
  return x;
}

Eigen::VectorXd LinearSolver::solve_transpose(const Eigen::VectorXd& b) const {
  RWRE_CHECK(b.size() == n_);
  Eigen::VectorXd x;
  if (dense_) {
    x = dlu_->matrixLU().template triangularView<Eigen::Upper>().transpose().solve(b);
    x = dlu_->matrixLU().template triangularView<Eigen::UnitLower>().transpose().solve(x);
    x = dlu_->permutationP().transpose() * x;
  } else {
    x = slu_t_->solve(b);
    if (slu_t_->info() != Eigen::Success)
      throw std::runtime_error("sparse transpose solve failed");
  }
  check_residual(x, b, true);
  return x;
}

double LinearSolver::residual(const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                              bool transpose) const {
  Eigen::VectorXd r;
  if (transpose)
    r = asp_.transpose() * x - b;
  else
    r = asp_ * x - b;
  double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  return r.cwiseAbs().maxCoeff() / scale;
}

void LinearSolver::check_residual(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& b,
                                  bool transpose) const {
  double r = residual(x, b, transpose);
  if (!(r <= kResidualTol))
    throw std::runtime_error("linear solve residual " + std::to_string(r) +
                             " exceeds tolerance");
}

double route_gap(int n, const std::vector<Triplet>& entries,
                 const Eigen::VectorXd& b) {
  LinearSolver d(n, entries, SolveRoute::dense);
  LinearSolver s(n, entries, SolveRoute::sparse);
  Eigen::VectorXd xd = d.solve(b);
  Eigen::VectorXd xs = s.solve(b);
  double g = (xd - xs).cwiseAbs().maxCoeff();
  Eigen::VectorXd td = d.solve_transpose(b);
  Eigen::VectorXd ts = s.solve_transpose(b);
  return std::max(g, (td - ts).cwiseAbs().maxCoeff());
}

}  // namespace rwre
