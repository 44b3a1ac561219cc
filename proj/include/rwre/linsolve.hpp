#pragma once

// Thin wrapper around Eigen's LU factorizations for the absorbing-chain
// systems used throughout: (I - Q) x = b and its transpose. Dense below a
// size cutoff, SparseLU above it. Every solve is residual-checked; a bad
// residual throws rather than returning garbage.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

namespace rwre {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

enum class SolveRoute { automatic, dense, sparse };

// n at or below this uses dense PartialPivLU. Kept small: dense LU on the
// multi-thousand-unknown slab systems is far slower than SparseLU.
constexpr int kDenseCutoff = 256;

constexpr double kResidualTol = 1e-10;

class LinearSolver {
 public:
  // Takes the matrix as triplets; n x n.
  LinearSolver(int n, const std::vector<Triplet>& entries,
               SolveRoute route = SolveRoute::automatic);

  int size() const { return n_; }
  bool dense() const { return dense_; }

  // Solve A x = b. Throws on singular factorization or residual failure.
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // Solve A^T x = b (adjoint route for exit laws / occupation columns).
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) const;

  // Largest |A x - b| over entries, relative to max(1, |b|_inf).
  double residual(const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                  bool transpose) const;

 private:
  int n_;
  bool dense_;
  SpMat asp_;
  Eigen::MatrixXd aden_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> slu_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> slu_t_;  // factorization of A^T
  std::unique_ptr<Eigen::PartialPivLU<Eigen::MatrixXd>> dlu_;
  mutable SpMat asp_t_;

  void check_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                      bool transpose) const;
};

// Convenience: solve the same system by both routes and return the max
// componentwise gap. Used by tests to pin route agreement.
double route_gap(int n, const std::vector<Triplet>& entries,
                 const Eigen::VectorXd& b);

}  // namespace rwre
