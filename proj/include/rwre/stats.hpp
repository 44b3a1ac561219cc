#pragma once

#include <cstdint>
#include <vector>

namespace rwre {

// Estimation helpers.  All intervals are reported at 3 sigma; estimators
// refuse samples smaller than 30 rather than returning wide garbage.

constexpr double kSigmas = 3.0;
constexpr size_t kMinSamples = 30;

struct MeanCI {
  double mean = 0.0;
  double stderr_ = 0.0;
  double lo = 0.0, hi = 0.0;  // mean -+ 3*stderr
  size_t n = 0;
  bool refused = false;

  bool contains(double v) const { return !refused && v >= lo && v <= hi; }
};

MeanCI mean_ci(const std::vector<double>& x);

// Batch-means interval for serially correlated draws: split into
// `batches` contiguous batches, treat batch means as iid.
MeanCI batch_mean_ci(const std::vector<double>& x, size_t batches);

// Delta-method interval for sum(num)/sum(den) over paired samples.
struct RatioCI {
  double ratio = 0.0;
  double stderr_ = 0.0;
  double lo = 0.0, hi = 0.0;
  size_t n = 0;
  bool refused = false;

  bool contains(double v) const { return !refused && v >= lo && v <= hi; }
};

RatioCI ratio_ci(const std::vector<double>& num, const std::vector<double>& den);

// Circular block bootstrap for the mean of a weakly dependent series.
MeanCI block_bootstrap_ci(const std::vector<double>& x, size_t block_len,
                          size_t resamples, uint64_t stream_key);

// Two-sample multinomial homogeneity test (chi-square on pooled bins).
// Bins with pooled expected count below `min_expected` are merged into
// their neighbor.  Passing means the difference is not significant at the
// 3-sigma level (p >= 0.0027).
struct MultinomialTest {
  double chi2 = 0.0;
  double p_value = 1.0;
  int dof = 0;
  bool pass = false;
  bool refused = false;
};

MultinomialTest two_sample_multinomial(const std::vector<double>& counts_a,
                                       const std::vector<double>& counts_b,
                                       double min_expected = 5.0);

// Pearson correlation with the H0 (independence) z-score corr*sqrt(n).
struct CorrelationReport {
  double corr = 0.0;
  double z = 0.0;
  size_t n = 0;
  bool refused = false;
  // |z| < 3 means compatible with zero correlation at 3 sigma.
  bool within_3sigma_of_zero() const { return !refused && z > -kSigmas && z < kSigmas; }
};

CorrelationReport correlation_ztest(const std::vector<double>& x,
                                    const std::vector<double>& y);

// Least-squares slope of y on x with homoskedastic stderr.
struct SlopeFit {
  double slope = 0.0, intercept = 0.0;
  double slope_stderr = 0.0;
  double lo = 0.0, hi = 0.0;  // slope -+ 3 stderr
  size_t n = 0;
  bool refused = false;
};

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y,
                   size_t min_points = 3);

// Upper tail of the chi-square distribution with k dof.
double chi2_survival(double x, int dof);

// Regularized incomplete gamma functions.
double gamma_p(double a, double x);  // P(a,x)
double gamma_q(double a, double x);  // Q(a,x) = 1 - P(a,x)

double quantile_sorted(const std::vector<double>& sorted, double q);

}  // namespace rwre
