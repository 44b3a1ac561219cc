#include "rwre/stats.hpp"

#include <algorithm>
#include <cmath>

#include "rwre/check.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

double sample_mean(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  return m / static_cast<double>(x.size());
}

double sample_var(const std::vector<double>& x, double mean) {
  if (x.size() < 2) return 0.0;
  double s = 0.0;
  for (double v : x) s += (v - mean) * (v - mean);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

MeanCI mean_ci(const std::vector<double>& x) {
  MeanCI ci;
  ci.n = x.size();
  if (x.size() < kMinSamples) {
    ci.refused = true;
    return ci;
  }
  ci.mean = sample_mean(x);
  ci.stderr_ = std::sqrt(sample_var(x, ci.mean) / static_cast<double>(x.size()));
  ci.lo = ci.mean - kSigmas * ci.stderr_;
  ci.hi = ci.mean + kSigmas * ci.stderr_;
  return ci;
}

MeanCI batch_mean_ci(const std::vector<double>& x, size_t batches) {
  MeanCI ci;
  ci.n = x.size();
  if (batches < kMinSamples || x.size() < batches) {
    ci.refused = true;
    return ci;
  }
  std::vector<double> bm(batches, 0.0);
  size_t per = x.size() / batches;
  for (size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (size_t i = b * per; i < (b + 1) * per; ++i) s += x[i];
    bm[b] = s / static_cast<double>(per);
  }
  MeanCI inner = mean_ci(bm);
  inner.n = x.size();
  return inner;
}

RatioCI ratio_ci(const std::vector<double>& num, const std::vector<double>& den) {
  RatioCI ci;
  RWRE_CHECK(num.size() == den.size());
  ci.n = num.size();
  if (ci.n < kMinSamples) {
    ci.refused = true;
    return ci;
  }
  double mn = sample_mean(num), md = sample_mean(den);
  RWRE_CHECK_MSG(md != 0.0, "ratio denominator mean is zero");
  double vn = 0.0, vd = 0.0, cov = 0.0;
  for (size_t i = 0; i < num.size(); ++i) {
    vn += (num[i] - mn) * (num[i] - mn);
    vd += (den[i] - md) * (den[i] - md);
    cov += (num[i] - mn) * (den[i] - md);
  }
  double inv = 1.0 / static_cast<double>(ci.n - 1);
  vn *= inv;
  vd *= inv;
  cov *= inv;
  ci.ratio = mn / md;
  // Var(r) ~ (vn - 2 r cov + r^2 vd) / (n * md^2).
  double v = (vn - 2.0 * ci.ratio * cov + ci.ratio * ci.ratio * vd) /
             (static_cast<double>(ci.n) * md * md);
  ci.stderr_ = std::sqrt(std::max(v, 0.0));
  ci.lo = ci.ratio - kSigmas * ci.stderr_;
  ci.hi = ci.ratio + kSigmas * ci.stderr_;
  return ci;
}

MeanCI block_bootstrap_ci(const std::vector<double>& x, size_t block_len,
                          size_t resamples, uint64_t stream_key) {
  MeanCI ci;
  ci.n = x.size();
  if (x.size() < kMinSamples || block_len == 0 || resamples < kMinSamples) {
    ci.refused = true;
    return ci;
  }
  const size_t n = x.size();
  const size_t nblocks = (n + block_len - 1) / block_len;
  Stream rng(derive_key({stream_key, static_cast<uint64_t>(Role::bootstrap)}));
  std::vector<double> means(resamples, 0.0);
  for (size_t r = 0; r < resamples; ++r) {
    double s = 0.0;
    size_t taken = 0;
    for (size_t b = 0; b < nblocks && taken < n; ++b) {
      size_t startpos = static_cast<size_t>(rng.next_unit() * static_cast<double>(n));
      for (size_t k = 0; k < block_len && taken < n; ++k, ++taken)
        s += x[(startpos + k) % n];  // circular
    }
    means[r] = s / static_cast<double>(n);
  }
  double center = sample_mean(x);
  double mboot = sample_mean(means);
  double vboot = sample_var(means, mboot);
  ci.mean = center;
  ci.stderr_ = std::sqrt(vboot);
  ci.lo = center - kSigmas * ci.stderr_;
  ci.hi = center + kSigmas * ci.stderr_;
  return ci;
}

MultinomialTest two_sample_multinomial(const std::vector<double>& counts_a,
                                       const std::vector<double>& counts_b,
                                       double min_expected) {
  MultinomialTest t;
  RWRE_CHECK(counts_a.size() == counts_b.size());
  double na = 0.0, nb = 0.0;
  for (double c : counts_a) na += c;
  for (double c : counts_b) nb += c;
  if (na < kMinSamples || nb < kMinSamples) {
    t.refused = true;
    return t;
  }
  // Merge sparse bins left to right so each pooled bin expects enough mass.
  std::vector<double> a, b;
  double accA = 0.0, accB = 0.0;
  for (size_t i = 0; i < counts_a.size(); ++i) {
    accA += counts_a[i];
    accB += counts_b[i];
    double pooled = accA + accB;
    double expA = pooled * na / (na + nb);
    double expB = pooled * nb / (na + nb);
    if (expA >= min_expected && expB >= min_expected) {
      a.push_back(accA);
      b.push_back(accB);
      accA = accB = 0.0;
    }
  }
  if (accA + accB > 0.0) {
    if (a.empty()) {
      a.push_back(accA);
      b.push_back(accB);
    } else {
      a.back() += accA;
      b.back() += accB;
    }
  }
  if (a.size() < 2) {
    t.refused = true;
    return t;
  }
  double chi2 = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double pooled = a[i] + b[i];
    double expA = pooled * na / (na + nb);
    double expB = pooled * nb / (na + nb);
    chi2 += (a[i] - expA) * (a[i] - expA) / expA;
    chi2 += (b[i] - expB) * (b[i] - expB) / expB;
  }
  t.chi2 = chi2;
  t.dof = static_cast<int>(a.size()) - 1;
  t.p_value = chi2_survival(chi2, t.dof);
  // 3-sigma two-sided tail mass.
  t.pass = t.p_value >= 0.0026998;
  return t;
}

CorrelationReport correlation_ztest(const std::vector<double>& x,
                                    const std::vector<double>& y) {
  CorrelationReport r;
  RWRE_CHECK(x.size() == y.size());
  r.n = x.size();
  if (r.n < kMinSamples) {
    r.refused = true;
    return r;
  }
  double mx = sample_mean(x), my = sample_mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  RWRE_CHECK_MSG(sxx > 0.0 && syy > 0.0, "degenerate series in correlation test");
  r.corr = sxy / std::sqrt(sxx * syy);
  r.z = r.corr * std::sqrt(static_cast<double>(r.n));
  return r;
}

SlopeFit fit_slope(const std::vector<double>& x, const std::vector<double>& y,
                   size_t min_points) {
  SlopeFit f;
  RWRE_CHECK(x.size() == y.size());
  f.n = x.size();
  if (f.n < min_points) {
    f.refused = true;
    return f;
  }
  double mx = sample_mean(x), my = sample_mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  RWRE_CHECK_MSG(sxx > 0.0, "slope fit needs spread in x");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double rss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.intercept + f.slope * x[i]);
    rss += e * e;
  }
  if (f.n > 2) {
    f.slope_stderr = std::sqrt(rss / static_cast<double>(f.n - 2) / sxx);
  }
  f.lo = f.slope - kSigmas * f.slope_stderr;
  f.hi = f.slope + kSigmas * f.slope_stderr;
  return f;
}

namespace {

// Regularized incomplete gamma by series / continued fraction.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  RWRE_CHECK(a > 0.0 && x >= 0.0);
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
  RWRE_CHECK(a > 0.0 && x >= 0.0);
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi2_survival(double x, int dof) {
  RWRE_CHECK(dof >= 1);
  if (x <= 0.0) return 1.0;
  return gamma_q(0.5 * dof, 0.5 * x);
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  RWRE_CHECK(!sorted.empty());
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  double pos = q * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace rwre
