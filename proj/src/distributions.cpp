#include "vceval/distributions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace vceval::dist {

namespace {

constexpr double kEps = 1e-15;
constexpr int kMaxIter = 10000;

double eval_poly(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::domain_error("normal_quantile: p outside [0, 1]");
  }
  static constexpr std::array<double, 8> a = {
      3.3871328727963666080e0, 1.3314166789178437745e+2, 1.9715909503065514427e+3, 1.3731693765509461125e+4,
      4.5921953931549871457e+4, 6.7265770927008700853e+4, 3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr std::array<double, 8> b = {
      1.0, 4.2313330701600911252e+1, 6.8718700749205790830e+2, 5.3941960214247511077e+3,
      2.1213794301586595867e+4, 3.9307895800092710610e+4, 2.8729085735721942674e+4, 5.2264952788528545610e+3};
  static constexpr std::array<double, 8> c = {
      1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0, 3.64784832476320460504e0,
      1.27045825245236838258e0, 2.41780725177450611770e-1, 2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr std::array<double, 8> d = {
      1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
      1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4, 1.05075007164441684324e-9};
  static constexpr std::array<double, 8> e = {
      6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0, 2.96560571828504891230e-1,
      2.65321895265761230930e-2, 1.24266094738807843860e-3, 2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr std::array<double, 8> f = {
      1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
      7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7, 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * eval_poly(a, r) / eval_poly(b, r);
  }
  double r = std::sqrt(-std::log(q < 0.0 ? p : 1.0 - p));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = eval_poly(c, r) / eval_poly(d, r);
  } else {
    r -= 5.0;
    val = eval_poly(e, r) / eval_poly(f, r);
  }
  return q < 0.0 ? -val : val;
}

namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// Continued fraction for the incomplete beta function.
double beta_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: requires a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: requires a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double beta_inc(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0 || x < 0.0 || x > 1.0) throw std::domain_error("beta_inc: bad arguments");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double chi_square_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

double f_sf(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return beta_inc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f));
}

namespace {

struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Nodes on [-1, 1] by Newton iteration on P_n.
GaussLegendre make_gauss_legendre(int n) {
  GaussLegendre gl{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double z_prev = z;
      z = z_prev - p0 / dp;
      if (std::abs(z - z_prev) < 1e-15) break;
    }
    gl.nodes[i] = -z;
    gl.nodes[n - 1 - i] = z;
    gl.weights[i] = gl.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return gl;
}

const GaussLegendre& gl20() {
  static const GaussLegendre gl = make_gauss_legendre(20);
  return gl;
}

// Composite quadrature nodes over [lo, hi] split into `panels` pieces.
void composite_nodes(double lo, double hi, int panels, std::vector<double>& x, std::vector<double>& w) {
  const auto& gl = gl20();
  const double width = (hi - lo) / panels;
  x.clear();
  w.clear();
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      x.push_back(mid + 0.5 * width * gl.nodes[i]);
      w.push_back(0.5 * width * gl.weights[i]);
    }
  }
}

// P(range of k iid standard normals <= w) = k * int phi(z) [Phi(z+w) - Phi(z)]^(k-1) dz.
class NormalRangeCdf {
 public:
  explicit NormalRangeCdf(int k) : k_(k) {
    composite_nodes(-8.5, 8.5, 17, z_, w_);
    phi_.resize(z_.size());
    cdf_.resize(z_.size());
    for (std::size_t i = 0; i < z_.size(); ++i) {
      phi_[i] = std::exp(-0.5 * z_[i] * z_[i]) / std::sqrt(2.0 * std::numbers::pi);
      cdf_[i] = normal_cdf(z_[i]);
    }
  }

  double operator()(double range) const {
    if (range <= 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < z_.size(); ++i) {
      const double inner = normal_cdf(z_[i] + range) - cdf_[i];
      if (inner <= 0.0) continue;
      acc += w_[i] * phi_[i] * std::pow(inner, k_ - 1);
    }
    return std::clamp(k_ * acc, 0.0, 1.0);
  }

 private:
  int k_;
  std::vector<double> z_, w_, phi_, cdf_;
};

}  // namespace

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw std::domain_error("studentized_range_cdf: k must be >= 2");
  if (!(df > 0.0)) throw std::domain_error("studentized_range_cdf: df must be positive");
  if (q <= 0.0) return 0.0;
  if (std::isinf(q)) return 1.0;

  const NormalRangeCdf range_cdf(k);
  if (std::isinf(df) || df > 1e5) return range_cdf(q);

  // Average over s = sqrt(chi2_df / df), density
  // df^(df/2) / (Gamma(df/2) 2^(df/2-1)) s^(df-1) exp(-df s^2 / 2).
  const double log_norm = 0.5 * df * std::log(df) - std::lgamma(0.5 * df) - (0.5 * df - 1.0) * std::log(2.0);
  const double spread = 12.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - spread);
  const double hi = 1.0 + spread + (df < 4.0 ? 4.0 : 0.0);

  std::vector<double> s, w;
  composite_nodes(lo, hi, 16, s, w);
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double log_density = log_norm + (df - 1.0) * std::log(s[i]) - 0.5 * df * s[i] * s[i];
    const double density = std::exp(log_density);
    if (density < 1e-300) continue;
    acc += w[i] * density * range_cdf(q * s[i]);
  }
  return std::clamp(acc, 0.0, 1.0);
}

double studentized_range_sf(double q, int k, double df) {
  return std::clamp(1.0 - studentized_range_cdf(q, k, df), 0.0, 1.0);
}

double studentized_range_quantile(double p, int k, double df) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("studentized_range_quantile: p must be in (0, 1)");
  double lo = 0.0;
  double f_lo = -p;
  double hi = 4.0;
  double f_hi = studentized_range_cdf(hi, k, df) - p;
  while (f_hi < 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = studentized_range_cdf(hi, k, df) - p;
    if (hi > 1e6) throw std::domain_error("studentized_range_quantile: no bracket found");
  }
  // Illinois variant of regula falsi.
  int side = 0;
  double mid = hi;
  for (int iter = 0; iter < 100 && hi - lo > 1e-10; ++iter) {
    mid = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    const double f_mid = studentized_range_cdf(mid, k, df) - p;
    if (std::abs(f_mid) < 1e-13) break;
    if (f_mid * f_hi > 0.0) {
      hi = mid;
      f_hi = f_mid;
      if (side == -1) f_lo /= 2.0;
      side = -1;
    } else {
      lo = mid;
      f_lo = f_mid;
      if (side == 1) f_hi /= 2.0;
      side = 1;
    }
  }
  return mid;
}

}  // namespace vceval::dist
