#include "vceval/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/core.h>

#include "vceval/distributions.hpp"

namespace vceval {

const char* to_string(StatsErrc code) {
  switch (code) {
    case StatsErrc::TooFewSamples: return "TooFewSamples";
    case StatsErrc::TooManySamples: return "TooManySamples";
    case StatsErrc::ZeroVariance: return "ZeroVariance";
    case StatsErrc::ZeroWithinVariance: return "ZeroWithinVariance";
    case StatsErrc::AllValuesEqual: return "AllValuesEqual";
    case StatsErrc::InvalidTable: return "InvalidTable";
    case StatsErrc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::size_t ObservationTable::total_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.observations.size();
  return n;
}

void ObservationTable::validate() const {
  if (groups.size() < 2) {
    throw StatsError(StatsErrc::InvalidTable, fmt::format("need at least 2 groups, have {}", groups.size()));
  }
  for (const auto& g : groups) {
    if (g.observations.size() < 2) {
      throw StatsError(StatsErrc::InvalidTable,
                       fmt::format("group '{}' has {} observation(s), need at least 2", g.label,
                                   g.observations.size()));
    }
    for (double v : g.observations) {
      if (!std::isfinite(v)) {
        throw StatsError(StatsErrc::InvalidTable, fmt::format("group '{}' has a non-finite value", g.label));
      }
    }
  }
}

namespace {

double poly(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> pooled(const ObservationTable& table) {
  std::vector<double> all;
  for (const auto& g : table.groups) all.insert(all.end(), g.observations.begin(), g.observations.end());
  return all;
}

}  // namespace

std::vector<double> shapiro_wilk_coefficients(std::size_t n) {
  if (n < 3) throw StatsError(StatsErrc::TooFewSamples, "Shapiro-Wilk needs at least 3 samples");
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  static constexpr std::array<double, 6> c1 = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
  static constexpr std::array<double, 6> c2 = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};

  // Expected normal order statistics (Blom-style approximation), lower half.
  const double an = static_cast<double>(n);
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = dist::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = poly(c1, rsn) - m[0] / ssumm2;

  std::size_t first_scaled;
  double fac;
  if (n > 5) {
    const double a2 = -m[1] / ssumm2 + poly(c2, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[0] = a1;
    a[1] = a2;
    first_scaled = 2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    a[0] = a1;
    first_scaled = 1;
  }
  for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

TestResult shapiro_wilk(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 3) throw StatsError(StatsErrc::TooFewSamples, fmt::format("Shapiro-Wilk needs n >= 3, got {}", n));
  if (n > 50) throw StatsError(StatsErrc::TooManySamples, fmt::format("Shapiro-Wilk supports n <= 50, got {}", n));
  for (double v : samples) {
    if (!std::isfinite(v)) throw StatsError(StatsErrc::InvalidArgument, "Shapiro-Wilk sample is not finite");
  }

  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) {
    throw StatsError(StatsErrc::ZeroVariance, "Shapiro-Wilk W is undefined for constant samples");
  }

  const std::vector<double> a = shapiro_wilk_coefficients(n);
  const double mean = mean_of(x);
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double den = 0.0;
  for (double v : x) den += (v - mean) * (v - mean);
  const double w = std::min(1.0, num * num / den);

  TestResult r;
  r.statistic = w;
  r.method = "Shapiro-Wilk";

  if (n == 3) {
    // Exact for n = 3.
    constexpr double six_over_pi = 6.0 / std::numbers::pi;
    const double p = six_over_pi * (std::asin(std::sqrt(w)) - std::asin(std::sqrt(0.75)));
    r.p_value = std::clamp(p, 0.0, 1.0);
    return r;
  }

  const double w1 = 1.0 - w;
  if (w1 <= 0.0) {
    r.p_value = 1.0;
    return r;
  }
  static constexpr std::array<double, 4> c3 = {0.5440, -0.39978, 0.025054, -6.714e-4};
  static constexpr std::array<double, 4> c4 = {1.3822, -0.77857, 0.062767, -0.0020322};
  static constexpr std::array<double, 4> c5 = {-1.5861, -0.31082, -0.083751, 0.0038915};
  static constexpr std::array<double, 3> c6 = {-0.4803, -0.082676, 0.0030302};
  static constexpr std::array<double, 2> g = {-2.273, 0.459};

  const double an = static_cast<double>(n);
  double y = std::log(w1);
  double m;
  double s;
  if (n <= 11) {
    const double gamma = poly(g, an);
    if (y >= gamma) {
      r.p_value = 1e-99;
      return r;
    }
    y = -std::log(gamma - y);
    m = poly(c3, an);
    s = std::exp(poly(c4, an));
  } else {
    const double xx = std::log(an);
    m = poly(c5, xx);
    s = std::exp(poly(c6, xx));
  }
  r.p_value = std::clamp(dist::normal_sf((y - m) / s), 0.0, 1.0);
  return r;
}

EffectsDecomposition fit_effects(const ObservationTable& table) {
  table.validate();
  EffectsDecomposition out;
  double total = 0.0;
  for (const auto& g : table.groups) {
    out.group_means.push_back(mean_of(g.observations));
    total += std::accumulate(g.observations.begin(), g.observations.end(), 0.0);
  }
  out.grand_mean = total / static_cast<double>(table.total_count());
  for (std::size_t i = 0; i < table.groups.size(); ++i) {
    out.effects.push_back(out.group_means[i] - out.grand_mean);
    std::vector<double> res;
    for (double v : table.groups[i].observations) res.push_back(v - out.group_means[i]);
    out.residuals.push_back(std::move(res));
  }
  return out;
}

namespace {

struct SumsOfSquares {
  double between = 0.0;
  double within = 0.0;
  std::size_t k = 0;
  std::size_t n = 0;
};

SumsOfSquares sums_of_squares(const ObservationTable& table) {
  const EffectsDecomposition fx = fit_effects(table);
  SumsOfSquares ss;
  ss.k = table.groups.size();
  ss.n = table.total_count();
  bool all_constant = true;
  for (std::size_t i = 0; i < ss.k; ++i) {
    const auto& obs = table.groups[i].observations;
    ss.between += static_cast<double>(obs.size()) * fx.effects[i] * fx.effects[i];
    for (double r : fx.residuals[i]) ss.within += r * r;
    const auto [lo, hi] = std::minmax_element(obs.begin(), obs.end());
    if (*lo != *hi) all_constant = false;
  }
  if (all_constant || ss.within <= 0.0) {
    throw StatsError(StatsErrc::ZeroWithinVariance, "pooled within-group variance is zero");
  }
  return ss;
}

}  // namespace

TestResult one_way_anova(const ObservationTable& table) {
  const SumsOfSquares ss = sums_of_squares(table);
  const double df1 = static_cast<double>(ss.k - 1);
  const double df2 = static_cast<double>(ss.n - ss.k);
  if (df2 <= 0.0) throw StatsError(StatsErrc::InvalidTable, "ANOVA needs more observations than groups");
  TestResult r;
  r.statistic = (ss.between / df1) / (ss.within / df2);
  r.p_value = dist::f_sf(r.statistic, df1, df2);
  r.df = {df1, df2};
  r.method = "One-way ANOVA";
  return r;
}

std::vector<double> average_ranks(std::span<const double> values, double* tie_sum) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });
  std::vector<double> ranks(values.size());
  double ties = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    const auto t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_sum) *tie_sum = ties;
  return ranks;
}

namespace {

struct RankSummary {
  std::vector<double> mean_ranks;
  std::vector<std::size_t> sizes;
  std::size_t n = 0;
  double tie_sum = 0.0;
};

RankSummary rank_summary(const ObservationTable& table) {
  table.validate();
  const std::vector<double> all = pooled(table);
  RankSummary rs;
  rs.n = all.size();
  const std::vector<double> ranks = average_ranks(all, &rs.tie_sum);
  const double nn = static_cast<double>(rs.n);
  if (rs.tie_sum >= nn * nn * nn - nn) {
    throw StatsError(StatsErrc::AllValuesEqual, "every observation is identical; ranks carry no information");
  }
  std::size_t offset = 0;
  for (const auto& g : table.groups) {
    double sum = 0.0;
    for (std::size_t j = 0; j < g.observations.size(); ++j) sum += ranks[offset + j];
    rs.mean_ranks.push_back(sum / static_cast<double>(g.observations.size()));
    rs.sizes.push_back(g.observations.size());
    offset += g.observations.size();
  }
  return rs;
}

}  // namespace

TestResult kruskal_wallis(const ObservationTable& table) {
  const RankSummary rs = rank_summary(table);
  const double n = static_cast<double>(rs.n);
  const double centre = (n + 1.0) / 2.0;
  double h = 0.0;
  for (std::size_t i = 0; i < rs.sizes.size(); ++i) {
    const double d = rs.mean_ranks[i] - centre;
    h += static_cast<double>(rs.sizes[i]) * d * d;
  }
  h *= 12.0 / (n * (n + 1.0));
  h /= 1.0 - rs.tie_sum / (n * n * n - n);

  TestResult r;
  r.statistic = h;
  r.df = {static_cast<double>(rs.sizes.size() - 1)};
  r.p_value = dist::chi_square_sf(h, r.df[0]);
  r.method = "Kruskal-Wallis";
  return r;
}

double tukey_pair_p(double difference, double std_err_diff, int groups, double df) {
  if (!(std_err_diff > 0.0)) throw StatsError(StatsErrc::InvalidArgument, "standard error must be positive");
  const double q = std::abs(difference) * std::numbers::sqrt2 / std_err_diff;
  return dist::studentized_range_sf(q, groups, df);
}

std::vector<PairwiseComparison> tukey_hsd(const ObservationTable& table, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError(StatsErrc::InvalidArgument, "alpha must lie in (0, 1)");
  const SumsOfSquares ss = sums_of_squares(table);
  const EffectsDecomposition fx = fit_effects(table);
  const double df = static_cast<double>(ss.n - ss.k);
  if (df <= 0.0) throw StatsError(StatsErrc::InvalidTable, "Tukey HSD needs more observations than groups");
  const double mse = ss.within / df;
  const int k = static_cast<int>(ss.k);
  const double half_width_q = dist::studentized_range_quantile(1.0 - alpha, k, df) / std::numbers::sqrt2;

  std::vector<PairwiseComparison> out;
  for (std::size_t i = 0; i < ss.k; ++i) {
    for (std::size_t j = i + 1; j < ss.k; ++j) {
      std::size_t hi = i;
      std::size_t lo = j;
      if (fx.group_means[j] > fx.group_means[i]) std::swap(hi, lo);
      PairwiseComparison c;
      c.level_a = table.groups[hi].label;
      c.level_b = table.groups[lo].label;
      c.difference = fx.group_means[hi] - fx.group_means[lo];
      c.std_err_diff = std::sqrt(mse * (1.0 / static_cast<double>(table.groups[hi].observations.size()) +
                                        1.0 / static_cast<double>(table.groups[lo].observations.size())));
      c.statistic = c.difference * std::numbers::sqrt2 / c.std_err_diff;
      c.p_value = dist::studentized_range_sf(c.statistic, k, df);
      c.significant_at_alpha = c.p_value < alpha;
      c.lower_cl = c.difference - half_width_q * c.std_err_diff;
      c.upper_cl = c.difference + half_width_q * c.std_err_diff;
      out.push_back(std::move(c));
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const PairwiseComparison& a, const PairwiseComparison& b) { return a.difference > b.difference; });
  return out;
}

double dunn_std_err(std::size_t total, std::size_t n_a, std::size_t n_b, double tie_sum) {
  const double n = static_cast<double>(total);
  double var = n * (n + 1.0) / 12.0;
  if (tie_sum > 0.0) var -= tie_sum / (12.0 * (n - 1.0));
  return std::sqrt(var * (1.0 / static_cast<double>(n_a) + 1.0 / static_cast<double>(n_b)));
}

double dunn_pair_p(double z, std::size_t comparisons, Adjustment adjustment) {
  const double p = 2.0 * dist::normal_sf(std::abs(z));
  if (adjustment == Adjustment::None) return std::min(p, 1.0);
  return std::min(1.0, p * static_cast<double>(comparisons));
}

std::vector<PairwiseComparison> dunn_test(const ObservationTable& table, double alpha, Adjustment adjustment) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw StatsError(StatsErrc::InvalidArgument, "alpha must lie in (0, 1)");
  const RankSummary rs = rank_summary(table);
  const std::size_t k = rs.sizes.size();
  const std::size_t comparisons = k * (k - 1) / 2;

  std::vector<PairwiseComparison> out;
  for (std::size_t a = 1; a < k; ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      PairwiseComparison c;
      c.level_a = table.groups[a].label;
      c.level_b = table.groups[b].label;
      c.difference = rs.mean_ranks[a] - rs.mean_ranks[b];
      c.std_err_diff = dunn_std_err(rs.n, rs.sizes[a], rs.sizes[b], rs.tie_sum);
      c.statistic = c.difference / c.std_err_diff;
      c.p_value = dunn_pair_p(c.statistic, comparisons, adjustment);
      c.significant_at_alpha = c.p_value < alpha;
      out.push_back(std::move(c));
    }
  }
  return out;
}

NormalityScope parse_normality_scope(std::string_view s) {
  if (s == "pooled") return NormalityScope::Pooled;
  if (s == "per-group") return NormalityScope::PerGroup;
  throw StatsError(StatsErrc::InvalidArgument, fmt::format("unknown normality scope '{}'", s));
}

PosthocPolicy parse_posthoc_policy(std::string_view s) {
  if (s == "always") return PosthocPolicy::Always;
  if (s == "on-significant") return PosthocPolicy::OnSignificant;
  throw StatsError(StatsErrc::InvalidArgument, fmt::format("unknown posthoc policy '{}'", s));
}

const char* to_string(NormalityScope s) { return s == NormalityScope::Pooled ? "pooled" : "per-group"; }
const char* to_string(PosthocPolicy s) { return s == PosthocPolicy::Always ? "always" : "on-significant"; }
const char* to_string(Branch b) { return b == Branch::Parametric ? "parametric" : "nonparametric"; }

bool normality_passes(std::span<const NormalityCheck> checks, double alpha) {
  return std::all_of(checks.begin(), checks.end(),
                     [alpha](const NormalityCheck& c) { return c.result.p_value >= alpha; });
}

ComparisonReport compare_pipeline(const ObservationTable& table, const CompareOptions& options) {
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw StatsError(StatsErrc::InvalidArgument, "alpha must lie in (0, 1)");
  }
  table.validate();

  ComparisonReport report;
  report.alpha = options.alpha;
  report.options = options;
  if (options.normality_scope == NormalityScope::Pooled) {
    report.normality.push_back({"pooled", shapiro_wilk(pooled(table))});
  } else {
    for (const auto& g : table.groups) report.normality.push_back({g.label, shapiro_wilk(g.observations)});
  }

  report.branch = normality_passes(report.normality, options.alpha) ? Branch::Parametric : Branch::Nonparametric;
  report.omnibus = report.branch == Branch::Parametric ? one_way_anova(table) : kruskal_wallis(table);

  const bool run_posthoc = options.posthoc == PosthocPolicy::Always || report.omnibus.p_value < options.alpha;
  if (run_posthoc) {
    report.posthoc = report.branch == Branch::Parametric ? tukey_hsd(table, options.alpha)
                                                         : dunn_test(table, options.alpha, Adjustment::Bonferroni);
  }
  return report;
}

}  // namespace vceval
