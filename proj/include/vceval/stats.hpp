#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vceval {

enum class StatsErrc {
  TooFewSamples,
  TooManySamples,
  ZeroVariance,
  ZeroWithinVariance,
  AllValuesEqual,
  InvalidTable,
  InvalidArgument,
};

const char* to_string(StatsErrc code);

class StatsError : public std::runtime_error {
 public:
  StatsError(StatsErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  StatsErrc code() const { return code_; }

 private:
  StatsErrc code_;
};

struct ObservationGroup {
  std::string label;
  std::vector<double> observations;
};

/// Observations grouped by treatment. Valid tables have at least two groups,
/// at least two observations per group, and only finite values.
struct ObservationTable {
  std::vector<ObservationGroup> groups;

  std::size_t total_count() const;
  /// Throws StatsError(InvalidTable) when the invariants do not hold.
  void validate() const;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  /// Degrees of freedom; one entry for chi-square, two for F, empty when n/a.
  std::vector<double> df;
  std::string method;
};

struct PairwiseComparison {
  std::string level_a;
  std::string level_b;
  /// Mean difference (Tukey) or mean-rank difference (Dunn), a minus b.
  double difference = 0.0;
  double std_err_diff = 0.0;
  /// Studentized range q (Tukey) or Z (Dunn).
  double statistic = 0.0;
  double p_value = 1.0;
  bool significant_at_alpha = false;
  std::optional<double> lower_cl;
  std::optional<double> upper_cl;
};

/// Means model Y_ij = mu_i + e_ij and fixed-effect model Y_ij = mu + alpha_i + e_ij.
struct EffectsDecomposition {
  double grand_mean = 0.0;
  std::vector<double> group_means;
  std::vector<double> effects;
  std::vector<std::vector<double>> residuals;
};

/// Royston's approximation; 3 <= n <= 50.
TestResult shapiro_wilk(std::span<const double> samples);

/// Normalized Shapiro-Wilk coefficients for the upper half of the order
/// statistics (a_1 >= a_2 >= ... >= 0), length n/2.
std::vector<double> shapiro_wilk_coefficients(std::size_t n);

EffectsDecomposition fit_effects(const ObservationTable& table);
TestResult one_way_anova(const ObservationTable& table);
TestResult kruskal_wallis(const ObservationTable& table);

/// Tukey HSD pairs, each oriented so the difference is non-negative and
/// sorted by descending difference.
std::vector<PairwiseComparison> tukey_hsd(const ObservationTable& table, double alpha);
/// Upper-tail Tukey p-value for a difference with its standard error.
double tukey_pair_p(double difference, double std_err_diff, int groups, double df);

enum class Adjustment { Bonferroni, None };

/// Dunn's joint-rank pairs in (g1,g0), (g2,g0), (g2,g1), ... order.
std::vector<PairwiseComparison> dunn_test(const ObservationTable& table, double alpha, Adjustment adjustment);
/// sqrt[(N(N+1)/12 - ties/(12(N-1))) (1/n_a + 1/n_b)] with ties = sum(t^3 - t).
double dunn_std_err(std::size_t total, std::size_t n_a, std::size_t n_b, double tie_sum = 0.0);
double dunn_pair_p(double z, std::size_t comparisons, Adjustment adjustment);

/// Average ranks (1-based) of `values`, plus sum over tie groups of t^3 - t.
std::vector<double> average_ranks(std::span<const double> values, double* tie_sum = nullptr);

enum class NormalityScope { Pooled, PerGroup };
enum class PosthocPolicy { Always, OnSignificant };
enum class Branch { Parametric, Nonparametric };

NormalityScope parse_normality_scope(std::string_view s);
PosthocPolicy parse_posthoc_policy(std::string_view s);
const char* to_string(NormalityScope s);
const char* to_string(PosthocPolicy s);
const char* to_string(Branch b);

struct CompareOptions {
  double alpha = 0.05;
  NormalityScope normality_scope = NormalityScope::Pooled;
  PosthocPolicy posthoc = PosthocPolicy::Always;
};

struct NormalityCheck {
  std::string label;
  TestResult result;
};

struct ComparisonReport {
  std::vector<NormalityCheck> normality;
  Branch branch = Branch::Parametric;
  TestResult omnibus;
  std::vector<PairwiseComparison> posthoc;
  double alpha = 0.05;
  CompareOptions options;
};

/// Normality gate at `alpha`, then ANOVA + Tukey when every checked sample
/// passes, otherwise Kruskal-Wallis + Dunn (Bonferroni).
ComparisonReport compare_pipeline(const ObservationTable& table, const CompareOptions& options);

/// True iff every normality p-value is >= alpha.
bool normality_passes(std::span<const NormalityCheck> checks, double alpha);

}  // namespace vceval
