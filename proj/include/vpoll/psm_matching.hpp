#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vpoll/survey_data.hpp"

namespace vpoll {

/// Maps a WVS profile to numeric covariates: age, education and income are
/// standardized; gender is 0/1 (female = 1); marital status and occupation are
/// one-hot against their lowest observed level. Constant columns are dropped.
struct CovariateEncoding {
  bool use_age = true;
  bool use_gender = true;
  bool use_education = true;
  bool use_income = true;
  double age_mean = 0, age_sd = 1;
  double education_mean = 0, education_sd = 1;
  double income_mean = 0, income_sd = 1;
  std::vector<int> marital_levels;     // non-reference levels
  std::vector<int> occupation_levels;  // non-reference levels
  std::vector<std::string> dropped;    // degenerate columns

  /// Column names, without the intercept.
  std::vector<std::string> column_names() const;
  std::vector<double> encode(const DemographicProfile& p) const;
};

/// Fits the encoding on a pooled set of complete profiles.
CovariateEncoding fit_encoding(const std::vector<const DemographicProfile*>& pooled);

/// Row-major design with a leading intercept column.
struct DesignMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;

  double at(std::size_t r, std::size_t c) const { return x[r * cols + c]; }
};

struct PsmOptions {
  double ridge = 1e-6;
  int max_iterations = 100;
  /// Convergence threshold on the change in penalized log-likelihood.
  double tolerance = 1e-8;
};

struct PropensityModel {
  /// Intercept first, then one per encoded column.
  std::vector<double> coefficients;
  std::vector<std::string> names;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0;
  CovariateEncoding encoding;
  std::vector<std::string> warnings;
  /// Respondents left out for missing covariates.
  std::vector<std::string> excluded_current;
  std::vector<std::string> excluded_historical;
};

/// Ridge-penalized logistic regression by Newton/IRLS with step halving.
/// Throws Error(NonConvergence).
PropensityModel fit_logistic(const DesignMatrix& design, const PsmOptions& options = {});

DesignMatrix build_design(const std::vector<const DemographicProfile*>& current,
                          const std::vector<const DemographicProfile*>& historical, const CovariateEncoding& encoding);

/// Membership model (current = 1, historical = 0) on the six matching covariates.
PropensityModel fit_propensity(const SurveySample& current, const SurveySample& historical,
                               const PsmOptions& options = {});

/// Probability of belonging to the current wave, strictly inside (0, 1).
double propensity_score(const PropensityModel& model, const DemographicProfile& profile);

struct ScoredRespondent {
  std::string respondent_id;
  double score = 0;
};

/// Scores of complete-covariate respondents, in roster order.
std::vector<ScoredRespondent> score_sample(const PropensityModel& model, const SurveySample& sample);

enum class MatchPolicy { with_replacement, without_replacement };

std::string_view to_string(MatchPolicy p) noexcept;
MatchPolicy parse_match_policy(std::string_view s);

struct MatchedPair {
  std::string current_id;
  std::string historical_id;
  double score_current = 0;
  double score_historical = 0;
  double gap = 0;
};

struct MatchedPairSet {
  std::vector<MatchedPair> pairs;  // in input order of the current list
  std::vector<std::string> unmatched;

  const MatchedPair* find(std::string_view current_id) const;
};

struct MatchOptions {
  MatchPolicy policy = MatchPolicy::with_replacement;
  /// Maximum gap in standard deviations of the pooled scores.
  std::optional<double> caliper_sd;
};

/// 1:1 nearest neighbour on propensity score. Ties go to the smallest
/// historical respondent_id; without replacement, current respondents are
/// served in descending score order.
MatchedPairSet match_nearest(const std::vector<ScoredRespondent>& current,
                             const std::vector<ScoredRespondent>& historical, const MatchOptions& options = {});

/// Standardized mean difference per covariate, before and after matching.
struct BalanceRow {
  std::string covariate;
  double smd_before = 0;
  double smd_after = 0;
};

std::vector<BalanceRow> balance_report(const PropensityModel& model, const SurveySample& current,
                                       const SurveySample& historical, const MatchedPairSet& matches);

/// Historical responses re-indexed to the current roster via the matches;
/// unmatched respondents are MISSING.
ResponseVector matched_responses(const MatchedPairSet& matches, const SurveySample& current,
                                 const SurveySample& historical, std::string_view question_id);

}  // namespace vpoll
