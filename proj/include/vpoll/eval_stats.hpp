#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpoll/survey_data.hpp"

namespace vpoll {

struct MeanSd {
  double mean = 0;
  double sd = 0;  // n - 1 denominator; 0 when n_used == 1
  std::size_t n_used = 0;
};

/// Throws Error(AllMissing).
MeanSd mean_sd(const ResponseVector& v);

enum class MadMode { mean_gap, per_respondent };

std::string_view to_string(MadMode m) noexcept;
MadMode parse_mad_mode(std::string_view s);

struct MadResult {
  double value = 0;
  /// mean(synth) - mean(human)
  double signed_gap = 0;
  std::size_t n_used = 0;
};

/// Computed over rows present in both vectors. Throws LengthMismatch, AllMissing.
MadResult mad(const ResponseVector& synth, const ResponseVector& human, MadMode mode = MadMode::mean_gap);

struct BootstrapOptions {
  int replicates = 10000;
  std::uint64_t seed = 0;
  MadMode mode = MadMode::mean_gap;
};

/// Two-sided paired-bootstrap p-value for mad(a, human) - mad(b, human), over
/// rows present in all three vectors.
double mad_significance(const ResponseVector& synth_a, const ResponseVector& synth_b, const ResponseVector& human,
                        const BootstrapOptions& options = {});

/// "***" below 0.01, "**" below 0.05, "*" below 0.10, else "ns".
std::string_view significance_stars(double p) noexcept;

struct WelchResult {
  double diff = 0;
  double t = 0;
  double df = 0;
  double p_value = 1;
};

/// mean(a) - mean(b) with Welch's unequal-variance t-test. When both samples
/// have zero variance, p is 0 if the means differ and 1 otherwise.
/// Throws InsufficientData.
WelchResult cross_sample_diff(const ResponseVector& a, const ResponseVector& b);

struct Correlation {
  double r = 0;
  double p_value = 1;
  std::size_t n_used = 0;
};

/// Pearson correlation over jointly present rows, p from the t transform on
/// n - 2 degrees of freedom. Throws ZeroVariance, InsufficientData.
Correlation pairwise_correlation(const ResponseVector& a, const ResponseVector& b);

enum class AgreementClass { complete_agreement, partial_disagreement, complete_disagreement, both_insignificant };

std::string_view to_string(AgreementClass c) noexcept;

AgreementClass agreement_class(const Correlation& human, const Correlation& synth, double alpha = 0.05);

struct AgreementCell {
  std::string question_a;
  std::string question_b;
  Correlation human;
  Correlation synth;
  AgreementClass cls = AgreementClass::both_insignificant;
};

struct AgreementSummary {
  int complete_agreement = 0;
  int partial_disagreement = 0;
  int complete_disagreement = 0;
  int both_insignificant = 0;
  int total = 0;

  bool operator==(const AgreementSummary&) const = default;
};

AgreementSummary agreement_summary(const std::vector<AgreementCell>& cells);

struct AgreementGrid {
  std::vector<AgreementCell> cells;
  /// Pairs left out because a correlation was undefined, as "a|b: reason".
  std::vector<std::string> excluded;
};

/// Every unordered question pair (in list order) correlated within the human
/// and within the synthetic sample.
AgreementGrid agreement_grid(const std::vector<ResponseVector>& human, const std::vector<ResponseVector>& synth,
                             double alpha = 0.05);

}  // namespace vpoll
