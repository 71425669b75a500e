#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vpoll/party.hpp"
#include "vpoll/survey_data.hpp"

namespace vpoll {

struct GridPoint {
  double h = 0;
  double objective = 0;
};

struct CalibrationWeight {
  double h = 0;
  /// survey_US, survey_CN, election or party:<name>.
  std::string scope;
  double objective_value = 0;
  std::string fitted_on;
  std::vector<GridPoint> grid_trace;
};

/// Throws Error(WeightOutOfRange) unless 0 <= h <= 1.
void check_weight(double h);

/// h * hist + (1 - h) * llm, elementwise; MISSING in either input stays MISSING.
ResponseVector combine_responses(double h, const ResponseVector& hist, const ResponseVector& llm);

double combine_vote_share(double h, double hist_share, double llm_share);

struct SurveyFitOptions {
  /// Rescale each question onto [0, 1] using `scales` before measuring distance.
  bool normalize_unit_interval = false;
  /// Per-question (min, max), parallel to the response lists.
  std::vector<std::pair<double, double>> scales;
  double tolerance = 1e-6;
};

/// Mean over usable questions of the Euclidean norm of the combined-minus-human
/// vector, using rows present in all three inputs.
class SurveyObjective {
 public:
  SurveyObjective(const std::vector<ResponseVector>& hist, const std::vector<ResponseVector>& llm,
                  const std::vector<ResponseVector>& human, const SurveyFitOptions& options = {});

  double operator()(double h) const;
  std::size_t usable_questions() const noexcept { return terms_.size(); }

 private:
  // |h u + v|^2 = h^2 uu + 2 h uv + vv
  struct Term {
    double uu, uv, vv;
  };
  std::vector<Term> terms_;
};

/// Golden-section minimizer of SurveyObjective over [0, 1], checked against
/// both endpoints; ties resolve to the smallest h. Throws NoUsableQuestions.
CalibrationWeight estimate_h_survey(const std::vector<ResponseVector>& hist, const std::vector<ResponseVector>& llm,
                                    const std::vector<ResponseVector>& human, const SurveyFitOptions& options = {});

using StateShares = std::map<std::string, double>;  // state -> Democratic two-party share
using StateWinners = std::map<std::string, Party>;

/// Number of states whose combined-share winner equals the actual winner.
/// An exact 0.5 share never counts as correct.
int correct_states(double h, const StateShares& hist, const StateShares& llm, const StateWinners& actual);

/// Grid search over h = 0.00, 0.01, ..., 1.00 maximizing correct_states;
/// smallest h among ties. Throws StateSetMismatch.
CalibrationWeight estimate_h_election(const StateShares& hist, const StateShares& llm, const StateWinners& actual);

using PartyShares = std::map<std::string, double>;  // party -> national share

/// One fitting election: simulated shares, actual shares, and the actual
/// shares of the election before it.
struct PartyFitPoint {
  PartyShares simulated;
  PartyShares actual;
  PartyShares previous;
};

/// Per party, least-squares h_p for h * previous + (1 - h) * simulated ~ actual,
/// clamped to [0, 1]; h_p = 0 when the fit is undetermined. Throws MissingParty.
std::map<std::string, CalibrationWeight> estimate_party_weights(const std::vector<PartyFitPoint>& points);

/// Applies party weights to a new election and rescales so the shares sum to
/// the simulated listed-party total.
PartyShares forecast_multiparty(const std::map<std::string, CalibrationWeight>& weights, const PartyShares& simulated,
                                const PartyShares& previous);

}  // namespace vpoll
