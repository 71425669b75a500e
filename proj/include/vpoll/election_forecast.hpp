#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vpoll/calibration.hpp"
#include "vpoll/party.hpp"
#include "vpoll/survey_data.hpp"

namespace vpoll {

/// Election cycles the ballot prompt supports.
bool is_supported_cycle(int cycle) noexcept;
void check_cycle(int cycle);

struct StateTally {
  std::string state;
  int cycle = 0;
  double dem_share = 0;  // of the two-party weighted vote
  double rep_share = 0;
  double effective_n = 0;  // sum of sampling weights

  bool operator==(const StateTally&) const = default;
};

struct TallyReport {
  std::vector<StateTally> tallies;  // alphabetical by state
  /// Known states of the sample's country with no voters.
  std::vector<std::string> states_without_votes;
};

/// Weighted two-party shares per state. Throws NoVotes, MissingState.
TallyReport tally_states(const std::map<std::string, Party>& votes, const SurveySample& sample, int cycle);

/// h * historical + (1 - h) * llm per state. Throws StateSetMismatch.
std::vector<StateTally> forecast_shares(double h, const std::vector<StateTally>& hist,
                                        const std::vector<StateTally>& llm);

StateShares to_shares(const std::vector<StateTally>& tallies);
std::vector<StateTally> to_tallies(const StateShares& shares, int cycle);

struct EvTable {
  std::string version;  // census2010 or census2020
  std::map<std::string, int> electors;

  int total() const;
};

/// census2010 for 2016 and 2020, census2020 for 2024.
std::string ev_version_for_cycle(int cycle);

/// CSV state,ev,version. All rows must share one version.
EvTable load_ev_table(const std::filesystem::path& path);

struct ElectoralOutcome {
  int cycle = 0;
  std::string ev_table_version;
  std::map<std::string, Party> winners;
  /// States at exactly 0.5; their electors go to neither side.
  std::vector<std::string> ties;
  int dem_ev = 0;
  int rep_ev = 0;
};

/// Winner-take-all in every state. Throws MissingState.
ElectoralOutcome allocate_electors(const std::vector<StateTally>& shares, const EvTable& table, int cycle);
ElectoralOutcome allocate_winners(const StateWinners& winners, const EvTable& table, int cycle);

struct MapDiff {
  std::vector<std::string> mispredicted;  // alphabetical
  int ev_error = 0;
};

/// Throws CycleMismatch.
MapDiff compare_maps(const ElectoralOutcome& predicted, const ElectoralOutcome& actual);

/// CSV state,cycle,winner (D or R), keyed by cycle.
std::map<int, StateWinners> load_winners(const std::filesystem::path& path);

/// CSV state,cycle,dem_share,rep_share, keyed by cycle.
std::map<int, StateShares> load_historical_shares(const std::filesystem::path& path);

/// Historical baseline for a forecast cycle: the mean of the two preceding
/// cycles, or only the latest one when last_only is set.
StateShares historical_baseline(const std::map<int, StateShares>& by_cycle, int cycle, bool last_only = false);

/// National list shares per election: official results and simulated tallies.
struct MultipartyHistory {
  std::map<int, PartyShares> actual;
  std::map<int, PartyShares> simulated;
};

/// CSV year,party,actual_share,simulated_share (percent; actual may be blank).
MultipartyHistory load_multiparty(const std::filesystem::path& path);

/// Fitting points for the given years; each uses the preceding election's
/// actual shares as its historical term. Throws InsufficientData.
std::vector<PartyFitPoint> party_fit_points(const MultipartyHistory& history, const std::vector<int>& years);

/// Previous election year in the history, or throws InsufficientData.
int previous_year(const MultipartyHistory& history, int year);

}  // namespace vpoll
