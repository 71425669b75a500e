#include "vpoll/election_forecast.hpp"

#include <algorithm>
#include <charconv>
#include <iterator>
#include <cmath>

#include "vpoll/csv.hpp"
#include "vpoll/error.hpp"
#include "vpoll/regions.hpp"

namespace vpoll {

bool is_supported_cycle(int cycle) noexcept { return cycle == 2016 || cycle == 2020 || cycle == 2024; }

void check_cycle(int cycle) {
  if (!is_supported_cycle(cycle)) throw Error(Errc::InvalidConfig, "unsupported cycle " + std::to_string(cycle));
}

TallyReport tally_states(const std::map<std::string, Party>& votes, const SurveySample& sample, int cycle) {
  check_cycle(cycle);
  struct Sums {
    double dem = 0, rep = 0;
  };
  std::map<std::string, Sums> sums;
  for (const auto& [id, party] : votes) {
    const auto idx = sample.index_of(id);
    if (!idx) throw Error(Errc::InvalidConfig, "vote from unknown respondent " + id);
    const auto& p = sample.roster[*idx];
    if (p.region.empty()) throw Error(Errc::MissingState, "respondent " + id + " has no state");
    if (!(p.sampling_weight > 0)) throw Error(Errc::MalformedRow, "respondent " + id + " has non-positive weight");
    auto& s = sums[p.region];
    (party == Party::Democratic ? s.dem : s.rep) += p.sampling_weight;
  }
  if (sums.empty()) throw Error(Errc::NoVotes, "no parsed votes to tally");

  TallyReport report;
  for (const auto& [state, s] : sums) {
    const double total = s.dem + s.rep;
    StateTally t{state, cycle, s.dem / total, 0.0, total};
    t.rep_share = 1.0 - t.dem_share;
    report.tallies.push_back(std::move(t));
  }
  for (auto state : regions_for(sample.country)) {
    if (!sums.count(std::string(state))) report.states_without_votes.emplace_back(state);
  }
  return report;
}

std::vector<StateTally> forecast_shares(double h, const std::vector<StateTally>& hist,
                                        const std::vector<StateTally>& llm) {
  check_weight(h);
  std::map<std::string, const StateTally*> by_state;
  for (const auto& t : hist) by_state[t.state] = &t;
  if (by_state.size() != llm.size()) throw Error(Errc::StateSetMismatch, "historical and llm tallies differ");
  std::vector<StateTally> out;
  for (const auto& l : llm) {
    auto it = by_state.find(l.state);
    if (it == by_state.end()) throw Error(Errc::StateSetMismatch, "no historical share for " + l.state);
    StateTally t = l;
    t.dem_share = combine_vote_share(h, it->second->dem_share, l.dem_share);
    t.rep_share = 1.0 - t.dem_share;
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end(), [](const StateTally& a, const StateTally& b) { return a.state < b.state; });
  return out;
}

StateShares to_shares(const std::vector<StateTally>& tallies) {
  StateShares out;
  for (const auto& t : tallies) out[t.state] = t.dem_share;
  return out;
}

std::vector<StateTally> to_tallies(const StateShares& shares, int cycle) {
  std::vector<StateTally> out;
  for (const auto& [state, d] : shares) out.push_back({state, cycle, d, 1.0 - d, 1.0});
  return out;
}

int EvTable::total() const {
  int t = 0;
  for (const auto& [s, ev] : electors) t += ev;
  return t;
}

std::string ev_version_for_cycle(int cycle) {
  check_cycle(cycle);
  return cycle == 2024 ? "census2020" : "census2010";
}

namespace {

std::vector<csv::Record> read_table(const std::filesystem::path& path, const std::vector<std::string>& header) {
  auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().fields != header) {
    throw Error(Errc::MalformedRow, path.string() + ": expected header " + [&] {
      std::string h;
      for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
      return h;
    }());
  }
  rows.erase(rows.begin());
  for (const auto& r : rows) {
    if (r.fields.size() != header.size()) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(r.line) + ": wrong field count");
    }
  }
  return rows;
}

template <typename T>
T parse_number(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

EvTable load_ev_table(const std::filesystem::path& path) {
  EvTable table;
  for (const auto& r : read_table(path, {"state", "ev", "version"})) {
    if (table.version.empty()) table.version = r.fields[2];
    if (r.fields[2] != table.version) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(r.line) + ": mixed table versions");
    }
    const int ev = parse_number<int>(r.fields[1], path, r.line);
    if (ev < 1) throw Error(Errc::CodeOutOfRange, path.string() + ":" + std::to_string(r.line) + ": ev < 1");
    if (!table.electors.emplace(r.fields[0], ev).second) {
      throw Error(Errc::MalformedRow, path.string() + ": duplicate state " + r.fields[0]);
    }
  }
  return table;
}

namespace {

void require_cover(const std::vector<std::string>& states, const EvTable& table) {
  std::vector<std::string> sorted = states;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::string> missing;
  for (const auto& [s, ev] : table.electors) {
    if (!std::binary_search(sorted.begin(), sorted.end(), s)) missing.push_back(s);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw Error(Errc::MissingState, "no share for " + list);
  }
  for (const auto& s : sorted) {
    if (!table.electors.count(s)) throw Error(Errc::MissingState, s + " is not in the " + table.version + " table");
  }
}

}  // namespace

ElectoralOutcome allocate_electors(const std::vector<StateTally>& shares, const EvTable& table, int cycle) {
  std::vector<std::string> states;
  for (const auto& t : shares) states.push_back(t.state);
  require_cover(states, table);
  ElectoralOutcome out;
  out.cycle = cycle;
  out.ev_table_version = table.version;
  for (const auto& t : shares) {
    if (t.dem_share == 0.5) {
      out.ties.push_back(t.state);
      continue;
    }
    const Party w = t.dem_share > 0.5 ? Party::Democratic : Party::Republican;
    out.winners[t.state] = w;
    (w == Party::Democratic ? out.dem_ev : out.rep_ev) += table.electors.at(t.state);
  }
  std::sort(out.ties.begin(), out.ties.end());
  return out;
}

ElectoralOutcome allocate_winners(const StateWinners& winners, const EvTable& table, int cycle) {
  std::vector<std::string> states;
  for (const auto& [s, w] : winners) states.push_back(s);
  require_cover(states, table);
  ElectoralOutcome out;
  out.cycle = cycle;
  out.ev_table_version = table.version;
  out.winners = winners;
  for (const auto& [s, w] : winners) (w == Party::Democratic ? out.dem_ev : out.rep_ev) += table.electors.at(s);
  return out;
}

MapDiff compare_maps(const ElectoralOutcome& predicted, const ElectoralOutcome& actual) {
  if (predicted.cycle != actual.cycle || predicted.ev_table_version != actual.ev_table_version) {
    throw Error(Errc::CycleMismatch, "cannot compare " + std::to_string(predicted.cycle) + "/" +
                                         predicted.ev_table_version + " with " + std::to_string(actual.cycle) + "/" +
                                         actual.ev_table_version);
  }
  MapDiff d;
  for (const auto& [state, w] : actual.winners) {
    auto it = predicted.winners.find(state);
    if (it == predicted.winners.end() || it->second != w) d.mispredicted.push_back(state);
  }
  for (const auto& [state, w] : predicted.winners) {
    if (!actual.winners.count(state)) d.mispredicted.push_back(state);
  }
  std::sort(d.mispredicted.begin(), d.mispredicted.end());
  d.mispredicted.erase(std::unique(d.mispredicted.begin(), d.mispredicted.end()), d.mispredicted.end());
  d.ev_error = std::abs(predicted.dem_ev - actual.dem_ev);
  return d;
}

std::map<int, StateWinners> load_winners(const std::filesystem::path& path) {
  std::map<int, StateWinners> out;
  for (const auto& r : read_table(path, {"state", "cycle", "winner"})) {
    out[parse_number<int>(r.fields[1], path, r.line)][r.fields[0]] = parse_party(r.fields[2]);
  }
  return out;
}

std::map<int, StateShares> load_historical_shares(const std::filesystem::path& path) {
  std::map<int, StateShares> out;
  for (const auto& r : read_table(path, {"state", "cycle", "dem_share", "rep_share"})) {
    const double d = parse_number<double>(r.fields[2], path, r.line);
    const double rep = parse_number<double>(r.fields[3], path, r.line);
    if (d < 0 || d > 1 || std::abs(d + rep - 1.0) > 1e-6) {
      throw Error(Errc::CodeOutOfRange, path.string() + ":" + std::to_string(r.line) + ": shares must sum to 1");
    }
    out[parse_number<int>(r.fields[1], path, r.line)][r.fields[0]] = d;
  }
  return out;
}

StateShares historical_baseline(const std::map<int, StateShares>& by_cycle, int cycle, bool last_only) {
  check_cycle(cycle);
  auto get = [&](int c) -> const StateShares& {
    auto it = by_cycle.find(c);
    if (it == by_cycle.end()) throw Error(Errc::InsufficientData, "no historical shares for " + std::to_string(c));
    return it->second;
  };
  const StateShares& last = get(cycle - 4);
  if (last_only) return last;
  const StateShares& before = get(cycle - 8);
  StateShares out;
  for (const auto& [state, d] : last) {
    auto it = before.find(state);
    if (it == before.end()) throw Error(Errc::StateSetMismatch, "no " + std::to_string(cycle - 8) + " share for " + state);
    out[state] = (d + it->second) / 2.0;
  }
  if (out.size() != before.size()) throw Error(Errc::StateSetMismatch, "historical cycles cover different states");
  return out;
}

MultipartyHistory load_multiparty(const std::filesystem::path& path) {
  MultipartyHistory h;
  for (const auto& r : read_table(path, {"year", "party", "actual_share", "simulated_share"})) {
    const int year = parse_number<int>(r.fields[0], path, r.line);
    if (!r.fields[2].empty()) h.actual[year][r.fields[1]] = parse_number<double>(r.fields[2], path, r.line) / 100.0;
    h.simulated[year][r.fields[1]] = parse_number<double>(r.fields[3], path, r.line) / 100.0;
  }
  return h;
}

int previous_year(const MultipartyHistory& history, int year) {
  auto it = history.actual.lower_bound(year);
  if (it == history.actual.begin()) {
    throw Error(Errc::InsufficientData, "no election before " + std::to_string(year));
  }
  return std::prev(it)->first;
}

std::vector<PartyFitPoint> party_fit_points(const MultipartyHistory& history, const std::vector<int>& years) {
  std::vector<PartyFitPoint> points;
  for (int year : years) {
    auto a = history.actual.find(year);
    auto s = history.simulated.find(year);
    if (a == history.actual.end() || s == history.simulated.end()) {
      throw Error(Errc::InsufficientData, "no actual and simulated shares for " + std::to_string(year));
    }
    points.push_back({s->second, a->second, history.actual.at(previous_year(history, year))});
  }
  return points;
}

}  // namespace vpoll
