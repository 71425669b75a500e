#include "vpoll/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "vpoll/error.hpp"
#include "vpoll/golden_section.hpp"

namespace vpoll {

void check_weight(double h) {
  if (!(h >= 0.0 && h <= 1.0)) throw Error(Errc::WeightOutOfRange, "weight " + std::to_string(h) + " outside [0, 1]");
}

namespace {

// Rounding can push h*a + (1-h)*b one ulp outside [a, b]; clamp it back.
double mix(double h, double a, double b) { return std::clamp(h * a + (1.0 - h) * b, std::min(a, b), std::max(a, b)); }

}  // namespace

ResponseVector combine_responses(double h, const ResponseVector& hist, const ResponseVector& llm) {
  check_weight(h);
  if (hist.size() != llm.size()) {
    throw Error(Errc::LengthMismatch, llm.question_id + ": historical has " + std::to_string(hist.size()) +
                                          " rows, llm has " + std::to_string(llm.size()));
  }
  ResponseVector out;
  out.question_id = llm.question_id;
  out.values.reserve(llm.size());
  for (std::size_t i = 0; i < llm.size(); ++i) {
    const auto& a = hist.values[i];
    const auto& b = llm.values[i];
    if (a && b) out.values.emplace_back(mix(h, *a, *b));
    else out.values.emplace_back(std::nullopt);
  }
  return out;
}

double combine_vote_share(double h, double hist_share, double llm_share) {
  check_weight(h);
  if (!(hist_share >= 0.0 && hist_share <= 1.0 && llm_share >= 0.0 && llm_share <= 1.0)) {
    throw Error(Errc::InvalidConfig, "vote shares must lie in [0, 1]");
  }
  return mix(h, hist_share, llm_share);
}

SurveyObjective::SurveyObjective(const std::vector<ResponseVector>& hist, const std::vector<ResponseVector>& llm,
                                 const std::vector<ResponseVector>& human, const SurveyFitOptions& options) {
  if (hist.size() != llm.size() || llm.size() != human.size()) {
    throw Error(Errc::LengthMismatch, "historical, llm and human lists cover different question counts");
  }
  if (options.normalize_unit_interval && options.scales.size() != llm.size()) {
    throw Error(Errc::InvalidConfig, "normalization needs one scale per question");
  }
  for (std::size_t k = 0; k < llm.size(); ++k) {
    const auto& a = hist[k].values;
    const auto& b = llm[k].values;
    const auto& c = human[k].values;
    if (a.size() != b.size() || b.size() != c.size()) {
      throw Error(Errc::LengthMismatch, llm[k].question_id + ": rosters differ in length");
    }
    double lo = 0, width = 1;
    if (options.normalize_unit_interval) {
      lo = options.scales[k].first;
      width = options.scales[k].second - options.scales[k].first;
      if (!(width > 0)) throw Error(Errc::InvalidConfig, llm[k].question_id + ": empty scale");
    }
    Term t{0, 0, 0};
    bool used = false;
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!a[i] || !b[i] || !c[i]) continue;
      const double ai = (*a[i] - lo) / width;
      const double bi = (*b[i] - lo) / width;
      const double ci = (*c[i] - lo) / width;
      const double u = ai - bi;
      const double v = bi - ci;
      t.uu += u * u;
      t.uv += u * v;
      t.vv += v * v;
      used = true;
    }
    if (used) terms_.push_back(t);
  }
  if (terms_.empty()) throw Error(Errc::NoUsableQuestions, "every question is fully missing");
}

double SurveyObjective::operator()(double h) const {
  double sum = 0;
  for (const auto& t : terms_) sum += std::sqrt(std::max(0.0, h * h * t.uu + 2.0 * h * t.uv + t.vv));
  return sum / static_cast<double>(terms_.size());
}

CalibrationWeight estimate_h_survey(const std::vector<ResponseVector>& hist, const std::vector<ResponseVector>& llm,
                                    const std::vector<ResponseVector>& human, const SurveyFitOptions& options) {
  const SurveyObjective f(hist, llm, human, options);
  const double interior = golden_section_min(f, 0.0, 1.0, options.tolerance);

  // Candidates in ascending h, so the strict comparison keeps the smallest on ties.
  CalibrationWeight w;
  w.h = 0.0;
  w.objective_value = f(0.0);
  for (double h : {interior, 1.0}) {
    const double v = f(h);
    if (v < w.objective_value) {
      w.h = h;
      w.objective_value = v;
    }
  }
  for (int j = 0; j <= 100; ++j) {
    const double h = j / 100.0;
    w.grid_trace.push_back({h, f(h)});
  }
  w.scope = "survey";
  return w;
}

namespace {

void check_same_states(const StateShares& hist, const StateShares& llm, const StateWinners& actual) {
  auto keys_equal = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           std::equal(x.begin(), x.end(), y.begin(), [](const auto& p, const auto& q) { return p.first == q.first; });
  };
  if (!keys_equal(hist, llm) || !keys_equal(llm, actual)) {
    throw Error(Errc::StateSetMismatch, "historical, llm and actual inputs cover different states");
  }
}

}  // namespace

int correct_states(double h, const StateShares& hist, const StateShares& llm, const StateWinners& actual) {
  check_same_states(hist, llm, actual);
  int correct = 0;
  auto hi = hist.begin();
  auto li = llm.begin();
  for (const auto& [state, winner] : actual) {
    const double share = combine_vote_share(h, hi->second, li->second);
    ++hi;
    ++li;
    if (share == 0.5) continue;
    const Party predicted = share > 0.5 ? Party::Democratic : Party::Republican;
    if (predicted == winner) ++correct;
  }
  return correct;
}

CalibrationWeight estimate_h_election(const StateShares& hist, const StateShares& llm, const StateWinners& actual) {
  check_same_states(hist, llm, actual);
  CalibrationWeight w;
  w.scope = "election";
  w.objective_value = -1;
  for (int j = 0; j <= 100; ++j) {
    const double h = j / 100.0;
    const double correct = correct_states(h, hist, llm, actual);
    w.grid_trace.push_back({h, correct});
    if (correct > w.objective_value) {
      w.h = h;
      w.objective_value = correct;
    }
  }
  return w;
}

namespace {

double share_of(const PartyShares& shares, const std::string& party, const char* what) {
  auto it = shares.find(party);
  if (it == shares.end()) throw Error(Errc::MissingParty, std::string(what) + " shares lack party " + party);
  return it->second;
}

}  // namespace

std::map<std::string, CalibrationWeight> estimate_party_weights(const std::vector<PartyFitPoint>& points) {
  if (points.empty()) throw Error(Errc::InsufficientData, "party weights need at least one fitting election");
  std::map<std::string, CalibrationWeight> out;
  for (const auto& [party, unused] : points.front().simulated) {
    (void)unused;
    double sdd = 0, sdr = 0, srr = 0;
    for (const auto& pt : points) {
      const double sim = share_of(pt.simulated, party, "simulated");
      const double d = share_of(pt.previous, party, "previous") - sim;
      const double r = share_of(pt.actual, party, "actual") - sim;
      sdd += d * d;
      sdr += d * r;
      srr += r * r;
    }
    CalibrationWeight w;
    w.scope = "party:" + party;
    w.h = sdd > 0 ? std::clamp(sdr / sdd, 0.0, 1.0) : 0.0;
    w.objective_value = w.h * w.h * sdd - 2.0 * w.h * sdr + srr;
    out.emplace(party, std::move(w));
  }
  for (const auto& pt : points) {
    for (const auto* m : {&pt.actual, &pt.previous}) {
      for (const auto& [party, unused] : *m) {
        (void)unused;
        if (!out.count(party)) throw Error(Errc::MissingParty, "simulated shares lack party " + party);
      }
    }
  }
  return out;
}

PartyShares forecast_multiparty(const std::map<std::string, CalibrationWeight>& weights, const PartyShares& simulated,
                                const PartyShares& previous) {
  PartyShares out;
  double total_sim = 0, total_raw = 0;
  for (const auto& [party, sim] : simulated) {
    auto w = weights.find(party);
    if (w == weights.end()) throw Error(Errc::MissingParty, "no weight for party " + party);
    const double v = w->second.h * share_of(previous, party, "previous") + (1.0 - w->second.h) * sim;
    out[party] = v;
    total_sim += sim;
    total_raw += v;
  }
  if (total_raw > 0) {
    for (auto& [party, v] : out) v *= total_sim / total_raw;
  }
  return out;
}

}  // namespace vpoll
