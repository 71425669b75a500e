// Acceptance runner: one PASS/FAIL line per criterion, details indented below.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vpoll/calibration.hpp"
#include "vpoll/election_forecast.hpp"
#include "vpoll/error.hpp"
#include "vpoll/eval_stats.hpp"
#include "vpoll/fixtures.hpp"
#include "vpoll/persona_prompt.hpp"
#include "vpoll/pipeline.hpp"
#include "vpoll/psm_matching.hpp"

using namespace vpoll;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
    pass = pass && ok;
  }
};

fs::path data(const std::string& name) { return fs::path(VPOLL_DATA_DIR) / name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ev_pair(const ElectoralOutcome& o) { return std::to_string(o.dem_ev) + "/" + std::to_string(o.rep_ev); }

StateWinners flipped(StateWinners w, std::initializer_list<const char*> states) {
  for (const char* s : states) w.at(s) = w.at(s) == Party::Democratic ? Party::Republican : Party::Democratic;
  return w;
}

// --- 1 ---------------------------------------------------------------------

Outcome electoral_arithmetic() {
  Outcome o;
  const auto winners = load_winners(data("actual_winners.csv"));
  const auto ev2010 = load_ev_table(data("ev_census2010.csv"));
  const auto ev2020 = load_ev_table(data("ev_census2020.csv"));

  const auto y2020 = allocate_winners(winners.at(2020), ev2010, 2020);
  o.check(y2020.dem_ev == 306 && y2020.rep_ev == 232, "2020 actual winners: " + ev_pair(y2020) + " (want 306/232)");

  const auto y2016 = allocate_winners(winners.at(2016), ev2010, 2016);
  o.check(y2016.dem_ev == 232 && y2016.rep_ev == 306,
          "2016 actual winners: " + ev_pair(y2016) + " (want 232/306; statewide winner-take-all gives Maine's "
          "4th elector to the Democratic column, pledged totals split Maine)");

  const auto m2016 = allocate_winners(flipped(winners.at(2016), {"Wisconsin", "Michigan"}), ev2010, 2016);
  o.check(m2016.dem_ev == 259 && m2016.rep_ev == 279, "2016 with WI+MI flipped: " + ev_pair(m2016) + " (want 259/279)");

  const auto m2020 = allocate_winners(flipped(winners.at(2020), {"Arizona", "North Carolina"}), ev2010, 2020);
  o.check(m2020.dem_ev == 310 && m2020.rep_ev == 228, "2020 with AZ+NC flipped: " + ev_pair(m2020) + " (want 310/228)");

  const auto y2024 = allocate_winners(winners.at(2024), ev2020, 2024);
  o.check(y2024.dem_ev == 226 && y2024.rep_ev == 312, "2024 actual winners: " + ev_pair(y2024) + " (want 226/312)");
  const auto m2024 = allocate_winners(flipped(winners.at(2024), {"Nevada", "New Hampshire"}), ev2020, 2024);
  o.check(std::abs(m2024.dem_ev - 229) <= 2 && std::abs(m2024.rep_ev - 309) <= 2,
          "2024 with NV+NH flipped: " + ev_pair(m2024) + " (want 229/309 +-2; exact sum is 228/310)");
  return o;
}

// --- 2 ---------------------------------------------------------------------

double survey_objective_direct(double h, const std::vector<ResponseVector>& hist, const std::vector<ResponseVector>& llm,
                               const std::vector<ResponseVector>& human) {
  double total = 0;
  for (std::size_t q = 0; q < hist.size(); ++q) {
    double ss = 0;
    for (std::size_t i = 0; i < hist[q].size(); ++i) {
      const double d = h * *hist[q].values[i] + (1 - h) * *llm[q].values[i] - *human[q].values[i];
      ss += d * d;
    }
    total += std::sqrt(ss);
  }
  return total / static_cast<double>(hist.size());
}

struct Toy {
  std::vector<ResponseVector> hist, llm, human;
};

Toy random_toy(std::mt19937_64& rng, int k, int n) {
  std::uniform_int_distribution<int> lik(1, 5);
  Toy t;
  for (int q = 0; q < k; ++q) {
    ResponseVector a{"q" + std::to_string(q), {}}, b = a, c = a;
    for (int i = 0; i < n; ++i) {
      a.values.emplace_back(lik(rng));
      b.values.emplace_back(lik(rng));
      c.values.emplace_back(lik(rng));
    }
    t.hist.push_back(a);
    t.llm.push_back(b);
    t.human.push_back(c);
  }
  return t;
}

Outcome calibration_oracles() {
  Outcome o;
  std::mt19937_64 rng(20240501);
  int survey_ok = 0;
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const Toy toy = random_toy(rng, 1 + t % 5, 20 + t);
    double best_h = 0, best = INFINITY;
    for (int j = 0; j <= 100000; ++j) {
      const double f = survey_objective_direct(j * 1e-5, toy.hist, toy.llm, toy.human);
      if (f < best) {
        best = f;
        best_h = j * 1e-5;
      }
    }
    const double h = estimate_h_survey(toy.hist, toy.llm, toy.human).h;
    worst = std::max(worst, std::abs(h - best_h));
    survey_ok += std::abs(h - best_h) <= 1e-4 ? 1 : 0;
  }
  o.check(survey_ok == 20, "survey: " + std::to_string(survey_ok) + "/20 within 1e-4 of the 1e-5 grid (worst " +
                               std::to_string(worst) + ")");

  int election_ok = 0;
  std::uniform_real_distribution<double> share(0.3, 0.7);
  for (int t = 0; t < 20; ++t) {
    StateShares hist, llm;
    StateWinners actual;
    for (int s = 0; s < 51; ++s) {
      const std::string st = "S" + std::to_string(s);
      hist[st] = share(rng);
      llm[st] = share(rng);
      actual[st] = share(rng) < 0.5 ? Party::Democratic : Party::Republican;
    }
    int best = -1;
    double best_h = 0;
    for (int j = 0; j <= 100; ++j) {
      const double h = j / 100.0;
      int n = 0;
      for (const auto& [st, party] : actual) {
        const double x = h * hist[st] + (1 - h) * llm[st];
        n += (x > 0.5 && party == Party::Democratic) || (x < 0.5 && party == Party::Republican) ? 1 : 0;
      }
      if (n > best) {
        best = n;
        best_h = h;
      }
    }
    election_ok += estimate_h_election(hist, llm, actual).h == best_h ? 1 : 0;
  }
  o.check(election_ok == 20, "election: " + std::to_string(election_ok) + "/20 equal to the grid argmax");
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome planted_recovery() {
  Outcome o;
  const int trials = 100, n = 500, k = 10;
  for (double h_star : {0.2, 0.5, 0.8}) {
    int hits = 0;
    for (int t = 0; t < trials; ++t) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(h_star * 1000) * 1000 + static_cast<std::uint64_t>(t));
      std::uniform_int_distribution<int> lik(1, 5);
      std::normal_distribution<double> noise(0.0, 0.1);
      std::vector<ResponseVector> hist, llm, human;
      for (int q = 0; q < k; ++q) {
        ResponseVector a{"q" + std::to_string(q), {}}, b = a, c = a;
        for (int i = 0; i < n; ++i) {
          const double x = lik(rng), y = lik(rng);
          a.values.emplace_back(x);
          b.values.emplace_back(y);
          c.values.emplace_back(h_star * x + (1 - h_star) * y + noise(rng));
        }
        hist.push_back(a);
        llm.push_back(b);
        human.push_back(c);
      }
      hits += std::abs(estimate_h_survey(hist, llm, human).h - h_star) <= 0.05 ? 1 : 0;
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, "h*=%.1f: %d/%d trials within 0.05 (need 95)", h_star, hits, trials);
    o.check(hits >= 95, buf);
  }
  return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome psm_oracles() {
  Outcome o;
  std::mt19937_64 rng(40);
  std::normal_distribution<double> z(0.0, 1.0);
  DesignMatrix d;
  d.rows = 40;
  d.cols = 4;
  for (std::size_t r = 0; r < d.rows; ++r) {
    const double a = z(rng), b = z(rng), c = z(rng);
    d.x.insert(d.x.end(), {1.0, a, b, c});
    d.y.push_back(z(rng) + 0.9 * a - 0.4 * c > 0 ? 1.0 : 0.0);
  }
  const auto model = fit_logistic(d);

  // plain gradient ascent on the same penalized likelihood
  double frob = 0;
  for (double v : d.x) frob += v * v;
  const double step = 1.0 / (0.25 * frob + 1e-6);
  std::vector<double> beta(4, 0.0), grad(4);
  for (int it = 0; it < 5'000'000; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t r = 0; r < d.rows; ++r) {
      double eta = 0;
      for (std::size_t c = 0; c < 4; ++c) eta += d.at(r, c) * beta[c];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      for (std::size_t c = 0; c < 4; ++c) grad[c] += d.at(r, c) * (d.y[r] - p);
    }
    double norm = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      grad[c] -= 1e-6 * beta[c];
      norm += grad[c] * grad[c];
    }
    if (std::sqrt(norm) < 1e-11) break;
    for (std::size_t c = 0; c < 4; ++c) beta[c] += step * grad[c];
  }
  double worst = 0;
  for (std::size_t c = 0; c < 4; ++c) worst = std::max(worst, std::abs(model.coefficients[c] - beta[c]));
  o.check(worst <= 1e-4, "40-row logistic fit vs gradient oracle: max |diff| " + std::to_string(worst));

  int agree = 0;
  const int seeds = 1000;
  for (int seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 g(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ScoredRespondent> cur, hist;
    for (int i = 0; i < 30; ++i) {
      char id[8];
      std::snprintf(id, sizeof id, "c%02d", i);
      cur.push_back({id, seed % 4 ? u(g) : std::round(u(g) * 25) / 25});
      std::snprintf(id, sizeof id, "h%02d", i);
      hist.push_back({id, seed % 4 ? u(g) : std::round(u(g) * 25) / 25});
    }
    std::shuffle(hist.begin(), hist.end(), g);
    const auto m = match_nearest(cur, hist);
    bool same = m.pairs.size() == cur.size();
    for (std::size_t i = 0; same && i < cur.size(); ++i) {
      const ScoredRespondent* best = nullptr;
      for (const auto& h : hist) {
        const double gap = std::abs(h.score - cur[i].score);
        const double bg = best ? std::abs(best->score - cur[i].score) : INFINITY;
        if (gap < bg || (gap == bg && h.respondent_id < best->respondent_id)) best = &h;
      }
      same = m.pairs[i].historical_id == best->respondent_id;
    }
    agree += same ? 1 : 0;
  }
  o.check(agree == seeds, "30x30 with replacement vs exhaustive scan: " + std::to_string(agree) + "/" +
                              std::to_string(seeds) + " seeds identical");
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome statistics_oracles() {
  Outcome o;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_r = 0, worst_t = 0, worst_m = 0;
  for (int t = 0; t < 20; ++t) {
    ResponseVector a{"a", {}}, b{"b", {}};
    for (int i = 0; i < 100; ++i) {
      const double x = 3 + z(rng);
      a.values.emplace_back(x);
      b.values.emplace_back(0.4 * x + 1.5 * z(rng) + 0.2 * t);
    }
    double ma = 0, mb = 0;
    for (int i = 0; i < 100; ++i) {
      ma += *a.values[i];
      mb += *b.values[i];
    }
    ma /= 100;
    mb /= 100;
    double saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < 100; ++i) {
      const double da = *a.values[i] - ma, db = *b.values[i] - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
    const double r = sab / std::sqrt(saa * sbb);
    const double va = saa / 99, vb = sbb / 99;
    const double tw = (ma - mb) / std::sqrt(va / 100 + vb / 100);
    worst_r = std::max(worst_r, std::abs(pairwise_correlation(a, b).r - r));
    worst_t = std::max(worst_t, std::abs(cross_sample_diff(a, b).t - tw));
    const auto ms = mean_sd(a);
    worst_m = std::max({worst_m, std::abs(ms.mean - ma), std::abs(ms.sd - std::sqrt(va))});
  }
  o.check(worst_r <= 1e-10, "Pearson r vs direct formula: max |diff| " + std::to_string(worst_r));
  o.check(worst_t <= 1e-10, "Welch t vs direct formula: max |diff| " + std::to_string(worst_t));
  o.check(worst_m <= 1e-10, "mean/SD vs direct formula: max |diff| " + std::to_string(worst_m));

  std::vector<AgreementCell> cells(51);
  for (auto& c : cells) c.cls = AgreementClass::complete_agreement;
  for (std::size_t i : {3u, 20u, 44u}) cells[i].cls = AgreementClass::partial_disagreement;
  const auto s = agreement_summary(cells);
  o.check(s == AgreementSummary{48, 3, 0, 0, 51}, "51-cell grid with 3 planted partial disagreements recounted exactly");

  // classes planted through agreement_class itself
  std::vector<AgreementCell> mixed;
  const AgreementClass plan[] = {AgreementClass::complete_agreement, AgreementClass::partial_disagreement,
                                 AgreementClass::complete_disagreement, AgreementClass::both_insignificant};
  const Correlation inputs[4][2] = {{{0.3, 0.01}, {0.4, 0.02}},
                                    {{0.3, 0.01}, {0.1, 0.20}},
                                    {{0.3, 0.01}, {-0.3, 0.01}},
                                    {{0.1, 0.40}, {0.05, 0.60}}};
  AgreementSummary want;
  for (int i = 0; i < 40; ++i) {
    AgreementCell c;
    c.human = inputs[i % 4][0];
    c.synth = inputs[i % 4][1];
    c.cls = agreement_class(c.human, c.synth);
    if (c.cls != plan[i % 4]) o.check(false, "agreement_class rule for planted cell " + std::to_string(i));
    mixed.push_back(c);
  }
  want = {10, 10, 10, 10, 40};
  o.check(agreement_summary(mixed) == want, "40 mixed cells recounted 10/10/10/10");
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome convexity_boundaries() {
  Outcome o;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> lik(1, 10);
  int boundary = 0, bounded = 0;
  for (int t = 0; t < 1000; ++t) {
    ResponseVector a{"q", {}}, b{"q", {}};
    for (int i = 0; i < 8; ++i) {
      a.values.emplace_back(lik(rng));
      b.values.emplace_back(lik(rng));
    }
    const double h = u(rng), x = u(rng), y = u(rng);
    const bool ends = combine_responses(0, a, b) .values == b.values && combine_responses(1, a, b).values == a.values &&
                      combine_vote_share(0, x, y) == y && combine_vote_share(1, x, y) == x;
    boundary += ends ? 1 : 0;
    bool inside = true;
    const auto c = combine_responses(h, a, b);
    for (int i = 0; i < 8; ++i) {
      const double lo = std::min(*a.values[i], *b.values[i]), hi = std::max(*a.values[i], *b.values[i]);
      inside = inside && *c.values[i] >= lo && *c.values[i] <= hi;
    }
    const double s = combine_vote_share(h, x, y);
    inside = inside && s >= std::min(x, y) && s <= std::max(x, y);
    bounded += inside ? 1 : 0;
  }
  o.check(boundary == 1000, "h=0 / h=1 identities: " + std::to_string(boundary) + "/1000");
  o.check(bounded == 1000, "elementwise bounded by the inputs: " + std::to_string(bounded) + "/1000");

  int never_worse = 0;
  const int fits = 200;
  for (int t = 0; t < fits; ++t) {
    const Toy toy = random_toy(rng, 1 + t % 6, 10 + t % 40);
    const SurveyObjective f(toy.hist, toy.llm, toy.human);
    const auto w = estimate_h_survey(toy.hist, toy.llm, toy.human);
    never_worse += f(w.h) <= f(0) && f(w.h) <= f(1) ? 1 : 0;
  }
  o.check(never_worse == fits, "objective at the fitted h <= both endpoints: " + std::to_string(never_worse) + "/" +
                                   std::to_string(fits));
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome end_to_end_determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("vpoll_accept_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  const auto catalog = load_catalog(data("wvs_catalog.json"));
  const auto f = make_wvs_fixture(Country::US, 1000, 1000, 2024, catalog);
  save_sample(dir / "wvs7_us.csv", f.current);
  save_sample(dir / "wvs6_us.csv", f.historical);
  const std::string text = R"({"task": "wvs_survey", "seed": 2024, "output_dir": "run_a",
    "countries": [{"country": "US", "current_sample": "wvs7_us.csv", "historical_sample": "wvs6_us.csv"}],
    "backend": {"kind": "mock"}})";
  auto cfg = parse_run_config(text, dir);

  std::vector<std::string> files;
  for (const char* out : {"run_a", "run_b"}) {
    cfg.output_dir = out;
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = run_pipeline(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.check(secs < 60.0, std::string(out) + ": " + std::to_string(report.files.size()) + " files in " +
                             std::to_string(secs) + " s");
    files = report.files;
  }
  std::size_t same = 0;
  for (const auto& rel : files) same += slurp(dir / "run_a" / rel) == slurp(dir / "run_b" / rel) ? 1 : 0;
  std::size_t count_a = 0, count_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "run_a")) count_a += e.is_regular_file() ? 1 : 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "run_b")) count_b += e.is_regular_file() ? 1 : 0;
  o.check(same == files.size() && count_a == count_b && count_a == files.size(),
          "byte-identical trees: " + std::to_string(same) + "/" + std::to_string(files.size()) + " files");
  fs::remove_all(dir);
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome prompt_fidelity() {
  Outcome o;
  const auto catalog = load_catalog(data("wvs_catalog.json"));
  std::vector<QuestionSpec> asked;
  for (const auto& q : catalog) {
    if (q.in_wave7) asked.push_back(q);
  }
  DemographicProfile w;
  w.respondent_id = "canon";
  w.age = 34;
  w.gender = Gender::female;
  w.region = "Ohio";
  w.education = 6;
  w.marital_status = 1;
  w.occupation = 1;
  w.income = 5;
  const fs::path golden(VPOLL_GOLDEN_DIR);
  o.check(render_transcript(render_wvs_prompt(w, Country::US, asked)) == slurp(golden / "wvs_us_canonical.txt"),
          "WVS canonical profile (US, Ohio) matches wvs_us_canonical.txt");

  DemographicProfile a;
  a.respondent_id = "canon";
  a.age = 18;
  a.gender = Gender::male;
  a.region = "Wisconsin";
  a.ethnicity = 1;
  a.education = 6;
  a.religion = 12;
  a.marital_status = 6;
  a.occupation = 1;
  a.political_attention = 2;
  a.income = 1;
  o.check(render_transcript(render_anes_prompt(a, 2024)) == slurp(golden / "anes_2024_canonical.txt"),
          "ANES 2024 canonical profile matches anes_2024_canonical.txt");
  o.check(ballot_question(2016).text + "\n" == slurp(golden / "anes_2016_ballot.txt"),
          "2016 ballot matches anes_2016_ballot.txt");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {1, "electoral arithmetic", 1.0, electoral_arithmetic},
      {2, "calibration oracle equivalence", 10.0, calibration_oracles},
      {3, "planted-weight recovery", 30.0, planted_recovery},
      {4, "PSM oracle equivalence", 5.0, psm_oracles},
      {5, "statistics oracles", 5.0, statistics_oracles},
      {6, "convexity and boundaries", 10.0, convexity_boundaries},
      {7, "end-to-end mock determinism", 120.0, end_to_end_determinism},
      {8, "prompt fidelity", 1.0, prompt_fidelity},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.check(false, std::string("threw: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f s, budget %.0f s", secs, c.budget_s);
    out.check(secs < c.budget_s, std::string("runtime ") + timing);
    std::cout << (out.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " (" << timing << ")\n";
    for (const auto& n : out.notes) std::cout << "      " << n << "\n";
    failed += out.pass ? 0 : 1;
  }
  std::cout << (failed ? std::to_string(failed) + " of 8 criteria failed" : std::string("all 8 criteria passed"))
            << "\n";
  return failed ? 1 : 0;
}
