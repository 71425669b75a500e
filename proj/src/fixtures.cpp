#include "vpoll/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vpoll/persona_prompt.hpp"
#include "vpoll/regions.hpp"

namespace vpoll {

namespace {

// Distribution helpers with fixed formulas, so fixtures do not depend on the
// standard library's (implementation-defined) distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  int integer(int lo, int hi) {
    return lo + static_cast<int>(uniform() * static_cast<double>(hi - lo + 1)) % (hi - lo + 1);
  }

  template <typename T>
  const T& pick(const std::vector<T>& xs) {
    return xs[static_cast<std::size_t>(integer(0, static_cast<int>(xs.size()) - 1))];
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 eng_;
};

std::string padded_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", prefix, i + 1);
  return buf;
}

std::vector<std::string> region_list(Country country) {
  std::vector<std::string> out;
  for (auto r : regions_for(country)) out.emplace_back(r);
  if (out.empty()) out.emplace_back("Capital Region");
  return out;
}

std::string_view country_code(Country c) { return to_string(c); }

double latent(const DemographicProfile& p, double drift, Rng& rng) {
  return 0.03 * (*p.age - 45) - 0.2 * (*p.education - 4) + 0.4 * (*p.gender == Gender::female ? 1 : 0) + drift +
         rng.normal();
}

SurveySample make_wave(Country country, std::size_t n, std::uint64_t seed, const std::vector<QuestionSpec>& catalog,
                       int wave, double age_shift, double drift) {
  Rng rng(seed);
  const Codebook& cb = wvs_codebook();
  const auto education = cb.codes("education");
  const auto marital = cb.codes("marital_status");
  const auto occupation = cb.codes("occupation");
  std::vector<int> income;
  for (int k : cb.codes("income")) {
    if (k >= 1) income.push_back(k);
  }
  const auto regions = region_list(country);

  SurveySample s;
  const std::string prefix = std::string(country_code(country)) + std::to_string(wave);
  s.sample_id = "wvs" + std::to_string(wave) + "_" + std::string(country_code(country));
  s.country = country;
  s.schema = Schema::wvs;

  std::vector<double> traits;
  for (std::size_t i = 0; i < n; ++i) {
    DemographicProfile p;
    p.respondent_id = padded_id(prefix.c_str(), i);
    p.age = std::clamp(static_cast<int>(std::lround(45 + age_shift + 15 * rng.normal())), 18, 90);
    p.gender = rng.uniform() < 0.5 ? Gender::male : Gender::female;
    p.region = rng.pick(regions);
    p.education = rng.pick(education);
    p.marital_status = rng.pick(marital);
    p.occupation = rng.pick(occupation);
    p.income = rng.pick(income);
    // A few exports lack income; such respondents stay in the roster.
    if (rng.uniform() < 0.01) p.income.reset();
    traits.push_back(latent(p, drift, rng));
    s.roster.push_back(std::move(p));
  }

  std::size_t qi = 0;
  for (const auto& q : catalog) {
    const bool asked = wave == 6 ? q.in_wave6 : q.in_wave7;
    ++qi;
    if (!asked) continue;
    const double loading = (qi % 3 == 0 ? -0.8 : 0.9) * (qi % 5 == 0 ? 0.4 : 1.0);
    const double mid = (q.scale_min + q.scale_max) / 2.0;
    const double spread = (q.scale_max - q.scale_min) / 4.0;
    ResponseVector v;
    v.question_id = q.question_id;
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.uniform() < 0.02) {
        v.values.emplace_back(std::nullopt);
        continue;
      }
      double x;
      if (q.answer_kind == AnswerKind::multiple_choice) {
        x = rng.uniform() < 0.5 ? 1 : rng.integer(q.scale_min, q.scale_max);
      } else {
        x = std::lround(mid + spread * (loading * traits[i] + 0.7 * rng.normal()));
      }
      v.values.emplace_back(std::clamp(x, static_cast<double>(q.scale_min), static_cast<double>(q.scale_max)));
    }
    s.question_order.push_back(q.question_id);
    s.responses.emplace(q.question_id, std::move(v));
  }
  return s;
}

}  // namespace

WvsFixture make_wvs_fixture(Country country, std::size_t n_current, std::size_t n_historical, std::uint64_t seed,
                            const std::vector<QuestionSpec>& catalog) {
  WvsFixture f;
  f.current = make_wave(country, n_current, seed * 2 + 1, catalog, 7, -2.0, 0.2);
  f.historical = make_wave(country, n_historical, seed * 2 + 2, catalog, 6, 1.0, 0.0);
  return f;
}

SurveySample make_anes_fixture(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const Codebook& cb = anes_codebook();
  const auto education = cb.codes("education");
  const auto marital = cb.codes("marital_status");
  const auto occupation = cb.codes("occupation");
  const auto income = cb.codes("income_cat");
  const auto ethnicity = cb.codes("ethnicity");
  const auto religion = cb.codes("religion");
  const auto attention = cb.codes("political_attention");
  const auto states = region_list(Country::US);

  SurveySample s;
  s.sample_id = "anes_fixture";
  s.country = Country::US;
  s.schema = Schema::anes;
  for (std::size_t i = 0; i < n; ++i) {
    DemographicProfile p;
    p.respondent_id = padded_id("AN", i);
    p.age = rng.integer(18, 90);
    p.gender = rng.uniform() < 0.5 ? Gender::male : Gender::female;
    p.region = i < states.size() ? states[i] : rng.pick(states);
    p.education = rng.pick(education);
    p.marital_status = rng.pick(marital);
    p.occupation = rng.pick(occupation);
    p.income = rng.pick(income);
    p.ethnicity = rng.pick(ethnicity);
    p.religion = rng.pick(religion);
    p.political_attention = rng.pick(attention);
    p.sampling_weight = std::round((0.5 + 1.5 * rng.uniform()) * 10000.0) / 10000.0;
    s.roster.push_back(std::move(p));
  }
  return s;
}

}  // namespace vpoll
