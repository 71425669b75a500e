#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "vpoll/calibration.hpp"
#include "vpoll/error.hpp"
#include "vpoll/eval_stats.hpp"

using namespace vpoll;

namespace {

ResponseVector rv(std::vector<std::optional<double>> xs) { return {"q", std::move(xs)}; }

ResponseVector normal_vector(std::mt19937_64& rng, std::size_t n, double mu, double sd) {
  std::normal_distribution<double> d(mu, sd);
  ResponseVector v{"q", {}};
  for (std::size_t i = 0; i < n; ++i) v.values.emplace_back(d(rng));
  return v;
}

ResponseVector plus_noise(std::mt19937_64& rng, const ResponseVector& base, double mu, double sd) {
  std::normal_distribution<double> d(mu, sd);
  ResponseVector v = base;
  for (auto& x : v.values) *x += d(rng);
  return v;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("mean and SD examples") {
  const auto a = mean_sd(rv({2, 2, 2}));
  CHECK(a.mean == 2);
  CHECK(a.sd == 0);
  CHECK(a.n_used == 3);
  const auto b = mean_sd(rv({1, std::nullopt, 3}));
  CHECK(b.mean == 2);
  CHECK(b.sd == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(b.n_used == 2);
  CHECK(mean_sd(rv({7})).sd == 0);
  CHECK(code_of([] { mean_sd(rv({std::nullopt})); }) == Errc::AllMissing);
}

TEST_CASE("mean and SD match a two-pass reference") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> lik(1, 10);
  ResponseVector v{"q", {}};
  for (int i = 0; i < 1000; ++i) v.values.emplace_back(lik(rng));
  long double sum = 0;
  for (const auto& x : v.values) sum += *x;
  const long double mean = sum / 1000;
  long double ss = 0;
  for (const auto& x : v.values) ss += (*x - mean) * (*x - mean);
  const auto got = mean_sd(v);
  CHECK(std::abs(got.mean - static_cast<double>(mean)) < 1e-12);
  CHECK(std::abs(got.sd - static_cast<double>(std::sqrt(ss / 999))) < 1e-12);
}

TEST_CASE("MAD modes") {
  const auto h = rv({1, 2, 3, 4});
  CHECK(mad(h, h).value == 0);
  CHECK(mad(h, h, MadMode::per_respondent).value == 0);
  CHECK(mad(rv({3, 3}), rv({1, 5})).value == 0);
  CHECK(mad(rv({3, 3}), rv({1, 5}), MadMode::per_respondent).value == 2);

  const auto r = mad(rv({1.4, 1.564}), rv({0.8, 0.946}));
  CHECK(r.value == doctest::Approx(1.482 - 0.873).epsilon(1e-12));
  CHECK(r.signed_gap > 0);
  CHECK(mad(rv({0.8, 0.946}), rv({1.4, 1.564})).signed_gap == doctest::Approx(-0.609).epsilon(1e-12));

  // only jointly present rows count
  const auto j = mad(rv({5, std::nullopt, 1}), rv({1, 9, std::nullopt}));
  CHECK(j.n_used == 1);
  CHECK(j.value == 4);
  CHECK(code_of([] { mad(rv({1}), rv({1, 2})); }) == Errc::LengthMismatch);
  CHECK(code_of([] { mad(rv({1, std::nullopt}), rv({std::nullopt, 2})); }) == Errc::AllMissing);
}

TEST_CASE("mean-gap MAD is convex along the combination weight") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto hist = normal_vector(rng, 20, 3, 1);
    const auto llm = normal_vector(rng, 20, 2, 1);
    const auto human = normal_vector(rng, 20, 2.5, 1);
    std::uniform_real_distribution<double> u(0, 1);
    double a = u(rng), b = u(rng);
    auto f = [&](double h) { return mad(combine_responses(h, hist, llm), human).value; };
    CHECK(f((a + b) / 2) <= (f(a) + f(b)) / 2 + 1e-12);
  }
}

TEST_CASE("bootstrap p-values") {
  std::mt19937_64 rng(21);
  const auto human = normal_vector(rng, 200, 3, 1);
  const auto same = plus_noise(rng, human, 0.2, 0.5);
  CHECK(mad_significance(same, same, human, {2000, 1}) == 1.0);

  const auto far = plus_noise(rng, human, 0.6, 1.0);
  const auto exact = plus_noise(rng, human, 0.0, 1.0);
  CHECK(mad_significance(far, exact, human, {2000, 1}) < 0.01);
  CHECK(mad_significance(far, exact, human, {2000, 2}) < 0.01);
  // reversed roles: negative point estimate, same evidence
  CHECK(mad_significance(exact, far, human, {2000, 1}) < 0.01);

  CHECK(mad_significance(far, exact, human, {1000, 5}) == mad_significance(far, exact, human, {1000, 5}));
}

TEST_CASE("bootstrap p is stable in the number of replicates") {
  std::mt19937_64 rng(8);
  const auto human = normal_vector(rng, 200, 3, 1);
  const auto a = plus_noise(rng, human, 0.17, 1.0);
  const auto b = plus_noise(rng, human, 0.0, 1.0);
  const double small = mad_significance(a, b, human, {1000, 3});
  const double large = mad_significance(a, b, human, {100000, 4});
  CHECK(std::abs(small - large) < 0.02);
}

TEST_CASE("significance stars") {
  CHECK(significance_stars(0.005) == "***");
  CHECK(significance_stars(0.03) == "**");
  CHECK(significance_stars(0.07) == "*");
  CHECK(significance_stars(0.2) == "ns");
  CHECK(significance_stars(0.01) == "**");
}

TEST_CASE("Welch test") {
  const auto same = cross_sample_diff(rv({1, 2, 3, 4}), rv({4, 3, 2, 1}));
  CHECK(same.diff == 0);
  CHECK(same.p_value == doctest::Approx(1.0));
  const auto sep = cross_sample_diff(rv({5, 5, 5, 5}), rv({1, 1, 1, 1}));
  CHECK(sep.diff == 4);
  CHECK(sep.p_value < 1e-12);
  CHECK(cross_sample_diff(rv({2, 2}), rv({2, 2})).p_value == 1.0);
  CHECK(code_of([] { cross_sample_diff(rv({1}), rv({1, 2})); }) == Errc::InsufficientData);
}

TEST_CASE("Welch statistic matches the textbook formula") {
  std::mt19937_64 rng(50);
  for (int t = 0; t < 10; ++t) {
    const auto a = normal_vector(rng, 50, 3.0, 1.0);
    const auto b = normal_vector(rng, 50, 2.7, 1.6);
    auto moments = [](const ResponseVector& v) {
      double s = 0;
      for (const auto& x : v.values) s += *x;
      const double m = s / v.size();
      double ss = 0;
      for (const auto& x : v.values) ss += (*x - m) * (*x - m);
      return std::pair{m, ss / (v.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double sa = va / 50, sb = vb / 50;
    const double t_ref = (ma - mb) / std::sqrt(sa + sb);
    const double df_ref = (sa + sb) * (sa + sb) / (sa * sa / 49 + sb * sb / 49);
    const auto w = cross_sample_diff(a, b);
    CHECK(std::abs(w.t - t_ref) < 1e-10);
    CHECK(std::abs(w.df - df_ref) < 1e-10);
    CHECK(w.p_value > 0);
    CHECK(w.p_value <= 1);
    CHECK(cross_sample_diff(b, a).p_value == doctest::Approx(w.p_value).epsilon(1e-12));
  }
  // large df: close to the normal two-sided tail at |t| = 1.96
  std::vector<std::optional<double>> xs, ys;
  for (int i = 0; i < 20000; ++i) {
    xs.emplace_back(i % 2 ? 1.0 : -1.0);
    ys.emplace_back(i % 2 ? 1.0 : -1.0);
  }
  const double shift = 1.96 * std::sqrt(2.0 * 20000.0 / 19999.0 / 20000.0);
  for (auto& x : xs) *x += shift;
  CHECK(cross_sample_diff(rv(xs), rv(ys)).p_value == doctest::Approx(0.05).epsilon(0.01));
}

TEST_CASE("Pearson correlation") {
  CHECK(pairwise_correlation(rv({1, 2, 3, 5}), rv({1, 2, 3, 5})).r == doctest::Approx(1.0));
  CHECK(pairwise_correlation(rv({1, 2, 3}), rv({3, 2, 1})).r == doctest::Approx(-1.0));
  CHECK(pairwise_correlation(rv({1, 2, 3}), rv({3, 2, 1})).p_value == 0.0);
  CHECK(code_of([] { pairwise_correlation(rv({1, 1, 1}), rv({1, 2, 3})); }) == Errc::ZeroVariance);
  CHECK(code_of([] { pairwise_correlation(rv({1, 2, std::nullopt}), rv({1, 2, 3})); }) == Errc::InsufficientData);

  std::mt19937_64 rng(100);
  const auto a = normal_vector(rng, 100, 0, 1);
  const auto b = plus_noise(rng, a, 0, 2);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    ma += *a.values[i];
    mb += *b.values[i];
  }
  ma /= 100;
  mb /= 100;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    sab += (*a.values[i] - ma) * (*b.values[i] - mb);
    saa += (*a.values[i] - ma) * (*a.values[i] - ma);
    sbb += (*b.values[i] - mb) * (*b.values[i] - mb);
  }
  const auto c = pairwise_correlation(a, b);
  CHECK(std::abs(c.r - sab / std::sqrt(saa * sbb)) < 1e-12);
  CHECK(c.n_used == 100);
  CHECK(c.p_value < 0.05);

  // permuting rows together leaves r unchanged
  std::vector<std::size_t> perm(100);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  ResponseVector pa = a, pb = b;
  for (std::size_t i = 0; i < 100; ++i) {
    pa.values[i] = a.values[perm[i]];
    pb.values[i] = b.values[perm[i]];
  }
  CHECK(pairwise_correlation(pa, pb).r == doctest::Approx(c.r).epsilon(1e-12));
}

TEST_CASE("agreement classes") {
  using C = Correlation;
  CHECK(agreement_class(C{0.3, 0.01}, C{0.4, 0.02}) == AgreementClass::complete_agreement);
  CHECK(agreement_class(C{0.3, 0.01}, C{0.1, 0.20}) == AgreementClass::partial_disagreement);
  CHECK(agreement_class(C{0.3, 0.01}, C{-0.3, 0.01}) == AgreementClass::complete_disagreement);
  CHECK(agreement_class(C{0.3, 0.30}, C{-0.3, 0.41}) == AgreementClass::both_insignificant);
  CHECK(agreement_class(C{0.3, 0.05}, C{0.3, 0.01}) == AgreementClass::partial_disagreement);
  for (double r1 : {-0.5, 0.2}) {
    for (double r2 : {-0.3, 0.6}) {
      for (double p2 : {0.01, 0.3}) {
        const C h{r1, 0.01}, s{r2, p2};
        CHECK(agreement_class(h, s) == agreement_class(C{-r1, 0.01}, C{-r2, p2}));
      }
    }
  }
  CHECK_THROWS_AS(agreement_class(C{}, C{}, 1.0), Error);
}

TEST_CASE("agreement summary counts planted cells") {
  CHECK(agreement_summary({}) == AgreementSummary{});
  std::vector<AgreementCell> cells(51);
  for (auto& c : cells) c.cls = AgreementClass::complete_agreement;
  for (int i : {4, 17, 40}) cells[static_cast<std::size_t>(i)].cls = AgreementClass::partial_disagreement;
  const auto s = agreement_summary(cells);
  CHECK(s == AgreementSummary{48, 3, 0, 0, 51});
}

TEST_CASE("agreement grid over question pairs") {
  std::mt19937_64 rng(30);
  const auto base = normal_vector(rng, 150, 0, 1);
  const auto a = plus_noise(rng, base, 0, 0.5);
  const auto b = plus_noise(rng, base, 0, 0.5);
  const auto noise = normal_vector(rng, 150, 0, 1);
  ResponseVector flat{"q", std::vector<std::optional<double>>(150, 3.0)};
  // human: a~b strongly; synth: a~b reversed
  ResponseVector neg_b = b;
  for (auto& x : neg_b.values) *x = -*x;
  const auto grid = agreement_grid({a, b, noise, flat}, {a, neg_b, noise, flat});
  CHECK(grid.cells.size() == 3);
  CHECK(grid.excluded.size() == 3);
  CHECK(grid.excluded[0].find("ZeroVariance") != std::string::npos);
  CHECK(grid.cells[0].cls == AgreementClass::complete_disagreement);
  const auto s = agreement_summary(grid.cells);
  CHECK(s.total == 3);
}
