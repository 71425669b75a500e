#include "vpoll/eval_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "vpoll/error.hpp"

namespace vpoll {

namespace {

std::vector<double> present(const ResponseVector& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v.values) {
    if (x) out.push_back(*x);
  }
  return out;
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Two-pass sample variance.
double var_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

void require_same_length(const ResponseVector& a, const ResponseVector& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch, a.question_id + "/" + b.question_id + ": " + std::to_string(a.size()) +
                                          " vs " + std::to_string(b.size()) + " rows");
  }
}

double two_sided_t_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
}

double mad_on_rows(const std::vector<double>& s, const std::vector<double>& h, const std::vector<std::size_t>& rows,
                   MadMode mode) {
  const double n = static_cast<double>(rows.size());
  if (mode == MadMode::per_respondent) {
    double acc = 0;
    for (std::size_t i : rows) acc += std::abs(s[i] - h[i]);
    return acc / n;
  }
  double ms = 0, mh = 0;
  for (std::size_t i : rows) {
    ms += s[i];
    mh += h[i];
  }
  return std::abs(ms / n - mh / n);
}

}  // namespace

MeanSd mean_sd(const ResponseVector& v) {
  const auto xs = present(v);
  if (xs.empty()) throw Error(Errc::AllMissing, v.question_id + ": every value is missing");
  MeanSd out;
  out.n_used = xs.size();
  out.mean = mean_of(xs);
  out.sd = std::sqrt(var_of(xs, out.mean));
  return out;
}

std::string_view to_string(MadMode m) noexcept { return m == MadMode::mean_gap ? "mean_gap" : "per_respondent"; }

MadMode parse_mad_mode(std::string_view s) {
  if (s == "mean_gap") return MadMode::mean_gap;
  if (s == "per_respondent") return MadMode::per_respondent;
  throw Error(Errc::InvalidConfig, "unknown MAD mode '" + std::string(s) + "'");
}

MadResult mad(const ResponseVector& synth, const ResponseVector& human, MadMode mode) {
  require_same_length(synth, human);
  double ss = 0, sh = 0, sabs = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < synth.size(); ++i) {
    if (!synth.values[i] || !human.values[i]) continue;
    ss += *synth.values[i];
    sh += *human.values[i];
    sabs += std::abs(*synth.values[i] - *human.values[i]);
    ++n;
  }
  if (n == 0) throw Error(Errc::AllMissing, synth.question_id + ": no row present in both vectors");
  MadResult out;
  out.n_used = n;
  out.signed_gap = ss / static_cast<double>(n) - sh / static_cast<double>(n);
  out.value = mode == MadMode::mean_gap ? std::abs(out.signed_gap) : sabs / static_cast<double>(n);
  return out;
}

double mad_significance(const ResponseVector& synth_a, const ResponseVector& synth_b, const ResponseVector& human,
                        const BootstrapOptions& options) {
  require_same_length(synth_a, human);
  require_same_length(synth_b, human);
  if (options.replicates < 1) throw Error(Errc::InvalidConfig, "bootstrap needs at least one replicate");
  std::vector<double> a, b, h;
  for (std::size_t i = 0; i < human.size(); ++i) {
    if (!synth_a.values[i] || !synth_b.values[i] || !human.values[i]) continue;
    a.push_back(*synth_a.values[i]);
    b.push_back(*synth_b.values[i]);
    h.push_back(*human.values[i]);
  }
  if (h.empty()) throw Error(Errc::AllMissing, human.question_id + ": no row present in all three vectors");

  const std::size_t n = h.size();
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  const double point = mad_on_rows(a, h, rows, options.mode) - mad_on_rows(b, h, rows, options.mode);

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  long against = 0;
  for (int rep = 0; rep < options.replicates; ++rep) {
    for (auto& r : rows) r = pick(rng);
    const double stat = mad_on_rows(a, h, rows, options.mode) - mad_on_rows(b, h, rows, options.mode);
    if (point > 0 ? stat <= 0 : point < 0 ? stat >= 0 : true) ++against;
  }
  return std::min(1.0, 2.0 * static_cast<double>(against) / options.replicates);
}

std::string_view significance_stars(double p) noexcept {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "ns";
}

WelchResult cross_sample_diff(const ResponseVector& a, const ResponseVector& b) {
  const auto xa = present(a);
  const auto xb = present(b);
  if (xa.size() < 2 || xb.size() < 2) {
    throw Error(Errc::InsufficientData, a.question_id + ": Welch test needs two values per sample");
  }
  const double ma = mean_of(xa), mb = mean_of(xb);
  const double va = var_of(xa, ma) / static_cast<double>(xa.size());
  const double vb = var_of(xb, mb) / static_cast<double>(xb.size());
  WelchResult out;
  out.diff = ma - mb;
  const double se2 = va + vb;
  if (se2 == 0) {
    out.t = out.diff == 0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), out.diff);
    out.df = static_cast<double>(xa.size() + xb.size() - 2);
    out.p_value = out.diff == 0 ? 1.0 : 0.0;
    return out;
  }
  out.t = out.diff / std::sqrt(se2);
  out.df = se2 * se2 /
           (va * va / static_cast<double>(xa.size() - 1) + vb * vb / static_cast<double>(xb.size() - 1));
  out.p_value = two_sided_t_p(out.t, out.df);
  return out;
}

Correlation pairwise_correlation(const ResponseVector& a, const ResponseVector& b) {
  require_same_length(a, b);
  std::vector<double> xa, xb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.values[i] && b.values[i]) {
      xa.push_back(*a.values[i]);
      xb.push_back(*b.values[i]);
    }
  }
  if (xa.size() < 3) {
    throw Error(Errc::InsufficientData, a.question_id + "/" + b.question_id + ": fewer than 3 joint rows");
  }
  const double ma = mean_of(xa), mb = mean_of(xb);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < xa.size(); ++i) {
    sab += (xa[i] - ma) * (xb[i] - mb);
    saa += (xa[i] - ma) * (xa[i] - ma);
    sbb += (xb[i] - mb) * (xb[i] - mb);
  }
  if (saa == 0 || sbb == 0) {
    throw Error(Errc::ZeroVariance, a.question_id + "/" + b.question_id + ": a column has no variation");
  }
  Correlation out;
  out.n_used = xa.size();
  out.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  const double df = static_cast<double>(xa.size() - 2);
  const double denom = 1.0 - out.r * out.r;
  out.p_value = denom <= 0 ? 0.0 : two_sided_t_p(out.r * std::sqrt(df / denom), df);
  return out;
}

std::string_view to_string(AgreementClass c) noexcept {
  switch (c) {
    case AgreementClass::complete_agreement: return "complete_agreement";
    case AgreementClass::partial_disagreement: return "partial_disagreement";
    case AgreementClass::complete_disagreement: return "complete_disagreement";
    case AgreementClass::both_insignificant: return "both_insignificant";
  }
  return "?";
}

AgreementClass agreement_class(const Correlation& human, const Correlation& synth, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw Error(Errc::InvalidConfig, "alpha must lie in (0, 1)");
  const bool sig_h = human.p_value < alpha;
  const bool sig_s = synth.p_value < alpha;
  if (sig_h && sig_s) {
    const bool same = (human.r > 0) == (synth.r > 0);
    return same ? AgreementClass::complete_agreement : AgreementClass::complete_disagreement;
  }
  if (sig_h || sig_s) return AgreementClass::partial_disagreement;
  return AgreementClass::both_insignificant;
}

AgreementSummary agreement_summary(const std::vector<AgreementCell>& cells) {
  AgreementSummary s;
  for (const auto& c : cells) {
    switch (c.cls) {
      case AgreementClass::complete_agreement: ++s.complete_agreement; break;
      case AgreementClass::partial_disagreement: ++s.partial_disagreement; break;
      case AgreementClass::complete_disagreement: ++s.complete_disagreement; break;
      case AgreementClass::both_insignificant: ++s.both_insignificant; break;
    }
    ++s.total;
  }
  return s;
}

AgreementGrid agreement_grid(const std::vector<ResponseVector>& human, const std::vector<ResponseVector>& synth,
                             double alpha) {
  if (human.size() != synth.size()) throw Error(Errc::LengthMismatch, "human and synthetic question lists differ");
  AgreementGrid grid;
  for (std::size_t i = 0; i < human.size(); ++i) {
    for (std::size_t j = i + 1; j < human.size(); ++j) {
      AgreementCell cell;
      cell.question_a = human[i].question_id;
      cell.question_b = human[j].question_id;
      try {
        cell.human = pairwise_correlation(human[i], human[j]);
        cell.synth = pairwise_correlation(synth[i], synth[j]);
      } catch (const Error& e) {
        grid.excluded.push_back(cell.question_a + "|" + cell.question_b + ": " + std::string(errc_name(e.code())));
        continue;
      }
      cell.cls = agreement_class(cell.human, cell.synth, alpha);
      grid.cells.push_back(std::move(cell));
    }
  }
  return grid;
}

}  // namespace vpoll
