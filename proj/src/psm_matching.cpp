#include "vpoll/psm_matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include <Eigen/Dense>

#include "vpoll/error.hpp"

namespace vpoll {

std::vector<std::string> CovariateEncoding::column_names() const {
  std::vector<std::string> names;
  if (use_age) names.emplace_back("age");
  if (use_gender) names.emplace_back("female");
  if (use_education) names.emplace_back("education");
  if (use_income) names.emplace_back("income");
  for (int m : marital_levels) names.push_back("marital_" + std::to_string(m));
  for (int o : occupation_levels) names.push_back("occupation_" + std::to_string(o));
  return names;
}

std::vector<double> CovariateEncoding::encode(const DemographicProfile& p) const {
  if (!p.has_matching_covariates()) {
    throw Error(Errc::InvalidConfig, "respondent " + p.respondent_id + " lacks matching covariates");
  }
  std::vector<double> v;
  if (use_age) v.push_back((*p.age - age_mean) / age_sd);
  if (use_gender) v.push_back(*p.gender == Gender::female ? 1.0 : 0.0);
  if (use_education) v.push_back((*p.education - education_mean) / education_sd);
  if (use_income) v.push_back((*p.income - income_mean) / income_sd);
  for (int m : marital_levels) v.push_back(*p.marital_status == m ? 1.0 : 0.0);
  for (int o : occupation_levels) v.push_back(*p.occupation == o ? 1.0 : 0.0);
  return v;
}

namespace {

struct MomentPair {
  double mean = 0;
  double sd = 0;
};

MomentPair moments(const std::vector<double>& xs) {
  MomentPair m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
  return m;
}

std::vector<int> non_reference_levels(const std::vector<const DemographicProfile*>& pooled,
                                      std::optional<int> DemographicProfile::*field) {
  std::set<int> levels;
  for (const auto* p : pooled) levels.insert(*(p->*field));
  std::vector<int> out(levels.begin(), levels.end());
  if (!out.empty()) out.erase(out.begin());
  return out;
}

}  // namespace

CovariateEncoding fit_encoding(const std::vector<const DemographicProfile*>& pooled) {
  CovariateEncoding enc;
  std::vector<double> age, edu, inc;
  std::set<Gender> genders;
  for (const auto* p : pooled) {
    age.push_back(*p->age);
    edu.push_back(*p->education);
    inc.push_back(*p->income);
    genders.insert(*p->gender);
  }
  auto standardize = [&](const std::vector<double>& xs, bool& use, double& mean, double& sd, const char* name) {
    const auto m = moments(xs);
    mean = m.mean;
    sd = m.sd;
    if (!(m.sd > 0)) {
      use = false;
      sd = 1;
      enc.dropped.emplace_back(name);
    }
  };
  standardize(age, enc.use_age, enc.age_mean, enc.age_sd, "age");
  standardize(edu, enc.use_education, enc.education_mean, enc.education_sd, "education");
  standardize(inc, enc.use_income, enc.income_mean, enc.income_sd, "income");
  if (genders.size() < 2) {
    enc.use_gender = false;
    enc.dropped.emplace_back("gender");
  }
  enc.marital_levels = non_reference_levels(pooled, &DemographicProfile::marital_status);
  if (enc.marital_levels.empty()) enc.dropped.emplace_back("marital_status");
  enc.occupation_levels = non_reference_levels(pooled, &DemographicProfile::occupation);
  if (enc.occupation_levels.empty()) enc.dropped.emplace_back("occupation");
  return enc;
}

DesignMatrix build_design(const std::vector<const DemographicProfile*>& current,
                          const std::vector<const DemographicProfile*>& historical, const CovariateEncoding& encoding) {
  DesignMatrix d;
  d.cols = 1 + encoding.column_names().size();
  d.rows = current.size() + historical.size();
  d.x.reserve(d.rows * d.cols);
  auto push = [&](const DemographicProfile* p, double y) {
    d.x.push_back(1.0);
    for (double v : encoding.encode(*p)) d.x.push_back(v);
    d.y.push_back(y);
  };
  for (const auto* p : current) push(p, 1.0);
  for (const auto* p : historical) push(p, 0.0);
  return d;
}

namespace {

// log(1 + exp(eta)) without overflow.
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double penalized_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta,
                        double ridge) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - softplus(eta[i]);
  return ll - 0.5 * ridge * beta.squaredNorm();
}

}  // namespace

PropensityModel fit_logistic(const DesignMatrix& design, const PsmOptions& options) {
  if (design.rows < design.cols) {
    throw Error(Errc::InsufficientData, "need at least " + std::to_string(design.cols) + " rows, have " +
                                            std::to_string(design.rows));
  }
  const auto n = static_cast<Eigen::Index>(design.rows);
  const auto k = static_cast<Eigen::Index>(design.cols);
  Eigen::MatrixXd X(n, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) X(r, c) = design.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  }
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(design.y.data(), n);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = penalized_loglik(X, y, beta, options.ridge);
  PropensityModel model;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = logistic(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd grad = X.transpose() * (y - p) - options.ridge * beta;
    Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    info.diagonal().array() += options.ridge;
    const Eigen::VectorXd step = info.ldlt().solve(grad);

    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double ll_new = penalized_loglik(X, y, candidate, options.ridge);
    for (int halving = 0; halving < 30 && ll_new < ll; ++halving) {
      scale *= 0.5;
      candidate = beta + scale * step;
      ll_new = penalized_loglik(X, y, candidate, options.ridge);
    }
    const double change = std::abs(ll_new - ll);
    if (ll_new >= ll) {
      beta = candidate;
      ll = ll_new;
    }
    model.iterations = iter;
    if (change < options.tolerance) {
      model.converged = true;
      break;
    }
  }
  if (!model.converged) {
    throw Error(Errc::NonConvergence, "logistic fit did not converge in " + std::to_string(options.max_iterations) +
                                          " iterations");
  }
  if (!beta.allFinite()) throw Error(Errc::NonConvergence, "non-finite coefficients");
  model.coefficients.assign(beta.data(), beta.data() + beta.size());
  model.log_likelihood = ll;
  return model;
}

PropensityModel fit_propensity(const SurveySample& current, const SurveySample& historical,
                               const PsmOptions& options) {
  std::vector<const DemographicProfile*> cur, hist, pooled;
  std::vector<std::string> excluded_cur, excluded_hist;
  for (const auto& p : current.roster) {
    if (p.has_matching_covariates()) cur.push_back(&p);
    else excluded_cur.push_back(p.respondent_id);
  }
  for (const auto& p : historical.roster) {
    if (p.has_matching_covariates()) hist.push_back(&p);
    else excluded_hist.push_back(p.respondent_id);
  }
  if (cur.empty() || hist.empty()) throw Error(Errc::EmptyPool, "both samples need complete-covariate respondents");
  pooled = cur;
  pooled.insert(pooled.end(), hist.begin(), hist.end());

  const CovariateEncoding enc = fit_encoding(pooled);
  const DesignMatrix design = build_design(cur, hist, enc);
  PropensityModel model = fit_logistic(design, options);
  model.encoding = enc;
  model.names = {"intercept"};
  for (auto& n : enc.column_names()) model.names.push_back(std::move(n));
  for (const auto& d : enc.dropped) model.warnings.push_back("dropped constant covariate " + d);
  if (!excluded_cur.empty() || !excluded_hist.empty()) {
    model.warnings.push_back("excluded " + std::to_string(excluded_cur.size() + excluded_hist.size()) +
                             " respondents with missing covariates");
  }
  model.excluded_current = std::move(excluded_cur);
  model.excluded_historical = std::move(excluded_hist);
  return model;
}

double propensity_score(const PropensityModel& model, const DemographicProfile& profile) {
  const auto x = model.encoding.encode(profile);
  double eta = model.coefficients.at(0);
  for (std::size_t i = 0; i < x.size(); ++i) eta += model.coefficients.at(i + 1) * x[i];
  const double p = logistic(eta);
  constexpr double lo = std::numeric_limits<double>::min();
  return std::clamp(p, lo, std::nextafter(1.0, 0.0));
}

std::vector<ScoredRespondent> score_sample(const PropensityModel& model, const SurveySample& sample) {
  std::vector<ScoredRespondent> out;
  for (const auto& p : sample.roster) {
    if (p.has_matching_covariates()) out.push_back({p.respondent_id, propensity_score(model, p)});
  }
  return out;
}

std::string_view to_string(MatchPolicy p) noexcept {
  return p == MatchPolicy::with_replacement ? "with_replacement" : "without_replacement";
}

MatchPolicy parse_match_policy(std::string_view s) {
  if (s == "with_replacement") return MatchPolicy::with_replacement;
  if (s == "without_replacement") return MatchPolicy::without_replacement;
  throw Error(Errc::InvalidConfig, "unknown match policy '" + std::string(s) + "'");
}

const MatchedPair* MatchedPairSet::find(std::string_view current_id) const {
  for (const auto& p : pairs) {
    if (p.current_id == current_id) return &p;
  }
  return nullptr;
}

namespace {

struct PoolEntry {
  double score;
  std::string id;
  bool operator<(const PoolEntry& o) const { return score != o.score ? score < o.score : id < o.id; }
};

/// Nearest entry to s in a sorted container; ties to smallest id. Scans
/// outward while the gap can still tie, so rounding never changes the winner.
template <typename It>
It nearest(It begin, It end, double s) {
  It best = end;
  double best_gap = std::numeric_limits<double>::infinity();
  auto consider = [&](It it) {
    const double gap = std::abs(s - it->score);
    if (gap < best_gap || (gap == best_gap && it->id < best->id)) {
      best = it;
      best_gap = gap;
    }
  };
  It mid = std::lower_bound(begin, end, PoolEntry{s, std::string{}},
                            [](const PoolEntry& a, const PoolEntry& b) { return a < b; });
  for (It it = mid; it != end; ++it) {
    if (std::abs(s - it->score) > best_gap) break;
    consider(it);
  }
  for (It it = mid; it != begin;) {
    --it;
    if (std::abs(s - it->score) > best_gap) break;
    consider(it);
  }
  return best;
}

double pooled_sd(const std::vector<ScoredRespondent>& a, const std::vector<ScoredRespondent>& b) {
  std::vector<double> xs;
  for (const auto& r : a) xs.push_back(r.score);
  for (const auto& r : b) xs.push_back(r.score);
  return moments(xs).sd;
}

}  // namespace

MatchedPairSet match_nearest(const std::vector<ScoredRespondent>& current,
                             const std::vector<ScoredRespondent>& historical, const MatchOptions& options) {
  if (current.empty() || historical.empty()) throw Error(Errc::EmptyPool, "matching needs two non-empty score lists");
  const double max_gap = options.caliper_sd ? *options.caliper_sd * pooled_sd(current, historical)
                                            : std::numeric_limits<double>::infinity();

  std::vector<std::optional<MatchedPair>> slot(current.size());
  if (options.policy == MatchPolicy::with_replacement) {
    std::vector<PoolEntry> pool;
    pool.reserve(historical.size());
    for (const auto& h : historical) pool.push_back({h.score, h.respondent_id});
    std::sort(pool.begin(), pool.end());
    for (std::size_t i = 0; i < current.size(); ++i) {
      const auto& c = current[i];
      auto it = nearest(pool.cbegin(), pool.cend(), c.score);
      const double gap = std::abs(c.score - it->score);
      if (gap <= max_gap) slot[i] = MatchedPair{c.respondent_id, it->id, c.score, it->score, gap};
    }
  } else {
    std::set<PoolEntry> pool;
    for (const auto& h : historical) pool.insert({h.score, h.respondent_id});
    std::vector<std::size_t> order(current.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (current[a].score != current[b].score) return current[a].score > current[b].score;
      return current[a].respondent_id < current[b].respondent_id;
    });
    for (std::size_t i : order) {
      if (pool.empty()) break;
      const auto& c = current[i];
      auto it = nearest(pool.begin(), pool.end(), c.score);
      const double gap = std::abs(c.score - it->score);
      if (gap > max_gap) continue;
      slot[i] = MatchedPair{c.respondent_id, it->id, c.score, it->score, gap};
      pool.erase(it);
    }
  }

  MatchedPairSet out;
  for (std::size_t i = 0; i < current.size(); ++i) {
    if (slot[i]) out.pairs.push_back(std::move(*slot[i]));
    else out.unmatched.push_back(current[i].respondent_id);
  }
  return out;
}

std::vector<BalanceRow> balance_report(const PropensityModel& model, const SurveySample& current,
                                       const SurveySample& historical, const MatchedPairSet& matches) {
  const auto names = model.encoding.column_names();
  std::unordered_map<std::string, const DemographicProfile*> hist_by_id;
  for (const auto& p : historical.roster) hist_by_id[p.respondent_id] = &p;

  std::vector<std::vector<double>> cur_cols(names.size()), hist_cols(names.size()), matched_cols(names.size());
  auto add = [&](std::vector<std::vector<double>>& cols, const DemographicProfile& p) {
    const auto x = model.encoding.encode(p);
    for (std::size_t j = 0; j < x.size(); ++j) cols[j].push_back(x[j]);
  };
  for (const auto& p : current.roster) {
    if (p.has_matching_covariates()) add(cur_cols, p);
  }
  for (const auto& p : historical.roster) {
    if (p.has_matching_covariates()) add(hist_cols, p);
  }
  for (const auto& m : matches.pairs) add(matched_cols, *hist_by_id.at(m.historical_id));

  auto smd = [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = moments(a);
    const auto mb = moments(b);
    const double denom = std::sqrt((ma.sd * ma.sd + mb.sd * mb.sd) / 2.0);
    return denom > 0 ? (ma.mean - mb.mean) / denom : 0.0;
  };
  std::vector<BalanceRow> rows;
  for (std::size_t j = 0; j < names.size(); ++j) {
    rows.push_back({names[j], smd(cur_cols[j], hist_cols[j]), smd(cur_cols[j], matched_cols[j])});
  }
  return rows;
}

ResponseVector matched_responses(const MatchedPairSet& matches, const SurveySample& current,
                                 const SurveySample& historical, std::string_view question_id) {
  const ResponseVector& src = response_vector(historical, question_id);
  std::unordered_map<std::string, std::size_t> hist_index;
  for (std::size_t i = 0; i < historical.roster.size(); ++i) hist_index[historical.roster[i].respondent_id] = i;
  std::unordered_map<std::string, const MatchedPair*> by_current;
  for (const auto& m : matches.pairs) by_current[m.current_id] = &m;

  ResponseVector out;
  out.question_id = std::string(question_id);
  out.values.reserve(current.n());
  for (const auto& p : current.roster) {
    auto it = by_current.find(p.respondent_id);
    if (it == by_current.end()) {
      out.values.emplace_back(std::nullopt);
      continue;
    }
    out.values.push_back(src.values.at(hist_index.at(it->second->historical_id)));
  }
  return out;
}

}  // namespace vpoll
