#include "vpoll/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vpoll/csv.hpp"
#include "vpoll/digest.hpp"
#include "vpoll/election_forecast.hpp"
#include "vpoll/error.hpp"

#ifndef VPOLL_DATA_DIR
#define VPOLL_DATA_DIR "data"
#endif

namespace vpoll {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Task t) noexcept {
  switch (t) {
    case Task::wvs_survey: return "wvs_survey";
    case Task::anes_election: return "anes_election";
    case Task::multiparty: return "multiparty";
  }
  return "?";
}

Task parse_task(std::string_view s) {
  if (s == "wvs_survey") return Task::wvs_survey;
  if (s == "anes_election") return Task::anes_election;
  if (s == "multiparty") return Task::multiparty;
  throw Error(Errc::InvalidConfig, "unknown task '" + std::string(s) + "'");
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::synthesize: return "synthesize";
    case Stage::match: return "match";
    case Stage::calibrate: return "calibrate";
    case Stage::evaluate: return "evaluate";
    case Stage::forecast: return "forecast";
    case Stage::report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (Stage st : {Stage::ingest, Stage::synthesize, Stage::match, Stage::calibrate, Stage::evaluate, Stage::forecast,
                   Stage::report}) {
    if (to_string(st) == s) return st;
  }
  throw Error(Errc::InvalidConfig, "unknown stage '" + std::string(s) + "'");
}

std::filesystem::path RunConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  if (path.is_absolute() || base_dir.empty()) return path;
  return base_dir / path;
}

std::filesystem::path RunConfig::data_path(const std::string& name) const {
  if (data_dir.empty()) return std::filesystem::path(VPOLL_DATA_DIR) / name;
  return resolve(data_dir) / name;
}

namespace {

std::string_view batch_name(BatchMode m) { return m == BatchMode::per_block ? "per_block" : "per_question"; }
std::string_view parse_mode_name(ParseMode m) { return m == ParseMode::strict ? "strict" : "first_in_range"; }

BatchMode parse_batch(const std::string& s) {
  if (s == "per_block") return BatchMode::per_block;
  if (s == "per_question") return BatchMode::per_question;
  throw Error(Errc::InvalidConfig, "unknown batch_mode '" + s + "'");
}

ParseMode parse_parse_mode(const std::string& s) {
  if (s == "first_in_range") return ParseMode::first_in_range;
  if (s == "strict") return ParseMode::strict;
  throw Error(Errc::InvalidConfig, "unknown parse_mode '" + s + "'");
}

void reject_unknown(const ojson& obj, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(Errc::InvalidConfig, where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read_opt(const ojson& obj, const char* key, T& out) {
  if (obj.contains(key) && !obj.at(key).is_null()) out = obj.at(key).get<T>();
}

ojson backend_json(const BackendConfig& b, bool for_digest) {
  ojson j;
  j["kind"] = to_string(b.kind);
  j["model"] = b.model_name;
  j["temperature"] = b.temperature;
  j["max_retries"] = b.max_retries;
  if (!for_digest) {
    j["parallelism"] = b.parallelism;
    j["cache_dir"] = b.cache_dir.string();
    j["retry_base_delay_ms"] = b.retry_base_delay_ms;
    j["request_timeout_s"] = b.request_timeout_s;
    j["api_url"] = b.api_url;
  }
  j["batch_mode"] = batch_name(b.batch_mode);
  j["parse_mode"] = parse_mode_name(b.parse_mode);
  j["resample_failures"] = b.resample_failures;
  return j;
}

ojson config_json(const RunConfig& c, bool for_digest) {
  ojson j;
  j["task"] = to_string(c.task);
  j["seed"] = c.seed;
  if (!for_digest) j["output_dir"] = c.output_dir;
  j["data_dir"] = c.data_dir;
  if (c.task == Task::wvs_survey) {
    j["catalog"] = c.catalog;
    ojson countries = ojson::array();
    for (const auto& ci : c.countries) {
      countries.push_back({{"country", to_string(ci.country)},
                           {"current_sample", ci.current_sample},
                           {"historical_sample", ci.historical_sample}});
    }
    j["countries"] = countries;
  } else if (c.task == Task::anes_election) {
    j["anes"] = {{"sample", c.anes_sample},
                 {"cycle", c.cycle},
                 {"ev_table", c.ev_table},
                 {"actual_winners", c.actual_winners},
                 {"historical_shares", c.historical_shares},
                 {"hist_last_only", c.hist_last_only}};
  } else {
    j["multiparty"] = {{"shares", c.multiparty_shares}, {"fit_years", c.fit_years}, {"forecast_year", c.forecast_year}};
  }
  j["backend"] = backend_json(c.backend, for_digest);
  ojson cal;
  cal["h"] = c.fixed_h ? ojson(*c.fixed_h) : ojson(nullptr);
  cal["normalize_unit_interval"] = c.normalize_unit_interval;
  j["calibration"] = cal;
  ojson m;
  m["policy"] = to_string(c.matching.policy);
  m["caliper_sd"] = c.matching.caliper_sd ? ojson(*c.matching.caliper_sd) : ojson(nullptr);
  j["matching"] = m;
  j["evaluation"] = {{"mad_mode", to_string(c.mad_mode)},
                     {"bootstrap_replicates", c.bootstrap_replicates},
                     {"alpha", c.alpha}};
  return j;
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  ojson j;
  try {
    j = ojson::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
  RunConfig c;
  c.base_dir = base_dir;
  try {
    reject_unknown(j,
                   {"task", "seed", "output_dir", "data_dir", "catalog", "countries", "anes", "multiparty", "backend",
                    "calibration", "matching", "evaluation"},
                   "config");
    if (!j.contains("task")) throw Error(Errc::InvalidConfig, "config needs a task");
    c.task = parse_task(j.at("task").get<std::string>());
    read_opt(j, "seed", c.seed);
    read_opt(j, "output_dir", c.output_dir);
    read_opt(j, "data_dir", c.data_dir);
    read_opt(j, "catalog", c.catalog);
    if (j.contains("countries")) {
      for (const auto& cj : j.at("countries")) {
        reject_unknown(cj, {"country", "current_sample", "historical_sample"}, "countries[]");
        CountryInput ci;
        ci.country = parse_country(cj.at("country").get<std::string>());
        ci.current_sample = cj.at("current_sample").get<std::string>();
        ci.historical_sample = cj.at("historical_sample").get<std::string>();
        c.countries.push_back(std::move(ci));
      }
    }
    if (j.contains("anes")) {
      const auto& a = j.at("anes");
      reject_unknown(a, {"sample", "cycle", "ev_table", "actual_winners", "historical_shares", "hist_last_only"},
                     "anes");
      read_opt(a, "sample", c.anes_sample);
      read_opt(a, "cycle", c.cycle);
      read_opt(a, "ev_table", c.ev_table);
      read_opt(a, "actual_winners", c.actual_winners);
      read_opt(a, "historical_shares", c.historical_shares);
      read_opt(a, "hist_last_only", c.hist_last_only);
    }
    if (j.contains("multiparty")) {
      const auto& m = j.at("multiparty");
      reject_unknown(m, {"shares", "fit_years", "forecast_year"}, "multiparty");
      read_opt(m, "shares", c.multiparty_shares);
      read_opt(m, "fit_years", c.fit_years);
      read_opt(m, "forecast_year", c.forecast_year);
    }
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      reject_unknown(b,
                     {"kind", "model", "temperature", "max_retries", "parallelism", "cache_dir", "batch_mode",
                      "parse_mode", "resample_failures", "retry_base_delay_ms", "request_timeout_s", "api_url"},
                     "backend");
      if (b.contains("kind")) c.backend.kind = parse_backend_kind(b.at("kind").get<std::string>());
      read_opt(b, "model", c.backend.model_name);
      read_opt(b, "temperature", c.backend.temperature);
      read_opt(b, "max_retries", c.backend.max_retries);
      read_opt(b, "parallelism", c.backend.parallelism);
      std::string cache;
      read_opt(b, "cache_dir", cache);
      if (!cache.empty()) c.backend.cache_dir = c.resolve(cache);
      if (b.contains("batch_mode")) c.backend.batch_mode = parse_batch(b.at("batch_mode").get<std::string>());
      if (b.contains("parse_mode")) c.backend.parse_mode = parse_parse_mode(b.at("parse_mode").get<std::string>());
      read_opt(b, "resample_failures", c.backend.resample_failures);
      read_opt(b, "retry_base_delay_ms", c.backend.retry_base_delay_ms);
      read_opt(b, "request_timeout_s", c.backend.request_timeout_s);
      read_opt(b, "api_url", c.backend.api_url);
    }
    if (j.contains("calibration")) {
      const auto& cal = j.at("calibration");
      reject_unknown(cal, {"h", "normalize_unit_interval"}, "calibration");
      if (cal.contains("h") && !cal.at("h").is_null()) c.fixed_h = cal.at("h").get<double>();
      read_opt(cal, "normalize_unit_interval", c.normalize_unit_interval);
    }
    if (j.contains("matching")) {
      const auto& m = j.at("matching");
      reject_unknown(m, {"policy", "caliper_sd"}, "matching");
      if (m.contains("policy")) c.matching.policy = parse_match_policy(m.at("policy").get<std::string>());
      if (m.contains("caliper_sd") && !m.at("caliper_sd").is_null()) {
        c.matching.caliper_sd = m.at("caliper_sd").get<double>();
      }
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      reject_unknown(e, {"mad_mode", "bootstrap_replicates", "alpha"}, "evaluation");
      if (e.contains("mad_mode")) c.mad_mode = parse_mad_mode(e.at("mad_mode").get<std::string>());
      read_opt(e, "bootstrap_replicates", c.bootstrap_replicates);
      read_opt(e, "alpha", c.alpha);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("config field has the wrong type: ") + e.what());
  }
  c.backend.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string run_config_to_json(const RunConfig& config) { return config_json(config, false).dump(2) + "\n"; }

void validate(const RunConfig& c) {
  if (c.fixed_h) check_weight(*c.fixed_h);
  if (c.output_dir.empty()) throw Error(Errc::InvalidConfig, "output_dir is empty");
  if (c.bootstrap_replicates < 1000) throw Error(Errc::InvalidConfig, "bootstrap_replicates must be >= 1000");
  if (!(c.alpha > 0 && c.alpha < 1)) throw Error(Errc::InvalidConfig, "alpha must lie in (0, 1)");
  if (c.matching.caliper_sd && !(*c.matching.caliper_sd > 0)) {
    throw Error(Errc::InvalidConfig, "caliper must be positive");
  }
  switch (c.task) {
    case Task::wvs_survey:
      if (c.countries.empty() || c.countries.size() > 2) {
        throw Error(Errc::InvalidConfig, "wvs_survey needs one or two countries");
      }
      if (c.countries.size() == 2 && c.countries[0].country == c.countries[1].country) {
        throw Error(Errc::InvalidConfig, "the two countries must differ");
      }
      break;
    case Task::anes_election:
      if (c.anes_sample.empty()) throw Error(Errc::InvalidConfig, "anes_election needs anes.sample");
      check_cycle(c.cycle);
      break;
    case Task::multiparty:
      if (c.fit_years.empty()) throw Error(Errc::InvalidConfig, "multiparty needs fit_years");
      break;
  }
  validate(c.backend);
}

std::string run_id(const RunConfig& config) { return sha256_hex(config_json(config, true).dump()).substr(0, 16); }

std::string provenance_header(const std::string& run_id, std::uint64_t seed, const std::string& model,
                              const std::string& h) {
  return "# run_id=" + run_id + " seed=" + std::to_string(seed) + " model=" + model + " h=" + h;
}

std::vector<HoldoutRow> freeze_and_apply(const CalibrationWeight& weight, const std::vector<std::string>& trained_on,
                                         const std::vector<QuestionSpec>& new_questions,
                                         const std::map<std::string, ResponseVector>& hist,
                                         const std::map<std::string, ResponseVector>& llm,
                                         const std::map<std::string, ResponseVector>& human, MadMode mode) {
  const std::set<std::string> train(trained_on.begin(), trained_on.end());
  for (const auto& q : new_questions) {
    if (train.count(q.question_id)) {
      throw Error(Errc::OverlapError, q.question_id + " was used to fit the weight");
    }
  }
  auto get = [](const std::map<std::string, ResponseVector>& m, const std::string& id, const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw Error(Errc::UnknownQuestion, std::string(what) + " responses lack " + id);
    return it->second;
  };
  std::vector<HoldoutRow> rows;
  for (const auto& q : new_questions) {
    const ResponseVector l = get(llm, q.question_id, "llm");
    const ResponseVector hu = get(human, q.question_id, "human");
    const ResponseVector m = combine_responses(weight.h, get(hist, q.question_id, "historical"), l);
    HoldoutRow r;
    r.question_id = q.question_id;
    r.human = mean_sd(hu);
    r.llm = mean_sd(l);
    r.matching = mean_sd(m);
    r.mad_llm = mad(l, hu, mode);
    r.mad_matching = mad(m, hu, mode);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

std::string num(double v) { return format_value(v); }

// Percentages lose float noise from the *100 (56.8, not 56.800000000000004).
std::string pct(double share) { return format_value(std::round(share * 1e11) / 1e9); }

/// Output directory with provenance headers and atomic writes.
class OutputTree {
 public:
  OutputTree(std::filesystem::path root, std::string run_id, std::uint64_t seed, std::string model)
      : root_(std::move(root)), run_id_(std::move(run_id)), seed_(seed), model_(std::move(model)) {}

  void set_h(std::string h) { h_ = std::move(h); }
  const std::string& run_id() const { return run_id_; }

  void write_csv(const std::string& rel, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    out << provenance_header(run_id_, seed_, model_, h_) << "\n";
    csv::write_row(out, header);
    for (const auto& r : rows) csv::write_row(out, r);
    write(rel, out.str());
  }

  void write_json(const std::string& rel, ojson body) {
    ojson doc;
    doc["_meta"] = {{"run_id", run_id_}, {"seed", seed_}, {"model", model_}, {"h", h_}};
    for (auto& [k, v] : body.items()) doc[k] = v;
    write(rel, doc.dump(2) + "\n");
  }

  void write_text(const std::string& rel, const std::string& body) {
    write(rel, provenance_header(run_id_, seed_, model_, h_) + "\n" + body);
  }

  std::vector<std::string> files() const { return {files_.begin(), files_.end()}; }

 private:
  void write(const std::string& rel, const std::string& content) {
    const auto path = root_ / rel;
    std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(Errc::Io, "cannot write " + tmp);
      out << content;
      if (!out) throw Error(Errc::Io, "write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
    files_.insert(rel);
  }

  std::filesystem::path root_;
  std::string run_id_;
  std::uint64_t seed_;
  std::string model_;
  std::string h_ = "none";
  std::set<std::string> files_;
};

class DirLock {
 public:
  explicit DirLock(const std::filesystem::path& dir) : path_(dir / ".vpoll.lock") {
    std::filesystem::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw Error(Errc::Locked, "another run holds " + path_.string());
    std::fclose(f);
  }
  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::filesystem::path path_;
};

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(stage, Error(Errc::Io, e.what()));
  }
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

bool renderable(const DemographicProfile& p) { return p.has_matching_covariates() && !p.region.empty(); }

void log(const std::string& msg) { std::cerr << "vpoll: " << msg << "\n"; }

// ---------------------------------------------------------------- wvs_survey

struct CountryState {
  Country country;
  std::string dir;
  SurveySample current, historical;
  std::map<std::string, ResponseVector> llm, hist, matching;
  std::vector<std::string> train_ids;
  CalibrationWeight weight;
};

std::vector<std::vector<std::string>> response_rows(const SurveySample& sample, const std::vector<std::string>& ids,
                                                    const std::map<std::string, ResponseVector>& cols) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < sample.n(); ++i) {
    std::vector<std::string> r{sample.roster[i].respondent_id};
    for (const auto& id : ids) r.push_back(format_value(cols.at(id).values[i]));
    rows.push_back(std::move(r));
  }
  return rows;
}

void wvs_country(const RunConfig& cfg, const std::vector<QuestionSpec>& catalog, Stage until, OutputTree& out,
                 RunReport& report, CountryState& st, const TransportFactory& factory) {
  const std::string d = st.dir + "/";
  in_stage("ingest", [&] {
    LoadOptions cur_opts{Schema::wvs, st.country, "wvs7_" + std::string(to_string(st.country)), std::nullopt};
    LoadOptions hist_opts{Schema::wvs, st.country, "wvs6_" + std::string(to_string(st.country)), std::nullopt};
    const CountryInput& ci = *std::find_if(cfg.countries.begin(), cfg.countries.end(),
                                           [&](const CountryInput& c) { return c.country == st.country; });
    st.current = load_sample(cfg.resolve(ci.current_sample), cur_opts, catalog);
    st.historical = load_sample(cfg.resolve(ci.historical_sample), hist_opts, catalog);
    ojson summary;
    for (const auto* s : {&st.current, &st.historical}) {
      ojson q = ojson::object();
      for (const auto& id : s->question_order) q[id] = {{"missing", s->responses.at(id).count_missing()}};
      std::size_t incomplete = 0;
      for (const auto& p : s->roster) incomplete += p.has_matching_covariates() ? 0 : 1;
      summary[s->sample_id] = {{"n", s->n()}, {"incomplete_covariates", incomplete}, {"questions", q}};
    }
    out.write_json(d + "ingest_summary.json", summary);
    return 0;
  });
  if (until == Stage::ingest) return;

  std::vector<QuestionSpec> asked;
  for (const auto& q : catalog) {
    if (q.in_wave7) asked.push_back(q);
  }
  in_stage("synthesize", [&] {
    SurveySample sub;
    sub.sample_id = st.current.sample_id;
    sub.country = st.current.country;
    std::vector<PromptBundle> bundles;
    std::size_t skipped = 0;
    for (const auto& p : st.current.roster) {
      if (!renderable(p)) {
        ++skipped;
        continue;
      }
      bundles.push_back(render_wvs_prompt(p, st.country, asked));
      sub.roster.push_back(p);
    }
    if (skipped) {
      report.warnings.push_back(st.dir + ": " + std::to_string(skipped) + " respondents lack persona fields");
    }
    const SynthesisResult res = synthesize(sub, bundles, cfg.backend, factory);
    log(st.dir + ": " + std::to_string(res.requests_sent) + " requests, " + std::to_string(res.cache_hits) +
        " cache hits, " + std::to_string(res.failed_units) + " failed units");
    if (res.failed_units) {
      report.warnings.push_back(st.dir + ": " + std::to_string(res.failed_units) + " prompt units failed");
    }
    st.llm = responses_from(res, st.current, asked);
    std::vector<std::string> ids;
    for (const auto& q : asked) ids.push_back(q.question_id);
    std::vector<std::string> header{"respondent_id"};
    for (const auto& id : ids) header.push_back("q_" + id);
    out.write_csv(d + "synthetic_responses.csv", header, response_rows(st.current, ids, st.llm));

    std::vector<std::vector<std::string>> rows;
    std::size_t unparsed = 0;
    for (const auto& [key, c] : res.completions) {
      if (!c.answer) ++unparsed;
      rows.push_back({key.first, key.second, c.prompt_hash, c.status == CompletionStatus::ok ? "ok" : "failed",
                      c.answer ? std::to_string(*c.answer) : std::string{}, c.raw_text});
    }
    if (unparsed) report.warnings.push_back(st.dir + ": " + std::to_string(unparsed) + " cells without an answer");
    out.write_csv(d + "completions.csv", {"respondent_id", "question_id", "prompt_hash", "status", "answer", "raw_text"},
                  rows);
    return 0;
  });
  if (until == Stage::synthesize) return;

  in_stage("match", [&] {
    const PropensityModel model = fit_propensity(st.current, st.historical);
    for (const auto& w : model.warnings) report.warnings.push_back(st.dir + ": " + w);
    const auto cur_scores = score_sample(model, st.current);
    const auto hist_scores = score_sample(model, st.historical);
    const MatchedPairSet pairs = match_nearest(cur_scores, hist_scores, cfg.matching);
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : pairs.pairs) {
      rows.push_back({p.current_id, p.historical_id, num(p.score_current), num(p.score_historical), num(p.gap)});
    }
    out.write_csv(d + "matches.csv", {"current_id", "historical_id", "score_current", "score_historical", "gap"},
                  rows);
    ojson coef = ojson::object();
    for (std::size_t i = 0; i < model.coefficients.size(); ++i) coef[model.names[i]] = model.coefficients[i];
    out.write_json(d + "propensity_model.json", {{"coefficients", coef},
                                                 {"converged", model.converged},
                                                 {"iterations", model.iterations},
                                                 {"log_likelihood", model.log_likelihood},
                                                 {"policy", to_string(cfg.matching.policy)},
                                                 {"unmatched", pairs.unmatched},
                                                 {"warnings", model.warnings}});
    std::vector<std::vector<std::string>> bal;
    for (const auto& b : balance_report(model, st.current, st.historical, pairs)) {
      bal.push_back({b.covariate, num(b.smd_before), num(b.smd_after)});
    }
    out.write_csv(d + "balance.csv", {"covariate", "smd_before", "smd_after"}, bal);
    for (const auto& q : catalog) {
      if (q.in_wave6 && q.in_wave7) {
        st.hist.emplace(q.question_id, matched_responses(pairs, st.current, st.historical, q.question_id));
      }
    }
    return 0;
  });
  if (until == Stage::match) return;

  const std::string scope = "survey_" + std::string(to_string(st.country));
  in_stage("calibrate", [&] {
    std::vector<ResponseVector> h, l, hu;
    SurveyFitOptions opts;
    opts.normalize_unit_interval = cfg.normalize_unit_interval;
    for (const auto& q : catalog) {
      if (!(q.in_wave6 && q.in_wave7) || q.block == Block::out_of_sample || q.answer_kind != AnswerKind::likert) continue;
      st.train_ids.push_back(q.question_id);
      h.push_back(st.hist.at(q.question_id));
      l.push_back(st.llm.at(q.question_id));
      hu.push_back(response_vector(st.current, q.question_id));
      opts.scales.emplace_back(q.scale_min, q.scale_max);
    }
    const SurveyObjective objective(h, l, hu, opts);
    if (cfg.fixed_h) {
      st.weight.h = *cfg.fixed_h;
      st.weight.objective_value = objective(*cfg.fixed_h);
      for (int j = 0; j <= 100; ++j) st.weight.grid_trace.push_back({j / 100.0, objective(j / 100.0)});
    } else {
      st.weight = estimate_h_survey(h, l, hu, opts);
    }
    st.weight.scope = scope;
    st.weight.fitted_on = out.run_id();
    report.weights[scope] = st.weight.h;
    out.set_h(num(st.weight.h));
    ojson trace = ojson::array();
    for (const auto& g : st.weight.grid_trace) trace.push_back({{"h", g.h}, {"objective", g.objective}});
    out.write_json(d + "calibration.json", {{"scope", scope},
                                            {"h", st.weight.h},
                                            {"fixed", cfg.fixed_h.has_value()},
                                            {"objective_value", st.weight.objective_value},
                                            {"fitted_on", st.weight.fitted_on},
                                            {"normalize_unit_interval", cfg.normalize_unit_interval},
                                            {"questions", st.train_ids},
                                            {"grid_trace", trace}});
    for (const auto& [id, hv] : st.hist) st.matching.emplace(id, combine_responses(st.weight.h, hv, st.llm.at(id)));
    return 0;
  });
  if (until == Stage::calibrate) return;

  in_stage("evaluate", [&] {
    std::vector<std::vector<std::string>> ms;
    for (const auto& [id, hv] : st.matching) {
      (void)hv;
      const std::pair<const char*, const ResponseVector*> sources[] = {
          {"human", &response_vector(st.current, id)}, {"llm", &st.llm.at(id)}, {"matching_llm", &st.matching.at(id)}};
      for (const auto& [name, v] : sources) {
        const MeanSd r = mean_sd(*v);
        ms.push_back({id, name, num(r.mean), num(r.sd), std::to_string(r.n_used)});
      }
    }
    out.write_csv(d + "mean_sd.csv", {"question_id", "source", "mean", "sd", "n_used"}, ms);

    std::vector<std::vector<std::string>> madrows;
    BootstrapOptions bo{cfg.bootstrap_replicates, cfg.seed, cfg.mad_mode};
    for (const auto& id : st.train_ids) {
      const auto& human = response_vector(st.current, id);
      const MadResult a = mad(st.llm.at(id), human, cfg.mad_mode);
      const MadResult b = mad(st.matching.at(id), human, cfg.mad_mode);
      const double p = mad_significance(st.llm.at(id), st.matching.at(id), human, bo);
      madrows.push_back({id, find_question(catalog, id).short_label, num(a.value), num(b.value), num(a.value - b.value),
                         num(a.signed_gap), num(b.signed_gap), num(p), std::string(significance_stars(p))});
    }
    out.write_csv(d + "mad_table.csv",
                  {"question_id", "label", "mad_llm", "mad_matching", "difference", "gap_llm", "gap_matching",
                   "p_value", "stars"},
                  madrows);

    std::vector<ResponseVector> human_cols, llm_cols, match_cols;
    for (const auto& id : st.train_ids) {
      human_cols.push_back(response_vector(st.current, id));
      llm_cols.push_back(st.llm.at(id));
      match_cols.push_back(st.matching.at(id));
    }
    std::vector<std::vector<std::string>> cells, excluded;
    ojson summary;
    const std::pair<const char*, const std::vector<ResponseVector>*> synth_sets[] = {{"llm", &llm_cols},
                                                                                      {"matching_llm", &match_cols}};
    for (const auto& [source, cols] : synth_sets) {
      const AgreementGrid grid = agreement_grid(human_cols, *cols, cfg.alpha);
      for (const auto& c : grid.cells) {
        cells.push_back({std::string(source), c.question_a, c.question_b, num(c.human.r), num(c.human.p_value), num(c.synth.r),
                         num(c.synth.p_value), std::string(to_string(c.cls))});
      }
      for (const auto& e : grid.excluded) excluded.push_back({std::string(source), e});
      const AgreementSummary s = agreement_summary(grid.cells);
      summary[source] = {{"complete_agreement", s.complete_agreement},
                         {"partial_disagreement", s.partial_disagreement},
                         {"complete_disagreement", s.complete_disagreement},
                         {"both_insignificant", s.both_insignificant},
                         {"total", s.total},
                         {"excluded", grid.excluded.size()}};
    }
    summary["alpha"] = cfg.alpha;
    out.write_csv(d + "agreement_cells.csv",
                  {"source", "question_a", "question_b", "r_human", "p_human", "r_synth", "p_synth", "class"}, cells);
    out.write_csv(d + "agreement_excluded.csv", {"source", "pair"}, excluded);
    out.write_json(d + "agreement_summary.json", summary);

    std::vector<QuestionSpec> holdout;
    for (const auto& q : catalog) {
      if (q.block == Block::out_of_sample && q.in_wave6 && q.in_wave7) holdout.push_back(q);
    }
    std::map<std::string, ResponseVector> human_map(st.current.responses.begin(), st.current.responses.end());
    std::vector<std::vector<std::string>> hrows;
    for (const auto& r : freeze_and_apply(st.weight, st.train_ids, holdout, st.hist, st.llm, human_map, cfg.mad_mode)) {
      hrows.push_back({r.question_id, num(r.human.mean), num(r.llm.mean), num(r.matching.mean), num(r.mad_llm.value),
                       num(r.mad_matching.value)});
    }
    out.write_csv(d + "holdout_comparison.csv",
                  {"question_id", "human_mean", "llm_mean", "matching_mean", "mad_llm", "mad_matching"}, hrows);
    return 0;
  });
}

void cross_country(const std::vector<QuestionSpec>& catalog, OutputTree& out, const CountryState& a,
                   const CountryState& b) {
  in_stage("evaluate", [&] {
    std::vector<std::vector<std::string>> rows;
    for (const auto& id : a.train_ids) {
      if (std::find(b.train_ids.begin(), b.train_ids.end(), id) == b.train_ids.end()) continue;
      const std::pair<const char*, std::pair<const ResponseVector*, const ResponseVector*>> sources[] = {
          {"human", {&response_vector(a.current, id), &response_vector(b.current, id)}},
          {"llm", {&a.llm.at(id), &b.llm.at(id)}},
          {"matching_llm", {&a.matching.at(id), &b.matching.at(id)}}};
      for (const auto& [name, pair] : sources) {
        const WelchResult w = cross_sample_diff(*pair.first, *pair.second);
        rows.push_back({id, find_question(catalog, id).short_label, name, num(w.diff), num(w.t), num(w.df),
                        num(w.p_value)});
      }
    }
    const std::string name = lower(to_string(a.country)) + "_" + lower(to_string(b.country)) + "_diff.csv";
    out.set_h("by_country");
    out.write_csv(name, {"question_id", "label", "source", "diff", "t", "df", "p_value"}, rows);
    return 0;
  });
}

void run_wvs(const RunConfig& cfg, Stage until, OutputTree& out, RunReport& report, const TransportFactory& factory) {
  const auto catalog = in_stage("ingest", [&] {
    return load_catalog(cfg.catalog.empty() ? cfg.data_path("wvs_catalog.json") : cfg.resolve(cfg.catalog));
  });
  std::vector<CountryState> states;
  for (const auto& ci : cfg.countries) {
    CountryState st;
    st.country = ci.country;
    st.dir = lower(to_string(ci.country));
    out.set_h("none");
    wvs_country(cfg, catalog, until, out, report, st, factory);
    states.push_back(std::move(st));
  }
  if (states.size() == 2 && until >= Stage::evaluate) cross_country(catalog, out, states[0], states[1]);
  out.set_h(states.size() == 1 && report.weights.size() == 1 ? num(report.weights.begin()->second) : "by_country");
}

// ------------------------------------------------------------- anes_election

void run_anes(const RunConfig& cfg, Stage until, OutputTree& out, RunReport& report, const TransportFactory& factory) {
  const int cycle = cfg.cycle;
  const std::string vote_id = "vote_" + std::to_string(cycle);
  SurveySample sample = in_stage("ingest", [&] {
    LoadOptions opts{Schema::anes, Country::US, "anes_" + std::to_string(cycle), std::nullopt};
    SurveySample s = load_sample(cfg.resolve(cfg.anes_sample), opts, {});
    std::size_t incomplete = 0;
    for (const auto& p : s.roster) incomplete += p.has_matching_covariates() ? 0 : 1;
    out.write_json("ingest_summary.json", {{s.sample_id, {{"n", s.n()}, {"incomplete_covariates", incomplete}}}});
    return s;
  });
  if (until == Stage::ingest) return;

  std::map<std::string, Party> votes = in_stage("synthesize", [&] {
    std::vector<PromptBundle> bundles;
    SurveySample sub;
    sub.sample_id = sample.sample_id;
    sub.country = sample.country;
    sub.schema = sample.schema;
    for (const auto& p : sample.roster) {
      try {
        bundles.push_back(render_anes_prompt(p, cycle));
        sub.roster.push_back(p);
      } catch (const Error& e) {
        if (e.code() != Errc::UnresolvableCode) throw;
        report.warnings.push_back("respondent " + p.respondent_id + " skipped: " + e.what());
      }
    }
    const SynthesisResult res = synthesize(sub, bundles, cfg.backend, factory);
    log(std::to_string(res.requests_sent) + " requests, " + std::to_string(res.cache_hits) + " cache hits");
    std::map<std::string, Party> v;
    std::vector<std::vector<std::string>> rows;
    for (const auto& p : sample.roster) {
      auto it = res.completions.find({p.respondent_id, vote_id});
      std::string cell;
      if (it != res.completions.end() && it->second.answer) {
        const Party party = *it->second.answer == 1 ? Party::Democratic : Party::Republican;
        v[p.respondent_id] = party;
        cell = std::string(to_string(party));
      }
      rows.push_back({p.respondent_id, p.region, num(p.sampling_weight), cell});
    }
    if (v.size() < sub.n()) {
      report.warnings.push_back(std::to_string(sub.n() - v.size()) + " ballots without a parsed vote");
    }
    out.write_csv("votes.csv", {"respondent_id", "state", "sampling_weight", "vote"}, rows);
    return v;
  });
  if (until == Stage::synthesize) return;

  struct Inputs {
    std::vector<StateTally> llm;
    StateShares hist;
    StateWinners actual;
    EvTable table;
  };
  Inputs in = in_stage("calibrate", [&] {
    Inputs x;
    const TallyReport tr = tally_states(votes, sample, cycle);
    for (const auto& s : tr.states_without_votes) report.warnings.push_back(s + " has no voters");
    x.llm = tr.tallies;
    const auto shares = load_historical_shares(cfg.historical_shares.empty() ? cfg.data_path("historical_shares.csv")
                                                                             : cfg.resolve(cfg.historical_shares));
    x.hist = historical_baseline(shares, cycle, cfg.hist_last_only);
    const auto winners =
        load_winners(cfg.actual_winners.empty() ? cfg.data_path("actual_winners.csv") : cfg.resolve(cfg.actual_winners));
    auto w = winners.find(cycle);
    if (w == winners.end()) throw Error(Errc::InsufficientData, "no actual winners for " + std::to_string(cycle));
    x.actual = w->second;
    const std::string version = ev_version_for_cycle(cycle);
    x.table = load_ev_table(cfg.ev_table.empty() ? cfg.data_path("ev_" + version + ".csv") : cfg.resolve(cfg.ev_table));
    if (x.table.total() != 538) throw Error(Errc::InvalidConfig, "EV table sums to " + std::to_string(x.table.total()));

    std::vector<std::vector<std::string>> rows;
    for (const auto& t : x.llm) {
      rows.push_back({t.state, std::to_string(t.cycle), num(t.dem_share), num(t.rep_share), num(t.effective_n)});
    }
    out.write_csv("state_tallies.csv", {"state", "cycle", "dem_share", "rep_share", "effective_n"}, rows);
    return x;
  });

  CalibrationWeight weight = in_stage("calibrate", [&] {
    CalibrationWeight w;
    const StateShares llm_shares = to_shares(in.llm);
    if (cfg.fixed_h) {
      w.h = *cfg.fixed_h;
      if (llm_shares.size() == in.actual.size()) w.objective_value = correct_states(w.h, in.hist, llm_shares, in.actual);
    } else {
      w = estimate_h_election(in.hist, llm_shares, in.actual);
    }
    w.scope = "election";
    w.fitted_on = out.run_id();
    report.weights["election"] = w.h;
    out.set_h(num(w.h));
    ojson trace = ojson::array();
    for (const auto& g : w.grid_trace) trace.push_back({{"h", g.h}, {"objective", g.objective}});
    out.write_json("calibration.json", {{"scope", w.scope},
                                        {"h", w.h},
                                        {"fixed", cfg.fixed_h.has_value()},
                                        {"objective_value", w.objective_value},
                                        {"fitted_on", w.fitted_on},
                                        {"grid_trace", trace}});
    return w;
  });
  if (until <= Stage::evaluate) return;

  in_stage("forecast", [&] {
    const auto hist_tallies = to_tallies(in.hist, cycle);
    const auto combined = forecast_shares(weight.h, hist_tallies, in.llm);
    const ElectoralOutcome predicted = allocate_electors(combined, in.table, cycle);
    const ElectoralOutcome llm_only = allocate_electors(in.llm, in.table, cycle);
    const ElectoralOutcome actual = allocate_winners(in.actual, in.table, cycle);
    const MapDiff diff = compare_maps(predicted, actual);
    const MapDiff llm_diff = compare_maps(llm_only, actual);
    for (const auto& s : predicted.ties) report.warnings.push_back(s + " is an exact tie");

    std::map<std::string, double> llm_by_state;
    for (const auto& t : in.llm) llm_by_state[t.state] = t.dem_share;
    std::vector<std::vector<std::string>> rows;
    ojson map = ojson::object();
    for (const auto& t : combined) {
      const double l = llm_by_state.at(t.state);
      auto win = predicted.winners.find(t.state);
      const std::string w = win == predicted.winners.end() ? "tie" : std::string(to_string(win->second));
      rows.push_back({t.state, pct(l), pct(1 - l), pct(in.hist.at(t.state)),
                      pct(1 - in.hist.at(t.state)), pct(t.dem_share), pct(t.rep_share), w,
                      std::string(to_string(in.actual.at(t.state)))});
      map[t.state] = w;
    }
    out.write_csv("forecast.csv",
                  {"state", "llm_dem_pct", "llm_rep_pct", "historical_dem_pct", "historical_rep_pct",
                   "matching_dem_pct", "matching_rep_pct", "predicted_winner", "actual_winner"},
                  rows);
    out.write_json("map.json", {{"cycle", cycle}, {"winners", map}});
    out.write_json("summary.json",
                   {{"cycle", cycle},
                    {"ev_table_version", predicted.ev_table_version},
                    {"h", weight.h},
                    {"dem_ev", predicted.dem_ev},
                    {"rep_ev", predicted.rep_ev},
                    {"ties", predicted.ties},
                    {"mispredicted", diff.mispredicted},
                    {"ev_error", diff.ev_error},
                    {"actual", {{"dem_ev", actual.dem_ev}, {"rep_ev", actual.rep_ev}}},
                    {"llm_only",
                     {{"dem_ev", llm_only.dem_ev}, {"rep_ev", llm_only.rep_ev}, {"mispredicted", llm_diff.mispredicted}}}});
    return 0;
  });
}

// ---------------------------------------------------------------- multiparty

void run_multiparty(const RunConfig& cfg, Stage until, OutputTree& out, RunReport& report) {
  const MultipartyHistory hist = in_stage("ingest", [&] {
    return load_multiparty(cfg.multiparty_shares.empty() ? cfg.data_path("germany_shares.csv")
                                                         : cfg.resolve(cfg.multiparty_shares));
  });
  if (until < Stage::calibrate) return;
  const auto weights = in_stage("calibrate", [&] {
    auto w = estimate_party_weights(party_fit_points(hist, cfg.fit_years));
    if (cfg.fixed_h) {
      for (auto& [p, cw] : w) cw.h = *cfg.fixed_h;
    }
    ojson j = ojson::object();
    for (const auto& [p, cw] : w) {
      j[p] = {{"h", cw.h}, {"objective_value", cw.objective_value}};
      report.weights[cw.scope] = cw.h;
    }
    out.set_h("by_party");
    out.write_json("party_weights.json", {{"fit_years", cfg.fit_years}, {"fixed", cfg.fixed_h.has_value()}, {"weights", j}});
    return w;
  });
  if (until < Stage::forecast) return;
  in_stage("forecast", [&] {
    auto sim = hist.simulated.find(cfg.forecast_year);
    if (sim == hist.simulated.end()) {
      throw Error(Errc::InsufficientData, "no simulated shares for " + std::to_string(cfg.forecast_year));
    }
    const PartyShares& prev = hist.actual.at(previous_year(hist, cfg.forecast_year));
    const PartyShares fc = forecast_multiparty(weights, sim->second, prev);
    auto actual = hist.actual.find(cfg.forecast_year);
    std::vector<std::vector<std::string>> rows;
    for (const auto& [party, v] : fc) {
      std::string a;
      if (actual != hist.actual.end() && actual->second.count(party)) a = pct(actual->second.at(party));
      rows.push_back({party, pct(sim->second.at(party)), pct(prev.at(party)), pct(v), a});
    }
    out.write_csv("multiparty_forecast.csv",
                  {"party", "simulated_pct", "previous_pct", "forecast_pct", "actual_pct"}, rows);
    return 0;
  });
}

}  // namespace

RunReport run_pipeline(const RunConfig& config, Stage until, const TransportFactory& transport_factory) {
  validate(config);
  const std::filesystem::path root = config.resolve(config.output_dir);
  DirLock lock(root);
  RunReport report;
  report.run_id = run_id(config);
  OutputTree out(root, report.run_id, config.seed, config.backend.model_name);
  switch (config.task) {
    case Task::wvs_survey: run_wvs(config, until, out, report, transport_factory); break;
    case Task::anes_election: run_anes(config, until, out, report, transport_factory); break;
    case Task::multiparty: run_multiparty(config, until, out, report); break;
  }
  for (Stage s : {Stage::ingest, Stage::synthesize, Stage::match, Stage::calibrate, Stage::evaluate, Stage::forecast,
                  Stage::report}) {
    if (s > until) break;
    report.stages.emplace_back(to_string(s));
  }
  if (until == Stage::report) {
    auto files = out.files();
    files.push_back("run_report.json");
    std::sort(files.begin(), files.end());
    ojson weights = ojson::object();
    for (const auto& [k, v] : report.weights) weights[k] = v;
    out.write_json("run_report.json", {{"task", to_string(config.task)},
                                       {"config", config_json(config, true)},
                                       {"stages", report.stages},
                                       {"weights", weights},
                                       {"warnings", report.warnings},
                                       {"files", files}});
  }
  report.files = out.files();
  return report;
}

}  // namespace vpoll
