#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpoll/calibration.hpp"
#include "vpoll/eval_stats.hpp"
#include "vpoll/llm_gateway.hpp"
#include "vpoll/psm_matching.hpp"

namespace vpoll {

enum class Task { wvs_survey, anes_election, multiparty };

std::string_view to_string(Task t) noexcept;
Task parse_task(std::string_view s);

struct CountryInput {
  Country country = Country::US;
  std::string current_sample;
  std::string historical_sample;
};

/// Paths are kept as written and resolved against base_dir on use.
struct RunConfig {
  Task task = Task::wvs_survey;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string data_dir;  // empty: the bundled data directory
  std::filesystem::path base_dir;

  // wvs_survey
  std::string catalog;  // empty: <data_dir>/wvs_catalog.json
  std::vector<CountryInput> countries;

  // anes_election
  std::string anes_sample;
  int cycle = 2024;
  std::string ev_table;           // empty: by cycle from data_dir
  std::string actual_winners;     // empty: <data_dir>/actual_winners.csv
  std::string historical_shares;  // empty: <data_dir>/historical_shares.csv
  bool hist_last_only = false;

  // multiparty
  std::string multiparty_shares;  // empty: <data_dir>/germany_shares.csv
  std::vector<int> fit_years = {2017, 2021};
  int forecast_year = 2025;

  BackendConfig backend;
  std::optional<double> fixed_h;
  bool normalize_unit_interval = false;
  MatchOptions matching;
  MadMode mad_mode = MadMode::mean_gap;
  int bootstrap_replicates = 10000;
  double alpha = 0.05;

  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path data_path(const std::string& name) const;
};

/// Throws Error(InvalidConfig) on unknown keys or bad values.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// Throws Error(InvalidConfig) / Error(WeightOutOfRange).
void validate(const RunConfig& config);

/// Digest of the settings that determine outputs (not output or cache paths,
/// not parallelism).
std::string run_id(const RunConfig& config);

enum class Stage { ingest, synthesize, match, calibrate, evaluate, forecast, report };

std::string_view to_string(Stage s) noexcept;
Stage parse_stage(std::string_view s);

struct RunReport {
  std::string run_id;
  std::vector<std::string> stages;
  std::vector<std::string> files;  // relative to output_dir, sorted
  std::vector<std::string> warnings;
  std::map<std::string, double> weights;  // scope -> h
};

/// Runs stages up to and including `until`, writing every artifact under
/// config.output_dir. Module errors are rethrown as StageError.
RunReport run_pipeline(const RunConfig& config, Stage until = Stage::report,
                       const TransportFactory& transport_factory = nullptr);

struct HoldoutRow {
  std::string question_id;
  MeanSd human;
  MeanSd llm;
  MeanSd matching;
  MadResult mad_llm;
  MadResult mad_matching;
};

/// Applies a frozen weight to questions outside its training set.
/// Throws Error(OverlapError) when a new question was used for fitting.
std::vector<HoldoutRow> freeze_and_apply(const CalibrationWeight& weight, const std::vector<std::string>& trained_on,
                                         const std::vector<QuestionSpec>& new_questions,
                                         const std::map<std::string, ResponseVector>& hist,
                                         const std::map<std::string, ResponseVector>& llm,
                                         const std::map<std::string, ResponseVector>& human,
                                         MadMode mode = MadMode::mean_gap);

/// First line of every CSV artifact: "# run_id=... seed=... model=... h=...".
std::string provenance_header(const std::string& run_id, std::uint64_t seed, const std::string& model,
                              const std::string& h);

}  // namespace vpoll
