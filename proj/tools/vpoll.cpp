// vpoll: command-line driver for the virtual-poll pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vpoll/error.hpp"
#include "vpoll/fixtures.hpp"
#include "vpoll/persona_prompt.hpp"
#include "vpoll/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<double> h;
  std::optional<std::uint64_t> seed;
  std::string backend;
  std::string output_dir;
  std::string cache_dir;
  std::optional<int> parallelism;
  std::string model;
  bool normalize = false;
  bool hist_last_only = false;
  std::optional<double> caliper;
  std::string policy;
  std::optional<int> bootstrap;
  std::string mad_mode;
};

void add_run_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--h", o.h, "Fixed weight in [0, 1] instead of fitting");
  cmd->add_option("--seed", o.seed, "Seed for the mock backend and bootstrap");
  cmd->add_option("--backend", o.backend, "live | mock | replay");
  cmd->add_option("--output-dir", o.output_dir, "Output directory");
  cmd->add_option("--cache-dir", o.cache_dir, "Completion cache directory");
  cmd->add_option("--parallelism", o.parallelism, "Concurrent backend requests");
  cmd->add_option("--model", o.model, "Model name sent to the backend");
  cmd->add_flag("--normalize-unit-interval", o.normalize, "Rescale every question to [0, 1] when fitting h");
  cmd->add_flag("--hist-last-only", o.hist_last_only, "Use only the previous cycle as historical share");
  cmd->add_option("--caliper", o.caliper, "Matching caliper in standard deviations of the score");
  cmd->add_option("--policy", o.policy, "with_replacement | without_replacement");
  cmd->add_option("--bootstrap", o.bootstrap, "Bootstrap replicates for MAD significance");
  cmd->add_option("--mad-mode", o.mad_mode, "mean_gap | per_respondent");
}

vpoll::RunConfig load_with_overrides(const Overrides& o) {
  vpoll::RunConfig c = vpoll::load_run_config(o.config);
  if (o.h) c.fixed_h = *o.h;
  if (o.seed) c.seed = c.backend.seed = *o.seed;
  if (!o.backend.empty()) c.backend.kind = vpoll::parse_backend_kind(o.backend);
  if (!o.output_dir.empty()) {
    c.output_dir = std::filesystem::absolute(o.output_dir).string();
  }
  if (!o.cache_dir.empty()) c.backend.cache_dir = std::filesystem::absolute(o.cache_dir);
  if (o.parallelism) c.backend.parallelism = *o.parallelism;
  if (!o.model.empty()) c.backend.model_name = o.model;
  if (o.normalize) c.normalize_unit_interval = true;
  if (o.hist_last_only) c.hist_last_only = true;
  if (o.caliper) c.matching.caliper_sd = *o.caliper;
  if (!o.policy.empty()) c.matching.policy = vpoll::parse_match_policy(o.policy);
  if (o.bootstrap) c.bootstrap_replicates = *o.bootstrap;
  if (!o.mad_mode.empty()) c.mad_mode = vpoll::parse_mad_mode(o.mad_mode);
  return c;
}

void print_report(const vpoll::RunReport& r, std::ostream& os) {
  os << "run " << r.run_id << ": " << r.files.size() << " files\n";
  for (const auto& [scope, h] : r.weights) os << "  h[" << scope << "] = " << h << "\n";
  for (const auto& w : r.warnings) os << "  warning: " << w << "\n";
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vpoll::Error(vpoll::Errc::Io, "cannot write " + path.string());
  out << body;
}

int make_fixture(const std::string& kind, const std::filesystem::path& dir, std::uint64_t seed, std::size_t n,
                 std::size_t n_hist, const std::vector<std::string>& countries, int cycle) {
  std::filesystem::create_directories(dir);
  std::string config;
  if (kind == "wvs") {
    const auto catalog = vpoll::load_catalog(std::filesystem::path(VPOLL_DATA_DIR) / "wvs_catalog.json");
    std::string entries;
    for (const auto& code : countries) {
      const vpoll::Country c = vpoll::parse_country(code);
      const auto f = vpoll::make_wvs_fixture(c, n, n_hist, seed, catalog);
      std::string lc = code;
      for (auto& ch : lc) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      vpoll::save_sample(dir / ("wvs7_" + lc + ".csv"), f.current);
      vpoll::save_sample(dir / ("wvs6_" + lc + ".csv"), f.historical);
      if (!entries.empty()) entries += ",\n";
      entries += "    {\"country\": \"" + code + "\", \"current_sample\": \"wvs7_" + lc +
                 ".csv\", \"historical_sample\": \"wvs6_" + lc + ".csv\"}";
    }
    config = "{\n  \"task\": \"wvs_survey\",\n  \"seed\": " + std::to_string(seed) +
             ",\n  \"output_dir\": \"out\",\n  \"countries\": [\n" + entries +
             "\n  ],\n  \"backend\": {\"kind\": \"mock\"}\n}\n";
  } else if (kind == "anes") {
    vpoll::save_sample(dir / ("anes_" + std::to_string(cycle) + ".csv"), vpoll::make_anes_fixture(n, seed));
    config = "{\n  \"task\": \"anes_election\",\n  \"seed\": " + std::to_string(seed) +
             ",\n  \"output_dir\": \"out\",\n  \"anes\": {\"sample\": \"anes_" + std::to_string(cycle) +
             ".csv\", \"cycle\": " + std::to_string(cycle) + "},\n  \"backend\": {\"kind\": \"mock\"}\n}\n";
  } else {
    throw vpoll::Error(vpoll::Errc::InvalidConfig, "fixture kind must be wvs or anes");
  }
  write_file(dir / "config.json", config);
  std::cout << "wrote fixture to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual polls: persona-prompted survey synthesis with propensity-matched calibration"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  Overrides o;
  std::vector<std::pair<CLI::App*, vpoll::Stage>> stage_cmds;
  const std::pair<const char*, const char*> stages[] = {
      {"ingest", "Load and validate samples"},
      {"synthesize", "Generate LLM responses for the current sample"},
      {"match", "Fit propensity scores and match respondents"},
      {"calibrate", "Fit (or apply) the combination weight"},
      {"evaluate", "Compute comparison statistics"},
      {"forecast", "Produce the election or multi-party forecast"},
      {"report", "Run every stage and print a summary"},
      {"run", "Run the full pipeline"},
  };
  for (const auto& [name, help] : stages) {
    auto* cmd = app.add_subcommand(name, help);
    add_run_options(cmd, o);
    const std::string n = name;
    stage_cmds.emplace_back(cmd, n == "run" ? vpoll::Stage::report : vpoll::parse_stage(n));
  }

  auto* prompt = app.add_subcommand("prompt", "Print the rendered prompt for one respondent");
  std::string prompt_config, respondent;
  prompt->add_option("-c,--config", prompt_config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  prompt->add_option("--respondent", respondent, "respondent_id")->required();

  auto* codebook = app.add_subcommand("codebook", "Print the persona codebook as JSON");
  std::string schema = "wvs";
  codebook->add_option("--schema", schema, "wvs | anes");

  auto* fixture = app.add_subcommand("fixture", "Write a synthetic sample and matching config");
  std::string kind = "wvs", out_dir = "fixture";
  std::uint64_t fx_seed = 42;
  std::size_t fx_n = 100, fx_hist = 0;
  int fx_cycle = 2024;
  std::vector<std::string> fx_countries{"US"};
  fixture->add_option("--kind", kind, "wvs | anes");
  fixture->add_option("--out-dir", out_dir, "Destination directory");
  fixture->add_option("--seed", fx_seed, "Generator seed");
  fixture->add_option("-n,--n", fx_n, "Current-wave respondents");
  fixture->add_option("--n-historical", fx_hist, "Historical respondents (default: same as --n)");
  fixture->add_option("--countries", fx_countries, "Country codes for wvs fixtures")->delimiter(',');
  fixture->add_option("--cycle", fx_cycle, "Election cycle for anes fixtures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (const auto& [cmd, stage] : stage_cmds) {
      if (!cmd->parsed()) continue;
      const auto report = vpoll::run_pipeline(load_with_overrides(o), stage);
      print_report(report, std::cout);
      return 0;
    }
    if (prompt->parsed()) {
      const auto cfg = vpoll::load_run_config(prompt_config);
      if (cfg.task == vpoll::Task::anes_election) {
        const auto s = vpoll::load_sample(cfg.resolve(cfg.anes_sample),
                                          {vpoll::Schema::anes, vpoll::Country::US, "anes", std::nullopt}, {});
        const auto idx = s.index_of(respondent);
        if (!idx) throw vpoll::Error(vpoll::Errc::InvalidConfig, "no respondent " + respondent);
        std::cout << vpoll::render_transcript(vpoll::render_anes_prompt(s.roster[*idx], cfg.cycle));
        return 0;
      }
      const auto catalog = vpoll::load_catalog(cfg.catalog.empty() ? cfg.data_path("wvs_catalog.json")
                                                                   : cfg.resolve(cfg.catalog));
      std::vector<vpoll::QuestionSpec> asked;
      for (const auto& q : catalog) {
        if (q.in_wave7) asked.push_back(q);
      }
      for (const auto& ci : cfg.countries) {
        const auto s = vpoll::load_sample(cfg.resolve(ci.current_sample),
                                          {vpoll::Schema::wvs, ci.country, "current", std::nullopt}, catalog);
        if (const auto idx = s.index_of(respondent)) {
          std::cout << vpoll::render_transcript(vpoll::render_wvs_prompt(s.roster[*idx], ci.country, asked));
          return 0;
        }
      }
      throw vpoll::Error(vpoll::Errc::InvalidConfig, "no respondent " + respondent);
    }
    if (codebook->parsed()) {
      std::cout << vpoll::codebook_for(vpoll::parse_schema(schema)).to_json() << "\n";
      return 0;
    }
    if (fixture->parsed()) {
      return make_fixture(kind, out_dir, fx_seed, fx_n, fx_hist ? fx_hist : fx_n, fx_countries, fx_cycle);
    }
  } catch (const vpoll::Error& e) {
    std::cerr << "vpoll: " << e.what() << "\n";
    return vpoll::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "vpoll: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
