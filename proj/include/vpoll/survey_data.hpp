#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vpoll {

enum class Schema { wvs, anes };
enum class Gender { male, female };
enum class Country { US, CN, DE, other };
enum class Block { social_values, trust, common_sense, ethics, out_of_sample, ballot };
enum class AnswerKind { likert, multiple_choice, ballot_choice };

std::string_view to_string(Schema s) noexcept;
std::string_view to_string(Gender g) noexcept;
std::string_view to_string(Country c) noexcept;
std::string_view to_string(Block b) noexcept;
std::string_view to_string(AnswerKind k) noexcept;

Schema parse_schema(std::string_view s);
Country parse_country(std::string_view s);
Block parse_block(std::string_view s);
AnswerKind parse_answer_kind(std::string_view s);

/// Persona fields of one respondent. The six matching covariates are optional
/// because survey exports leave them blank (or use negative "don't know"
/// codes); such respondents are kept in the roster but cannot be rendered or
/// matched.
struct DemographicProfile {
  std::string respondent_id;
  std::optional<int> age;
  std::optional<Gender> gender;
  std::string region;
  std::optional<int> education;
  std::optional<int> marital_status;
  std::optional<int> occupation;
  std::optional<int> income;
  // ANES only
  std::optional<int> ethnicity;
  std::optional<int> religion;
  std::optional<int> political_attention;
  double sampling_weight = 1.0;

  bool has_matching_covariates() const noexcept {
    return age && gender && education && marital_status && occupation && income;
  }

  bool operator==(const DemographicProfile&) const = default;
};

struct QuestionSpec {
  std::string question_id;
  std::string short_label;
  Block block = Block::social_values;
  int scale_min = 1;
  int scale_max = 5;
  bool in_wave6 = true;
  bool in_wave7 = true;
  AnswerKind answer_kind = AnswerKind::likert;
  /// Item text as shown to the respondent.
  std::string text;
  /// Numbered answer options for multiple-choice items (option i has code i+1).
  std::vector<std::string> options;

  bool operator==(const QuestionSpec&) const = default;
};

/// Scale bounds every question in a block must use.
std::pair<int, int> block_scale(Block block) noexcept;

/// Throws Error(InvalidConfig) when the spec breaks a catalog invariant.
void validate_question(const QuestionSpec& spec);

/// Catalog files are a JSON array of QuestionSpec objects.
std::vector<QuestionSpec> parse_catalog(std::string_view json_text);
std::string catalog_to_json(const std::vector<QuestionSpec>& catalog);
std::vector<QuestionSpec> load_catalog(const std::filesystem::path& path);

const QuestionSpec& find_question(const std::vector<QuestionSpec>& catalog, std::string_view id);

/// A per-question column aligned to a roster; nullopt marks MISSING.
struct ResponseVector {
  std::string question_id;
  std::vector<std::optional<double>> values;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t count_missing() const noexcept;

  bool operator==(const ResponseVector&) const = default;
};

struct SurveySample {
  std::string sample_id;
  Country country = Country::other;
  Schema schema = Schema::wvs;
  std::vector<DemographicProfile> roster;
  std::map<std::string, ResponseVector> responses;
  /// Response columns in file order.
  std::vector<std::string> question_order;

  std::size_t n() const noexcept { return roster.size(); }
  std::optional<std::size_t> index_of(std::string_view respondent_id) const;

  bool operator==(const SurveySample&) const = default;
};

struct LoadOptions {
  Schema schema = Schema::wvs;
  Country country = Country::other;
  std::string sample_id;
  /// Declared sample size of a canonical file, checked after load.
  std::optional<std::size_t> expected_n;
};

SurveySample read_sample(std::istream& in, const LoadOptions& options,
                         const std::vector<QuestionSpec>& catalog);
SurveySample load_sample(const std::filesystem::path& path, const LoadOptions& options,
                         const std::vector<QuestionSpec>& catalog);

/// Writes the canonical CSV layout read by read_sample.
void write_sample(std::ostream& out, const SurveySample& sample);
void save_sample(const std::filesystem::path& path, const SurveySample& sample);

const ResponseVector& response_vector(const SurveySample& sample, std::string_view question_id);

/// Shortest round-trip text for a response value ("" for MISSING).
std::string format_value(const std::optional<double>& v);

}  // namespace vpoll
