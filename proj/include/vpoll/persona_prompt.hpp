#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vpoll/survey_data.hpp"

namespace vpoll {

struct CodebookEntry {
  std::string field;
  int code = 0;
  std::string phrase;
};

/// Code-to-phrase tables used to fill persona placeholders.
class Codebook {
 public:
  Codebook(Schema schema, std::vector<CodebookEntry> entries);

  Schema schema() const noexcept { return schema_; }
  std::span<const CodebookEntry> entries() const noexcept { return entries_; }

  std::optional<std::string_view> phrase(std::string_view field, int code) const noexcept;
  /// Throws Error(UnresolvableCode).
  const std::string& require(std::string_view field, std::optional<int> code) const;
  /// Codes defined for a field, ascending.
  std::vector<int> codes(std::string_view field) const;

  std::string to_json() const;

 private:
  Schema schema_;
  std::vector<CodebookEntry> entries_;
};

const Codebook& wvs_codebook();
const Codebook& anes_codebook();
const Codebook& codebook_for(Schema schema);

enum class PromptContext { wvs2017, anes2016, anes2020, anes2024 };

std::string_view to_string(PromptContext c) noexcept;

struct BlockText {
  Block block;
  std::string preamble;
  bool operator==(const BlockText&) const = default;
};

/// Everything needed to query one respondent: persona (step 1), scenario
/// (step 2) and the questions (step 3) grouped in blocks.
struct PromptBundle {
  std::string respondent_id;
  PromptContext context = PromptContext::wvs2017;
  int year = 2017;
  std::string persona_text;
  std::string scenario_text;
  std::vector<BlockText> blocks;
  std::vector<std::pair<std::string, std::string>> question_texts;
  /// Catalog entries behind question_texts, same order.
  std::vector<QuestionSpec> questions;

  bool operator==(const PromptBundle&) const = default;
};

struct WvsRenderOptions {
  int year = 2017;
};

/// Step-3 preamble for a block, as read to respondents.
std::string_view block_preamble(Block block);

PromptBundle render_wvs_prompt(const DemographicProfile& profile, Country country,
                               const std::vector<QuestionSpec>& catalog, const WvsRenderOptions& options = {});

/// Supported cycles: 2016, 2020, 2024.
PromptBundle render_anes_prompt(const DemographicProfile& profile, int cycle);

/// The single ballot item asked in an ANES bundle.
QuestionSpec ballot_question(int cycle);

/// "a" or "an" for "<age>-year-old".
std::string_view article_for_age(int age) noexcept;

/// Human-readable rendering of a bundle (steps 1-3), used for audit dumps.
std::string render_transcript(const PromptBundle& bundle);

/// Item text with multiple-choice options appended, one per line.
std::string item_with_options(const QuestionSpec& q);

}  // namespace vpoll
