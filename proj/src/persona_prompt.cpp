#include "vpoll/persona_prompt.hpp"

#include <algorithm>

#include "vpoll/error.hpp"

namespace vpoll {

std::string_view to_string(PromptContext c) noexcept {
  switch (c) {
    case PromptContext::wvs2017: return "wvs2017";
    case PromptContext::anes2016: return "anes2016";
    case PromptContext::anes2020: return "anes2020";
    case PromptContext::anes2024: return "anes2024";
  }
  return "wvs2017";
}

std::string_view block_preamble(Block block) {
  switch (block) {
    case Block::social_values:
      return "How would you feel about the following statements? Do you agree or disagree with them? "
             "Choose 1 for Agree strongly, 2 for Agree, 3 for Neither agree nor disagree, 4 for Disagree, "
             "and 5 for Disagree strongly.";
    case Block::trust:
      return "I'd like to ask you how much you trust people from various groups. Could you tell me for each "
             "whether you trust people from this group completely, somewhat, not very much or not at all? "
             "Choose 1 for Trust completely, 2 for Trust somewhat, 3 for Do not trust very much, 4 for Do not "
             "trust at all.";
    case Block::common_sense:
      return "Here are some questions about international organizations. Many people don't know the answers to "
             "these questions, but if you do please tell me.";
    case Block::ethics:
      return "Please tell me for each of the following actions whether you think it can always be justified, "
             "never be justified, or something in between.\n"
             "1 = Never justifiable, 2 , 3 , 4 , 5 , 6 , 7 , 8 , 9 , 10 = Always justifiable";
    case Block::out_of_sample:
      return "For each of the following statements, can you tell me how strongly you agree or disagree with "
             "each. Do you strongly agree, agree, disagree, or strongly disagree? Choose 1 for Strongly agree, "
             "2 for Agree, 3 for Disagree, and 4 for Strongly disagree.";
    case Block::ballot:
      return "Please select the presidential and vice presidential candidates you support:";
  }
  return {};
}

std::string_view article_for_age(int age) noexcept {
  // Spoken forms starting with a vowel: eight, eleven, eighteen, eighty-*.
  const std::string digits = std::to_string(age);
  if (digits.front() == '8' || age == 11 || age == 18) return "an";
  return "a";
}

std::string item_with_options(const QuestionSpec& q) {
  std::string out = q.text;
  for (std::size_t i = 0; i < q.options.size(); ++i) {
    out += "\n   " + std::to_string(q.scale_min + static_cast<int>(i)) + ". " + q.options[i];
  }
  return out;
}

namespace {

void fill_questions(PromptBundle& bundle, const std::vector<QuestionSpec>& catalog) {
  for (const auto& q : catalog) {
    if (q.block == Block::ballot) continue;
    auto has_block = std::any_of(bundle.blocks.begin(), bundle.blocks.end(),
                                 [&](const BlockText& b) { return b.block == q.block; });
    if (!has_block) bundle.blocks.push_back({q.block, std::string(block_preamble(q.block))});
  }
  // Questions are grouped by block, blocks in order of first appearance.
  for (const auto& b : bundle.blocks) {
    for (const auto& q : catalog) {
      if (q.block != b.block) continue;
      bundle.question_texts.emplace_back(q.question_id, item_with_options(q));
      bundle.questions.push_back(q);
    }
  }
}

struct Ticket {
  const char* democratic;
  const char* republican;
};

Ticket ticket_for(int cycle) {
  switch (cycle) {
    case 2016: return {"HILLARY R. CLINTON / TIMOTHY M. KAINE", "DONALD J. TRUMP / MICHAEL R. PENCE"};
    case 2020: return {"JOSEPH R. BIDEN / KAMALA D. HARRIS", "DONALD J. TRUMP / MICHAEL R. PENCE"};
    case 2024: return {"KAMALA D. HARRIS / TIM WALZ", "DONALD J. TRUMP / J.D. VANCE"};
    default: throw Error(Errc::InvalidConfig, "unsupported election cycle " + std::to_string(cycle));
  }
}

PromptContext anes_context(int cycle) {
  switch (cycle) {
    case 2016: return PromptContext::anes2016;
    case 2020: return PromptContext::anes2020;
    default: return PromptContext::anes2024;
  }
}

std::string ballot_text(int cycle) {
  const Ticket t = ticket_for(cycle);
  std::string s = std::string(block_preamble(Block::ballot)) + "\n\n";
  s += "1. " + std::string(t.democratic) + " (Democratic)\n";
  s += "2. " + std::string(t.republican) + " (Republican)\n\n";
  s += "Note: Each voter can only select one party ticket. The party label accompanying the candidates "
       "indicates that they are the official nominees of the party shown.\n\n";
  s += "Please select your choice: 1 or 2. Respond only with the corresponding number.";
  return s;
}

}  // namespace

PromptBundle render_wvs_prompt(const DemographicProfile& profile, Country country,
                               const std::vector<QuestionSpec>& catalog, const WvsRenderOptions& options) {
  std::string nationality;
  std::string homeland;
  switch (country) {
    case Country::US:
      nationality = "American";
      homeland = "America";
      break;
    case Country::CN:
      nationality = "Chinese";
      homeland = "China";
      break;
    default:
      throw Error(Errc::InvalidConfig, "WVS persona supports US and CN samples only");
  }
  const Codebook& cb = wvs_codebook();
  if (!profile.age) throw Error(Errc::UnresolvableCode, "age=MISSING");
  if (!profile.gender) throw Error(Errc::UnresolvableCode, "gender=MISSING");

  PromptBundle b;
  b.respondent_id = profile.respondent_id;
  b.context = PromptContext::wvs2017;
  b.year = options.year;
  b.persona_text = "It is the year " + std::to_string(options.year) + ". You are a " + std::to_string(*profile.age) +
                   "-year-old " + std::string(to_string(*profile.gender)) + " " + nationality + " living in " +
                   profile.region + ", with " + cb.require("education", profile.education) +
                   ". Your marital status is " + cb.require("marital_status", profile.marital_status) +
                   ", and you " + cb.require("occupation", profile.occupation) +
                   ". On an income scale on which 1 indicates the lowest income group and 10 the highest income "
                   "group in your country, your household is " +
                   cb.require("income", profile.income) + ".";
  b.scenario_text =
      "Hello. I am from the World Values Survey Association. We are carrying out a global study of what people "
      "value in life. This study will interview samples representing most of the world's people. Your name has "
      "been selected at random as part of a representative sample of the people in " +
      homeland +
      ". I'd like to ask your views on a number of different subjects. Your input will be treated strictly "
      "confidential, but it will contribute to a better understanding of what people all over the world "
      "believe and want out of life.";
  fill_questions(b, catalog);
  return b;
}

QuestionSpec ballot_question(int cycle) {
  QuestionSpec q;
  q.question_id = "vote_" + std::to_string(cycle);
  q.short_label = std::to_string(cycle) + " presidential vote";
  q.block = Block::ballot;
  q.scale_min = 1;
  q.scale_max = 2;
  q.in_wave6 = false;
  q.in_wave7 = false;
  q.answer_kind = AnswerKind::ballot_choice;
  q.text = ballot_text(cycle);
  return q;
}

PromptBundle render_anes_prompt(const DemographicProfile& profile, int cycle) {
  const QuestionSpec ballot = ballot_question(cycle);  // validates cycle
  const Codebook& cb = anes_codebook();
  if (!profile.age) throw Error(Errc::UnresolvableCode, "age=MISSING");
  if (!profile.gender) throw Error(Errc::UnresolvableCode, "gender=MISSING");

  PromptBundle b;
  b.respondent_id = profile.respondent_id;
  b.context = anes_context(cycle);
  b.year = cycle;
  b.persona_text = "It is the year " + std::to_string(cycle) + ". You are " +
                   std::string(article_for_age(*profile.age)) + " " + std::to_string(*profile.age) +
                   "-year-old " + cb.require("ethnicity", profile.ethnicity) + " " +
                   std::string(to_string(*profile.gender)) +
                   " living in the United States, who are registered to vote in " + profile.region + ", with " +
                   cb.require("education", profile.education) + " education level and you " +
                   cb.require("religion", profile.religion) + ". Your marital status is " +
                   cb.require("marital_status", profile.marital_status) + ", and you " +
                   cb.require("occupation", profile.occupation) + ", " +
                   cb.require("political_attention", profile.political_attention) +
                   " paying attention to what's going on in government and politics. The income of all members of "
                   "your family during the past 12 months before taxes is " +
                   cb.require("income_cat", profile.income) + ".";
  b.scenario_text =
      "Hello!\n\n"
      "The presidential election plays a crucial role in determining the direction of the United States for the "
      "next four years, influencing not only domestic policies like the economy and healthcare but also having a "
      "profound impact on global affairs.\n\n"
      "Every vote matters in shaping the future of the nation, as participating in the election is not only a "
      "right but also a responsibility.\n\n"
      "We encourage everyone to make decisions based on policies and stances rather than emotions or "
      "stereotypes.\n\n"
      "Now we are conducting a scientific study involving a mock election for the U.S. presidential election.\n\n"
      "Assume that you are a voter participating in the " +
      std::to_string(cycle) +
      " U.S. election. You will be asked to cast your votes. After voting, the results will be shared. Your "
      "voting results will only be used for academic analysis, so please don't worry and feel free to vote.\n\n"
      "U.S. Presidential and Vice Presidential Election - Vote for One Party";
  b.question_texts.emplace_back(ballot.question_id, ballot.text);
  b.questions.push_back(ballot);
  return b;
}

std::string render_transcript(const PromptBundle& bundle) {
  std::string out = bundle.persona_text + "\n\n" + bundle.scenario_text + "\n\n";
  if (bundle.blocks.empty()) {
    for (const auto& [id, text] : bundle.question_texts) out += text + "\n";
    return out;
  }
  for (std::size_t bi = 0; bi < bundle.blocks.size(); ++bi) {
    const auto& blk = bundle.blocks[bi];
    if (bi) out += "\n";
    out += blk.preamble + "\n";
    for (std::size_t i = 0; i < bundle.questions.size(); ++i) {
      if (bundle.questions[i].block == blk.block) out += "- " + bundle.question_texts[i].second + "\n";
    }
  }
  return out;
}

}  // namespace vpoll
