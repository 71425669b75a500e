#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "vpoll/error.hpp"
#include "vpoll/persona_prompt.hpp"

using namespace vpoll;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<QuestionSpec>& catalog() {
  static const auto c = load_catalog(std::filesystem::path(VPOLL_DATA_DIR) / "wvs_catalog.json");
  return c;
}

std::vector<QuestionSpec> wave7(const std::vector<QuestionSpec>& all) {
  std::vector<QuestionSpec> out;
  for (const auto& q : all) {
    if (q.in_wave7) out.push_back(q);
  }
  return out;
}

DemographicProfile wvs_canonical() {
  DemographicProfile p;
  p.respondent_id = "canon";
  p.age = 34;
  p.gender = Gender::female;
  p.region = "Ohio";
  p.education = 6;
  p.marital_status = 1;
  p.occupation = 1;
  p.income = 5;
  return p;
}

DemographicProfile anes_canonical() {
  DemographicProfile p;
  p.respondent_id = "canon";
  p.age = 18;
  p.gender = Gender::male;
  p.region = "Wisconsin";
  p.ethnicity = 1;
  p.education = 6;
  p.religion = 12;
  p.marital_status = 6;
  p.occupation = 1;
  p.political_attention = 2;
  p.income = 1;
  return p;
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

TEST_CASE("WVS canonical profile matches the golden transcript") {
  const auto b = render_wvs_prompt(wvs_canonical(), Country::US, wave7(catalog()));
  CHECK(b.persona_text.rfind("It is the year 2017. You are a 34-year-old female American living in Ohio, with a "
                             "bachelor or equivalent education level.",
                             0) == 0);
  CHECK(render_transcript(b) == slurp(std::filesystem::path(VPOLL_GOLDEN_DIR) / "wvs_us_canonical.txt"));
}

TEST_CASE("ANES canonical profile matches the golden transcript") {
  const auto b = render_anes_prompt(anes_canonical(), 2024);
  CHECK(render_transcript(b) == slurp(std::filesystem::path(VPOLL_GOLDEN_DIR) / "anes_2024_canonical.txt"));
  CHECK(b.persona_text.find("do not belong to a denomination") != std::string::npos);
  CHECK(b.question_texts.at(0).second.find("1. KAMALA D. HARRIS / TIM WALZ (Democratic)\n"
                                           "2. DONALD J. TRUMP / J.D. VANCE (Republican)") != std::string::npos);
}

TEST_CASE("ballot tickets per cycle") {
  CHECK(ballot_question(2016).text + "\n" == slurp(std::filesystem::path(VPOLL_GOLDEN_DIR) / "anes_2016_ballot.txt"));
  CHECK(ballot_question(2020).text.find("JOSEPH R. BIDEN / KAMALA D. HARRIS") != std::string::npos);
  CHECK(ballot_question(2020).text.find("DONALD J. TRUMP / MICHAEL R. PENCE") != std::string::npos);
  for (int cycle : {2016, 2020, 2024}) {
    CHECK(ballot_question(cycle).text.ends_with("Respond only with the corresponding number."));
  }
  CHECK_THROWS_AS(ballot_question(2012), Error);
}

TEST_CASE("unresolvable codes are reported") {
  auto p = wvs_canonical();
  p.occupation = 99;
  CHECK(code_of([&] { render_wvs_prompt(p, Country::US, catalog()); }) == Errc::UnresolvableCode);
  auto a = anes_canonical();
  a.religion.reset();
  CHECK(code_of([&] { render_anes_prompt(a, 2024); }) == Errc::UnresolvableCode);
}

TEST_CASE("Chinese respondents get Chinese nationality and a province") {
  auto p = wvs_canonical();
  p.region = "Guangdong";
  const auto b = render_wvs_prompt(p, Country::CN, catalog());
  CHECK(b.persona_text.find("female Chinese living in Guangdong") != std::string::npos);
  CHECK(b.scenario_text.find("the people in China.") != std::string::npos);
  CHECK(b.scenario_text.find("America") == std::string::npos);
}

TEST_CASE("rendering is pure and leaves no placeholders") {
  const auto a = render_wvs_prompt(wvs_canonical(), Country::US, catalog());
  const auto b = render_wvs_prompt(wvs_canonical(), Country::US, catalog());
  CHECK(a == b);
  for (const auto& text : {render_transcript(a), render_transcript(render_anes_prompt(anes_canonical(), 2016))}) {
    CHECK(text.find('[') == std::string::npos);
    CHECK(text.find(']') == std::string::npos);
  }
}

TEST_CASE("every codebook value renders") {
  const Codebook& wvs = wvs_codebook();
  for (const auto& e : wvs.entries()) {
    auto p = wvs_canonical();
    if (e.field == "education") p.education = e.code;
    if (e.field == "marital_status") p.marital_status = e.code;
    if (e.field == "occupation") p.occupation = e.code;
    if (e.field == "income") p.income = e.code;
    const auto b = render_wvs_prompt(p, Country::US, catalog());
    CHECK(b.persona_text.find(e.phrase) != std::string::npos);
  }
  const Codebook& anes = anes_codebook();
  for (const auto& e : anes.entries()) {
    auto p = anes_canonical();
    if (e.field == "ethnicity") p.ethnicity = e.code;
    if (e.field == "education") p.education = e.code;
    if (e.field == "religion") p.religion = e.code;
    if (e.field == "marital_status") p.marital_status = e.code;
    if (e.field == "occupation") p.occupation = e.code;
    if (e.field == "political_attention") p.political_attention = e.code;
    if (e.field == "income_cat") p.income = e.code;
    const auto b = render_anes_prompt(p, 2024);
    CHECK(b.persona_text.find(e.phrase) != std::string::npos);
  }
}

TEST_CASE("bundled codebook files are current") {
  for (auto schema : {Schema::wvs, Schema::anes}) {
    const auto path = std::filesystem::path(VPOLL_DATA_DIR) / "codebooks" / (std::string(to_string(schema)) + ".json");
    CHECK(slurp(path) == codebook_for(schema).to_json() + "\n");
  }
}

TEST_CASE("article before the age") {
  CHECK(article_for_age(18) == "an");
  CHECK(article_for_age(11) == "an");
  CHECK(article_for_age(8) == "an");
  CHECK(article_for_age(83) == "an");
  CHECK(article_for_age(34) == "a");
  CHECK(article_for_age(80 - 1) == "a");
  auto p = anes_canonical();
  p.age = 45;
  CHECK(render_anes_prompt(p, 2020).persona_text.find("You are a 45-year-old") != std::string::npos);
}

TEST_CASE("multiple-choice items list their options") {
  const auto& un = find_question(catalog(), "un_question");
  const auto text = item_with_options(un);
  CHECK(text.find("\n   1. France") != std::string::npos);
  CHECK(text.find("\n   3. India") != std::string::npos);
}
