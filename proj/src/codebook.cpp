#include <algorithm>

#include <json.hpp>

#include "vpoll/error.hpp"
#include "vpoll/persona_prompt.hpp"

namespace vpoll {

Codebook::Codebook(Schema schema, std::vector<CodebookEntry> entries)
    : schema_(schema), entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    for (std::size_t j = i + 1; j < entries_.size(); ++j) {
      if (entries_[i].field == entries_[j].field && entries_[i].code == entries_[j].code) {
        throw Error(Errc::InvalidConfig, "duplicate codebook entry " + entries_[i].field + "=" +
                                             std::to_string(entries_[i].code));
      }
    }
  }
}

std::optional<std::string_view> Codebook::phrase(std::string_view field, int code) const noexcept {
  for (const auto& e : entries_) {
    if (e.field == field && e.code == code) return e.phrase;
  }
  return std::nullopt;
}

const std::string& Codebook::require(std::string_view field, std::optional<int> code) const {
  if (code) {
    for (const auto& e : entries_) {
      if (e.field == field && e.code == *code) return e.phrase;
    }
  }
  throw Error(Errc::UnresolvableCode,
              std::string(field) + "=" + (code ? std::to_string(*code) : std::string("MISSING")));
}

std::vector<int> Codebook::codes(std::string_view field) const {
  std::vector<int> out;
  for (const auto& e : entries_) {
    if (e.field == field) out.push_back(e.code);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string Codebook::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = to_string(schema_);
  auto& fields = j["fields"];
  fields = nlohmann::ordered_json::object();
  for (const auto& e : entries_) {
    fields[e.field][std::to_string(e.code)] = e.phrase;
  }
  return j.dump(2) + "\n";
}

namespace {

std::vector<CodebookEntry> numbered(const std::string& field, int first, std::initializer_list<const char*> phrases) {
  std::vector<CodebookEntry> out;
  int code = first;
  for (const char* p : phrases) out.push_back({field, code++, p});
  return out;
}

void append(std::vector<CodebookEntry>& dst, std::vector<CodebookEntry> src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

Codebook make_wvs() {
  std::vector<CodebookEntry> e;
  append(e, numbered("education", 0,
                     {"an early childhood education level", "a primary education level",
                      "a lower secondary education level", "an upper secondary education level",
                      "a post-secondary non-tertiary education level", "a short-cycle tertiary education level",
                      "a bachelor or equivalent education level", "a master or equivalent education level",
                      "a doctoral or equivalent education level"}));
  append(e, numbered("marital_status", 1,
                     {"married", "living together as married", "divorced", "separated", "widowed", "single"}));
  append(e, numbered("occupation", 1,
                     {"work in a professional and technical field (for example: doctor, teacher, engineer, artist, "
                      "accountant, nurse)",
                      "work in higher administrative (for example: banker, executive in big business, high "
                      "government official, union official)",
                      "work in clerical (for example: secretary, clerk, office manager, civil servant, bookkeeper)",
                      "work in sales (for example: sales manager, shop owner, shop assistant, insurance agent, buyer)",
                      "work in service (for example: restaurant owner, police officer, waitress, barber, caretaker)",
                      "work as a skilled worker (for example: foreman, motor mechanic, printer, seamstress, tool and "
                      "die maker, electrician)",
                      "work as a semi-skilled worker (for example: bricklayer, bus driver, cannery worker, carpenter, "
                      "sheet metal worker, baker)",
                      "work as an unskilled worker (for example: laborer, porter, unskilled factory worker, cleaner)",
                      "work as a farm worker (for example: farm laborer, tractor driver)",
                      "work as a farm proprietor, farm manager", "are retired/pensioned",
                      "are a housewife not otherwise employed", "are a student", "are unemployed"}));
  for (int k = 0; k <= 10; ++k) e.push_back({"income", k, std::to_string(k)});
  return Codebook(Schema::wvs, std::move(e));
}

Codebook make_anes() {
  std::vector<CodebookEntry> e;
  append(e, numbered("ethnicity", 1,
                     {"non-Hispanic white", "non-Hispanic black", "Hispanic",
                      "non-Hispanic Asian or Native Hawaiian/other Pacific Islander",
                      "non-Hispanic Native American/Alaska Native or other race", "non-Hispanic of multiple races"}));
  append(e, numbered("education", 1,
                     {"a less than high school credential", "a high school diploma or equivalent",
                      "a some college but no degree", "an associate degree in college(occupational/vocational)",
                      "an associate degree in college(academic)", "a bachelors degree", "a masters degree",
                      "a professional school degree / doctoral degree"}));
  append(e, numbered("religion", 1,
                     {"belong to the Protestant faith", "belong to the Roman Catholic faith",
                      "belong to the Orthodox Christian (such as Greek or Russian Orthodox) faith",
                      "belong to the Latter-Day Saints(LDS) faith", "belong to the Jewish faith",
                      "belong to the Muslim faith", "belong to the Buddhist faith", "belong to the Hindu faith",
                      "belong to the Atheist faith", "belong to the Agnostic faith",
                      "belong to a minority religious group", "do not belong to a denomination"}));
  append(e, numbered("marital_status", 1,
                     {"married(spouse present)", "married(spouse absent)", "widowed", "divorced", "separated",
                      "never married"}));
  append(e, numbered("occupation", 1,
                     {"work in a for-profit company or organization",
                      "work in a non-profit organization (including tax-exempt and charitable organizations)",
                      "work in local government (for example: city or county school district)",
                      "work in state government (including state colleges/universities)",
                      "serve on active duty U.S. Armed Forces or Commissioned Corps",
                      "work as a federal government civilian employee",
                      "work as an owner of non-incorporated business, professional practice, or farm",
                      "work as an owner of incorporated business, professional practice, or farm",
                      "work without pay in a for-profit family business or farm for 15 hours or more per week"}));
  append(e, numbered("political_attention", 1,
                     {"always", "most of the time", "about half the time", "some of the time", "never"}));
  // 22-category family income (pre-tax, past 12 months).
  append(e, numbered("income_cat", 1,
                     {"under $9,999",          "$10,000-$14,999",   "$15,000-$19,999",   "$20,000-$24,999",
                      "$25,000-$29,999",       "$30,000-$34,999",   "$35,000-$39,999",   "$40,000-$44,999",
                      "$45,000-$49,999",       "$50,000-$59,999",   "$60,000-$64,999",   "$65,000-$69,999",
                      "$70,000-$74,999",       "$75,000-$79,999",   "$80,000-$89,999",   "$90,000-$99,999",
                      "$100,000-$109,999",     "$110,000-$124,999", "$125,000-$149,999", "$150,000-$174,999",
                      "$175,000-$249,999",     "$250,000 or more"}));
  return Codebook(Schema::anes, std::move(e));
}

}  // namespace

const Codebook& wvs_codebook() {
  static const Codebook cb = make_wvs();
  return cb;
}

const Codebook& anes_codebook() {
  static const Codebook cb = make_anes();
  return cb;
}

const Codebook& codebook_for(Schema schema) { return schema == Schema::wvs ? wvs_codebook() : anes_codebook(); }

}  // namespace vpoll
