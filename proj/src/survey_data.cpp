#include "vpoll/survey_data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "vpoll/csv.hpp"
#include "vpoll/error.hpp"
#include "vpoll/regions.hpp"

namespace vpoll {

using nlohmann::json;

std::string_view to_string(Schema s) noexcept { return s == Schema::wvs ? "wvs" : "anes"; }

std::string_view to_string(Gender g) noexcept { return g == Gender::male ? "male" : "female"; }

std::string_view to_string(Country c) noexcept {
  switch (c) {
    case Country::US: return "US";
    case Country::CN: return "CN";
    case Country::DE: return "DE";
    case Country::other: return "other";
  }
  return "other";
}

std::string_view to_string(Block b) noexcept {
  switch (b) {
    case Block::social_values: return "social_values";
    case Block::trust: return "trust";
    case Block::common_sense: return "common_sense";
    case Block::ethics: return "ethics";
    case Block::out_of_sample: return "out_of_sample";
    case Block::ballot: return "ballot";
  }
  return "social_values";
}

std::string_view to_string(AnswerKind k) noexcept {
  switch (k) {
    case AnswerKind::likert: return "likert";
    case AnswerKind::multiple_choice: return "multiple_choice";
    case AnswerKind::ballot_choice: return "ballot_choice";
  }
  return "likert";
}

Schema parse_schema(std::string_view s) {
  if (s == "wvs") return Schema::wvs;
  if (s == "anes") return Schema::anes;
  throw Error(Errc::InvalidConfig, "unknown schema '" + std::string(s) + "'");
}

Country parse_country(std::string_view s) {
  if (s == "US") return Country::US;
  if (s == "CN") return Country::CN;
  if (s == "DE") return Country::DE;
  if (s == "other") return Country::other;
  throw Error(Errc::InvalidConfig, "unknown country '" + std::string(s) + "'");
}

Block parse_block(std::string_view s) {
  for (auto b : {Block::social_values, Block::trust, Block::common_sense, Block::ethics,
                 Block::out_of_sample, Block::ballot}) {
    if (to_string(b) == s) return b;
  }
  throw Error(Errc::InvalidConfig, "unknown block '" + std::string(s) + "'");
}

AnswerKind parse_answer_kind(std::string_view s) {
  for (auto k : {AnswerKind::likert, AnswerKind::multiple_choice, AnswerKind::ballot_choice}) {
    if (to_string(k) == s) return k;
  }
  throw Error(Errc::InvalidConfig, "unknown answer_kind '" + std::string(s) + "'");
}

std::pair<int, int> block_scale(Block block) noexcept {
  switch (block) {
    case Block::social_values: return {1, 5};
    case Block::trust: return {1, 4};
    case Block::common_sense: return {1, 3};
    case Block::ethics: return {1, 10};
    case Block::out_of_sample: return {1, 4};
    case Block::ballot: return {1, 2};
  }
  return {1, 5};
}

void validate_question(const QuestionSpec& spec) {
  if (spec.question_id.empty()) throw Error(Errc::InvalidConfig, "question with empty id");
  if (spec.scale_min >= spec.scale_max) {
    throw Error(Errc::InvalidConfig, spec.question_id + ": scale_min must be < scale_max");
  }
  const auto [lo, hi] = block_scale(spec.block);
  if (spec.scale_min != lo || spec.scale_max != hi) {
    throw Error(Errc::InvalidConfig, spec.question_id + ": block " + std::string(to_string(spec.block)) +
                                         " uses scale " + std::to_string(lo) + ".." + std::to_string(hi));
  }
  if (spec.answer_kind == AnswerKind::multiple_choice &&
      static_cast<int>(spec.options.size()) != spec.scale_max - spec.scale_min + 1) {
    throw Error(Errc::InvalidConfig, spec.question_id + ": option count does not match scale");
  }
}

std::vector<QuestionSpec> parse_catalog(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("catalog: ") + e.what());
  }
  if (!j.is_array()) throw Error(Errc::InvalidConfig, "catalog must be a JSON array");

  std::vector<QuestionSpec> out;
  std::set<std::string> seen;
  for (const auto& item : j) {
    try {
      QuestionSpec q;
      q.question_id = item.at("question_id").get<std::string>();
      q.short_label = item.at("short_label").get<std::string>();
      q.block = parse_block(item.at("block").get<std::string>());
      q.scale_min = item.at("scale_min").get<int>();
      q.scale_max = item.at("scale_max").get<int>();
      q.in_wave6 = item.at("in_wave6").get<bool>();
      q.in_wave7 = item.at("in_wave7").get<bool>();
      q.answer_kind = parse_answer_kind(item.at("answer_kind").get<std::string>());
      q.text = item.value("text", std::string{});
      q.options = item.value("options", std::vector<std::string>{});
      validate_question(q);
      if (!seen.insert(q.question_id).second) {
        throw Error(Errc::InvalidConfig, "duplicate question_id " + q.question_id);
      }
      out.push_back(std::move(q));
    } catch (const json::exception& e) {
      throw Error(Errc::InvalidConfig, std::string("catalog entry: ") + e.what());
    }
  }
  return out;
}

std::string catalog_to_json(const std::vector<QuestionSpec>& catalog) {
  json j = json::array();
  for (const auto& q : catalog) {
    json item = {
        {"question_id", q.question_id},
        {"short_label", q.short_label},
        {"block", to_string(q.block)},
        {"scale_min", q.scale_min},
        {"scale_max", q.scale_max},
        {"in_wave6", q.in_wave6},
        {"in_wave7", q.in_wave7},
        {"answer_kind", to_string(q.answer_kind)},
        {"text", q.text},
    };
    if (!q.options.empty()) item["options"] = q.options;
    j.push_back(std::move(item));
  }
  return j.dump(2) + "\n";
}

std::vector<QuestionSpec> load_catalog(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open catalog " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str());
}

const QuestionSpec& find_question(const std::vector<QuestionSpec>& catalog, std::string_view id) {
  auto it = std::find_if(catalog.begin(), catalog.end(),
                         [&](const QuestionSpec& q) { return q.question_id == id; });
  if (it == catalog.end()) throw Error(Errc::UnknownQuestion, std::string(id));
  return *it;
}

std::size_t ResponseVector::count_missing() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](const auto& v) { return !v.has_value(); }));
}

std::optional<std::size_t> SurveySample::index_of(std::string_view respondent_id) const {
  for (std::size_t i = 0; i < roster.size(); ++i) {
    if (roster[i].respondent_id == respondent_id) return i;
  }
  return std::nullopt;
}

const ResponseVector& response_vector(const SurveySample& sample, std::string_view question_id) {
  auto it = sample.responses.find(std::string(question_id));
  if (it == sample.responses.end()) throw Error(Errc::UnknownQuestion, std::string(question_id));
  return it->second;
}

std::string format_value(const std::optional<double>& v) {
  if (!v) return {};
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, res.ptr);
}

namespace {

struct CodeRange {
  const char* column;
  int lo;
  int hi;
};

// Ranges follow the persona codebooks.
constexpr CodeRange kWvsEducation{"education", 0, 8};
constexpr CodeRange kWvsOccupation{"occupation", 1, 14};
constexpr CodeRange kWvsIncome{"income", 0, 10};
constexpr CodeRange kAnesEducation{"education", 1, 8};
constexpr CodeRange kAnesOccupation{"occupation", 1, 9};
constexpr CodeRange kAnesIncome{"income_cat", 1, 22};
constexpr CodeRange kMarital{"marital_status", 1, 6};
constexpr CodeRange kEthnicity{"ethnicity", 1, 6};
constexpr CodeRange kReligion{"religion", 1, 12};
constexpr CodeRange kAttention{"political_attention", 1, 5};

constexpr int kMinAge = 16;
constexpr int kMaxAge = 120;

const std::vector<std::string>& wvs_columns() {
  static const std::vector<std::string> cols = {"respondent_id", "age", "gender", "region", "education",
                                                "marital_status", "occupation", "income"};
  return cols;
}

const std::vector<std::string>& anes_columns() {
  static const std::vector<std::string> cols = {
      "respondent_id", "age", "gender", "education", "marital_status", "occupation", "ethnicity",
      "religion", "political_attention", "income_cat", "sampling_weight", "state"};
  return cols;
}

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "MISSING" || s == "." || s == "refused" || s == "DK";
}

class RowReader {
 public:
  RowReader(const csv::Record& rec, const std::unordered_map<std::string, std::size_t>& index)
      : rec_(rec), index_(index) {}

  bool has(const std::string& col) const { return index_.count(col) > 0; }

  std::string raw(const std::string& col) const { return csv::trim(rec_.fields.at(index_.at(col))); }

  [[noreturn]] void malformed(const std::string& col, const std::string& why) const {
    throw Error(Errc::MalformedRow,
                "line " + std::to_string(rec_.line) + ", column '" + col + "': " + why);
  }

  std::optional<long> integer(const std::string& col) const {
    const std::string s = raw(col);
    if (is_missing_token(s)) return std::nullopt;
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) malformed(col, "not an integer: '" + s + "'");
    return v;
  }

  /// Coded field: blank or negative survey codes are MISSING.
  std::optional<int> code(const CodeRange& r) const {
    auto v = integer(r.column);
    if (!v || *v < 0) return std::nullopt;
    if (*v < r.lo || *v > r.hi) {
      throw Error(Errc::CodeOutOfRange, "field '" + std::string(r.column) + "' value " + std::to_string(*v) +
                                            " outside " + std::to_string(r.lo) + ".." + std::to_string(r.hi) +
                                            " (line " + std::to_string(rec_.line) + ")");
    }
    return static_cast<int>(*v);
  }

  std::optional<int> age() const {
    auto v = integer("age");
    if (!v || *v < 0) return std::nullopt;
    if (*v < kMinAge || *v > kMaxAge) {
      throw Error(Errc::CodeOutOfRange, "field 'age' value " + std::to_string(*v) + " outside " +
                                            std::to_string(kMinAge) + ".." + std::to_string(kMaxAge) +
                                            " (line " + std::to_string(rec_.line) + ")");
    }
    return static_cast<int>(*v);
  }

  std::optional<Gender> gender() const {
    const std::string s = raw("gender");
    if (is_missing_token(s) || (!s.empty() && s[0] == '-')) return std::nullopt;
    if (s == "male" || s == "1") return Gender::male;
    if (s == "female" || s == "2") return Gender::female;
    throw Error(Errc::CodeOutOfRange, "field 'gender' value '" + s + "' (line " + std::to_string(rec_.line) + ")");
  }

  double weight(bool required) const {
    if (!has("sampling_weight")) return 1.0;
    const std::string s = raw("sampling_weight");
    if (s.empty()) {
      if (required) malformed("sampling_weight", "blank");
      return 1.0;
    }
    double w = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
    if (ec != std::errc{} || p != s.data() + s.size()) malformed("sampling_weight", "not a number: '" + s + "'");
    if (!(w > 0)) {
      throw Error(Errc::CodeOutOfRange, "field 'sampling_weight' value " + s + " must be > 0 (line " +
                                            std::to_string(rec_.line) + ")");
    }
    return w;
  }

  std::optional<double> response(const std::string& col, const QuestionSpec& q) const {
    const std::string s = raw(col);
    if (is_missing_token(s)) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) malformed(col, "not a number: '" + s + "'");
    if (v < 0) return std::nullopt;  // survey "don't know"/"refused" codes
    if (v < q.scale_min || v > q.scale_max) {
      throw Error(Errc::CodeOutOfRange, "field '" + col + "' value " + s + " outside " +
                                            std::to_string(q.scale_min) + ".." + std::to_string(q.scale_max) +
                                            " (line " + std::to_string(rec_.line) + ")");
    }
    return v;
  }

  std::size_t line() const { return rec_.line; }

 private:
  const csv::Record& rec_;
  const std::unordered_map<std::string, std::size_t>& index_;
};

std::string opt_str(const std::optional<int>& v) { return v ? std::to_string(*v) : std::string{}; }

}  // namespace

SurveySample read_sample(std::istream& in, const LoadOptions& options, const std::vector<QuestionSpec>& catalog) {
  const auto records = csv::read_all(in);
  if (records.empty()) throw Error(Errc::MalformedRow, "line 1: missing header");

  const auto& header = records.front();
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.fields.size(); ++c) {
    const std::string name = csv::trim(header.fields[c]);
    if (!index.emplace(name, c).second) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(header.line) + ", column '" + name + "': duplicated");
    }
  }
  const auto& required = options.schema == Schema::wvs ? wvs_columns() : anes_columns();
  for (const auto& col : required) {
    if (!index.count(col)) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(header.line) + ", column '" + col + "': missing from header");
    }
  }

  SurveySample sample;
  sample.sample_id = options.sample_id;
  sample.country = options.country;
  sample.schema = options.schema;

  std::vector<std::pair<std::string, const QuestionSpec*>> qcols;
  for (const auto& f : header.fields) {
    const std::string name = csv::trim(f);
    if (name.rfind("q_", 0) != 0) continue;
    const std::string qid = name.substr(2);
    const auto& spec = find_question(catalog, qid);
    qcols.emplace_back(name, &spec);
    sample.question_order.push_back(qid);
    sample.responses[qid].question_id = qid;
  }

  std::unordered_set<std::string> ids;
  const Country region_country = options.schema == Schema::anes ? Country::US : options.country;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.fields.size()) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(rec.line) + ", column " +
                                          std::to_string(std::min(rec.fields.size(), header.fields.size()) + 1) +
                                          ": expected " + std::to_string(header.fields.size()) + " fields, got " +
                                          std::to_string(rec.fields.size()));
    }
    RowReader row(rec, index);
    DemographicProfile p;
    p.respondent_id = row.raw("respondent_id");
    if (p.respondent_id.empty()) row.malformed("respondent_id", "blank");
    if (!ids.insert(p.respondent_id).second) {
      throw Error(Errc::DuplicateRespondentId, p.respondent_id + " (line " + std::to_string(rec.line) + ")");
    }
    p.age = row.age();
    p.gender = row.gender();
    p.marital_status = row.code(kMarital);

    if (options.schema == Schema::wvs) {
      p.region = row.raw("region");
      p.education = row.code(kWvsEducation);
      p.occupation = row.code(kWvsOccupation);
      p.income = row.code(kWvsIncome);
      p.sampling_weight = row.weight(false);
    } else {
      p.region = row.raw("state");
      if (row.has("region") && !row.raw("region").empty() && row.raw("region") != p.region) {
        row.malformed("region", "disagrees with state");
      }
      p.education = row.code(kAnesEducation);
      p.occupation = row.code(kAnesOccupation);
      p.income = row.code(kAnesIncome);
      if (row.has("income") && row.integer("income") && row.integer("income") != p.income) {
        row.malformed("income", "disagrees with income_cat");
      }
      p.ethnicity = row.code(kEthnicity);
      p.religion = row.code(kReligion);
      p.political_attention = row.code(kAttention);
      p.sampling_weight = row.weight(true);
    }
    if (p.region.empty()) row.malformed(options.schema == Schema::wvs ? "region" : "state", "blank");
    if (!is_known_region(region_country, p.region)) {
      throw Error(Errc::CodeOutOfRange, "field 'region' value '" + p.region + "' not a known region for " +
                                            std::string(to_string(region_country)) + " (line " +
                                            std::to_string(rec.line) + ")");
    }

    for (const auto& [col, spec] : qcols) {
      sample.responses[spec->question_id].values.push_back(row.response(col, *spec));
    }
    sample.roster.push_back(std::move(p));
  }

  if (options.expected_n && *options.expected_n != sample.n()) {
    throw Error(Errc::MalformedRow, "sample " + options.sample_id + " declares N=" + std::to_string(*options.expected_n) +
                                        " but has " + std::to_string(sample.n()) + " rows");
  }
  return sample;
}

SurveySample load_sample(const std::filesystem::path& path, const LoadOptions& options,
                         const std::vector<QuestionSpec>& catalog) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return read_sample(in, options, catalog);
}

void write_sample(std::ostream& out, const SurveySample& sample) {
  std::vector<std::string> header;
  if (sample.schema == Schema::wvs) {
    header = wvs_columns();
    header.push_back("sampling_weight");
  } else {
    header = {"respondent_id", "age", "gender", "region", "education", "marital_status", "occupation", "income"};
    for (const char* c : {"ethnicity", "religion", "political_attention", "income_cat", "sampling_weight", "state"}) {
      header.emplace_back(c);
    }
  }
  for (const auto& qid : sample.question_order) header.push_back("q_" + qid);
  csv::write_row(out, header);

  for (std::size_t i = 0; i < sample.roster.size(); ++i) {
    const auto& p = sample.roster[i];
    std::vector<std::string> row = {p.respondent_id, opt_str(p.age),
                                    p.gender ? std::string(to_string(*p.gender)) : std::string{}, p.region,
                                    opt_str(p.education), opt_str(p.marital_status), opt_str(p.occupation),
                                    opt_str(p.income)};
    if (sample.schema == Schema::wvs) {
      row.push_back(format_value(p.sampling_weight));
    } else {
      row.push_back(opt_str(p.ethnicity));
      row.push_back(opt_str(p.religion));
      row.push_back(opt_str(p.political_attention));
      row.push_back(opt_str(p.income));
      row.push_back(format_value(p.sampling_weight));
      row.push_back(p.region);
    }
    for (const auto& qid : sample.question_order) row.push_back(format_value(sample.responses.at(qid).values.at(i)));
    csv::write_row(out, row);
  }
}

void save_sample(const std::filesystem::path& path, const SurveySample& sample) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  write_sample(out, sample);
}

}  // namespace vpoll
