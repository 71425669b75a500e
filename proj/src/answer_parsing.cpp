#include <cctype>
#include <charconv>

#include "vpoll/csv.hpp"
#include "vpoll/error.hpp"
#include "vpoll/llm_gateway.hpp"

namespace vpoll {

std::string_view to_string(Party p) noexcept { return p == Party::Democratic ? "D" : "R"; }

Party parse_party(std::string_view s) {
  if (s == "D" || s == "Democratic" || s == "DEM" || s == "dem") return Party::Democratic;
  if (s == "R" || s == "Republican" || s == "REP" || s == "rep") return Party::Republican;
  throw Error(Errc::MalformedRow, "unknown party '" + std::string(s) + "'");
}

namespace {

std::optional<int> as_int(std::string_view token) {
  if (token.empty() || token.size() > 9) return std::nullopt;
  int v = 0;
  auto [p, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || p != token.data() + token.size()) return std::nullopt;
  return v;
}

}  // namespace

std::optional<int> try_parse_likert(std::string_view raw, int scale_min, int scale_max, ParseMode mode) {
  if (mode == ParseMode::strict) {
    auto v = as_int(csv::trim(raw));
    if (v && *v >= scale_min && *v <= scale_max) return v;
    return std::nullopt;
  }
  // Punctuation separates tokens; the first all-digit token in range wins.
  std::string token;
  auto flush = [&]() -> std::optional<int> {
    std::optional<int> out;
    bool digits = !token.empty();
    for (char c : token) digits = digits && std::isdigit(static_cast<unsigned char>(c));
    if (digits) {
      auto v = as_int(token);
      if (v && *v >= scale_min && *v <= scale_max) out = v;
    }
    token.clear();
    return out;
  };
  for (char c : raw) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      token.push_back(c);
    } else if (auto v = flush()) {
      return v;
    }
  }
  return flush();
}

int parse_likert(std::string_view raw, const QuestionSpec& spec, ParseMode mode) {
  auto v = try_parse_likert(raw, spec.scale_min, spec.scale_max, mode);
  if (!v) {
    throw Error(Errc::Unparseable, spec.question_id + ": no answer in " + std::to_string(spec.scale_min) + ".." +
                                       std::to_string(spec.scale_max) + " in '" + std::string(raw.substr(0, 80)) + "'");
  }
  return *v;
}

Party parse_vote(std::string_view raw, ParseMode mode) {
  auto v = try_parse_likert(raw, 1, 2, mode);
  if (!v) throw Error(Errc::Unparseable, "no ballot choice in '" + std::string(raw.substr(0, 80)) + "'");
  return *v == 1 ? Party::Democratic : Party::Republican;
}

std::vector<std::optional<int>> parse_block_answers(std::string_view raw, const std::vector<QuestionSpec>& questions,
                                                    ParseMode mode) {
  std::vector<std::optional<int>> out(questions.size());
  if (questions.size() == 1) {
    out[0] = try_parse_likert(raw, questions[0].scale_min, questions[0].scale_max, mode);
    return out;
  }

  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= raw.size()) {
      auto end = raw.find('\n', start);
      if (end == std::string_view::npos) end = raw.size();
      std::string line = csv::trim(raw.substr(start, end - start));
      if (!line.empty()) lines.push_back(std::move(line));
      start = end + 1;
    }
  }

  // Numbered lines: "<k>: answer", "<k>. answer", "<k>) answer", "<k> - answer".
  std::vector<bool> seen(questions.size(), false);
  bool any_numbered = false;
  for (const auto& line : lines) {
    std::size_t i = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == 0 || i == line.size()) continue;
    std::size_t j = i;
    while (j < line.size() && line[j] == ' ') ++j;
    if (j >= line.size() || std::string_view(".:)-").find(line[j]) == std::string_view::npos) continue;
    auto k = as_int(std::string_view(line).substr(0, i));
    if (!k || *k < 1 || *k > static_cast<int>(questions.size())) continue;
    const auto idx = static_cast<std::size_t>(*k - 1);
    any_numbered = true;
    if (seen[idx]) continue;
    seen[idx] = true;
    const auto& q = questions[idx];
    out[idx] = try_parse_likert(csv::trim(std::string_view(line).substr(j + 1)), q.scale_min, q.scale_max, mode);
  }
  if (!any_numbered && lines.size() == questions.size()) {
    for (std::size_t i = 0; i < lines.size(); ++i) {
      out[i] = try_parse_likert(lines[i], questions[i].scale_min, questions[i].scale_max, mode);
    }
  }
  return out;
}

}  // namespace vpoll
