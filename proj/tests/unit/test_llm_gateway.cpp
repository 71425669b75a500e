#include <doctest.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <thread>

#include <httplib.h>

#include "vpoll/digest.hpp"
#include "vpoll/error.hpp"
#include "vpoll/llm_gateway.hpp"

using namespace vpoll;
namespace fs = std::filesystem;

namespace {

const std::vector<QuestionSpec>& catalog() {
  static const auto c = load_catalog(fs::path(VPOLL_DATA_DIR) / "wvs_catalog.json");
  return c;
}

std::vector<QuestionSpec> two_questions() {
  return {find_question(catalog(), "theft"), find_question(catalog(), "trust_family")};
}

SurveySample tiny_sample() {
  SurveySample s;
  s.sample_id = "tiny";
  s.country = Country::US;
  const int ages[] = {34, 52, 71};
  for (int i = 0; i < 3; ++i) {
    DemographicProfile p;
    p.respondent_id = "r" + std::to_string(i + 1);
    p.age = ages[i];
    p.gender = i % 2 ? Gender::male : Gender::female;
    p.region = "Ohio";
    p.education = 3 + i;
    p.marital_status = 1;
    p.occupation = 2;
    p.income = 4;
    s.roster.push_back(p);
  }
  return s;
}

std::vector<PromptBundle> bundles_for(const SurveySample& s) {
  std::vector<PromptBundle> out;
  for (const auto& p : s.roster) out.push_back(render_wvs_prompt(p, Country::US, two_questions()));
  return out;
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

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("vpoll_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Local OpenAI-style endpoint whose behaviour is chosen per request body.
class StubServer {
 public:
  using Handler = std::function<void(const std::string& body, httplib::Response&)>;
  explicit StubServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      handler_(req.body, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::atomic<int> hits{0};

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

BackendConfig live_config(const std::string& url) {
  BackendConfig c;
  c.kind = BackendKind::live;
  c.api_url = url;
  c.api_key = "test-key";
  c.max_retries = 2;
  c.retry_base_delay_ms = 0;
  c.request_timeout_s = 5;
  return c;
}

}  // namespace

TEST_CASE("likert parsing takes the first in-range token") {
  const auto ten = find_question(catalog(), "theft");
  const auto five = find_question(catalog(), "male_breadwinner");
  CHECK(parse_likert("3", five) == 3);
  CHECK(parse_likert("I'd say 7 out of 10.", ten) == 7);
  CHECK(parse_likert("Answer: 12, no, 4", ten) == 4);
  CHECK(code_of([&] { parse_likert("I cannot answer that.", five); }) == Errc::Unparseable);
  for (const auto& q : catalog()) {
    for (int v = q.scale_min; v <= q.scale_max; ++v) CHECK(parse_likert(std::to_string(v), q) == v);
  }
}

TEST_CASE("vote parsing") {
  CHECK(parse_vote("2") == Party::Republican);
  CHECK(parse_vote("1. KAMALA D. HARRIS / TIM WALZ (Democratic)") == Party::Democratic);
  CHECK(code_of([] { parse_vote("I abstain"); }) == Errc::Unparseable);
}

TEST_CASE("block answers are read by item number") {
  const auto qs = two_questions();
  const auto got = parse_block_answers("1: 9\n2: 2", qs);
  REQUIRE(got.size() == 2);
  CHECK(got[0] == 9);
  CHECK(got[1] == 2);
}

TEST_CASE("chat bodies round-trip through extract_content") {
  CHECK(extract_content(mock_response_body("4", "m", "0123456789abcdef0123")) == "4");
  CHECK_FALSE(extract_content("{\"choices\": []}").has_value());
  CHECK_FALSE(extract_content("not json").has_value());
  const std::string body = chat_request_body({"gpt-4o", 1.0, "sys", "user"});
  CHECK(body.find("\"model\":\"gpt-4o\"") != std::string::npos);
}

TEST_CASE("mock completions are deterministic and in range") {
  const auto b = render_wvs_prompt(tiny_sample().roster[0], Country::US, two_questions());
  const auto units = split_units(b, BatchMode::per_question);
  REQUIRE(units.size() == 2);
  for (const auto& u : units) {
    CHECK(mock_complete(u, 11) == mock_complete(u, 11));
    const int v = std::stoi(mock_complete(u, 11));
    CHECK(v >= u.questions[0].scale_min);
    CHECK(v <= u.questions[0].scale_max);
  }
}

TEST_CASE("mock draws are uniform on a five-point scale") {
  PromptUnit u;
  u.scenario_text = "scenario";
  u.user_text = "item";
  u.questions = {find_question(catalog(), "male_breadwinner")};
  std::array<int, 5> counts{};
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    u.persona_text = "persona " + std::to_string(i);
    ++counts[static_cast<std::size_t>(std::stoi(mock_complete(u, 3)) - 1)];
  }
  const double se = std::sqrt(n * 0.2 * 0.8);
  double chi2 = 0;
  for (int c : counts) {
    CHECK(std::abs(c - n * 0.2) < 5 * se);
    chi2 += (c - n * 0.2) * (c - n * 0.2) / (n * 0.2);
  }
  CHECK(chi2 < 18.47);  // 0.999 quantile, 4 df
}

TEST_CASE("prompt hashes differ for distinct prompts") {
  std::set<std::string> seen;
  const auto s = tiny_sample();
  for (const auto& b : bundles_for(s)) {
    for (auto mode : {BatchMode::per_block, BatchMode::per_question}) {
      for (const auto& u : split_units(b, mode)) {
        seen.insert(prompt_hash(u, "gpt-4o", 1.0));
        seen.insert(prompt_hash(u, "gpt-4o", 0.5));
        seen.insert(prompt_hash(u, "gpt-4o", 1.0, 1));
      }
    }
  }
  // per_block and per_question coincide here because each block has one item
  CHECK(seen.size() == 3 * 2 * 3);
  CHECK(field_digest({"ab", "c"}) != field_digest({"a", "bc"}));
}

TEST_CASE("mock synthesis covers every cell and repeats exactly") {
  const auto s = tiny_sample();
  BackendConfig c;
  c.seed = 5;
  const auto a = synthesize(s, bundles_for(s), c);
  const auto b = synthesize(s, bundles_for(s), c);
  CHECK(a.completions.size() == 6);
  CHECK(a.completions == b.completions);
  for (const auto& [key, comp] : a.completions) CHECK(comp.answer.has_value());
}

TEST_CASE("warm cache replays with no requests") {
  TempDir dir("cache");
  const auto s = tiny_sample();
  BackendConfig c;
  c.cache_dir = dir.path;
  const auto first = synthesize(s, bundles_for(s), c);
  c.kind = BackendKind::replay;
  const auto again = synthesize(s, bundles_for(s), c);
  CHECK(again.requests_sent == 0);
  CHECK(again.cache_hits == 6);
  for (const auto& [key, comp] : first.completions) {
    CHECK(again.completions.at(key).answer == comp.answer);
    CHECK(again.completions.at(key).raw_text == comp.raw_text);
  }
}

TEST_CASE("cold replay fails with ReplayMiss") {
  TempDir dir("cold");
  const auto s = tiny_sample();
  BackendConfig c;
  c.kind = BackendKind::replay;
  c.cache_dir = dir.path;
  CHECK(code_of([&] { synthesize(s, bundles_for(s), c); }) == Errc::ReplayMiss);
  c.cache_dir = dir.path / "absent";
  CHECK(code_of([&] { synthesize(s, bundles_for(s), c); }) == Errc::InvalidConfig);
}

TEST_CASE("results do not depend on completion order") {
  const auto s = tiny_sample();
  BackendConfig c;
  c.seed = 9;
  const auto serial = synthesize(s, bundles_for(s), c);
  c.parallelism = 4;
  auto reversed = bundles_for(s);
  std::reverse(reversed.begin(), reversed.end());
  const auto parallel = synthesize(s, reversed, c);
  CHECK(serial.completions == parallel.completions);
}

TEST_CASE("a request failing every retry is recorded as FAILED") {
  StubServer stub([](const std::string& body, httplib::Response& res) {
    if (body.find("71-year-old") != std::string::npos) {
      res.status = 503;
      return;
    }
    res.set_content(mock_response_body("2", "gpt-4o", "stubstubstubstub"), "application/json");
  });
  const auto s = tiny_sample();
  const auto r = synthesize(s, bundles_for(s), live_config(stub.url()));
  CHECK(r.completions.size() == 6);
  CHECK(r.failed_units == 2);
  CHECK(r.completions.at({"r3", "theft"}).status == CompletionStatus::failed);
  CHECK_FALSE(r.completions.at({"r3", "theft"}).answer.has_value());
  CHECK(r.completions.at({"r1", "theft"}).answer == 2);
  CHECK(stub.hits == 4 + 2 * 3);  // two good units each, two bad units with 1 + 2 retries
}

TEST_CASE("rejected credentials abort with AuthMissing") {
  StubServer stub([](const std::string&, httplib::Response& res) { res.status = 401; });
  const auto s = tiny_sample();
  CHECK(code_of([&] { synthesize(s, bundles_for(s), live_config(stub.url())); }) == Errc::AuthMissing);
  auto c = live_config(stub.url());
  c.api_key.clear();
  ::unsetenv("VP_API_KEY");
  CHECK(code_of([&] { synthesize(s, bundles_for(s), c); }) == Errc::AuthMissing);
}

TEST_CASE("an unreachable endpoint aborts with BackendUnreachable") {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  const auto s = tiny_sample();
  auto c = live_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  c.max_retries = 1;
  CHECK(code_of([&] { synthesize(s, bundles_for(s), c); }) == Errc::BackendUnreachable);
}

TEST_CASE("backend configuration is validated") {
  BackendConfig c;
  c.parallelism = 0;
  CHECK(code_of([&] { validate(c); }) == Errc::InvalidConfig);
  c.parallelism = 1;
  c.temperature = -1;
  CHECK(code_of([&] { validate(c); }) == Errc::InvalidConfig);
}
