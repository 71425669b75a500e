#include "vpoll/llm_gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "vpoll/digest.hpp"
#include "vpoll/error.hpp"

namespace vpoll {

using nlohmann::json;

std::string_view to_string(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::live: return "live";
    case BackendKind::mock: return "mock";
    case BackendKind::replay: return "replay";
  }
  return "mock";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "live") return BackendKind::live;
  if (s == "mock") return BackendKind::mock;
  if (s == "replay") return BackendKind::replay;
  throw Error(Errc::InvalidConfig, "unknown backend '" + std::string(s) + "'");
}

void validate(const BackendConfig& config) {
  if (config.parallelism < 1) throw Error(Errc::InvalidConfig, "parallelism must be >= 1");
  if (!(config.temperature >= 0)) throw Error(Errc::InvalidConfig, "temperature must be >= 0");
  if (config.max_retries < 0) throw Error(Errc::InvalidConfig, "max_retries must be >= 0");
  if (config.resample_failures < 0) throw Error(Errc::InvalidConfig, "resample_failures must be >= 0");
  if (config.kind == BackendKind::replay &&
      (config.cache_dir.empty() || !std::filesystem::is_directory(config.cache_dir))) {
    throw Error(Errc::InvalidConfig, "replay backend needs an existing cache directory");
  }
}

std::vector<PromptUnit> split_units(const PromptBundle& bundle, BatchMode mode) {
  std::vector<PromptUnit> units;
  auto base = [&]() {
    PromptUnit u;
    u.respondent_id = bundle.respondent_id;
    u.persona_text = bundle.persona_text;
    u.scenario_text = bundle.scenario_text;
    return u;
  };

  if (bundle.blocks.empty()) {
    // Ballot bundles carry a self-contained step 3.
    for (std::size_t i = 0; i < bundle.questions.size(); ++i) {
      PromptUnit u = base();
      u.unit_key = bundle.questions[i].question_id;
      u.user_text = bundle.question_texts[i].second;
      u.questions = {bundle.questions[i]};
      units.push_back(std::move(u));
    }
    return units;
  }

  for (const auto& blk : bundle.blocks) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < bundle.questions.size(); ++i) {
      if (bundle.questions[i].block == blk.block) members.push_back(i);
    }
    if (members.empty()) continue;
    if (mode == BatchMode::per_block && members.size() > 1) {
      PromptUnit u = base();
      u.unit_key = std::string(to_string(blk.block));
      u.user_text = blk.preamble + "\n\n";
      for (std::size_t k = 0; k < members.size(); ++k) {
        u.user_text += std::to_string(k + 1) + ". " + bundle.question_texts[members[k]].second + "\n";
        u.questions.push_back(bundle.questions[members[k]]);
      }
      u.user_text +=
          "\nAnswer every item with a single number on its own line, in the form \"<item number>: <answer>\".";
      units.push_back(std::move(u));
    } else {
      for (std::size_t i : members) {
        PromptUnit u = base();
        u.unit_key = bundle.questions[i].question_id;
        u.user_text = blk.preamble + "\n\n" + bundle.question_texts[i].second +
                      "\n\nRespond only with the corresponding number.";
        u.questions = {bundle.questions[i]};
        units.push_back(std::move(u));
      }
    }
  }
  return units;
}

namespace {

std::string format_temperature(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

}  // namespace

std::string prompt_hash(const PromptUnit& unit, std::string_view model_name, double temperature, int attempt) {
  const std::string temp = format_temperature(temperature);
  if (attempt == 0) {
    return field_digest({unit.persona_text, unit.scenario_text, unit.user_text, model_name, temp});
  }
  const std::string salt = "resample-" + std::to_string(attempt);
  return field_digest({unit.persona_text, unit.scenario_text, unit.user_text, model_name, temp, salt});
}

std::string chat_request_body(const ChatRequest& request) {
  json body = {
      {"model", request.model},
      {"temperature", request.temperature},
      {"messages",
       json::array({{{"role", "system"}, {"content", request.system}}, {{"role", "user"}, {"content", request.user}}})},
  };
  return body.dump();
}

std::optional<std::string> extract_content(std::string_view body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

CompletionCache::CompletionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<std::string> CompletionCache::get(const std::string& hash) const {
  if (!enabled()) return std::nullopt;
  std::ifstream in(path_for(hash), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void CompletionCache::put(const std::string& hash, std::string_view body) const {
  if (!enabled()) return;
  static std::atomic<unsigned long> counter{0};
  std::ostringstream tmp_name;
  tmp_name << "." << hash << ".tmp." << std::this_thread::get_id() << "." << counter.fetch_add(1);
  const auto tmp = dir_ / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write cache file " + tmp.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw Error(Errc::Io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path_for(hash));
}

std::string mock_complete(const PromptUnit& unit, std::uint64_t seed, int attempt) {
  const std::string key = field_digest({unit.persona_text, unit.scenario_text, unit.user_text}) + "|" +
                          std::to_string(seed) + "|" + std::to_string(attempt);
  std::string out;
  for (std::size_t i = 0; i < unit.questions.size(); ++i) {
    const auto& q = unit.questions[i];
    const auto span = static_cast<std::uint64_t>(q.scale_max - q.scale_min + 1);
    const int v = q.scale_min + static_cast<int>(digest_u64(key + "|" + q.question_id) % span);
    if (unit.questions.size() == 1) return std::to_string(v);
    if (i) out += '\n';
    out += std::to_string(i + 1) + ": " + std::to_string(v);
  }
  return out;
}

std::string mock_response_body(const std::string& content, const std::string& model, const std::string& hash) {
  json body = {
      {"id", "mock-" + hash.substr(0, 16)},
      {"object", "chat.completion"},
      {"model", model},
      {"choices", json::array({{{"index", 0},
                                {"message", {{"role", "assistant"}, {"content", content}}},
                                {"finish_reason", "stop"}}})},
  };
  return body.dump();
}

namespace {

struct UnitOutcome {
  std::string hash;
  std::string raw_text;
  CompletionStatus status = CompletionStatus::ok;
  std::vector<std::optional<int>> answers;
  std::map<std::string, std::string> meta;
  std::int64_t timestamp = 0;
  bool cache_hit = false;
  std::size_t requests = 0;
};

std::string env_or(const std::string& configured, const char* var) {
  if (!configured.empty()) return configured;
  const char* v = std::getenv(var);
  return v ? std::string(v) : std::string{};
}

class Dispatcher {
 public:
  Dispatcher(const BackendConfig& config, TransportFactory factory)
      : config_(config), cache_(config.cache_dir), factory_(std::move(factory)) {}

  UnitOutcome run(const PromptUnit& unit, ChatTransport* transport) const {
    UnitOutcome out;
    out.answers.assign(unit.questions.size(), std::nullopt);
    for (int attempt = 0; attempt <= config_.resample_failures; ++attempt) {
      fetch(unit, attempt, transport, out);
      if (out.status == CompletionStatus::ok) {
        auto parsed = parse_block_answers(out.raw_text, unit.questions, config_.parse_mode);
        for (std::size_t i = 0; i < parsed.size(); ++i) {
          if (!out.answers[i]) out.answers[i] = parsed[i];
        }
      }
      const bool complete = std::all_of(out.answers.begin(), out.answers.end(), [](auto& a) { return a.has_value(); });
      if (complete) break;
    }
    out.meta["backend"] = std::string(to_string(config_.kind));
    out.meta["model"] = config_.model_name;
    return out;
  }

  std::unique_ptr<ChatTransport> make_transport() const {
    if (config_.kind != BackendKind::live) return nullptr;
    return factory_();
  }

 private:
  void fetch(const PromptUnit& unit, int attempt, ChatTransport* transport, UnitOutcome& out) const {
    const std::string hash = prompt_hash(unit, config_.model_name, config_.temperature, attempt);
    out.hash = hash;
    if (auto cached = cache_.get(hash)) {
      out.cache_hit = true;
      out.meta["cache"] = "hit";
      set_content(*cached, out);
      return;
    }
    out.cache_hit = false;
    out.meta["cache"] = "miss";
    switch (config_.kind) {
      case BackendKind::replay:
        throw Error(Errc::ReplayMiss, "no cached completion for " + hash + " (respondent " + unit.respondent_id +
                                          ", " + unit.unit_key + ")");
      case BackendKind::mock: {
        const std::string body = mock_response_body(mock_complete(unit, config_.seed, attempt), config_.model_name, hash);
        cache_.put(hash, body);
        set_content(body, out);
        return;
      }
      case BackendKind::live:
        fetch_live(unit, hash, transport, out);
        return;
    }
  }

  void fetch_live(const PromptUnit& unit, const std::string& hash, ChatTransport* transport, UnitOutcome& out) const {
    ChatRequest req{config_.model_name, config_.temperature, unit.system_text(), unit.user_text};
    bool any_response = false;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0 && config_.retry_base_delay_ms > 0) {
        const long delay = std::min<long>(30000L, static_cast<long>(config_.retry_base_delay_ms) << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      ++out.requests;
      BackendReply reply = transport->post(req);
      if (reply.transport_error) {
        last_error = reply.error;
        continue;
      }
      any_response = true;
      if (reply.status == 401 || reply.status == 403) {
        throw Error(Errc::AuthMissing, "endpoint rejected credentials (HTTP " + std::to_string(reply.status) + ")");
      }
      if (reply.status >= 200 && reply.status < 300) {
        if (extract_content(reply.body)) {
          cache_.put(hash, reply.body);
          out.timestamp = std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
          set_content(reply.body, out);
          return;
        }
        last_error = "response without choices[0].message.content";
        continue;
      }
      last_error = "HTTP " + std::to_string(reply.status);
      const bool retryable = reply.status == 429 || reply.status >= 500;
      if (!retryable) break;
    }
    if (!any_response) throw Error(Errc::BackendUnreachable, last_error);
    out.status = CompletionStatus::failed;
    out.raw_text.clear();
    out.meta["error"] = last_error;
  }

  static void set_content(const std::string& body, UnitOutcome& out) {
    if (auto content = extract_content(body)) {
      out.status = CompletionStatus::ok;
      out.raw_text = *content;
      out.meta.erase("error");
    } else {
      out.status = CompletionStatus::failed;
      out.raw_text.clear();
      out.meta["error"] = "malformed cached body";
    }
  }

  const BackendConfig& config_;
  CompletionCache cache_;
  TransportFactory factory_;
};

}  // namespace

SynthesisResult synthesize(const SurveySample& sample, const std::vector<PromptBundle>& bundles,
                           const BackendConfig& config, TransportFactory transport_factory) {
  validate(config);
  if (config.kind == BackendKind::live && !transport_factory) {
    const std::string url = env_or(config.api_url, "VP_API_URL");
    const std::string key = env_or(config.api_key, "VP_API_KEY");
    if (key.empty()) throw Error(Errc::AuthMissing, "VP_API_KEY is not set");
    if (url.empty()) throw Error(Errc::InvalidConfig, "VP_API_URL is not set");
    const int timeout = config.request_timeout_s;
    transport_factory = [url, key, timeout]() { return make_http_transport(url, key, timeout); };
  }

  std::unordered_map<std::string, const PromptBundle*> by_id;
  for (const auto& b : bundles) by_id[b.respondent_id] = &b;
  std::vector<PromptUnit> units;
  for (const auto& p : sample.roster) {
    auto it = by_id.find(p.respondent_id);
    if (it == by_id.end()) throw Error(Errc::InvalidConfig, "no prompt bundle for respondent " + p.respondent_id);
    auto u = split_units(*it->second, config.batch_mode);
    units.insert(units.end(), std::make_move_iterator(u.begin()), std::make_move_iterator(u.end()));
  }

  Dispatcher dispatcher(config, transport_factory);
  std::vector<UnitOutcome> outcomes(units.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&]() {
    try {
      auto transport = dispatcher.make_transport();
      while (!stop.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= units.size()) break;
        outcomes[i] = dispatcher.run(units[i], transport.get());
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      stop = true;
    }
  };

  const auto n_threads = static_cast<std::size_t>(std::max(1, config.parallelism));
  if (n_threads == 1 || units.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(n_threads, units.size()); ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  SynthesisResult result;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    const auto& o = outcomes[i];
    result.requests_sent += o.requests + (config.kind == BackendKind::mock && !o.cache_hit ? 1 : 0);
    result.cache_hits += o.cache_hit ? 1 : 0;
    result.failed_units += o.status == CompletionStatus::failed ? 1 : 0;
    for (std::size_t q = 0; q < u.questions.size(); ++q) {
      Completion c;
      c.prompt_hash = o.hash;
      c.raw_text = o.raw_text;
      c.backend_meta = o.meta;
      c.timestamp = o.timestamp;
      c.status = o.status;
      c.answer = o.answers[q];
      result.completions[{u.respondent_id, u.questions[q].question_id}] = std::move(c);
    }
  }
  return result;
}

std::map<std::string, ResponseVector> responses_from(const SynthesisResult& result, const SurveySample& sample,
                                                     const std::vector<QuestionSpec>& questions) {
  std::map<std::string, ResponseVector> out;
  for (const auto& q : questions) {
    ResponseVector v;
    v.question_id = q.question_id;
    v.values.reserve(sample.n());
    for (const auto& p : sample.roster) {
      auto it = result.completions.find({p.respondent_id, q.question_id});
      if (it != result.completions.end() && it->second.answer) {
        v.values.emplace_back(static_cast<double>(*it->second.answer));
      } else {
        v.values.emplace_back(std::nullopt);
      }
    }
    out.emplace(q.question_id, std::move(v));
  }
  return out;
}

}  // namespace vpoll
