#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vpoll/party.hpp"
#include "vpoll/persona_prompt.hpp"
#include "vpoll/survey_data.hpp"

namespace vpoll {

enum class BackendKind { live, mock, replay };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view s);

/// How step-3 questions are sent: one request per block, or one per question.
enum class BatchMode { per_block, per_question };

enum class ParseMode { first_in_range, strict };

struct BackendConfig {
  BackendKind kind = BackendKind::mock;
  std::string model_name = "gpt-4o";
  double temperature = 1.0;
  int max_retries = 3;
  int parallelism = 1;
  std::filesystem::path cache_dir;
  /// Seed for the mock backend.
  std::uint64_t seed = 0;
  BatchMode batch_mode = BatchMode::per_block;
  ParseMode parse_mode = ParseMode::first_in_range;
  /// Extra requests for units whose answers did not parse.
  int resample_failures = 0;
  int retry_base_delay_ms = 500;
  int request_timeout_s = 60;
  /// Live endpoint; empty means read VP_API_URL / VP_API_KEY.
  std::string api_url;
  std::string api_key;
};

/// Throws Error(InvalidConfig) on parallelism < 1, negative temperature, or a
/// replay backend without an existing cache directory.
void validate(const BackendConfig& config);

/// One chat request: system message = persona + scenario, user message = a
/// block (or single question) of step 3.
struct PromptUnit {
  std::string respondent_id;
  std::string unit_key;  // block name or question id
  std::string persona_text;
  std::string scenario_text;
  std::string user_text;
  std::vector<QuestionSpec> questions;

  std::string system_text() const { return persona_text + "\n\n" + scenario_text; }
};

std::vector<PromptUnit> split_units(const PromptBundle& bundle, BatchMode mode);

/// Stable cache key over the prompt texts, model and temperature.
std::string prompt_hash(const PromptUnit& unit, std::string_view model_name, double temperature, int attempt = 0);

enum class CompletionStatus { ok, failed };

struct Completion {
  std::string prompt_hash;
  std::string raw_text;
  std::map<std::string, std::string> backend_meta;
  std::int64_t timestamp = 0;
  CompletionStatus status = CompletionStatus::ok;
  /// Parsed answer for this cell; nullopt when unparseable or failed.
  std::optional<int> answer;

  bool operator==(const Completion&) const = default;
};

using CellKey = std::pair<std::string, std::string>;  // (respondent_id, question_id)

struct SynthesisResult {
  std::map<CellKey, Completion> completions;
  std::size_t requests_sent = 0;
  std::size_t cache_hits = 0;
  std::size_t failed_units = 0;
};

/// Raw HTTP-level outcome of one request.
struct BackendReply {
  bool transport_error = false;
  int status = 0;
  std::string body;
  std::string error;
};

struct ChatRequest {
  std::string model;
  double temperature = 1.0;
  std::string system;
  std::string user;
};

std::string chat_request_body(const ChatRequest& request);

/// Assistant text of a chat-completion response body; nullopt if absent.
std::optional<std::string> extract_content(std::string_view body);

class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual BackendReply post(const ChatRequest& request) = 0;
};

/// cpp-httplib transport for an OpenAI-style /chat/completions endpoint.
std::unique_ptr<ChatTransport> make_http_transport(const std::string& url, const std::string& api_key,
                                                   int timeout_s);

/// One file per completion named by prompt hash; writes are atomic.
class CompletionCache {
 public:
  explicit CompletionCache(std::filesystem::path dir);

  bool enabled() const noexcept { return !dir_.empty(); }
  std::optional<std::string> get(const std::string& hash) const;
  void put(const std::string& hash, std::string_view body) const;
  std::filesystem::path path_for(const std::string& hash) const { return dir_ / hash; }

 private:
  std::filesystem::path dir_;
};

/// Deterministic offline answer: one uniform draw per question, keyed by the
/// prompt digest and seed. Multi-question units answer as "i: v" lines.
std::string mock_complete(const PromptUnit& unit, std::uint64_t seed, int attempt = 0);

/// Mock body in chat-completion JSON.
std::string mock_response_body(const std::string& content, const std::string& model, const std::string& hash);

/// Factory for live transports; tests inject stub servers through it.
using TransportFactory = std::function<std::unique_ptr<ChatTransport>()>;

SynthesisResult synthesize(const SurveySample& sample, const std::vector<PromptBundle>& bundles,
                           const BackendConfig& config, TransportFactory transport_factory = nullptr);

std::optional<int> try_parse_likert(std::string_view raw, int scale_min, int scale_max,
                                    ParseMode mode = ParseMode::first_in_range);
/// First integer token within the question's scale; throws Error(Unparseable).
int parse_likert(std::string_view raw, const QuestionSpec& spec, ParseMode mode = ParseMode::first_in_range);
Party parse_vote(std::string_view raw, ParseMode mode = ParseMode::first_in_range);

/// Per-item answers of a numbered multi-question reply.
std::vector<std::optional<int>> parse_block_answers(std::string_view raw, const std::vector<QuestionSpec>& questions,
                                                    ParseMode mode = ParseMode::first_in_range);

/// Per-question response vectors in roster order; missing cells are MISSING.
std::map<std::string, ResponseVector> responses_from(const SynthesisResult& result, const SurveySample& sample,
                                                     const std::vector<QuestionSpec>& questions);

}  // namespace vpoll
