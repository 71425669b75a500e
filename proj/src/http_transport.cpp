#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "vpoll/error.hpp"
#include "vpoll/llm_gateway.hpp"

namespace vpoll {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::InvalidConfig, "endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
    out.path = "/v1/chat/completions";
  } else {
    out.origin = url.substr(0, path_start);
    out.path = url.substr(path_start);
  }
  return out;
}

class HttpTransport final : public ChatTransport {
 public:
  HttpTransport(const std::string& url, std::string api_key, int timeout_s)
      : parsed_(split_url(url)), client_(parsed_.origin), api_key_(std::move(api_key)) {
    client_.set_connection_timeout(timeout_s, 0);
    client_.set_read_timeout(timeout_s, 0);
    client_.set_write_timeout(timeout_s, 0);
  }

  BackendReply post(const ChatRequest& request) override {
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client_.Post(parsed_.path, headers, chat_request_body(request), "application/json");
    BackendReply reply;
    if (!res) {
      reply.transport_error = true;
      reply.error = httplib::to_string(res.error());
      return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
  }

 private:
  ParsedUrl parsed_;
  httplib::Client client_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const std::string& url, const std::string& api_key, int timeout_s) {
  return std::make_unique<HttpTransport>(url, api_key, timeout_s);
}

}  // namespace vpoll
