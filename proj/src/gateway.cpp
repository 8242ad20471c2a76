#include "ctxforest/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace ctxforest {

using json = nlohmann::json;

const char* role_name(Role r) {
  switch (r) {
    case Role::Decision: return "decision";
    case Role::Summary: return "summary";
    case Role::Embedding: return "embedding";
    case Role::Responder: return "responder";
    case Role::Judge: return "judge";
  }
  return "?";
}

namespace {

constexpr const char* kTopicMarker = "[topic-decision]";
constexpr const char* kBranchMarker = "[branch-decision]";

bool messages_contain(const std::vector<Message>& messages, const char* needle) {
  for (const auto& m : messages)
    if (m.content.find(needle) != std::string::npos) return true;
  return false;
}

const std::string* last_user_message(const std::vector<Message>& messages) {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == "user") return &it->content;
  return nullptr;
}

// First line of the form "Query: ..." anywhere in the message list.
std::string extract_query_line(const std::vector<Message>& messages) {
  for (const auto& m : messages) {
    std::istringstream in(m.content);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("Query: ", 0) == 0) return line.substr(7);
    }
  }
  return {};
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// --- deterministic hashing for the stub embedder and cassette keys ---

std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t x) {
  return static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
}

std::vector<std::string> word_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> normalize_or_throw(std::vector<double> v, const char* what) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  if (sq == 0.0) throw_error(Err::ZeroVector, std::string(what) + " produced a zero vector");
  double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

std::string first_sentence(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); i++) {
    char c = text[i];
    if (c == '.' || c == '!' || c == '?') return text.substr(0, i + 1);
  }
  return text;
}

json chat_request_body(const BackendProfile& profile, const std::vector<Message>& messages) {
  json body;
  body["model"] = profile.model_name;
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = profile.temperature;
  for (const auto& [k, v] : profile.extra) body[k] = v;
  return body;
}

}  // namespace

void Gateway::record_chat(Role role, const std::vector<Message>& messages) {
  std::lock_guard<std::mutex> lock(counts_mutex_);
  switch (role) {
    case Role::Decision:
      if (messages_contain(messages, kBranchMarker))
        counts_.branch_decisions++;
      else
        counts_.topic_decisions++;
      break;
    case Role::Summary: counts_.summaries++; break;
    case Role::Responder: counts_.responses++; break;
    case Role::Judge: counts_.judges++; break;
    case Role::Embedding: break;
  }
}

void Gateway::record_embed() {
  std::lock_guard<std::mutex> lock(counts_mutex_);
  counts_.embed_calls++;
}

// ---------------------------------------------------------------------------
// StubGateway
// ---------------------------------------------------------------------------

std::string StubGateway::chat_complete(const BackendProfile& profile,
                                       const std::vector<Message>& messages) {
  if (messages.empty()) throw_error(Err::InvalidArgument, "chat_complete with no messages");
  record_chat(profile.role, messages);

  const std::string* user = last_user_message(messages);
  const std::string blank;
  const std::string& last = user ? *user : blank;

  switch (profile.role) {
    case Role::Responder:
      return "[stub-reply] " + last;
    case Role::Summary: {
      return first_sentence(last);
    }
    case Role::Judge:
      return "yes";
    case Role::Decision: {
      std::string query = lowercase(extract_query_line(messages));
      if (messages_contain(messages, kBranchMarker)) {
        if (query.rfind("alternatively,", 0) == 0) return "CREATE_BRANCH:top";
        if (query.rfind("back to", 0) == 0) return "SWITCH_BRANCH:top";
        return "CONTINUE";
      }
      if (query.find("new topic:") != std::string::npos) return "CREATE_TOPIC";
      std::size_t pos = query.find("switch to topic ");
      if (pos != std::string::npos) {
        std::size_t digits = pos + 16;
        std::string num;
        while (digits < query.size() && std::isdigit(static_cast<unsigned char>(query[digits])))
          num.push_back(query[digits++]);
        if (!num.empty()) return "SWITCH_TOPIC:" + num;
      }
      return "CONTINUE";
    }
    case Role::Embedding:
      throw_error(Err::InvalidArgument, "embedding profile used for chat");
  }
  throw_error(Err::Internal, "unhandled role");
}

std::vector<double> StubGateway::stub_embedding(const std::string& text, int dim,
                                                std::uint64_t seed) {
  std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
  for (const auto& tok : word_tokens(text)) {
    std::uint64_t h = fnv1a64(tok) ^ splitmix64(seed);
    for (int j = 0; j < dim; j++) {
      std::uint64_t r = splitmix64(h + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(j + 1));
      acc[static_cast<std::size_t>(j)] += 2.0 * unit_interval(r) - 1.0;
    }
  }
  return normalize_or_throw(std::move(acc), "stub embedding");
}

std::vector<std::vector<double>> StubGateway::embed_batch(const BackendProfile& profile,
                                                          const std::vector<std::string>& texts) {
  if (texts.empty()) throw_error(Err::EmptyInput, "embed_batch with no texts");
  record_embed();
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(stub_embedding(t, profile.embed_dim, profile.seed));
  return out;
}

// ---------------------------------------------------------------------------
// ScriptedGateway
// ---------------------------------------------------------------------------

ScriptedGateway::ScriptedGateway(std::shared_ptr<Gateway> inner,
                                 std::map<std::string, std::string> topic_script,
                                 std::map<std::string, std::string> branch_script,
                                 std::map<std::string, std::string> response_script)
    : inner_(std::move(inner)),
      topic_script_(std::move(topic_script)),
      branch_script_(std::move(branch_script)),
      response_script_(std::move(response_script)) {}

std::string ScriptedGateway::chat_complete(const BackendProfile& profile,
                                           const std::vector<Message>& messages) {
  if (profile.role == Role::Decision) {
    std::string query = extract_query_line(messages);
    const auto& script =
        messages_contain(messages, kBranchMarker) ? branch_script_ : topic_script_;
    auto it = script.find(query);
    if (it != script.end()) {
      record_chat(profile.role, messages);
      return it->second;
    }
  } else if (profile.role == Role::Responder) {
    const std::string* user = last_user_message(messages);
    if (user) {
      auto it = response_script_.find(*user);
      if (it != response_script_.end()) {
        record_chat(profile.role, messages);
        return it->second;
      }
    }
  }
  return inner_->chat_complete(profile, messages);
}

std::vector<std::vector<double>> ScriptedGateway::embed_batch(
    const BackendProfile& profile, const std::vector<std::string>& texts) {
  return inner_->embed_batch(profile, texts);
}

// ---------------------------------------------------------------------------
// HttpGateway
// ---------------------------------------------------------------------------

namespace {

struct ParsedEndpoint {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // path prefix, possibly empty
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw_error(Err::InvalidArgument, "endpoint has no scheme: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_start), prefix};
}

bool transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

// Runs an HTTP POST with retry/backoff per the profile. Returns the parsed
// response body.
json post_with_retries(const BackendProfile& profile, const std::string& path,
                       const json& body) {
  ParsedEndpoint ep = parse_endpoint(profile.endpoint);
  std::string payload = body.dump();

  httplib::Headers headers;
  if (!profile.api_key_env.empty()) {
    const char* key = std::getenv(profile.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  std::string last_failure;
  for (int attempt = 0; attempt <= profile.max_retries; attempt++) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(100u << std::min(attempt - 1, 6));
      std::this_thread::sleep_for(delay);
    }
    httplib::Client client(ep.base);
    client.set_connection_timeout(std::chrono::duration<double>(profile.timeout_s));
    client.set_read_timeout(std::chrono::duration<double>(profile.timeout_s));
    client.set_write_timeout(std::chrono::duration<double>(profile.timeout_s));

    auto res = client.Post(ep.prefix + path, headers, payload, "application/json");
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
          err == httplib::Error::Write) {
        last_failure = "timeout talking to " + profile.endpoint;
        continue;  // transient
      }
      last_failure = "connection to " + profile.endpoint + " failed (" +
                     httplib::to_string(err) + ")";
      continue;
    }
    if (res->status == 200) {
      try {
        return json::parse(res->body);
      } catch (const json::parse_error& e) {
        throw_error(Err::HttpError, "unparsable response body: " + std::string(e.what()));
      }
    }
    if (transient_status(res->status)) {
      last_failure = "HTTP " + std::to_string(res->status) + " from " + profile.endpoint;
      continue;
    }
    throw_error(Err::HttpError,
                "HTTP " + std::to_string(res->status) + " from " + profile.endpoint + path);
  }
  throw_error(Err::ExhaustedRetries, last_failure.empty() ? "no attempts made" : last_failure);
}

}  // namespace

std::string HttpGateway::chat_complete(const BackendProfile& profile,
                                       const std::vector<Message>& messages) {
  if (messages.empty()) throw_error(Err::InvalidArgument, "chat_complete with no messages");
  record_chat(profile.role, messages);

  json body = chat_request_body(profile, messages);
  json res = post_with_retries(profile, "/chat/completions", body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw_error(Err::HttpError, "response missing choices[0].message.content");
  }
}

std::vector<std::vector<double>> HttpGateway::embed_batch(const BackendProfile& profile,
                                                          const std::vector<std::string>& texts) {
  if (texts.empty()) throw_error(Err::EmptyInput, "embed_batch with no texts");
  record_embed();

  json body;
  body["model"] = profile.model_name;
  body["input"] = texts;
  json res = post_with_retries(profile, "/embeddings", body);

  std::vector<std::vector<double>> out;
  try {
    for (const auto& item : res.at("data"))
      out.push_back(item.at("embedding").get<std::vector<double>>());
  } catch (const json::exception&) {
    throw_error(Err::HttpError, "response missing data[].embedding");
  }
  if (out.size() != texts.size())
    throw_error(Err::HttpError, "embedding count does not match input count");
  std::size_t dim = out.empty() ? 0 : out.front().size();
  for (auto& v : out) {
    if (v.size() != dim)
      throw_error(Err::DimensionDrift, "backend returned mixed embedding dimensions");
    v = normalize_or_throw(std::move(v), "backend embedding");
  }
  return out;
}

// ---------------------------------------------------------------------------
// CassetteGateway
// ---------------------------------------------------------------------------

CassetteGateway::CassetteGateway(std::shared_ptr<Gateway> inner, std::string path, Mode mode)
    : inner_(std::move(inner)), path_(std::move(path)), mode_(mode) {
  if (mode_ == Mode::Replay) {
    std::ifstream in(path_);
    if (!in) throw_error(Err::IoError, "cannot open cassette " + path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json rec = json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.contains("key") || !rec.contains("response"))
        throw_error(Err::MalformedSnapshot, "bad cassette record in " + path_);
      records_[rec["key"].get<std::string>()] = rec["response"].dump();
    }
  }
}

std::string CassetteGateway::lookup_or_call(const std::string& request_canonical,
                                            const std::function<std::string()>& call) {
  std::string key = std::to_string(fnv1a64(request_canonical));
  if (mode_ == Mode::Replay) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = records_.find(key);
    if (it == records_.end())
      throw_error(Err::BackendUnavailable, "cassette " + path_ + " has no record for request");
    return json::parse(it->second).get<std::string>();
  }
  std::string response = call();
  std::lock_guard<std::mutex> lock(mutex_);
  json rec;
  rec["key"] = key;
  rec["request"] = json::parse(request_canonical);
  rec["response"] = response;
  std::ofstream out(path_, std::ios::app);
  if (!out) throw_error(Err::IoError, "cannot append to cassette " + path_);
  out << rec.dump() << "\n";
  records_[key] = rec["response"].dump();
  return response;
}

std::string CassetteGateway::chat_complete(const BackendProfile& profile,
                                           const std::vector<Message>& messages) {
  record_chat(profile.role, messages);
  json request = chat_request_body(profile, messages);
  request["_role"] = role_name(profile.role);
  return lookup_or_call(request.dump(),
                        [&] { return inner_->chat_complete(profile, messages); });
}

std::vector<std::vector<double>> CassetteGateway::embed_batch(
    const BackendProfile& profile, const std::vector<std::string>& texts) {
  // Embeddings are deterministic for stubs and cheap to re-request; cassettes
  // only capture chat exchanges.
  return inner_->embed_batch(profile, texts);
}

// ---------------------------------------------------------------------------
// BackendSet
// ---------------------------------------------------------------------------

const BackendProfile& BackendSet::profile(Role r) const {
  switch (r) {
    case Role::Decision: return decision;
    case Role::Summary: return summary;
    case Role::Embedding: return embedding;
    case Role::Responder: return responder;
    case Role::Judge: return judge;
  }
  return responder;
}

BackendSet make_stub_backends(std::uint64_t seed, int embed_dim) {
  BackendSet set;
  set.gateway = std::make_shared<StubGateway>();
  auto make = [&](Role role) {
    BackendProfile p;
    p.role = role;
    p.endpoint = "stub";
    p.seed = seed;
    p.embed_dim = embed_dim;
    return p;
  };
  set.decision = make(Role::Decision);
  set.summary = make(Role::Summary);
  set.embedding = make(Role::Embedding);
  set.responder = make(Role::Responder);
  set.judge = make(Role::Judge);
  return set;
}

}  // namespace ctxforest
