#pragma once

// All external model access (chat completion, embeddings) behind one
// contract, plus the deterministic in-process stubs every test runs on.
//
// Backends speak the de-facto open chat-completions HTTP contract: POST
// {endpoint}/chat/completions with a messages array, POST
// {endpoint}/embeddings for vectors. Endpoint "stub" selects the in-process
// implementation. Cassette files give record/replay on top of either.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ctxforest/errors.hpp"

namespace ctxforest {

enum class Role { Decision, Summary, Embedding, Responder, Judge };

const char* role_name(Role r);

struct Message {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct BackendProfile {
  Role role = Role::Responder;
  std::string endpoint = "stub";  // URL or "stub"
  std::string model_name;
  std::string api_key_env;        // env var holding the bearer key, may be empty
  double timeout_s = 30.0;        // > 0
  int max_retries = 2;            // >= 0
  double temperature = 0.0;
  int embed_dim = 8;              // stub embedder dimension
  std::uint64_t seed = 0;         // stub determinism
  // Opaque extra request parameters (e.g. vendor reasoning flags), merged
  // verbatim into the HTTP request body.
  std::map<std::string, std::string> extra;
};

// Per-role call accounting. The policy gating tests rely on the
// topic/branch split, which the gateway derives from the prompt marker.
struct CallCounts {
  int topic_decisions = 0;
  int branch_decisions = 0;
  int summaries = 0;
  int responses = 0;
  int judges = 0;
  int embed_calls = 0;
};

class Gateway {
public:
  virtual ~Gateway() = default;

  // Assistant text for a chat exchange. Throws Timeout, HttpError,
  // ExhaustedRetries, BackendUnavailable, InvalidArgument (no messages).
  virtual std::string chat_complete(const BackendProfile& profile,
                                    const std::vector<Message>& messages) = 0;

  // One unit vector per text, all of equal dimension. The gateway
  // re-normalizes unconditionally regardless of backend output. Throws as
  // chat_complete plus DimensionDrift and EmptyInput (empty list).
  virtual std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                                       const std::vector<std::string>& texts) = 0;

  CallCounts counts() const {
    std::lock_guard<std::mutex> lock(counts_mutex_);
    return counts_;
  }

protected:
  void record_chat(Role role, const std::vector<Message>& messages);
  void record_embed();

private:
  mutable std::mutex counts_mutex_;
  CallCounts counts_;
};

// ---------------------------------------------------------------------------
// Stub gateway: pure functions of the inputs, identical across processes.
// ---------------------------------------------------------------------------
//
// Rules:
//   RESPONDER  -> "[stub-reply] " + last user message
//   SUMMARY    -> first sentence of the last user message
//   JUDGE      -> "yes"
//   DECISION   -> keyword rules on the "Query:" line of the prompt:
//     topic prompts:  query contains "new topic:"          -> CREATE_TOPIC
//                     query contains "switch to topic <N>" -> SWITCH_TOPIC:<N>
//                     otherwise                            -> CONTINUE
//     branch prompts: query starts with "alternatively,"   -> CREATE_BRANCH:top
//                     query starts with "back to"          -> SWITCH_BRANCH:top
//                     otherwise                            -> CONTINUE
//   EMBEDDING  -> seeded hash of the token multiset into embed_dim
//                 dimensions, L2-normalized. Shared keywords between texts
//                 produce higher cosine, so semantic fixtures can be built
//                 by hand.
class StubGateway : public Gateway {
public:
  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override;
  std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                               const std::vector<std::string>& texts) override;

  // The embedding function, exposed so tests can recompute vectors.
  static std::vector<double> stub_embedding(const std::string& text, int dim, std::uint64_t seed);
};

// ---------------------------------------------------------------------------
// Scripted decorator: fixture-driven answers keyed by the query line.
// ---------------------------------------------------------------------------
//
// Replay fixtures pin exact decisions and responses per query; anything not
// scripted falls through to the inner gateway. Matching is exact on the
// "Query:" line for decisions and on the last user message for responses.
class ScriptedGateway : public Gateway {
public:
  ScriptedGateway(std::shared_ptr<Gateway> inner,
                  std::map<std::string, std::string> topic_script,
                  std::map<std::string, std::string> branch_script,
                  std::map<std::string, std::string> response_script);

  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override;
  std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                               const std::vector<std::string>& texts) override;

private:
  std::shared_ptr<Gateway> inner_;
  std::map<std::string, std::string> topic_script_;
  std::map<std::string, std::string> branch_script_;
  std::map<std::string, std::string> response_script_;
};

// ---------------------------------------------------------------------------
// HTTP gateway (chat-completions wire contract).
// ---------------------------------------------------------------------------
class HttpGateway : public Gateway {
public:
  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override;
  std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                               const std::vector<std::string>& texts) override;
};

// ---------------------------------------------------------------------------
// Cassette decorator: record/replay of request/response pairs.
// ---------------------------------------------------------------------------
//
// File format: one JSON record per line {"key": <content hash>, "request":
// ..., "response": ...}. Replay matches by content hash of the canonical
// request; a miss in replay mode is a BackendUnavailable error.
class CassetteGateway : public Gateway {
public:
  enum class Mode { Record, Replay };

  CassetteGateway(std::shared_ptr<Gateway> inner, std::string path, Mode mode);

  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override;
  std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                               const std::vector<std::string>& texts) override;

private:
  std::string lookup_or_call(const std::string& request_canonical,
                             const std::function<std::string()>& call);

  std::shared_ptr<Gateway> inner_;
  std::string path_;
  Mode mode_;
  std::map<std::string, std::string> records_;
  std::mutex mutex_;
};

// Picks stub vs HTTP from profile endpoints; applies env-var overrides
// (CTXFOREST_<ROLE>_ENDPOINT / _MODEL / _KEY).
struct BackendSet {
  std::shared_ptr<Gateway> gateway;
  BackendProfile decision;
  BackendProfile summary;
  BackendProfile embedding;
  BackendProfile responder;
  BackendProfile judge;

  const BackendProfile& profile(Role r) const;
};

BackendSet make_stub_backends(std::uint64_t seed, int embed_dim = 8);

}  // namespace ctxforest
