#include "ctxforest/config.hpp"

#include <cctype>
#include <cstdlib>
#include <set>

#include "json.hpp"

namespace ctxforest {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_fail(const std::string& field, const std::string& why) {
  throw_error(Err::SchemaViolation, "config: field '" + field + "' " + why);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) config_fail(where + "." + it.key(), "is not a recognized key");
}

std::string env_upper(Role role, const char* suffix) {
  std::string name = "CTXFOREST_";
  for (const char* p = role_name(role); *p; p++)
    name += static_cast<char>(std::toupper(static_cast<unsigned char>(*p)));
  name += suffix;
  return name;
}

void apply_env_overrides(BackendProfile& profile) {
  if (const char* v = std::getenv(env_upper(profile.role, "_ENDPOINT").c_str()); v && *v)
    profile.endpoint = v;
  if (const char* v = std::getenv(env_upper(profile.role, "_MODEL").c_str()); v && *v)
    profile.model_name = v;
  // Keys are passed by env var name, never by value, so configs stay share-safe.
  std::string key_env = env_upper(profile.role, "_KEY");
  if (const char* v = std::getenv(key_env.c_str()); v && *v) profile.api_key_env = key_env;
}

BackendProfile parse_profile(Role role, const json* j, std::uint64_t seed, int embed_dim) {
  BackendProfile p;
  p.role = role;
  p.seed = seed;
  p.embed_dim = embed_dim;
  if (j) {
    reject_unknown(*j,
                   {"endpoint", "model", "api_key_env", "timeout_s", "max_retries",
                    "temperature", "extra"},
                   role_name(role));
    if (j->contains("endpoint")) p.endpoint = (*j)["endpoint"].get<std::string>();
    if (j->contains("model")) p.model_name = (*j)["model"].get<std::string>();
    if (j->contains("api_key_env")) p.api_key_env = (*j)["api_key_env"].get<std::string>();
    if (j->contains("timeout_s")) p.timeout_s = (*j)["timeout_s"].get<double>();
    if (j->contains("max_retries")) p.max_retries = (*j)["max_retries"].get<int>();
    if (j->contains("temperature")) p.temperature = (*j)["temperature"].get<double>();
    if (j->contains("extra"))
      p.extra = (*j)["extra"].get<std::map<std::string, std::string>>();
  }
  apply_env_overrides(p);
  if (p.timeout_s <= 0) config_fail(std::string(role_name(role)) + ".timeout_s", "must be > 0");
  if (p.max_retries < 0) config_fail(std::string(role_name(role)) + ".max_retries", "must be >= 0");
  return p;
}

// Routes each call by the profile's endpoint so stub and HTTP roles mix
// freely in one backend set.
class AutoGateway : public Gateway {
public:
  std::string chat_complete(const BackendProfile& profile,
                            const std::vector<Message>& messages) override {
    record_chat(profile.role, messages);
    return route(profile).chat_complete(profile, messages);
  }
  std::vector<std::vector<double>> embed_batch(const BackendProfile& profile,
                                               const std::vector<std::string>& texts) override {
    record_embed();
    return route(profile).embed_batch(profile, texts);
  }

private:
  Gateway& route(const BackendProfile& p) {
    return p.endpoint == "stub" ? static_cast<Gateway&>(stub_) : static_cast<Gateway&>(http_);
  }

  // Sub-gateway counts are ignored; this instance records every call once.
  StubGateway stub_;
  HttpGateway http_;
};

}  // namespace

EngineConfig parse_engine_config(const std::string& json_text) {
  json doc = json::object();
  if (!json_text.empty()) {
    try {
      doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw_error(Err::ParseError, std::string("config is not valid JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) throw_error(Err::ParseError, "config top level is not an object");
  reject_unknown(doc, {"backends", "policy", "seed", "embed_dim", "cassette"}, "config");

  EngineConfig cfg;
  try {
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    int embed_dim = 8;
    if (doc.contains("embed_dim")) embed_dim = doc["embed_dim"].get<int>();
    if (embed_dim < 1) config_fail("embed_dim", "must be >= 1");

    const json* backends = doc.contains("backends") ? &doc["backends"] : nullptr;
    if (backends)
      reject_unknown(*backends, {"decision", "summary", "embedding", "responder", "judge"},
                     "backends");
    auto role_json = [&](const char* name) -> const json* {
      if (!backends || !backends->contains(name)) return nullptr;
      return &(*backends)[name];
    };
    cfg.backends.decision = parse_profile(Role::Decision, role_json("decision"), cfg.seed, embed_dim);
    cfg.backends.summary = parse_profile(Role::Summary, role_json("summary"), cfg.seed, embed_dim);
    cfg.backends.embedding =
        parse_profile(Role::Embedding, role_json("embedding"), cfg.seed, embed_dim);
    cfg.backends.responder =
        parse_profile(Role::Responder, role_json("responder"), cfg.seed, embed_dim);
    cfg.backends.judge = parse_profile(Role::Judge, role_json("judge"), cfg.seed, embed_dim);

    if (doc.contains("policy")) {
      const json& pol = doc["policy"];
      reject_unknown(pol, {"theta_sim", "retrieval_m", "summary_cap"}, "policy");
      if (pol.contains("theta_sim")) cfg.policy.theta_sim = pol["theta_sim"].get<double>();
      if (pol.contains("retrieval_m")) cfg.policy.retrieval_m = pol["retrieval_m"].get<int>();
      if (pol.contains("summary_cap")) cfg.policy.summary_cap = pol["summary_cap"].get<int>();
    }
  } catch (const json::exception& e) {
    throw_error(Err::ParseError, std::string("config: bad field type: ") + e.what());
  }
  if (cfg.policy.theta_sim < 0.0 || cfg.policy.theta_sim > 1.0)
    config_fail("policy.theta_sim", "must be in [0, 1]");
  if (cfg.policy.retrieval_m < 1) config_fail("policy.retrieval_m", "must be >= 1");
  if (cfg.policy.summary_cap < 1) config_fail("policy.summary_cap", "must be >= 1");

  cfg.backends.gateway = std::make_shared<AutoGateway>();

  // Optional record/replay layer over every chat exchange.
  if (doc.contains("cassette")) {
    const json& cas = doc["cassette"];
    reject_unknown(cas, {"path", "mode"}, "cassette");
    if (!cas.contains("path") || cas["path"].get<std::string>().empty())
      config_fail("cassette.path", "is required");
    std::string mode = cas.contains("mode") ? cas["mode"].get<std::string>() : "replay";
    CassetteGateway::Mode m;
    if (mode == "record")
      m = CassetteGateway::Mode::Record;
    else if (mode == "replay")
      m = CassetteGateway::Mode::Replay;
    else
      config_fail("cassette.mode", "must be record or replay");
    cfg.backends.gateway = std::make_shared<CassetteGateway>(
        cfg.backends.gateway, cas["path"].get<std::string>(), m);
  }
  return cfg;
}

std::string default_engine_config_json() {
  ordered_json doc;
  ordered_json role;
  role["endpoint"] = "stub";
  role["model"] = "";
  role["timeout_s"] = 30.0;
  role["max_retries"] = 2;
  role["temperature"] = 0.0;
  ordered_json backends;
  for (const char* name : {"decision", "summary", "embedding", "responder", "judge"})
    backends[name] = role;
  doc["backends"] = std::move(backends);
  ordered_json policy;
  policy["theta_sim"] = 0.6;
  policy["retrieval_m"] = 3;
  policy["summary_cap"] = 60;
  doc["policy"] = std::move(policy);
  doc["seed"] = 0;
  doc["embed_dim"] = 8;
  return doc.dump(2) + "\n";
}

}  // namespace ctxforest
