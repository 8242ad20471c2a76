#include "ctxforest.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>

#include "ctxforest/bench.hpp"
#include "ctxforest/config.hpp"
#include "ctxforest/forest.hpp"
#include "ctxforest/policy.hpp"
#include "json.hpp"

// The public handle is the engine session plus its parsed configuration.
struct cxf_session {
  ctxforest::EngineConfig config;
  ctxforest::Session session;

  cxf_session(ctxforest::EngineConfig cfg)
      : config(cfg), session(cfg.backends, cfg.policy) {}
  cxf_session(ctxforest::EngineConfig cfg, ctxforest::SessionState state)
      : config(cfg), session(cfg.backends, cfg.policy, std::move(state)) {}
};

namespace {

using ctxforest::Err;
using ctxforest::Error;
using json = nlohmann::json;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_output(char** out, const std::string& value) {
  if (out) *out = dup_string(value);
}

// Runs the body, translating exceptions into status codes + the thread-local
// message. The C boundary never lets an exception escape.
template <typename Fn>
cxf_status guarded(Fn&& fn) {
  try {
    fn();
    return CXF_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return static_cast<cxf_status>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CXF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return CXF_ERR_INTERNAL;
  }
}

std::string config_or_default(const char* config_json) {
  return config_json ? std::string(config_json) : std::string();
}

}  // namespace

extern "C" {

const char* cxf_version(void) { return "0.1.0"; }

const char* cxf_status_name(cxf_status status) {
  return ctxforest::err_name(static_cast<Err>(status));
}

const char* cxf_last_error(void) { return g_last_error.c_str(); }

void cxf_string_free(char* s) { std::free(s); }

cxf_status cxf_default_config(char** out_json) {
  return guarded([&] { set_output(out_json, ctxforest::default_engine_config_json()); });
}

cxf_status cxf_session_new(const char* config_json, cxf_session** out) {
  return guarded([&] {
    if (!out) ctxforest::throw_error(Err::InvalidArgument, "out handle is null");
    auto cfg = ctxforest::parse_engine_config(config_or_default(config_json));
    *out = new cxf_session(std::move(cfg));
  });
}

cxf_status cxf_session_restore(const char* snapshot_json, const char* config_json,
                               cxf_session** out) {
  return guarded([&] {
    if (!out) ctxforest::throw_error(Err::InvalidArgument, "out handle is null");
    if (!snapshot_json) ctxforest::throw_error(Err::InvalidArgument, "snapshot is null");
    auto cfg = ctxforest::parse_engine_config(config_or_default(config_json));
    auto state = ctxforest::restore(snapshot_json);
    *out = new cxf_session(std::move(cfg), std::move(state));
  });
}

void cxf_session_free(cxf_session* session) { delete session; }

cxf_status cxf_chat_turn(cxf_session* session, const char* query, char** out_response,
                         char** out_trace_json) {
  return guarded([&] {
    if (!session) ctxforest::throw_error(Err::InvalidArgument, "session is null");
    if (!query) ctxforest::throw_error(Err::InvalidArgument, "query is null");

    auto advanced = session->session.advance_turn(query);
    std::string response;
    try {
      response = session->config.backends.gateway->chat_complete(
          session->config.backends.responder,
          ctxforest::responder_messages(advanced.context, query));
    } catch (...) {
      session->session.abort_turn(advanced.pending);
      throw;
    }
    session->session.commit_turn(advanced.pending, response);

    const ctxforest::TurnTrace& trace = session->session.traces().back();
    json jt;
    jt["turn"] = trace.turn;
    jt["topic_action"] = trace.topic_action;
    jt["branch_action"] = trace.branch_action;
    jt["filter_passed"] = trace.filter_passed;
    jt["fork_node"] = trace.fork_node;
    jt["fork_score"] = trace.fork_score;
    jt["context_tokens"] = trace.context_tokens;

    set_output(out_response, response);
    set_output(out_trace_json, jt.dump());
  });
}

cxf_status cxf_session_snapshot(cxf_session* session, char** out_json) {
  return guarded([&] {
    if (!session) ctxforest::throw_error(Err::InvalidArgument, "session is null");
    set_output(out_json, ctxforest::snapshot(session->session.state()));
  });
}

cxf_status cxf_session_tree_ascii(cxf_session* session, char** out_text) {
  return guarded([&] {
    if (!session) ctxforest::throw_error(Err::InvalidArgument, "session is null");
    set_output(out_text, ctxforest::ascii_forest(session->session.state()));
  });
}

cxf_status cxf_session_open_audit_log(cxf_session* session, const char* path) {
  return guarded([&] {
    if (!session || !path) ctxforest::throw_error(Err::InvalidArgument, "session/path is null");
    session->session.open_audit_log(path);
  });
}

cxf_status cxf_snapshot_to_dot(const char* snapshot_json, char** out_dot) {
  return guarded([&] {
    if (!snapshot_json) ctxforest::throw_error(Err::InvalidArgument, "snapshot is null");
    auto state = ctxforest::restore(snapshot_json);
    set_output(out_dot, ctxforest::export_dot(state));
  });
}

cxf_status cxf_bench_run(const char* config_json, const char* scripts_json,
                         const char* strategies_json, const char* out_dir,
                         char** out_summary_json) {
  return guarded([&] {
    if (!scripts_json || !strategies_json || !out_dir)
      ctxforest::throw_error(Err::InvalidArgument, "scripts/strategies/out_dir is null");

    auto cfg = ctxforest::parse_engine_config(config_or_default(config_json));

    std::vector<std::string> scripts;
    std::vector<ctxforest::StrategyId> strategies;
    try {
      for (const auto& p : json::parse(scripts_json)) scripts.push_back(p.get<std::string>());
      for (const auto& s : json::parse(strategies_json))
        strategies.push_back(ctxforest::parse_strategy(s.get<std::string>()));
    } catch (const json::exception& e) {
      ctxforest::throw_error(Err::ParseError,
                             std::string("scripts/strategies must be JSON string arrays: ") +
                                 e.what());
    }

    auto outcome = ctxforest::run_bench(scripts, strategies, cfg.backends, cfg.policy, out_dir);

    if (out_summary_json) {
      json summary;
      summary["report"] =
          outcome.report_json.empty() ? json(nullptr) : json::parse(outcome.report_json);
      summary["aborted"] = outcome.aborted;
      set_output(out_summary_json, summary.dump(2));
    }
    if (!outcome.aborted.empty()) {
      std::string msg = std::to_string(outcome.aborted.size()) + " run(s) aborted: ";
      for (std::size_t i = 0; i < outcome.aborted.size(); i++)
        msg += (i ? "; " : "") + outcome.aborted[i];
      ctxforest::throw_error(Err::Internal, msg);
    }
  });
}

}  // extern "C"
