#pragma once

// Benchmark harness: loads versioned dialogue scripts, replays them under a
// context strategy, judges checkpoints, and aggregates TCR / ACT / EM / F1
// into byte-stable CSV and JSON reports.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ctxforest/context.hpp"
#include "ctxforest/gateway.hpp"
#include "ctxforest/policy.hpp"

namespace ctxforest {

struct Checkpoint {
  enum class Mode { Rule, Judge };
  std::string question;
  std::string rubric;
  Mode mode = Mode::Rule;
  std::vector<std::string> keywords;  // Rule mode: all must appear (case-insensitive)
};

struct ScriptTurn {
  std::string query;
  std::vector<std::string> reference_answers;  // QA scoring when present
  std::string scripted_response;               // fixture-pinned responder output
};

// One scripted dialogue: the user turns, the verifiable checkpoints, and any
// fixture-scripted decisions keyed by query text.
struct DialogueScript {
  std::string id;
  std::string domain;  // "daily-life" | "coding" | "qa"
  std::vector<ScriptTurn> turns;
  std::vector<Checkpoint> checkpoints;
  std::map<std::string, std::string> topic_script;
  std::map<std::string, std::string> branch_script;
};

// Strict loader: ParseError carries line/position, SchemaViolation names the
// offending field. Task-mode dialogues need >= 3 checkpoints; QA dialogues
// need reference answers.
DialogueScript parse_script(const std::string& text, const std::string& origin);
DialogueScript load_script(const std::string& path);

struct TurnRecord {
  int turn = 0;
  std::int64_t context_tokens = 0;  // context + query, excluding fixed system prompt
  std::string response;
  double latency_ms = 0.0;          // informational only; never lands in reports
  std::string topic_action;         // tree strategies only
  std::string branch_action;
  bool has_refs = false;
  int em = 0;
  double f1 = 0.0;
};

struct RunResult {
  std::string dialogue_id;
  std::string domain;
  StrategyId strategy;
  int scripted_turns = 0;
  std::vector<TurnRecord> per_turn;
  std::vector<bool> checkpoint_outcomes;
  bool judged = false;
  std::string final_snapshot;  // tree strategies: snapshot document

  double act() const;  // mean per-turn context tokens
  int checkpoints_passed() const;
  double tcr() const;  // passed / total
};

// Replays every turn in order under the strategy: select or build the
// context, call the responder, commit. Backend errors are annotated with the
// failing turn index. Scripted decisions/responses from the fixture are
// honored through a ScriptedGateway wrapper.
RunResult run_session(const DialogueScript& script, const StrategyId& strategy,
                      const BackendSet& backends, const PolicyConfig& policy,
                      const std::string& audit_path = "");

// Fills checkpoint_outcomes: Rule = required keywords in the final response;
// Judge = backend answers strictly yes/no, one retry, then JudgeUnparsable.
void judge_checkpoints(RunResult& result, const DialogueScript& script, Gateway& gateway,
                       const BackendProfile& judge_profile);

// Micro average: total passed / total checkpoints across dialogues.
double compute_tcr(const std::vector<RunResult>& results);
// Macro average: mean of per-dialogue rates (dialogues without checkpoints
// are excluded from both).
double compute_tcr_macro(const std::vector<RunResult>& results);

struct EmF1 {
  int em = 0;    // 0 | 1
  double f1 = 0.0;
};

// Standard QA convention: lowercase, strip punctuation and articles,
// collapse whitespace; EM on normalized equality against any gold, F1 as the
// max token-overlap harmonic mean.
EmF1 compute_em_f1(const std::string& prediction, const std::vector<std::string>& gold_answers);

// Report emission. Rows are sorted by strategy (canonical order) and
// dialogue id; ACT is bucketed by scripted dialogue length. Gain/drop
// columns compare against full_history and stay empty without that
// baseline. Throws UnsupportedFormat for anything but "csv" / "json",
// EmptyInput for no results.
std::string emit_report(const std::vector<RunResult>& results, const std::string& format);

struct BenchOutcome {
  std::vector<RunResult> results;
  std::vector<std::string> aborted;  // "<dialogue>/<strategy>: <error>"
  std::string report_csv;
  std::string report_json;
};

// Runs every (script, strategy) pair, judges, writes report.csv /
// report.json / per-run snapshots and audit logs under out_dir. Failed runs
// are recorded in `aborted` and the rest still complete (partial results are
// flushed).
BenchOutcome run_bench(const std::vector<std::string>& script_paths,
                       const std::vector<StrategyId>& strategies, const BackendSet& backends,
                       const PolicyConfig& policy, const std::string& out_dir);

}  // namespace ctxforest
