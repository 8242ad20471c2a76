#include "ctxforest/bench.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ctxforest {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kScriptSchemaVersion = 1;
constexpr int kReportSchemaVersion = 1;

[[noreturn]] void schema_fail(const std::string& origin, const std::string& field,
                              const std::string& why) {
  throw_error(Err::SchemaViolation, origin + ": field '" + field + "' " + why);
}

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); i++)
    if (text[i] == '\n') line++;
  return line;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& origin, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      schema_fail(origin, where + "." + it.key(), "is not a recognized key");
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

DialogueScript parse_script(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_error(Err::ParseError, origin + " line " + std::to_string(line_of_byte(text, e.byte)) +
                                     ": " + e.what());
  }
  if (!doc.is_object()) throw_error(Err::ParseError, origin + ": top level is not an object");

  reject_unknown_keys(doc,
                      {"schema_version", "id", "domain", "turns", "checkpoints",
                       "scripted_decisions"},
                      origin, "script");

  DialogueScript script;
  try {
    if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != kScriptSchemaVersion)
      schema_fail(origin, "schema_version", "must be " + std::to_string(kScriptSchemaVersion));
    if (!doc.contains("id") || doc["id"].get<std::string>().empty())
      schema_fail(origin, "id", "is required and must be non-empty");
    script.id = doc["id"].get<std::string>();
    if (!doc.contains("domain")) schema_fail(origin, "domain", "is required");
    script.domain = doc["domain"].get<std::string>();
    if (script.domain != "daily-life" && script.domain != "coding" && script.domain != "qa")
      schema_fail(origin, "domain", "must be one of daily-life, coding, qa");

    if (!doc.contains("turns") || !doc["turns"].is_array() || doc["turns"].empty())
      schema_fail(origin, "turns", "must be a non-empty array");
    for (const auto& jt : doc["turns"]) {
      reject_unknown_keys(jt, {"query", "reference_answers", "response"}, origin, "turn");
      ScriptTurn turn;
      if (!jt.contains("query") || jt["query"].get<std::string>().empty())
        schema_fail(origin, "turns.query", "is required and must be non-empty");
      turn.query = jt["query"].get<std::string>();
      if (jt.contains("reference_answers"))
        turn.reference_answers = jt["reference_answers"].get<std::vector<std::string>>();
      if (jt.contains("response")) turn.scripted_response = jt["response"].get<std::string>();
      script.turns.push_back(std::move(turn));
    }

    if (doc.contains("checkpoints")) {
      for (const auto& jc : doc["checkpoints"]) {
        reject_unknown_keys(jc, {"question", "rubric", "mode", "keywords"}, origin, "checkpoint");
        Checkpoint cp;
        if (!jc.contains("question") || jc["question"].get<std::string>().empty())
          schema_fail(origin, "checkpoints.question", "is required and must be non-empty");
        cp.question = jc["question"].get<std::string>();
        if (jc.contains("rubric")) cp.rubric = jc["rubric"].get<std::string>();
        std::string mode = jc.contains("mode") ? jc["mode"].get<std::string>() : "rule";
        if (mode == "rule")
          cp.mode = Checkpoint::Mode::Rule;
        else if (mode == "judge")
          cp.mode = Checkpoint::Mode::Judge;
        else
          schema_fail(origin, "checkpoints.mode", "must be rule or judge");
        if (jc.contains("keywords"))
          cp.keywords = jc["keywords"].get<std::vector<std::string>>();
        if (cp.mode == Checkpoint::Mode::Rule && cp.keywords.empty())
          schema_fail(origin, "checkpoints.keywords", "is required for rule checkpoints");
        script.checkpoints.push_back(std::move(cp));
      }
    }

    if (doc.contains("scripted_decisions")) {
      const auto& sd = doc["scripted_decisions"];
      reject_unknown_keys(sd, {"topic", "branch"}, origin, "scripted_decisions");
      if (sd.contains("topic"))
        script.topic_script = sd["topic"].get<std::map<std::string, std::string>>();
      if (sd.contains("branch"))
        script.branch_script = sd["branch"].get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw_error(Err::ParseError, origin + ": bad field type: " + e.what());
  }

  // Task-mode dialogues evaluate via checkpoints; QA dialogues via reference
  // answers.
  if (script.domain == "qa") {
    bool any_refs = std::any_of(script.turns.begin(), script.turns.end(),
                                [](const ScriptTurn& t) { return !t.reference_answers.empty(); });
    if (!any_refs)
      schema_fail(origin, "turns.reference_answers", "qa scripts need at least one turn with them");
  } else if (script.checkpoints.size() < 3) {
    schema_fail(origin, "checkpoints",
                "task dialogues need at least 3, got " + std::to_string(script.checkpoints.size()));
  }
  return script;
}

DialogueScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_error(Err::IoError, "cannot read script " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_script(buf.str(), path);
}

// ---------------------------------------------------------------------------
// RunResult accessors
// ---------------------------------------------------------------------------

double RunResult::act() const {
  if (per_turn.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : per_turn) sum += static_cast<double>(t.context_tokens);
  return sum / static_cast<double>(per_turn.size());
}

int RunResult::checkpoints_passed() const {
  int n = 0;
  for (bool b : checkpoint_outcomes) n += b ? 1 : 0;
  return n;
}

double RunResult::tcr() const {
  if (checkpoint_outcomes.empty()) return 0.0;
  return static_cast<double>(checkpoints_passed()) /
         static_cast<double>(checkpoint_outcomes.size());
}

// ---------------------------------------------------------------------------
// run_session
// ---------------------------------------------------------------------------

namespace {

bool is_tree_strategy(const StrategyId& s) {
  return s.kind == StrategyId::Kind::ContextAgent || s.kind == StrategyId::Kind::HeuristicOnly;
}

BackendSet with_script_overrides(const DialogueScript& script, const BackendSet& base) {
  std::map<std::string, std::string> responses;
  for (const auto& t : script.turns)
    if (!t.scripted_response.empty()) responses[t.query] = t.scripted_response;
  if (script.topic_script.empty() && script.branch_script.empty() && responses.empty())
    return base;
  BackendSet wrapped = base;
  wrapped.gateway = std::make_shared<ScriptedGateway>(base.gateway, script.topic_script,
                                                      script.branch_script, std::move(responses));
  return wrapped;
}

void score_refs(TurnRecord& rec, const ScriptTurn& turn) {
  if (turn.reference_answers.empty()) return;
  EmF1 s = compute_em_f1(rec.response, turn.reference_answers);
  rec.has_refs = true;
  rec.em = s.em;
  rec.f1 = s.f1;
}

}  // namespace

RunResult run_session(const DialogueScript& script, const StrategyId& strategy,
                      const BackendSet& backends, const PolicyConfig& policy,
                      const std::string& audit_path) {
  RunResult result;
  result.dialogue_id = script.id;
  result.domain = script.domain;
  result.strategy = strategy;
  result.scripted_turns = static_cast<int>(script.turns.size());

  BackendSet set = with_script_overrides(script, backends);
  Gateway& gw = *set.gateway;

  auto run_turn = [&](int turn_no, auto&& body) {
    auto start = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.code(), "turn " + std::to_string(turn_no) + " of " + script.id + ": " +
                                e.what());
    }
    result.per_turn.back().latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
  };

  if (is_tree_strategy(strategy)) {
    PolicyConfig cfg = policy;
    if (strategy.kind == StrategyId::Kind::HeuristicOnly)
      cfg.branch_mode = PolicyConfig::BranchMode::HeuristicOnly;
    Session session(set, cfg);
    if (!audit_path.empty()) session.open_audit_log(audit_path);

    int turn_no = 0;
    for (const auto& turn : script.turns) {
      turn_no++;
      run_turn(turn_no, [&] {
        auto advanced = session.advance_turn(turn.query);
        std::string response =
            gw.chat_complete(set.responder, responder_messages(advanced.context, turn.query));
        session.commit_turn(advanced.pending, response);

        TurnRecord rec;
        rec.turn = turn_no;
        rec.context_tokens = advanced.context.token_count + count_tokens(turn.query);
        rec.response = std::move(response);
        const TurnTrace& trace = session.traces().back();
        rec.topic_action = trace.topic_action;
        rec.branch_action = trace.branch_action;
        score_refs(rec, turn);
        result.per_turn.push_back(std::move(rec));
      });
    }
    result.final_snapshot = snapshot(session.state());
    return result;
  }

  // Linear baselines.
  LinearHistory history;
  bool needs_embeddings = strategy.kind == StrategyId::Kind::LinearRag;
  int turn_no = 0;
  for (const auto& turn : script.turns) {
    turn_no++;
    run_turn(turn_no, [&] {
      std::vector<double> qemb;
      if (needs_embeddings && !history.turns.empty())
        qemb = gw.embed_batch(set.embedding, {turn.query}).front();
      AssembledContext ctx = select_context(strategy, history, qemb);
      std::string response =
          gw.chat_complete(set.responder, responder_messages(ctx, turn.query));

      LinearTurn lt;
      lt.turn_index = turn_no;
      lt.query = turn.query;
      lt.response = response;
      lt.content = format_turn_content(turn.query, response);
      if (needs_embeddings) lt.embedding = gw.embed_batch(set.embedding, {lt.content}).front();
      history.turns.push_back(std::move(lt));

      TurnRecord rec;
      rec.turn = turn_no;
      rec.context_tokens = ctx.token_count + count_tokens(turn.query);
      rec.response = std::move(response);
      score_refs(rec, turn);
      result.per_turn.push_back(std::move(rec));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Judging
// ---------------------------------------------------------------------------

namespace {

bool rule_checkpoint_passes(const Checkpoint& cp, const std::string& final_response) {
  std::string haystack = lowercase(final_response);
  for (const auto& kw : cp.keywords)
    if (haystack.find(lowercase(kw)) == std::string::npos) return false;
  return true;
}

std::optional<bool> parse_yes_no(const std::string& answer) {
  std::string t = lowercase(answer);
  auto begin = t.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return std::nullopt;
  auto end = t.find_last_not_of(" \t\r\n.!");
  t = t.substr(begin, end - begin + 1);
  if (t == "yes") return true;
  if (t == "no") return false;
  return std::nullopt;
}

bool judge_checkpoint(const Checkpoint& cp, const std::string& final_response, Gateway& gateway,
                      const BackendProfile& judge_profile) {
  std::vector<Message> messages{
      {"system",
       "You judge whether a response satisfies a checkpoint. Answer strictly "
       "\"yes\" or \"no\"."},
      {"user", "Checkpoint: " + cp.question + "\nRubric: " + cp.rubric +
                   "\nResponse:\n" + final_response + "\nDoes the response satisfy the checkpoint?"},
  };
  std::string answer = gateway.chat_complete(judge_profile, messages);
  if (auto v = parse_yes_no(answer)) return *v;

  messages.push_back({"assistant", answer});
  messages.push_back({"user", "Answer strictly yes or no."});
  std::string second = gateway.chat_complete(judge_profile, messages);
  if (auto v = parse_yes_no(second)) return *v;
  throw_error(Err::JudgeUnparsable,
              "judge answered '" + answer + "' then '" + second + "'");
}

}  // namespace

void judge_checkpoints(RunResult& result, const DialogueScript& script, Gateway& gateway,
                       const BackendProfile& judge_profile) {
  if (result.per_turn.empty()) throw_error(Err::EmptyInput, "run has no turns");
  const std::string& final_response = result.per_turn.back().response;

  result.checkpoint_outcomes.clear();
  for (const auto& cp : script.checkpoints) {
    bool ok = cp.mode == Checkpoint::Mode::Rule
                  ? rule_checkpoint_passes(cp, final_response)
                  : judge_checkpoint(cp, final_response, gateway, judge_profile);
    result.checkpoint_outcomes.push_back(ok);
  }
  result.judged = true;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

double compute_tcr(const std::vector<RunResult>& results) {
  if (results.empty()) throw_error(Err::EmptyInput, "no results");
  long passed = 0, total = 0;
  for (const auto& r : results) {
    if (!r.judged && !r.checkpoint_outcomes.empty())
      throw_error(Err::InvalidArgument, r.dialogue_id + " has unjudged checkpoints");
    passed += r.checkpoints_passed();
    total += static_cast<long>(r.checkpoint_outcomes.size());
  }
  if (total == 0) throw_error(Err::EmptyInput, "no checkpoints across results");
  return static_cast<double>(passed) / static_cast<double>(total);
}

double compute_tcr_macro(const std::vector<RunResult>& results) {
  if (results.empty()) throw_error(Err::EmptyInput, "no results");
  double sum = 0.0;
  int n = 0;
  for (const auto& r : results) {
    if (r.checkpoint_outcomes.empty()) continue;
    sum += r.tcr();
    n++;
  }
  if (n == 0) throw_error(Err::EmptyInput, "no checkpoints across results");
  return sum / n;
}

namespace {

// SQuAD-style answer normalization: lowercase, strip punctuation, drop
// articles, collapse whitespace.
std::vector<std::string> normalize_answer_tokens(const std::string& text) {
  std::string cleaned;
  for (unsigned char c : text) {
    if (std::ispunct(c)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::vector<std::string> tokens;
  std::istringstream in(cleaned);
  std::string tok;
  while (in >> tok) {
    if (tok == "a" || tok == "an" || tok == "the") continue;
    tokens.push_back(tok);
  }
  return tokens;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); i++) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

double token_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<std::string, int> gold_counts;
  for (const auto& t : gold) gold_counts[t]++;
  int overlap = 0;
  for (const auto& t : pred) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      overlap++;
      it->second--;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
  double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

EmF1 compute_em_f1(const std::string& prediction, const std::vector<std::string>& gold_answers) {
  if (gold_answers.empty()) throw_error(Err::InvalidArgument, "need at least one gold answer");
  std::vector<std::string> pred = normalize_answer_tokens(prediction);
  std::string pred_joined = join(pred);

  EmF1 out;
  for (const auto& gold : gold_answers) {
    std::vector<std::string> g = normalize_answer_tokens(gold);
    if (join(g) == pred_joined) out.em = 1;
    out.f1 = std::max(out.f1, token_f1(pred, g));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

int strategy_rank(const StrategyId& s) {
  switch (s.kind) {
    case StrategyId::Kind::FullHistory: return 0;
    case StrategyId::Kind::Truncation: return 1;
    case StrategyId::Kind::LinearRag: return 2;
    case StrategyId::Kind::HeuristicOnly: return 3;
    case StrategyId::Kind::ContextAgent: return 4;
  }
  return 5;
}

bool result_order(const RunResult& a, const RunResult& b) {
  int ra = strategy_rank(a.strategy), rb = strategy_rank(b.strategy);
  if (ra != rb) return ra < rb;
  if (a.strategy.k != b.strategy.k) return a.strategy.k < b.strategy.k;
  return a.dialogue_id < b.dialogue_id;
}

std::string fmt(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct StrategyAggregate {
  StrategyId strategy;
  std::vector<const RunResult*> runs;

  long passed = 0, total = 0;
  double tcr_micro = 0.0, tcr_macro = 0.0;
  bool has_checkpoints = false;
  double act = 0.0;
  std::map<int, double> act_by_len;  // scripted length -> mean act
  double em = 0.0, f1 = 0.0;
  int ref_turns = 0;

  void finalize() {
    double act_sum = 0.0;
    std::map<int, std::pair<double, int>> bucket;
    double macro_sum = 0.0;
    int macro_n = 0;
    double em_sum = 0.0, f1_sum = 0.0;
    for (const auto* r : runs) {
      passed += r->checkpoints_passed();
      total += static_cast<long>(r->checkpoint_outcomes.size());
      if (!r->checkpoint_outcomes.empty()) {
        macro_sum += r->tcr();
        macro_n++;
      }
      act_sum += r->act();
      auto& b = bucket[r->scripted_turns];
      b.first += r->act();
      b.second++;
      for (const auto& t : r->per_turn) {
        if (!t.has_refs) continue;
        em_sum += t.em;
        f1_sum += t.f1;
        ref_turns++;
      }
    }
    has_checkpoints = total > 0;
    tcr_micro = has_checkpoints ? static_cast<double>(passed) / static_cast<double>(total) : 0.0;
    tcr_macro = macro_n > 0 ? macro_sum / macro_n : 0.0;
    act = runs.empty() ? 0.0 : act_sum / static_cast<double>(runs.size());
    for (const auto& [len, acc] : bucket) act_by_len[len] = acc.first / acc.second;
    if (ref_turns > 0) {
      em = em_sum / ref_turns;
      f1 = f1_sum / ref_turns;
    }
  }
};

std::vector<StrategyAggregate> aggregate(const std::vector<RunResult>& results) {
  std::vector<const RunResult*> sorted;
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const RunResult* a, const RunResult* b) { return result_order(*a, *b); });

  std::vector<StrategyAggregate> aggs;
  for (const auto* r : sorted) {
    if (aggs.empty() || !(aggs.back().strategy == r->strategy)) {
      aggs.push_back({});
      aggs.back().strategy = r->strategy;
    }
    aggs.back().runs.push_back(r);
  }
  for (auto& a : aggs) a.finalize();
  return aggs;
}

}  // namespace

std::string emit_report(const std::vector<RunResult>& results, const std::string& format) {
  if (format != "csv" && format != "json")
    throw_error(Err::UnsupportedFormat, "format '" + format + "' (use csv or json)");
  if (results.empty()) throw_error(Err::EmptyInput, "no results to report");

  std::vector<StrategyAggregate> aggs = aggregate(results);

  const StrategyAggregate* baseline = nullptr;
  for (const auto& a : aggs)
    if (a.strategy.kind == StrategyId::Kind::FullHistory) baseline = &a;

  std::set<int> lengths;
  for (const auto& a : aggs)
    for (const auto& [len, _] : a.act_by_len) lengths.insert(len);

  auto gain_pct = [&](const StrategyAggregate& a) -> std::string {
    if (!baseline || &a == baseline || !a.has_checkpoints || !baseline->has_checkpoints ||
        baseline->tcr_micro == 0.0)
      return "";
    return fmt((a.tcr_micro - baseline->tcr_micro) / baseline->tcr_micro * 100.0, "%+.1f");
  };
  auto drop_pct = [&](const StrategyAggregate& a) -> std::string {
    if (!baseline || &a == baseline || baseline->act == 0.0) return "";
    return fmt((a.act - baseline->act) / baseline->act * 100.0, "%+.1f");
  };

  if (format == "csv") {
    std::string out = "strategy,dialogues,checkpoints_passed,checkpoints_total,tcr_micro,"
                      "tcr_macro,tcr_gain_pct,act,act_drop_pct";
    for (int len : lengths) out += ",act_" + std::to_string(len) + "turn";
    out += ",em,f1\n";
    for (const auto& a : aggs) {
      out += strategy_name(a.strategy);
      out += "," + std::to_string(a.runs.size());
      out += "," + std::to_string(a.passed);
      out += "," + std::to_string(a.total);
      out += "," + (a.has_checkpoints ? fmt(a.tcr_micro, "%.4f") : "");
      out += "," + (a.has_checkpoints ? fmt(a.tcr_macro, "%.4f") : "");
      out += "," + gain_pct(a);
      out += "," + fmt(a.act, "%.1f");
      out += "," + drop_pct(a);
      for (int len : lengths) {
        auto it = a.act_by_len.find(len);
        out += "," + (it == a.act_by_len.end() ? "" : fmt(it->second, "%.1f"));
      }
      out += "," + (a.ref_turns ? fmt(a.em, "%.4f") : "");
      out += "," + (a.ref_turns ? fmt(a.f1, "%.4f") : "");
      out += "\n";
    }
    return out;
  }

  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  ordered_json strategies = ordered_json::array();
  for (const auto& a : aggs) {
    ordered_json js;
    js["strategy"] = strategy_name(a.strategy);
    js["dialogues"] = a.runs.size();
    js["checkpoints_passed"] = a.passed;
    js["checkpoints_total"] = a.total;
    if (a.has_checkpoints) {
      js["tcr_micro"] = fmt(a.tcr_micro, "%.4f");
      js["tcr_macro"] = fmt(a.tcr_macro, "%.4f");
    }
    std::string gain = gain_pct(a);
    if (!gain.empty()) js["tcr_gain_pct"] = gain;
    js["act"] = fmt(a.act, "%.1f");
    std::string drop = drop_pct(a);
    if (!drop.empty()) js["act_drop_pct"] = drop;
    ordered_json buckets;
    for (const auto& [len, v] : a.act_by_len)
      buckets[std::to_string(len) + "-turn"] = fmt(v, "%.1f");
    js["act_by_length"] = std::move(buckets);
    if (a.ref_turns) {
      js["em"] = fmt(a.em, "%.4f");
      js["f1"] = fmt(a.f1, "%.4f");
    }
    ordered_json dialogues = ordered_json::array();
    for (const auto* r : a.runs) {
      ordered_json jd;
      jd["id"] = r->dialogue_id;
      jd["domain"] = r->domain;
      jd["turns"] = r->per_turn.size();
      jd["act"] = fmt(r->act(), "%.1f");
      if (!r->checkpoint_outcomes.empty()) {
        jd["tcr"] = fmt(r->tcr(), "%.4f");
        jd["checkpoint_outcomes"] = r->checkpoint_outcomes;
      }
      ordered_json turns = ordered_json::array();
      for (const auto& t : r->per_turn) {
        ordered_json jt;
        jt["turn"] = t.turn;
        jt["context_tokens"] = t.context_tokens;
        if (!t.topic_action.empty()) jt["topic_action"] = t.topic_action;
        if (!t.branch_action.empty()) jt["branch_action"] = t.branch_action;
        if (t.has_refs) {
          jt["em"] = t.em;
          jt["f1"] = fmt(t.f1, "%.4f");
        }
        turns.push_back(std::move(jt));
      }
      jd["per_turn"] = std::move(turns);
      jd["final_response"] = r->per_turn.back().response;
      dialogues.push_back(std::move(jd));
    }
    js["dialogues"] = std::move(dialogues);
    strategies.push_back(std::move(js));
  }
  doc["strategies"] = std::move(strategies);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// run_bench
// ---------------------------------------------------------------------------

namespace {

std::string sanitize_filename(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return s;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_error(Err::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace

BenchOutcome run_bench(const std::vector<std::string>& script_paths,
                       const std::vector<StrategyId>& strategies, const BackendSet& backends,
                       const PolicyConfig& policy, const std::string& out_dir) {
  if (script_paths.empty()) throw_error(Err::EmptyInput, "no scripts given");
  if (strategies.empty()) throw_error(Err::EmptyInput, "no strategies given");

  std::filesystem::create_directories(out_dir);

  std::vector<DialogueScript> scripts;
  for (const auto& p : script_paths) scripts.push_back(load_script(p));
  std::sort(scripts.begin(), scripts.end(),
            [](const DialogueScript& a, const DialogueScript& b) { return a.id < b.id; });

  BenchOutcome outcome;
  for (const auto& strategy : strategies) {
    for (const auto& script : scripts) {
      std::string stem = sanitize_filename(script.id) + "__" +
                         sanitize_filename(strategy_name(strategy));
      try {
        std::string audit_path;
        if (is_tree_strategy(strategy))
          audit_path = (std::filesystem::path(out_dir) / (stem + ".audit.jsonl")).string();
        RunResult r = run_session(script, strategy, backends, policy, audit_path);
        if (!script.checkpoints.empty())
          judge_checkpoints(r, script, *backends.gateway, backends.judge);
        if (!r.final_snapshot.empty())
          write_file(std::filesystem::path(out_dir) / (stem + ".snapshot.json"),
                     r.final_snapshot);
        outcome.results.push_back(std::move(r));
      } catch (const Error& e) {
        outcome.aborted.push_back(script.id + "/" + strategy_name(strategy) + ": " + e.what());
      }
    }
  }

  if (!outcome.results.empty()) {
    outcome.report_csv = emit_report(outcome.results, "csv");
    outcome.report_json = emit_report(outcome.results, "json");
    write_file(std::filesystem::path(out_dir) / "report.csv", outcome.report_csv);
    write_file(std::filesystem::path(out_dir) / "report.json", outcome.report_json);
  }
  return outcome;
}

}  // namespace ctxforest
