// ctxforest CLI: chat REPL, benchmark runner, snapshot inspection, and DOT
// export. Everything goes through the C API in ctxforest.h; this binary is
// also the reference consumer of that surface.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ctxforest.h"
#include "json.hpp"

namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  long long seed = -1;
  double theta = -1.0;
  int retrieval_m = -1;
  int truncation_k = -1;
  double timeout_s = -1.0;
  int max_retries = -1;
};

void add_common_flags(CLI::App* app, CommonOpts& opts) {
  app->add_option("--config", opts.config_path, "Config JSON file (defaults to all-stub backends)");
  app->add_option("--out", opts.out_dir, "Output directory");
  app->add_option("--seed", opts.seed, "Stub determinism seed");
  app->add_option("--theta", opts.theta, "Similarity threshold theta_sim");
  app->add_option("--m", opts.retrieval_m, "Retrieval size m");
  app->add_option("--k", opts.truncation_k, "Default window k for truncation/linear_rag");
  app->add_option("--timeout", opts.timeout_s, "Per-request timeout in seconds, all backends");
  app->add_option("--retries", opts.max_retries, "Max retries per request, all backends");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Builds the engine config document: file contents (if any) plus flag
// overrides.
std::string build_config(const CommonOpts& opts) {
  json cfg = json::object();
  if (!opts.config_path.empty()) cfg = json::parse(read_file(opts.config_path));
  if (opts.seed >= 0) cfg["seed"] = opts.seed;
  if (opts.theta >= 0) cfg["policy"]["theta_sim"] = opts.theta;
  if (opts.retrieval_m >= 0) cfg["policy"]["retrieval_m"] = opts.retrieval_m;
  for (const char* role : {"decision", "summary", "embedding", "responder", "judge"}) {
    if (opts.timeout_s > 0) cfg["backends"][role]["timeout_s"] = opts.timeout_s;
    if (opts.max_retries >= 0) cfg["backends"][role]["max_retries"] = opts.max_retries;
  }
  return cfg.dump();
}

int fail_with(const char* what, cxf_status status) {
  std::cerr << "error: " << what << ": " << cxf_status_name(status) << " — " << cxf_last_error()
            << "\n";
  return kExitRunFailure;
}

// Owned C string -> std::string.
std::string take(char* s) {
  if (!s) return {};
  std::string out(s);
  cxf_string_free(s);
  return out;
}

// '*' wildcard match on the filename part; literal paths pass through.
bool wildcard_match(const std::string& pattern, const std::string& name) {
  std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == name[n])) {
      p++, n++;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') p++;
  return p == pattern.size();
}

std::vector<std::string> expand_scripts(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& pat : patterns) {
    if (pat.find('*') == std::string::npos) {
      out.push_back(pat);
      continue;
    }
    std::filesystem::path p(pat);
    std::filesystem::path dir = p.parent_path().empty() ? "." : p.parent_path();
    std::string name_pat = p.filename().string();
    std::vector<std::string> found;
    if (std::filesystem::is_directory(dir)) {
      for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && wildcard_match(name_pat, entry.path().filename().string()))
          found.push_back(entry.path().string());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// chat
// ---------------------------------------------------------------------------

int run_chat(const CommonOpts& opts) {
  cxf_session* session = nullptr;
  std::string cfg = build_config(opts);
  if (cxf_status s = cxf_session_new(cfg.c_str(), &session); s != CXF_OK)
    return fail_with("session", s);

  std::filesystem::create_directories(opts.out_dir);
  std::string audit_path = opts.out_dir + "/chat.audit.jsonl";
  cxf_session_open_audit_log(session, audit_path.c_str());

  std::cout << "ctxforest chat — /tree, /save [path], /quit\n";
  std::string line;
  while (true) {
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line.empty()) continue;

    if (line == "/quit") break;
    if (line == "/tree") {
      char* text = nullptr;
      if (cxf_status s = cxf_session_tree_ascii(session, &text); s != CXF_OK)
        std::cerr << "error: " << cxf_last_error() << "\n";
      else
        std::cout << take(text);
      continue;
    }
    if (line.rfind("/save", 0) == 0) {
      std::string path = line.size() > 6 ? line.substr(6) : opts.out_dir + "/snapshot.json";
      char* snap = nullptr;
      if (cxf_status s = cxf_session_snapshot(session, &snap); s != CXF_OK) {
        std::cerr << "error: " << cxf_last_error() << "\n";
        continue;
      }
      try {
        write_file(path, take(snap));
        std::cout << "saved " << path << "\n";
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
      }
      continue;
    }

    char* response = nullptr;
    char* trace = nullptr;
    if (cxf_status s = cxf_chat_turn(session, line.c_str(), &response, &trace); s != CXF_OK) {
      // Backend errors leave the session usable; report and carry on.
      std::cerr << "error: " << cxf_status_name(s) << " — " << cxf_last_error() << "\n";
      continue;
    }
    std::cout << take(response) << "\n";
    json jt = json::parse(take(trace));
    std::cout << "  · topic=" << jt["topic_action"].get<std::string>();
    std::string branch = jt["branch_action"].get<std::string>();
    std::cout << " branch=" << (branch.empty() ? "(skipped)" : branch);
    char score[32];
    std::snprintf(score, sizeof(score), "%.3f", jt["fork_score"].get<double>());
    std::cout << " fork_score=" << score
              << " context_tokens=" << jt["context_tokens"].get<long long>() << "\n";
  }
  cxf_session_free(session);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

int run_bench_cmd(const CommonOpts& opts, const std::vector<std::string>& script_patterns,
                  std::vector<std::string> strategies) {
  std::vector<std::string> scripts = expand_scripts(script_patterns);
  if (scripts.empty()) {
    std::cerr << "error: no scripts matched\n";
    return kExitUsage;
  }
  // --k rewrites bare windowed strategies.
  if (opts.truncation_k > 0) {
    for (auto& s : strategies)
      if (s == "truncation" || s == "linear_rag") s += ":" + std::to_string(opts.truncation_k);
  }

  std::string cfg = build_config(opts);
  std::string scripts_json = json(scripts).dump();
  std::string strategies_json = json(strategies).dump();

  char* summary = nullptr;
  cxf_status s = cxf_bench_run(cfg.c_str(), scripts_json.c_str(), strategies_json.c_str(),
                               opts.out_dir.c_str(), &summary);
  std::string summary_text = take(summary);

  if (s == CXF_ERR_UNKNOWN_STRATEGY || s == CXF_ERR_SCHEMA_VIOLATION || s == CXF_ERR_PARSE) {
    std::cerr << "usage error: " << cxf_last_error() << "\n";
    return kExitUsage;
  }

  if (!summary_text.empty()) {
    json summary_doc = json::parse(summary_text);
    if (!summary_doc["report"].is_null()) {
      std::cout << "strategy                      tcr_micro      act  act_drop\n";
      for (const auto& row : summary_doc["report"]["strategies"]) {
        std::string name = row["strategy"].get<std::string>();
        std::string tcr = row.contains("tcr_micro") ? row["tcr_micro"].get<std::string>() : "-";
        std::string act = row["act"].get<std::string>();
        std::string drop =
            row.contains("act_drop_pct") ? row["act_drop_pct"].get<std::string>() + "%" : "-";
        std::printf("%-28s %9s %8s %9s\n", name.c_str(), tcr.c_str(), act.c_str(), drop.c_str());
      }
    }
    for (const auto& aborted : summary_doc["aborted"])
      std::cerr << "aborted: " << aborted.get<std::string>() << "\n";
    std::cout << "reports written to " << opts.out_dir << "\n";
  }

  if (s != CXF_OK) {
    std::cerr << "error: " << cxf_status_name(s) << " — " << cxf_last_error() << "\n";
    return kExitRunFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// export-dot / inspect
// ---------------------------------------------------------------------------

int run_export_dot(const std::string& snapshot_path, const std::string& out_path) {
  std::string snap;
  try {
    snap = read_file(snapshot_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  char* dot = nullptr;
  if (cxf_status s = cxf_snapshot_to_dot(snap.c_str(), &dot); s != CXF_OK)
    return fail_with("export-dot", s);
  std::string text = take(dot);
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    try {
      write_file(out_path, text);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitRunFailure;
    }
  }
  return kExitOk;
}

int run_inspect(const CommonOpts& opts, const std::string& snapshot_path) {
  std::string snap;
  try {
    snap = read_file(snapshot_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  std::string cfg = build_config(opts);
  cxf_session* session = nullptr;
  if (cxf_status s = cxf_session_restore(snap.c_str(), cfg.c_str(), &session); s != CXF_OK)
    return fail_with("restore", s);
  char* text = nullptr;
  cxf_status s = cxf_session_tree_ascii(session, &text);
  cxf_session_free(session);
  if (s != CXF_OK) return fail_with("inspect", s);
  std::cout << take(text);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctxforest: dialogue-forest context engine and benchmark harness"};
  app.require_subcommand(1);

  CommonOpts opts;

  CLI::App* chat = app.add_subcommand("chat", "Interactive session against configured backends");
  add_common_flags(chat, opts);

  CLI::App* bench = app.add_subcommand("bench", "Run scripts under one or more strategies");
  add_common_flags(bench, opts);
  std::vector<std::string> script_patterns;
  std::vector<std::string> strategies;
  bench->add_option("--scripts", script_patterns, "Script files (supports '*' globs)")
      ->required();
  bench
      ->add_option("--strategy", strategies,
                   "full_history | truncation[:k] | linear_rag[:k] | heuristic_only | "
                   "context_agent (repeatable)")
      ->required();

  CLI::App* export_dot = app.add_subcommand("export-dot", "Render a snapshot as DOT digraphs");
  std::string snapshot_path, dot_out;
  export_dot->add_option("snapshot", snapshot_path, "Snapshot JSON file")->required();
  export_dot->add_option("-o,--output", dot_out, "Output path (default stdout)");

  CLI::App* inspect = app.add_subcommand("inspect", "Print the forest inside a snapshot");
  std::string inspect_path;
  inspect->add_option("snapshot", inspect_path, "Snapshot JSON file")->required();
  add_common_flags(inspect, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(chat)) return run_chat(opts);
    if (app.got_subcommand(bench)) return run_bench_cmd(opts, script_patterns, strategies);
    if (app.got_subcommand(export_dot)) return run_export_dot(snapshot_path, dot_out);
    if (app.got_subcommand(inspect)) return run_inspect(opts, inspect_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return kExitUsage;
}
