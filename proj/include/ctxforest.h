/*
 * ctxforest C API
 *
 * Shared-library surface over the dialogue-forest engine: opaque session
 * handles, integer status codes, and library-owned strings. Thin language
 * bindings and the bundled CLI sit on top of exactly this header.
 *
 * Conventions:
 *  - Every function returning cxf_status yields CXF_OK (0) on success.
 *  - On failure, cxf_last_error() returns a thread-local detail message.
 *  - char** outputs are allocated by the library; release each one with
 *    cxf_string_free(). Outputs are untouched on failure unless a function
 *    documents partial output.
 *  - Configuration is a JSON document; pass NULL or "{}" for the all-stub
 *    defaults. See cxf_default_config().
 */

#ifndef CTXFOREST_H
#define CTXFOREST_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CXF_API __declspec(dllexport)
#else
#define CXF_API __attribute__((visibility("default")))
#endif

typedef int32_t cxf_status;

/* Status codes (mirror of the internal error enum). */
#define CXF_OK 0
#define CXF_ERR_UNKNOWN_TREE 1
#define CXF_ERR_UNKNOWN_PARENT 2
#define CXF_ERR_CROSS_TREE_PARENT 3
#define CXF_ERR_NON_ROOT_WITHOUT_PARENT 4
#define CXF_ERR_UNKNOWN_NODE 5
#define CXF_ERR_UNKNOWN_BRANCH 6
#define CXF_ERR_MALFORMED_SNAPSHOT 7
#define CXF_ERR_DIMENSION_MISMATCH 8
#define CXF_ERR_ZERO_VECTOR 9
#define CXF_ERR_EMPTY_TREE 10
#define CXF_ERR_EMPTY_CONTENT 11
#define CXF_ERR_MISSING_SUMMARY 12
#define CXF_ERR_BACKEND_UNAVAILABLE 13
#define CXF_ERR_MALFORMED_DECISION 14
#define CXF_ERR_INVALID_ACTION 15
#define CXF_ERR_STALE_PENDING_TURN 16
#define CXF_ERR_TIMEOUT 17
#define CXF_ERR_HTTP 18
#define CXF_ERR_EXHAUSTED_RETRIES 19
#define CXF_ERR_DIMENSION_DRIFT 20
#define CXF_ERR_PARSE 21
#define CXF_ERR_SCHEMA_VIOLATION 22
#define CXF_ERR_JUDGE_UNPARSABLE 23
#define CXF_ERR_EMPTY_INPUT 24
#define CXF_ERR_UNSUPPORTED_FORMAT 25
#define CXF_ERR_UNKNOWN_STRATEGY 26
#define CXF_ERR_INVALID_ARGUMENT 27
#define CXF_ERR_IO 28
#define CXF_ERR_INTERNAL 29

/* Opaque session handle. Single-writer: do not share one handle across
 * threads without external synchronization. Distinct sessions are fully
 * independent. */
typedef struct cxf_session cxf_session;

CXF_API const char* cxf_version(void);
CXF_API const char* cxf_status_name(cxf_status status);

/* Thread-local message describing the most recent failure on this thread. */
CXF_API const char* cxf_last_error(void);

CXF_API void cxf_string_free(char* s);

/* The default configuration document, with every recognized key. */
CXF_API cxf_status cxf_default_config(char** out_json);

/* ------------------------------------------------------------------------ */
/* Sessions                                                                  */
/* ------------------------------------------------------------------------ */

CXF_API cxf_status cxf_session_new(const char* config_json, cxf_session** out);

/* Rebuilds a session from a snapshot document. */
CXF_API cxf_status cxf_session_restore(const char* snapshot_json, const char* config_json,
                                       cxf_session** out);

CXF_API void cxf_session_free(cxf_session* session);

/* Runs one full turn: topic/branch decisions, context assembly, response
 * generation, node commit. out_response receives the assistant text,
 * out_trace_json a one-line JSON record of the decisions taken (topic and
 * branch action, fork score, context tokens). Either output pointer may be
 * NULL when not wanted. On backend failure the session state is unchanged. */
CXF_API cxf_status cxf_chat_turn(cxf_session* session, const char* query, char** out_response,
                                 char** out_trace_json);

CXF_API cxf_status cxf_session_snapshot(cxf_session* session, char** out_json);

/* Human-readable forest rendering ("(empty forest)" for a fresh session). */
CXF_API cxf_status cxf_session_tree_ascii(cxf_session* session, char** out_text);

/* Appends one JSON decision record per committed turn to the given file. */
CXF_API cxf_status cxf_session_open_audit_log(cxf_session* session, const char* path);

/* ------------------------------------------------------------------------ */
/* Snapshots                                                                 */
/* ------------------------------------------------------------------------ */

/* DOT rendering of a snapshot document: one digraph per topic tree, active
 * path solid, inactive edges dashed, node labels are turn indices. */
CXF_API cxf_status cxf_snapshot_to_dot(const char* snapshot_json, char** out_dot);

/* ------------------------------------------------------------------------ */
/* Benchmarking                                                              */
/* ------------------------------------------------------------------------ */

/* Runs every (script, strategy) pair and writes report.csv, report.json,
 * snapshots, and audit logs under out_dir. scripts_json is a JSON array of
 * file paths; strategies_json a JSON array of strategy names
 * ("full_history", "truncation:4", "linear_rag:3", "heuristic_only",
 * "context_agent"). out_summary_json (optional) receives the report JSON
 * plus an "aborted" array; it is written even when some runs aborted
 * (partial results are flushed). Returns CXF_OK only if every pair
 * completed. */
CXF_API cxf_status cxf_bench_run(const char* config_json, const char* scripts_json,
                                 const char* strategies_json, const char* out_dir,
                                 char** out_summary_json);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CTXFOREST_H */
