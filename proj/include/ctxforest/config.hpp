#pragma once

// Engine configuration: backend profiles per role plus policy knobs, parsed
// from a strict JSON document (unknown keys are rejected). Environment
// variables CTXFOREST_<ROLE>_ENDPOINT / _MODEL / _KEY override the file.

#include <cstdint>
#include <string>

#include "ctxforest/gateway.hpp"
#include "ctxforest/policy.hpp"

namespace ctxforest {

struct EngineConfig {
  BackendSet backends;
  PolicyConfig policy;
  std::uint64_t seed = 0;
};

// Empty or "{}" input yields the all-stub default configuration.
// Throws ParseError / SchemaViolation.
EngineConfig parse_engine_config(const std::string& json_text);

// The default configuration document (documented defaults for --config).
std::string default_engine_config_json();

}  // namespace ctxforest
