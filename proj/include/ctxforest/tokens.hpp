#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

namespace ctxforest {

// Whitespace-delimited token count. The default counter everywhere: report
// numbers depend on the tokenizer in use, so the deterministic whitespace
// count is the one all tests and fixtures are pinned to. Byte-pair counters
// can be plugged in through TokenCounter without touching call sites.
std::int64_t count_tokens(std::string_view text);

using TokenCounter = std::function<std::int64_t(std::string_view)>;

inline TokenCounter whitespace_counter() {
  return [](std::string_view s) { return count_tokens(s); };
}

}  // namespace ctxforest
