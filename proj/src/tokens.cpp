#include "ctxforest/tokens.hpp"

#include <cctype>

namespace ctxforest {

std::int64_t count_tokens(std::string_view text) {
  std::int64_t n = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      n++;
    }
  }
  return n;
}

}  // namespace ctxforest
