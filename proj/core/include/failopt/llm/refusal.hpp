#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace failopt::llm {

/// Lowercase phrases that mark a refused answer when they open a completion.
std::span<const std::string_view> refusal_phrases();

/// True when the completion is shorter than `min_tokens` or opens with a
/// refusal phrase (searched within its first 200 characters).
bool is_refusal(std::string_view completion, std::size_t min_tokens = 20);

}  // namespace failopt::llm
