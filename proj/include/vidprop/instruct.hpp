#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "vidprop/encode.hpp"
#include "vidprop/records.hpp"

namespace vidprop {

inline constexpr std::string_view kPromptPrefix =
    "<|im_start|>system\nYou are a helpful assistant.<|im_end|>\n<|im_start|>user\n"
    "Graph 1: <|graph_start|><|graph_pad|><|graph_end|> Please read the following json format information about "
    "the short-video and predict the final propagation influence level (levels 0~9) of the short-video: ";
inline constexpr std::string_view kPromptSuffix = " <|im_end|>\n<|im_start|>assistant\n";
inline constexpr std::string_view kResponsePrefix = "The influence level of this short-video is ";
inline constexpr std::string_view kGraphPad = "<|graph_pad|>";

struct InstructionPair {
  std::string prompt;
  std::string response;
  /// Hex SHA-256 of the sample id; also the key of the sample's f' in the sidecar.
  std::string sidecar_key;
  /// The rendered sample information (kept for truncation).
  nlohmann::ordered_json info;

  nlohmann::ordered_json to_json() const;
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

struct TokenBudget {
  std::size_t max_tokens = 4000;
  TokenCounter counter = approx_token_count;
};

Digest sidecar_digest(std::string_view sample_id);
std::string render_prompt(const nlohmann::ordered_json& info);
std::string render_response(int label);

/// Prompt and response for one sample. More than `comment_cap` comments are
/// subsampled (order preserved) with a generator keyed by seed and sample id.
InstructionPair render_pair(const SampleRecord& sample, int label, std::size_t comment_cap = 50,
                            std::uint64_t seed = 0);

/// Drops comments from the end of the rendered list until the prompt fits.
/// Throws DataError when even the comment-free prompt is over budget.
InstructionPair truncate(const InstructionPair& pair, const TokenBudget& budget);

/// Recovers the sample information from a rendered prompt.
nlohmann::ordered_json parse_prompt(std::string_view prompt);

/// One JSON object per line: {prompt, response, sidecar_key}.
std::string instructions_jsonl(std::span<const InstructionPair> pairs);

/// Sidecar of f' vectors keyed like the rendered pairs; `states` holds one
/// column per sample id.
Sidecar graph_sidecar(std::span<const std::string> sample_ids, const Eigen::MatrixXd& states);

}  // namespace vidprop
