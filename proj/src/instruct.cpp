#include "vidprop/instruct.hpp"

namespace vidprop {

nlohmann::ordered_json InstructionPair::to_json() const {
  return {{"prompt", prompt}, {"response", response}, {"sidecar_key", sidecar_key}};
}

Digest sidecar_digest(std::string_view sample_id) { return sha256(sample_id); }

std::string render_prompt(const nlohmann::ordered_json& info) {
  std::string out(kPromptPrefix);
  out += info.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::strict);
  out += kPromptSuffix;
  return out;
}

std::string render_response(int label) {
  if (label < 0 || label > 9) throw DataError("label must lie in 0..9");
  return std::string(kResponsePrefix) + std::to_string(label);
}

InstructionPair render_pair(const SampleRecord& sample, int label, std::size_t comment_cap, std::uint64_t seed) {
  SampleRecord s = sample;
  if (s.comments.size() > comment_cap) {
    CounterRng rng({seed, hash64(s.sample_id), 0x434F4D4DULL});
    std::vector<Comment> kept;
    for (auto i : sample_without_replacement(s.comments.size(), comment_cap, rng)) kept.push_back(s.comments[i]);
    s.comments = std::move(kept);
  }
  InstructionPair p;
  p.info = sample_info(s);
  p.prompt = render_prompt(p.info);
  p.response = render_response(label);
  p.sidecar_key = to_hex(sidecar_digest(sample.sample_id));
  return p;
}

InstructionPair truncate(const InstructionPair& pair, const TokenBudget& budget) {
  if (budget.max_tokens == 0) throw DataError("token budget must be positive");
  if (budget.counter(pair.prompt) <= budget.max_tokens) return pair;
  const auto& comments = pair.info.at("comments");
  auto with = [&](std::size_t keep) {
    nlohmann::ordered_json info = pair.info;
    auto& c = info["comments"];
    c = nlohmann::ordered_json(comments.begin(), comments.begin() + static_cast<std::ptrdiff_t>(keep));
    return info;
  };
  auto fits = [&](std::size_t keep) { return budget.counter(render_prompt(with(keep))) <= budget.max_tokens; };
  if (!fits(0)) throw DataError("token budget too small for the non-comment fields");
  // Largest prefix that fits; the count grows with the number of comments kept.
  std::size_t lo = 0, hi = comments.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (fits(mid)) lo = mid;
    else hi = mid - 1;
  }
  InstructionPair out = pair;
  out.info = with(lo);
  out.prompt = render_prompt(out.info);
  return out;
}

nlohmann::ordered_json parse_prompt(std::string_view prompt) {
  if (prompt.size() < kPromptPrefix.size() + kPromptSuffix.size() || !prompt.starts_with(kPromptPrefix) ||
      !prompt.ends_with(kPromptSuffix))
    throw DataError("text is not a rendered instruction prompt");
  const auto body = prompt.substr(kPromptPrefix.size(), prompt.size() - kPromptPrefix.size() - kPromptSuffix.size());
  try {
    return nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("prompt payload is not valid JSON: ") + e.what());
  }
}

std::string instructions_jsonl(std::span<const InstructionPair> pairs) {
  std::string out;
  for (const auto& p : pairs) out += p.to_json().dump(-1, ' ', false) + "\n";
  return out;
}

Sidecar graph_sidecar(std::span<const std::string> sample_ids, const Eigen::MatrixXd& states) {
  if (static_cast<std::size_t>(states.cols()) != sample_ids.size())
    throw DataError("state count differs from sample count");
  Sidecar s;
  for (std::size_t i = 0; i < sample_ids.size(); ++i)
    s.add(sidecar_digest(sample_ids[i]), Eigen::VectorXd(states.col(static_cast<Eigen::Index>(i))));
  return s;
}

}  // namespace vidprop
