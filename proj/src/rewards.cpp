#include "tabgrpo/rewards.hpp"

#include <algorithm>

#include "tabgrpo/common.hpp"

namespace tabgrpo {
namespace {

constexpr std::string_view kReasoningOpen = "<reasoning>";
constexpr std::string_view kReasoningClose = "</reasoning>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

struct Block {
  std::size_t end = 0;  // one past the closing tag
  std::string content;
};

// First open...close block starting at or after `from`. Tags are matched
// case-insensitively through `lowered`.
std::optional<Block> find_block(std::string_view text, std::string_view lowered, std::size_t from,
                                std::string_view open, std::string_view close) {
  const auto start = lowered.find(open, from);
  if (start == std::string_view::npos) return std::nullopt;
  const auto content_begin = start + open.size();
  const auto stop = lowered.find(close, content_begin);
  if (stop == std::string_view::npos) return std::nullopt;
  return Block{stop + close.size(), std::string(text.substr(content_begin, stop - content_begin))};
}

}  // namespace

ParsedResponse parse_response(std::string_view text) {
  const std::string lowered = to_lower_ascii(text);
  ParsedResponse parsed;
  const auto reasoning = find_block(text, lowered, 0, kReasoningOpen, kReasoningClose);
  std::optional<Block> answer;
  if (reasoning) {
    parsed.reasoning = reasoning->content;
    answer = find_block(text, lowered, reasoning->end, kAnswerOpen, kAnswerClose);
    parsed.well_formed = answer.has_value();
  }
  if (!answer) answer = find_block(text, lowered, 0, kAnswerOpen, kAnswerClose);
  if (answer) parsed.answer = normalize_label(answer->content);
  return parsed;
}

double format_reward(const ParsedResponse& parsed, double weight) {
  return parsed.well_formed ? weight : 0.0;
}

double validity_reward(const std::optional<std::string>& answer,
                       std::span<const std::string> allowed, double weight) {
  if (!answer) return 0.0;
  const std::string normalized = normalize_label(*answer);
  const bool member = std::any_of(allowed.begin(), allowed.end(), [&](const std::string& label) {
    return normalize_label(label) == normalized;
  });
  return member ? weight : 0.0;
}

double correctness_reward(const std::optional<std::string>& answer, std::string_view gold,
                          double weight) {
  if (!answer) return 0.0;
  return normalize_label(*answer) == normalize_label(gold) ? weight : 0.0;
}

RewardBreakdown score(std::string_view text, std::span<const std::string> allowed,
                      std::string_view gold, const RewardWeights& weights) {
  return RewardStack(weights).score(text, allowed, gold);
}

void RewardStack::add(std::string name, Fn fn, double weight) {
  custom_.push_back({std::move(name), std::move(fn), weight});
}

RewardBreakdown RewardStack::score(std::string_view text, std::span<const std::string> allowed,
                                   std::string_view gold) const {
  const ParsedResponse parsed = parse_response(text);
  RewardBreakdown out;
  out.format = format_reward(parsed, weights_.format);
  out.validity = validity_reward(parsed.answer, allowed, weights_.validity);
  out.correctness = correctness_reward(parsed.answer, gold, weights_.correctness);
  out.total = out.format + out.validity + out.correctness;
  for (const auto& term : custom_) {
    const double value = term.weight == 0.0 ? 0.0 : term.weight * term.fn(parsed, allowed, gold);
    out.extra.emplace_back(term.name, value);
    out.total += value;
  }
  return out;
}

double RewardStack::max_total() const {
  double total = weights_.format + weights_.validity + weights_.correctness;
  for (const auto& term : custom_) total += std::max(term.weight, 0.0);
  return total;
}

}  // namespace tabgrpo
