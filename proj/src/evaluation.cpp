#include "tabgrpo/evaluation.hpp"

#include <algorithm>

#include "tabgrpo/grpo.hpp"
#include "tabgrpo/rollout.hpp"

namespace tabgrpo {

std::optional<std::string> extract_answer(std::string_view text) { return parse_response(text).answer; }

double weighted_f1(std::span<const std::optional<std::string>> preds,
                   std::span<const std::string> golds, std::span<const std::string> label_set) {
  require(preds.size() == golds.size(), "weighted_f1 needs equal-length predictions and golds");
  if (golds.empty()) return 0.0;
  const auto n = static_cast<double>(golds.size());
  double total = 0.0;
  for (const auto& label : label_set) {
    std::size_t tp = 0, predicted = 0, support = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      const bool is_gold = golds[i] == label;
      const bool is_pred = preds[i].has_value() && *preds[i] == label;
      support += is_gold;
      predicted += is_pred;
      tp += is_gold && is_pred;
    }
    if (support == 0) continue;
    const double precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double recall = static_cast<double>(tp) / static_cast<double>(support);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    total += f1 * static_cast<double>(support) / n;
  }
  return total;
}

namespace {

struct Tally {
  std::vector<std::optional<std::string>> preds;
  std::vector<std::string> golds;
  std::vector<std::string> labels;
  std::size_t formatted = 0, valid = 0, correct = 0;
  double reward_sum = 0.0;

  void add(const Prompt& prompt, const RewardBreakdown& reward, std::optional<std::string> answer) {
    if (labels.empty()) labels = prompt.allowed_labels;
    formatted += reward.format > 0.0;
    valid += reward.validity > 0.0;
    correct += answer.has_value() && *answer == prompt.gold_label;
    reward_sum += reward.total;
    preds.push_back(std::move(answer));
    golds.push_back(prompt.gold_label);
  }

  Metrics finish() const {
    Metrics m;
    if (golds.empty()) return m;
    const auto n = static_cast<double>(golds.size());
    m.weighted_f1 = weighted_f1(preds, golds, labels);
    m.accuracy = static_cast<double>(correct) / n;
    m.format_rate = static_cast<double>(formatted) / n;
    m.validity_rate = static_cast<double>(valid) / n;
    m.mean_reward = reward_sum / n;
    return m;
  }
};

}  // namespace

Metrics evaluate_generator(std::span<const Prompt> prompts, const Generator& generate,
                           const RewardWeights& weights) {
  require(!prompts.empty(), "evaluation needs a non-empty dataset");
  const RewardStack rewards(weights);
  Tally tally;
  for (const auto& prompt : prompts) {
    const std::string text = generate(prompt);
    tally.add(prompt, rewards.score(text, prompt.allowed_labels, prompt.gold_label),
              extract_answer(text));
  }
  return tally.finish();
}

Metrics evaluate(const PolicyParams& policy, std::span<const Prompt> prompts, const Vocab& vocab,
                 const SamplerConfig& cfg, const RewardWeights& weights,
                 const PolicyParams* reference) {
  require(!prompts.empty(), "evaluation needs a non-empty dataset");
  cfg.validate();
  const RewardStack rewards(weights);
  Rng rng(cfg.seed);
  Tally tally;
  double kl_sum = 0.0;
  std::size_t tokens = 0;
  for (const auto& prompt : prompts) {
    const Rollout rollout = sample(policy, prompt, vocab, cfg, rng);
    tally.add(prompt, rewards.score(rollout.text, prompt.allowed_labels, prompt.gold_label),
              extract_answer(rollout.text));
    if (reference) {
      const auto ref = logprobs(*reference, prompt.token_ids, rollout.token_ids);
      for (std::size_t t = 0; t < ref.size(); ++t) kl_sum += kl_term(ref[t], rollout.logprobs_old[t]);
      tokens += ref.size();
    }
  }
  Metrics m = tally.finish();
  m.mean_kl = tokens ? kl_sum / static_cast<double>(tokens) : 0.0;
  return m;
}

int select_best_epoch(std::span<const Metrics> history) {
  require(!history.empty(), "select_best_epoch needs a non-empty history");
  const Metrics* best = &history.front();
  for (const auto& m : history) {
    if (m.weighted_f1 > best->weighted_f1) best = &m;
  }
  return best->epoch;
}

}  // namespace tabgrpo
