#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tabgrpo/policy.hpp"
#include "tabgrpo/prompting.hpp"
#include "tabgrpo/rewards.hpp"

namespace tabgrpo {

struct Metrics {
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  double format_rate = 0.0;
  double validity_rate = 0.0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;
  int epoch = 0;
  std::string split_tag;
};

std::optional<std::string> extract_answer(std::string_view text);

/// Support-weighted mean of per-class F1 over label_set. Absent predictions
/// and predictions outside label_set never match any class. Undefined
/// precision or recall counts as 0.
double weighted_f1(std::span<const std::optional<std::string>> preds,
                   std::span<const std::string> golds, std::span<const std::string> label_set);

/// Any text producer; lets fixed or scripted responders be scored like a policy.
using Generator = std::function<std::string(const Prompt&)>;

Metrics evaluate_generator(std::span<const Prompt> prompts, const Generator& generate,
                           const RewardWeights& weights = {});

/// One sample per prompt under `cfg` (seeded from cfg.seed). When `reference`
/// is given, mean_kl is the per-token KL estimate of the sampled outputs
/// against it.
Metrics evaluate(const PolicyParams& policy, std::span<const Prompt> prompts, const Vocab& vocab,
                 const SamplerConfig& cfg, const RewardWeights& weights = {},
                 const PolicyParams* reference = nullptr);

/// Epoch with the highest weighted F1; the earliest one on ties.
int select_best_epoch(std::span<const Metrics> history);

}  // namespace tabgrpo
