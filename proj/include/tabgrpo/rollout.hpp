#pragma once

#include <string>
#include <vector>

#include "tabgrpo/policy.hpp"
#include "tabgrpo/prompting.hpp"
#include "tabgrpo/rewards.hpp"

namespace tabgrpo {

/// One sampled output o_i for a prompt. token_ids and logprobs_old have equal
/// length T_i; logprobs_ref is empty until attach_reference fills it.
struct Rollout {
  std::vector<TokenId> token_ids;
  std::vector<double> logprobs_old;
  std::vector<double> logprobs_ref;
  std::string text;
  RewardBreakdown reward;

  std::size_t length() const { return token_ids.size(); }
};

/// Samples a response to prompt.token_ids and decodes it. The reward is left
/// for the caller to fill.
Rollout sample(const PolicyParams& params, const Prompt& prompt, const Vocab& vocab,
               const SamplerConfig& cfg, Rng& rng);

}  // namespace tabgrpo
