#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tabgrpo/common.hpp"
#include "tabgrpo/tokenizer.hpp"

namespace tabgrpo {

/// Shape of the autoregressive policy.
///
/// At output step t the network sees the last `prompt_window` prompt tokens
/// and the last `output_window` generated tokens (BOS before the first one,
/// PAD further back), embeds and concatenates them, and applies
///
///   h = tanh(W1 x + b1 + P[min(t, max_positions - 1)])
///   logits = W2 h + b2
///
/// followed by a log-softmax over the whole vocabulary.
struct Architecture {
  int vocab_size = 0;
  int embed_dim = 16;
  int prompt_window = 12;
  int output_window = 3;
  int hidden_dim = 64;
  int max_positions = 16;
  TokenId eos_id = token::kEos;

  int context_tokens() const { return prompt_window + output_window; }
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Offsets of each parameter block inside the flat theta vector.
struct ParamLayout {
  std::size_t embedding = 0;  // vocab x embed, row per token
  std::size_t w1 = 0;         // hidden x (context_tokens * embed), row-major
  std::size_t b1 = 0;         // hidden
  std::size_t positions = 0;  // max_positions x hidden
  std::size_t w2 = 0;         // vocab x hidden, row-major
  std::size_t b2 = 0;         // vocab
  std::size_t total = 0;

  static ParamLayout of(const Architecture& arch);
};

enum class PolicyRole { kCurrent, kOld, kReference };

struct PolicyParams {
  Architecture arch;
  std::vector<double> theta;
  PolicyRole role = PolicyRole::kCurrent;

  /// Copy with a different role tag.
  PolicyParams as(PolicyRole new_role) const;
  bool all_finite() const;
};

/// Gaussian weights, zero output bias, small output weights so the initial
/// next-token distribution is close to uniform.
PolicyParams init_params(const Architecture& arch, std::uint64_t seed);

/// Full-vocabulary log-softmax at every output position.
std::vector<std::vector<double>> next_token_logprobs(const PolicyParams& params,
                                                     std::span<const TokenId> prompt,
                                                     std::span<const TokenId> output);

/// log pi(o_t | q, o_<t) for every t.
std::vector<double> logprobs(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> output);

/// Gradient of sum_t weights[t] * log pi(o_t | q, o_<t) with respect to theta.
std::vector<double> weighted_logprob_grad(const PolicyParams& params,
                                          std::span<const TokenId> prompt,
                                          std::span<const TokenId> output,
                                          std::span<const double> weights);

/// Same, accumulated into `grad` (which must have theta's length).
void accumulate_weighted_logprob_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                                      std::span<const TokenId> output,
                                      std::span<const double> weights, std::span<double> grad);

struct SamplerConfig {
  double temperature = 0.7;
  double top_p = 0.8;
  int top_k = 20;
  int max_len = 16;
  std::uint64_t seed = 0;

  static SamplerConfig training() { return {}; }
  static SamplerConfig inference() { return {0.1, 0.8, 20, 16, 0}; }
  void validate() const;
};

/// Distribution the sampler draws from, given full-vocabulary logits:
/// temperature scaling, top-k, then the smallest nucleus of mass >= top_p,
/// renormalized. top_k above the vocabulary size keeps every token.
std::vector<double> sampling_distribution(std::span<const double> logits, const SamplerConfig& cfg);

struct SampledTokens {
  std::vector<TokenId> tokens;
  std::vector<double> logprobs;  // untruncated temperature-1 log-probabilities
};

/// Draws tokens until EOS (included) or max_len.
SampledTokens sample_tokens(const PolicyParams& params, std::span<const TokenId> prompt,
                            const SamplerConfig& cfg, Rng& rng);

}  // namespace tabgrpo
