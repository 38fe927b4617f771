#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tabgrpo/evaluation.hpp"
#include "tabgrpo/policy.hpp"
#include "tabgrpo/prompting.hpp"
#include "tabgrpo/rewards.hpp"
#include "tabgrpo/rollout.hpp"

namespace tabgrpo {

enum class OptimizerKind { kAdam, kGradientAscent };

struct GrpoConfig {
  int group_size = 8;
  double clip_eps = 0.2;
  double kl_beta = 0.04;
  double std_floor = 1e-8;
  int inner_updates = 1;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  bool length_normalize = false;  // divide each output's token sum by T_i
  int epochs = 50;
  std::optional<double> time_budget_seconds;
  int prompts_per_step = 16;  // groups collected per parameter update

  void validate() const;
};

struct GroupStats {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct GroupBatch {
  Prompt prompt;
  std::vector<Rollout> rollouts;
  GroupStats stats;
  std::vector<double> advantages;
};

GroupStats group_stats(std::span<const double> rewards);

/// (R_i - mean) / std, or all zeros when std < std_floor.
std::vector<double> relative_advantages(std::span<const double> rewards, double std_floor);

std::vector<double> token_ratios(std::span<const double> logp_new, std::span<const double> logp_old);

/// min(r * A, clip(r, 1 - eps, 1 + eps) * A)
double clipped_term(double ratio, double advantage, double clip_eps);

/// rho - ln(rho) - 1 with rho = exp(logp_ref - logp_new); zero iff equal.
double kl_term(double logp_ref, double logp_new);

struct ObjectiveDiagnostics {
  double mean_reward = 0.0;
  double mean_kl = 0.0;        // over all tokens
  double clip_fraction = 0.0;  // tokens whose clipped arm is the active one
  std::size_t tokens = 0;
};

struct ObjectiveValue {
  double value = 0.0;
  ObjectiveDiagnostics diagnostics;
};

struct ObjectiveWithGradient {
  ObjectiveValue objective;
  std::vector<double> gradient;
};

/// Average over batches of (1/G) sum_i [ sum_t clipped_term - beta * KL_i ],
/// KL_i being the token mean of kl_term. Rollouts carry the old-policy
/// log-probabilities; reference log-probabilities come from
/// rollout.logprobs_ref when present and from `reference` otherwise.
ObjectiveValue grpo_objective(std::span<const GroupBatch> batches, const PolicyParams& current,
                              const PolicyParams& reference, const GrpoConfig& cfg);

std::vector<double> objective_gradient(std::span<const GroupBatch> batches,
                                       const PolicyParams& current, const PolicyParams& reference,
                                       const GrpoConfig& cfg);

ObjectiveWithGradient objective_and_gradient(std::span<const GroupBatch> batches,
                                             const PolicyParams& current,
                                             const PolicyParams& reference, const GrpoConfig& cfg);

/// Caches reference log-probabilities on every rollout.
void attach_reference(std::span<GroupBatch> batches, const PolicyParams& reference);

/// Fills stats and advantages from the rollouts' reward totals.
void finalize_group(GroupBatch& batch, double std_floor);

GroupBatch collect_group(const PolicyParams& policy_old, const Prompt& prompt, const Vocab& vocab,
                         const GrpoConfig& cfg, const SamplerConfig& sampler,
                         const RewardStack& rewards, Rng& rng);

/// Gradient-ascent step rule with optional adaptive moments.
class Optimizer {
 public:
  Optimizer(const GrpoConfig& cfg, std::size_t dim);
  void ascend(std::vector<double>& theta, std::span<const double> gradient);
  std::size_t steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<double> m_, v_;
  std::size_t steps_ = 0;
};

struct TrainConfig {
  GrpoConfig grpo;
  SamplerConfig train_sampler = SamplerConfig::training();
  SamplerConfig eval_sampler = SamplerConfig::inference();
  RewardWeights rewards;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  Metrics validation;  // epoch counts from 1
  double train_mean_reward = 0.0;
  double clip_fraction = 0.0;
  double wall_seconds = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t update_steps = 0;
  bool stopped_by_budget = false;

  std::vector<Metrics> validation() const;
};

/// Called after each epoch with its record and the parameters it ended with.
using EpochCallback = std::function<void(const EpochRecord&, const PolicyParams&)>;

/// GRPO training. The reference policy is the initial `params`; theta_old is
/// refreshed before every collection round. Throws kNonFinite when the
/// objective or parameters stop being finite.
TrainingHistory train(PolicyParams& params, const Vocab& vocab, std::span<const Prompt> train_prompts,
                      std::span<const Prompt> val_prompts, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

}  // namespace tabgrpo
