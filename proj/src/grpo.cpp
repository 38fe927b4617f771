#include "tabgrpo/grpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace tabgrpo {
namespace {

// Shared pass for the objective and, when `gradient` is non-null, its exact
// gradient. Every term reduces to a per-token weight on d log pi(o_t).
ObjectiveValue evaluate_objective(std::span<const GroupBatch> batches, const PolicyParams& current,
                                  const PolicyParams& reference, const GrpoConfig& cfg,
                                  std::vector<double>* gradient) {
  require(!batches.empty(), "objective needs at least one group batch");
  if (gradient) gradient->assign(current.theta.size(), 0.0);

  ObjectiveValue out;
  double reward_sum = 0.0;
  double kl_sum = 0.0;
  std::size_t clipped = 0;
  std::size_t rollouts = 0;
  const double batch_scale = 1.0 / static_cast<double>(batches.size());

  std::vector<double> weights;
  for (const auto& batch : batches) {
    const std::size_t g = batch.rollouts.size();
    require(g > 0 && batch.advantages.size() == g, "group batch is empty or lacks advantages");
    const double scale = batch_scale / static_cast<double>(g);
    for (std::size_t i = 0; i < g; ++i) {
      const Rollout& rollout = batch.rollouts[i];
      const std::size_t len = rollout.length();
      require(rollout.logprobs_old.size() == len, "rollout log-probabilities do not match tokens");
      reward_sum += rollout.reward.total;
      ++rollouts;
      if (len == 0) continue;

      const auto logp_new = logprobs(current, batch.prompt.token_ids, rollout.token_ids);
      const auto logp_ref = rollout.logprobs_ref.size() == len
                                ? rollout.logprobs_ref
                                : logprobs(reference, batch.prompt.token_ids, rollout.token_ids);
      const double adv = batch.advantages[i];
      const double norm = cfg.length_normalize ? 1.0 / static_cast<double>(len) : 1.0;
      const double inv_len = 1.0 / static_cast<double>(len);

      double surrogate = 0.0;
      double kl = 0.0;
      weights.assign(len, 0.0);
      for (std::size_t t = 0; t < len; ++t) {
        const double ratio = std::exp(logp_new[t] - rollout.logprobs_old[t]);
        surrogate += clipped_term(ratio, adv, cfg.clip_eps);
        const bool clip_active = (adv > 0.0 && ratio > 1.0 + cfg.clip_eps) ||
                                 (adv < 0.0 && ratio < 1.0 - cfg.clip_eps);
        if (clip_active) ++clipped;
        kl += kl_term(logp_ref[t], logp_new[t]);
        const double rho = std::exp(logp_ref[t] - logp_new[t]);
        const double surrogate_weight = clip_active ? 0.0 : adv * ratio;
        weights[t] = scale * (norm * surrogate_weight - cfg.kl_beta * (1.0 - rho) * inv_len);
      }
      kl_sum += kl;
      out.diagnostics.tokens += len;
      out.value += scale * (norm * surrogate - cfg.kl_beta * kl * inv_len);
      if (gradient) {
        accumulate_weighted_logprob_grad(current, batch.prompt.token_ids, rollout.token_ids,
                                         weights, *gradient);
      }
    }
  }
  out.diagnostics.mean_reward = rollouts ? reward_sum / static_cast<double>(rollouts) : 0.0;
  if (out.diagnostics.tokens > 0) {
    const auto tokens = static_cast<double>(out.diagnostics.tokens);
    out.diagnostics.mean_kl = kl_sum / tokens;
    out.diagnostics.clip_fraction = static_cast<double>(clipped) / tokens;
  }
  return out;
}

}  // namespace

void GrpoConfig::validate() const {
  if (group_size < 2) fail(ErrorCode::kConfig, "group_size must be at least 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) fail(ErrorCode::kConfig, "clip_eps must lie in (0, 1)");
  if (!(kl_beta >= 0.0) || !std::isfinite(kl_beta)) fail(ErrorCode::kConfig, "kl_beta must be finite and >= 0");
  if (!(std_floor > 0.0)) fail(ErrorCode::kConfig, "std_floor must be positive");
  if (inner_updates < 1) fail(ErrorCode::kConfig, "inner_updates must be at least 1");
  if (!(learning_rate >= 0.0)) fail(ErrorCode::kConfig, "learning_rate must be >= 0");
  if (epochs < 0) fail(ErrorCode::kConfig, "epochs must be >= 0");
  if (prompts_per_step < 1) fail(ErrorCode::kConfig, "prompts_per_step must be at least 1");
  if (time_budget_seconds && *time_budget_seconds < 0.0) {
    fail(ErrorCode::kConfig, "time budget must be >= 0");
  }
}

GroupStats group_stats(std::span<const double> rewards) {
  require(!rewards.empty(), "group_stats needs at least one reward");
  const auto n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double sq = 0.0;
  for (const double r : rewards) sq += (r - mean) * (r - mean);
  return {mean, std::sqrt(sq / n)};
}

std::vector<double> relative_advantages(std::span<const double> rewards, double std_floor) {
  const GroupStats stats = group_stats(rewards);
  std::vector<double> out(rewards.size(), 0.0);
  if (stats.std < std_floor) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - stats.mean) / stats.std;
  return out;
}

std::vector<double> token_ratios(std::span<const double> logp_new, std::span<const double> logp_old) {
  require(logp_new.size() == logp_old.size(), "token_ratios needs equal lengths");
  std::vector<double> out(logp_new.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = std::exp(logp_new[t] - logp_old[t]);
  return out;
}

double clipped_term(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double kl_term(double logp_ref, double logp_new) {
  const double log_rho = logp_ref - logp_new;
  // expm1 keeps the value exactly 0 at equality and accurate near it.
  return std::expm1(log_rho) - log_rho;
}

ObjectiveValue grpo_objective(std::span<const GroupBatch> batches, const PolicyParams& current,
                              const PolicyParams& reference, const GrpoConfig& cfg) {
  return evaluate_objective(batches, current, reference, cfg, nullptr);
}

std::vector<double> objective_gradient(std::span<const GroupBatch> batches,
                                       const PolicyParams& current, const PolicyParams& reference,
                                       const GrpoConfig& cfg) {
  std::vector<double> gradient;
  evaluate_objective(batches, current, reference, cfg, &gradient);
  return gradient;
}

ObjectiveWithGradient objective_and_gradient(std::span<const GroupBatch> batches,
                                             const PolicyParams& current,
                                             const PolicyParams& reference, const GrpoConfig& cfg) {
  ObjectiveWithGradient out;
  out.objective = evaluate_objective(batches, current, reference, cfg, &out.gradient);
  return out;
}

void attach_reference(std::span<GroupBatch> batches, const PolicyParams& reference) {
  for (auto& batch : batches) {
    for (auto& rollout : batch.rollouts) {
      rollout.logprobs_ref = logprobs(reference, batch.prompt.token_ids, rollout.token_ids);
    }
  }
}

void finalize_group(GroupBatch& batch, double std_floor) {
  std::vector<double> rewards;
  rewards.reserve(batch.rollouts.size());
  for (const auto& rollout : batch.rollouts) rewards.push_back(rollout.reward.total);
  batch.stats = group_stats(rewards);
  batch.advantages = relative_advantages(rewards, std_floor);
}

GroupBatch collect_group(const PolicyParams& policy_old, const Prompt& prompt, const Vocab& vocab,
                         const GrpoConfig& cfg, const SamplerConfig& sampler,
                         const RewardStack& rewards, Rng& rng) {
  require(cfg.group_size >= 2, "collect_group needs group_size >= 2");
  GroupBatch batch;
  batch.prompt = prompt;
  batch.rollouts.reserve(static_cast<std::size_t>(cfg.group_size));
  for (int i = 0; i < cfg.group_size; ++i) {
    Rollout rollout = sample(policy_old, prompt, vocab, sampler, rng);
    rollout.reward = rewards.score(rollout.text, prompt.allowed_labels, prompt.gold_label);
    batch.rollouts.push_back(std::move(rollout));
  }
  finalize_group(batch, cfg.std_floor);
  return batch;
}

Optimizer::Optimizer(const GrpoConfig& cfg, std::size_t dim)
    : kind_(cfg.optimizer),
      lr_(cfg.learning_rate),
      beta1_(cfg.adam_beta1),
      beta2_(cfg.adam_beta2),
      eps_(cfg.adam_eps),
      m_(dim, 0.0),
      v_(dim, 0.0) {}

void Optimizer::ascend(std::vector<double>& theta, std::span<const double> gradient) {
  require(theta.size() == gradient.size() && theta.size() == m_.size(),
          "optimizer dimension mismatch");
  ++steps_;
  if (kind_ == OptimizerKind::kGradientAscent) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr_ * gradient[i];
    return;
  }
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gradient[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gradient[i] * gradient[i];
    theta[i] += lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::vector<Metrics> TrainingHistory::validation() const {
  std::vector<Metrics> out;
  out.reserve(epochs.size());
  for (const auto& record : epochs) out.push_back(record.validation);
  return out;
}

TrainingHistory train(PolicyParams& params, const Vocab& vocab, std::span<const Prompt> train_prompts,
                      std::span<const Prompt> val_prompts, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  cfg.grpo.validate();
  cfg.train_sampler.validate();
  cfg.eval_sampler.validate();
  require(!train_prompts.empty() && !val_prompts.empty(), "training needs train and val prompts");

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

  const PolicyParams reference = params.as(PolicyRole::kReference);
  params.role = PolicyRole::kCurrent;
  const RewardStack rewards(cfg.rewards);
  Optimizer optimizer(cfg.grpo, params.theta.size());
  Rng rng(cfg.seed);

  TrainingHistory history;
  std::vector<std::size_t> order(train_prompts.size());
  std::iota(order.begin(), order.end(), 0);
  const auto step_prompts = static_cast<std::size_t>(cfg.grpo.prompts_per_step);

  for (int epoch = 1; epoch <= cfg.grpo.epochs; ++epoch) {
    if (cfg.grpo.time_budget_seconds && elapsed() >= *cfg.grpo.time_budget_seconds) {
      history.stopped_by_budget = true;
      break;
    }
    portable_shuffle(order.begin(), order.end(), rng);
    double reward_sum = 0.0;
    double clip_sum = 0.0;
    std::size_t rounds = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += step_prompts) {
      const std::size_t end = std::min(order.size(), begin + step_prompts);
      const PolicyParams old = params.as(PolicyRole::kOld);
      std::vector<GroupBatch> batches;
      batches.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        batches.push_back(collect_group(old, train_prompts[order[k]], vocab, cfg.grpo,
                                        cfg.train_sampler, rewards, rng));
      }
      attach_reference(batches, reference);
      for (int inner = 0; inner < cfg.grpo.inner_updates; ++inner) {
        const auto step = objective_and_gradient(batches, params, reference, cfg.grpo);
        if (!std::isfinite(step.objective.value)) {
          fail(ErrorCode::kNonFinite, "GRPO objective became non-finite at epoch " +
                                          std::to_string(epoch) + ", step " +
                                          std::to_string(history.update_steps));
        }
        if (inner == 0) reward_sum += step.objective.diagnostics.mean_reward;
        clip_sum += step.objective.diagnostics.clip_fraction;
        optimizer.ascend(params.theta, step.gradient);
        ++history.update_steps;
      }
      if (!params.all_finite()) {
        fail(ErrorCode::kNonFinite, "policy parameters became non-finite at epoch " + std::to_string(epoch));
      }
      ++rounds;
    }

    EpochRecord record;
    record.validation = evaluate(params, val_prompts, vocab, cfg.eval_sampler, cfg.rewards, &reference);
    record.validation.epoch = epoch;
    record.validation.split_tag = "val";
    record.train_mean_reward = rounds ? reward_sum / static_cast<double>(rounds) : 0.0;
    record.clip_fraction =
        rounds ? clip_sum / static_cast<double>(rounds * static_cast<std::size_t>(cfg.grpo.inner_updates))
               : 0.0;
    record.wall_seconds = elapsed();
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record, params);
  }
  return history;
}

}  // namespace tabgrpo
