#include "tabgrpo/policy.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabgrpo/rollout.hpp"

namespace tabgrpo {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using MatrixMap = Eigen::Map<RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

double log_sum_exp(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

// Read-only view of theta plus the prompt-dependent part of the hidden
// pre-activation, which is shared by every output position.
class Network {
 public:
  Network(const PolicyParams& params, std::span<const TokenId> prompt)
      : arch_(params.arch),
        layout_(ParamLayout::of(params.arch)),
        theta_(params.theta.data()),
        w1_(theta_ + layout_.w1, arch_.hidden_dim, arch_.context_tokens() * arch_.embed_dim),
        b1_(theta_ + layout_.b1, arch_.hidden_dim),
        positions_(theta_ + layout_.positions, arch_.max_positions, arch_.hidden_dim),
        w2_(theta_ + layout_.w2, arch_.vocab_size, arch_.hidden_dim),
        b2_(theta_ + layout_.b2, arch_.vocab_size) {
    require(params.theta.size() == layout_.total, "theta length does not match architecture");
    const auto cp = static_cast<std::size_t>(arch_.prompt_window);
    prompt_tail_.assign(cp, token::kPad);
    const std::size_t take = std::min(cp, prompt.size());
    for (std::size_t k = 0; k < take; ++k) {
      prompt_tail_[cp - take + k] = check(prompt[prompt.size() - take + k]);
    }
    const Eigen::VectorXd x = gather(prompt_tail_);
    prompt_pre_ = w1_.leftCols(arch_.prompt_window * arch_.embed_dim) * x + b1_;
  }

  const Architecture& arch() const { return arch_; }
  const std::vector<TokenId>& prompt_tail() const { return prompt_tail_; }
  int position(std::size_t t) const {
    return static_cast<int>(std::min<std::size_t>(t, static_cast<std::size_t>(arch_.max_positions - 1)));
  }

  TokenId check(TokenId id) const {
    require(id >= 0 && id < arch_.vocab_size, "token id outside the policy vocabulary");
    return id;
  }

  // Output-window tokens feeding step t.
  std::vector<TokenId> output_window(std::span<const TokenId> output, std::size_t t) const {
    std::vector<TokenId> window(static_cast<std::size_t>(arch_.output_window), token::kPad);
    for (int k = 0; k < arch_.output_window; ++k) {
      const long j = static_cast<long>(t) - arch_.output_window + k;
      if (j >= 0) {
        window[static_cast<std::size_t>(k)] = check(output[static_cast<std::size_t>(j)]);
      } else if (j == -1) {
        window[static_cast<std::size_t>(k)] = token::kBos;
      }
    }
    return window;
  }

  Eigen::VectorXd gather(const std::vector<TokenId>& ids) const {
    const int e = arch_.embed_dim;
    Eigen::VectorXd x(static_cast<Eigen::Index>(ids.size()) * e);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      x.segment(static_cast<Eigen::Index>(k) * e, e) =
          ConstVectorMap(theta_ + layout_.embedding + static_cast<std::size_t>(ids[k]) * e, e);
    }
    return x;
  }

  Eigen::VectorXd hidden(std::size_t t, const std::vector<TokenId>& window) const {
    const int offset = arch_.prompt_window * arch_.embed_dim;
    const int width = arch_.output_window * arch_.embed_dim;
    Eigen::VectorXd a = prompt_pre_ + positions_.row(position(t)).transpose();
    if (width > 0) a.noalias() += w1_.middleCols(offset, width) * gather(window);
    return a.array().tanh().matrix();
  }

  Eigen::VectorXd logits(const Eigen::VectorXd& h) const { return w2_ * h + b2_; }

  const ConstMatrixMap& w1() const { return w1_; }
  const ConstMatrixMap& w2() const { return w2_; }
  const ParamLayout& layout() const { return layout_; }

 private:
  Architecture arch_;
  ParamLayout layout_;
  const double* theta_;
  ConstMatrixMap w1_;
  ConstVectorMap b1_;
  ConstMatrixMap positions_;
  ConstMatrixMap w2_;
  ConstVectorMap b2_;
  std::vector<TokenId> prompt_tail_;
  Eigen::VectorXd prompt_pre_;
};

}  // namespace

std::size_t Architecture::param_count() const { return ParamLayout::of(*this).total; }

void Architecture::validate() const {
  if (vocab_size < 2 || embed_dim <= 0 ||
      prompt_window < 0 || output_window < 0 || hidden_dim <= 0 || max_positions <= 0) {
    fail(ErrorCode::kConfig, "invalid policy architecture");
  }
  if (eos_id < 0 || eos_id >= vocab_size) fail(ErrorCode::kConfig, "eos id outside vocabulary");
}

ParamLayout ParamLayout::of(const Architecture& arch) {
  const auto v = static_cast<std::size_t>(arch.vocab_size);
  const auto e = static_cast<std::size_t>(arch.embed_dim);
  const auto h = static_cast<std::size_t>(arch.hidden_dim);
  const auto k = static_cast<std::size_t>(arch.context_tokens()) * e;
  ParamLayout layout;
  layout.embedding = 0;
  layout.w1 = layout.embedding + v * e;
  layout.b1 = layout.w1 + h * k;
  layout.positions = layout.b1 + h;
  layout.w2 = layout.positions + static_cast<std::size_t>(arch.max_positions) * h;
  layout.b2 = layout.w2 + v * h;
  layout.total = layout.b2 + v;
  return layout;
}

PolicyParams PolicyParams::as(PolicyRole new_role) const {
  PolicyParams copy = *this;
  copy.role = new_role;
  return copy;
}

bool PolicyParams::all_finite() const {
  return std::all_of(theta.begin(), theta.end(), [](double x) { return std::isfinite(x); });
}

PolicyParams init_params(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  const ParamLayout layout = ParamLayout::of(arch);
  PolicyParams params;
  params.arch = arch;
  params.theta.assign(layout.total, 0.0);
  Rng rng(seed);
  auto fill = [&](std::size_t begin, std::size_t end, double scale) {
    for (std::size_t i = begin; i < end; ++i) params.theta[i] = scale * standard_normal(rng);
  };
  const double fan_in = static_cast<double>(arch.context_tokens() * arch.embed_dim);
  fill(layout.embedding, layout.w1, 1.0);
  fill(layout.w1, layout.b1, 1.0 / std::sqrt(std::max(fan_in, 1.0)));
  fill(layout.positions, layout.w2, 0.1);
  fill(layout.w2, layout.b2, 1e-3);
  return params;
}

std::vector<std::vector<double>> next_token_logprobs(const PolicyParams& params,
                                                     std::span<const TokenId> prompt,
                                                     std::span<const TokenId> output) {
  const Network net(params, prompt);
  std::vector<std::vector<double>> out;
  out.reserve(output.size());
  for (std::size_t t = 0; t < output.size(); ++t) {
    const Eigen::VectorXd z = net.logits(net.hidden(t, net.output_window(output, t)));
    const double lse = log_sum_exp(z);
    std::vector<double> row(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) row[static_cast<std::size_t>(i)] = z[i] - lse;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<double> logprobs(const PolicyParams& params, std::span<const TokenId> prompt,
                             std::span<const TokenId> output) {
  const Network net(params, prompt);
  std::vector<double> out;
  out.reserve(output.size());
  for (std::size_t t = 0; t < output.size(); ++t) {
    const TokenId target = net.check(output[t]);
    const Eigen::VectorXd z = net.logits(net.hidden(t, net.output_window(output, t)));
    out.push_back(z[target] - log_sum_exp(z));
  }
  return out;
}

std::vector<double> weighted_logprob_grad(const PolicyParams& params,
                                          std::span<const TokenId> prompt,
                                          std::span<const TokenId> output,
                                          std::span<const double> weights) {
  std::vector<double> grad(params.theta.size(), 0.0);
  accumulate_weighted_logprob_grad(params, prompt, output, weights, grad);
  return grad;
}

void accumulate_weighted_logprob_grad(const PolicyParams& params, std::span<const TokenId> prompt,
                                      std::span<const TokenId> output,
                                      std::span<const double> weights, std::span<double> grad) {
  require(weights.size() == output.size(), "weights length must equal output length");
  require(grad.size() == params.theta.size(), "gradient buffer length must equal theta length");
  const Network net(params, prompt);
  const Architecture& arch = net.arch();
  const ParamLayout& layout = net.layout();
  const int e = arch.embed_dim;
  const int prompt_width = arch.prompt_window * e;
  const int output_width = arch.output_window * e;

  double* g = grad.data();
  MatrixMap g_w1(g + layout.w1, arch.hidden_dim, arch.context_tokens() * e);
  VectorMap g_b1(g + layout.b1, arch.hidden_dim);
  MatrixMap g_pos(g + layout.positions, arch.max_positions, arch.hidden_dim);
  MatrixMap g_w2(g + layout.w2, arch.vocab_size, arch.hidden_dim);
  VectorMap g_b2(g + layout.b2, arch.vocab_size);
  auto g_embedding_row = [&](TokenId id) {
    return VectorMap(g + layout.embedding + static_cast<std::size_t>(id) * e, e);
  };

  // d(objective)/d(prompt pre-activation), summed over positions.
  Eigen::VectorXd prompt_delta = Eigen::VectorXd::Zero(arch.hidden_dim);
  for (std::size_t t = 0; t < output.size(); ++t) {
    const double w = weights[t];
    if (w == 0.0) continue;
    const TokenId target = net.check(output[t]);
    const auto window = net.output_window(output, t);
    const Eigen::VectorXd h = net.hidden(t, window);
    const Eigen::VectorXd z = net.logits(h);
    Eigen::VectorXd dz = -(z.array() - log_sum_exp(z)).exp().matrix();
    dz[target] += 1.0;
    dz *= w;

    g_w2.noalias() += dz * h.transpose();
    g_b2 += dz;
    const Eigen::VectorXd da =
        ((net.w2().transpose() * dz).array() * (1.0 - h.array().square())).matrix();
    g_b1 += da;
    g_pos.row(net.position(t)) += da.transpose();
    prompt_delta += da;
    if (output_width > 0) {
      g_w1.middleCols(prompt_width, output_width).noalias() += da * net.gather(window).transpose();
      const Eigen::VectorXd dx = net.w1().middleCols(prompt_width, output_width).transpose() * da;
      for (std::size_t k = 0; k < window.size(); ++k) {
        g_embedding_row(window[k]) += dx.segment(static_cast<Eigen::Index>(k) * e, e);
      }
    }
  }
  if (prompt_width > 0) {
    const auto& tail = net.prompt_tail();
    g_w1.leftCols(prompt_width).noalias() += prompt_delta * net.gather(tail).transpose();
    const Eigen::VectorXd dx = net.w1().leftCols(prompt_width).transpose() * prompt_delta;
    for (std::size_t k = 0; k < tail.size(); ++k) {
      g_embedding_row(tail[k]) += dx.segment(static_cast<Eigen::Index>(k) * e, e);
    }
  }
}

void SamplerConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    fail(ErrorCode::kConfig, "sampler temperature must be positive");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) fail(ErrorCode::kConfig, "sampler top_p must lie in (0, 1]");
  if (top_k < 1) fail(ErrorCode::kConfig, "sampler top_k must be at least 1");
  if (max_len < 1) fail(ErrorCode::kConfig, "sampler max_len must be at least 1");
}

std::vector<double> sampling_distribution(std::span<const double> logits, const SamplerConfig& cfg) {
  const std::size_t v = logits.size();
  require(v > 0, "empty logits");
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  std::vector<double> probs(v);
  for (std::size_t i = 0; i < v; ++i) probs[i] = std::exp((logits[i] - max_logit) / cfg.temperature);

  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  const std::size_t k = std::min(v, static_cast<std::size_t>(cfg.top_k));
  double top_mass = 0.0;
  for (std::size_t r = 0; r < k; ++r) top_mass += probs[order[r]];

  std::vector<double> out(v, 0.0);
  double kept = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = order[r];
    out[i] = probs[i];
    kept += probs[i] / top_mass;
    if (kept >= cfg.top_p) break;
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& p : out) p /= total;
  return out;
}

SampledTokens sample_tokens(const PolicyParams& params, std::span<const TokenId> prompt,
                            const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  const Network net(params, prompt);
  SampledTokens out;
  std::vector<double> logits(static_cast<std::size_t>(params.arch.vocab_size));
  for (std::size_t t = 0; t < static_cast<std::size_t>(cfg.max_len); ++t) {
    const Eigen::VectorXd z = net.logits(net.hidden(t, net.output_window(out.tokens, t)));
    Eigen::VectorXd::Map(logits.data(), z.size()) = z;
    const auto dist = sampling_distribution(logits, cfg);

    const double u = uniform01(rng);
    double cumulative = 0.0;
    TokenId choice = -1;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] <= 0.0) continue;
      choice = static_cast<TokenId>(i);
      cumulative += dist[i];
      if (u < cumulative) break;
    }
    out.tokens.push_back(choice);
    out.logprobs.push_back(z[choice] - log_sum_exp(z));
    if (choice == params.arch.eos_id) break;
  }
  return out;
}

Rollout sample(const PolicyParams& params, const Prompt& prompt, const Vocab& vocab,
               const SamplerConfig& cfg, Rng& rng) {
  auto drawn = sample_tokens(params, prompt.token_ids, cfg, rng);
  Rollout rollout;
  rollout.text = vocab.decode(drawn.tokens);
  rollout.token_ids = std::move(drawn.tokens);
  rollout.logprobs_old = std::move(drawn.logprobs);
  return rollout;
}

}  // namespace tabgrpo
