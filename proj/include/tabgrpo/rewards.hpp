#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tabgrpo {

struct ParsedResponse {
  std::optional<std::string> reasoning;  // raw block content
  std::optional<std::string> answer;     // lowercased and trimmed
  bool well_formed = false;
};

/// Takes the first <reasoning>...</reasoning> block and the first
/// <answer>...</answer> block after it. Without such an answer block the first
/// answer block anywhere is still extracted, but the response is not well
/// formed. Never throws.
ParsedResponse parse_response(std::string_view text);

struct RewardWeights {
  double format = 0.5;
  double validity = 0.5;
  double correctness = 1.0;
};

double format_reward(const ParsedResponse& parsed, double weight = 0.5);
double validity_reward(const std::optional<std::string>& answer,
                       std::span<const std::string> allowed, double weight = 0.5);
double correctness_reward(const std::optional<std::string>& answer, std::string_view gold,
                          double weight = 1.0);

struct RewardBreakdown {
  double format = 0.0;
  double validity = 0.0;
  double correctness = 0.0;
  std::vector<std::pair<std::string, double>> extra;  // custom rewards, weighted
  double total = 0.0;
};

RewardBreakdown score(std::string_view text, std::span<const std::string> allowed,
                      std::string_view gold, const RewardWeights& weights = {});

/// The three built-in rewards plus any number of named custom terms. A custom
/// term contributes weight * fn(...) to the total.
class RewardStack {
 public:
  using Fn = std::function<double(const ParsedResponse&, std::span<const std::string> allowed,
                                  std::string_view gold)>;

  RewardStack() = default;
  explicit RewardStack(RewardWeights weights) : weights_(weights) {}

  void add(std::string name, Fn fn, double weight);

  RewardBreakdown score(std::string_view text, std::span<const std::string> allowed,
                        std::string_view gold) const;

  const RewardWeights& weights() const { return weights_; }
  /// Upper bound of total when every custom term returns at most 1.
  double max_total() const;

 private:
  struct Custom {
    std::string name;
    Fn fn;
    double weight;
  };
  RewardWeights weights_;
  std::vector<Custom> custom_;
};

}  // namespace tabgrpo
