#include <cmath>
#include <map>

#include "doctest.h"
#include "support.hpp"
#include "tabgrpo/dataset.hpp"
#include "tabgrpo/evaluation.hpp"
#include "tabgrpo/prompting.hpp"

using namespace tabgrpo;

namespace {

using Pred = std::optional<std::string>;

// Confusion matrix over label_set plus one sentinel row/column for absent or
// out-of-set predictions.
double confusion_f1(const std::vector<Pred>& preds, const std::vector<std::string>& golds,
                    const std::vector<std::string>& labels) {
  const std::size_t k = labels.size();
  auto index = [&](const Pred& p) {
    if (!p) return k;
    for (std::size_t i = 0; i < k; ++i) {
      if (labels[i] == *p) return i;
    }
    return k;
  };
  std::vector<std::vector<double>> m(k + 1, std::vector<double>(k + 1, 0.0));
  for (std::size_t n = 0; n < golds.size(); ++n) m[index(golds[n])][index(preds[n])] += 1.0;
  double score = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double row = 0.0, col = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
      row += m[c][j];
      col += m[j][c];
    }
    if (row == 0.0) continue;
    const double tp = m[c][c];
    const double p = col > 0 ? tp / col : 0.0;
    const double r = tp / row;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    score += f * row / static_cast<double>(golds.size());
  }
  return score;
}

std::vector<Prompt> constant_prompts(std::size_t n, const std::string& gold) {
  std::vector<Prompt> prompts(n);
  for (auto& p : prompts) {
    p.allowed_labels = {"good", "bad"};
    p.gold_label = gold;
    p.token_ids = {8};
  }
  return prompts;
}

}  // namespace

TEST_CASE("extract answer") {
  const auto german = test_support::read_text(test_support::fixture("german_output.txt"));
  CHECK(extract_answer(german) == Pred("good"));
  CHECK_FALSE(extract_answer("no tags here").has_value());
  CHECK(extract_answer("<answer> Bad </answer>") == Pred("bad"));
}

TEST_CASE("weighted f1 examples") {
  const std::vector<std::string> labels = {"1", "0"};
  {
    const std::vector<Pred> p = {"1", "1", "0"};
    const std::vector<std::string> g = {"1", "1", "0"};
    CHECK(weighted_f1(p, g, labels) == 1.0);
  }
  {
    const std::vector<Pred> p = {"1", "0", "1", "0"};
    const std::vector<std::string> g = {"1", "1", "0", "0"};
    CHECK(weighted_f1(p, g, labels) == 0.5);
  }
  {
    const std::vector<Pred> p = {std::nullopt, std::nullopt};
    const std::vector<std::string> g = {"1", "0"};
    CHECK(weighted_f1(p, g, labels) == 0.0);
  }
  const std::vector<Pred> p = {"1"};
  const std::vector<std::string> g = {"1", "0"};
  CHECK_THROWS_AS(weighted_f1(p, g, labels), Error);
}

TEST_CASE("weighted f1 agrees with the confusion-matrix oracle") {
  Rng rng(1);
  const std::vector<std::string> labels = {"good", "bad", "meh"};
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(uniform01(rng) * 40);
    const std::size_t k = 2 + static_cast<std::size_t>(uniform01(rng) * 2);
    const std::vector<std::string> set(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<Pred> preds(n);
    std::vector<std::string> golds(n);
    for (std::size_t i = 0; i < n; ++i) {
      golds[i] = set[static_cast<std::size_t>(uniform01(rng) * k)];
      const double u = uniform01(rng);
      if (u < 0.15) {
        preds[i] = std::nullopt;
      } else if (u < 0.2) {
        preds[i] = "maybe";
      } else {
        preds[i] = set[static_cast<std::size_t>(uniform01(rng) * k)];
      }
    }
    const double f1 = weighted_f1(preds, golds, set);
    CHECK(std::abs(f1 - confusion_f1(preds, golds, set)) < 1e-9);
    CHECK(f1 >= 0.0);
    CHECK(f1 <= 1.0);
    bool all_right = true;
    for (std::size_t i = 0; i < n; ++i) all_right = all_right && preds[i] == Pred(golds[i]);
    CHECK((f1 == 1.0) == all_right);

    // Relabel through a bijection.
    std::map<std::string, std::string> swap;
    for (std::size_t i = 0; i < k; ++i) swap[set[i]] = set[(i + 1) % k];
    auto relabel = [&](const std::string& s) { return swap.count(s) ? swap[s] : s; };
    std::vector<Pred> preds2 = preds;
    std::vector<std::string> golds2 = golds;
    for (auto& p : preds2) {
      if (p) p = relabel(*p);
    }
    for (auto& g : golds2) g = relabel(g);
    CHECK(std::abs(weighted_f1(preds2, golds2, set) - f1) < 1e-12);
  }
}

TEST_CASE("evaluation of scripted responders") {
  const auto prompts = constant_prompts(10, "good");
  const auto perfect = evaluate_generator(
      prompts, [](const Prompt& p) { return "<reasoning>x</reasoning><answer>" + p.gold_label + "</answer>"; });
  CHECK(perfect.weighted_f1 == 1.0);
  CHECK(perfect.format_rate == 1.0);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.mean_reward == 2.0);

  const auto untagged = evaluate_generator(prompts, [](const Prompt&) { return std::string("good"); });
  CHECK(untagged.format_rate == 0.0);
  CHECK(untagged.weighted_f1 == 0.0);
  CHECK(untagged.validity_rate == 0.0);
  CHECK_THROWS_AS(evaluate_generator(std::vector<Prompt>{}, [](const Prompt&) { return std::string(); }),
                  Error);
}

TEST_CASE("greedy evaluation repeats exactly") {
  SyntheticSpec spec;
  const auto ds = generate_synthetic(spec, 30, 1);
  auto registry = TaskRegistry::with_builtin_tasks();
  registry.add_templated("synthetic", {"good", "bad"});
  std::vector<std::string> corpus;
  for (const auto& r : ds.records) corpus.push_back(serialize_record(r, ds.schema));
  const auto vocab = Vocab::build(corpus, 64, ds.schema.allowed_labels);
  const auto prompts = build_prompts(registry, ds, vocab);
  Rng rng(2);
  Architecture arch = test_support::tiny_arch(static_cast<int>(vocab.size()));
  const auto policy = test_support::random_params(arch, rng, 1.0);
  SamplerConfig cfg = SamplerConfig::inference();
  cfg.top_k = 1;
  const auto a = evaluate(policy, prompts, vocab, cfg);
  cfg.seed = 77;
  const auto b = evaluate(policy, prompts, vocab, cfg);
  CHECK(a.weighted_f1 == b.weighted_f1);
  CHECK(a.mean_reward == b.mean_reward);
  CHECK(a.format_rate == b.format_rate);
  CHECK(a.mean_kl == 0.0);
  const auto with_ref = evaluate(policy, prompts, vocab, cfg, {}, &policy);
  CHECK(with_ref.mean_kl == 0.0);
}

TEST_CASE("best epoch selection") {
  auto history = [](std::vector<double> f1s) {
    std::vector<Metrics> out;
    for (std::size_t i = 0; i < f1s.size(); ++i) {
      Metrics m;
      m.weighted_f1 = f1s[i];
      m.epoch = static_cast<int>(i) + 1;
      out.push_back(m);
    }
    return out;
  };
  CHECK(select_best_epoch(history({0.1, 0.2, 0.3})) == 3);
  CHECK(select_best_epoch(history({0.1, 0.5, 0.2, 0.5})) == 2);
  CHECK(select_best_epoch(history({0.4})) == 1);
  CHECK_THROWS_AS(select_best_epoch(std::vector<Metrics>{}), Error);
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> f1s(1 + static_cast<std::size_t>(uniform01(rng) * 20));
    for (auto& f : f1s) f = std::round(uniform01(rng) * 4) / 4;
    const int best = select_best_epoch(history(f1s));
    const double top = *std::max_element(f1s.begin(), f1s.end());
    CHECK(f1s[static_cast<std::size_t>(best - 1)] == top);
    for (int e = 1; e < best; ++e) CHECK(f1s[static_cast<std::size_t>(e - 1)] < top);
  }
}
