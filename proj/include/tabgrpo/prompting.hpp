#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tabgrpo/dataset.hpp"
#include "tabgrpo/tokenizer.hpp"

namespace tabgrpo {

struct TaskInfo {
  std::string id;
  std::string query;
  std::vector<std::string> labels;
};

/// task_id -> query text and label set. Starts out with the nine financial
/// benchmark tasks; runs add their own.
class TaskRegistry {
 public:
  static TaskRegistry with_builtin_tasks();

  void add(TaskInfo task);
  /// Registers a task with the templated query built from its labels.
  void add_templated(std::string id, std::vector<std::string> labels);

  bool contains(std::string_view id) const;
  const TaskInfo& at(std::string_view id) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, TaskInfo, std::less<>> tasks_;
};

std::string_view system_prompt();

/// Query text from the built-in registry; throws kLookup on unknown ids.
std::string query_prompt(std::string_view task_id);
std::string query_prompt(const TaskRegistry& registry, std::string_view task_id);

std::string templated_query(const std::vector<std::string>& labels);

struct Prompt {
  std::string task_id;
  std::string text;
  std::vector<TokenId> token_ids;
  std::vector<std::string> allowed_labels;
  std::string gold_label;
};

struct PromptOptions {
  std::size_t max_features = 0;  // 0: no cap
};

/// system + '\n' + query + '\n' + attributes. With an empty attribute list the
/// trailing separator is dropped.
Prompt build_prompt(const TaskRegistry& registry, std::string_view task_id, const Record& record,
                    const Schema& schema, const PromptOptions& options = {});

/// Fills prompt.token_ids.
void encode_prompt(Prompt& prompt, const Vocab& vocab);

std::vector<Prompt> build_prompts(const TaskRegistry& registry, const Dataset& dataset,
                                  const Vocab& vocab, const PromptOptions& options = {});

}  // namespace tabgrpo
