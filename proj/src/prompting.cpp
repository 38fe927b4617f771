#include "tabgrpo/prompting.hpp"

namespace tabgrpo {
namespace {

constexpr std::string_view kSystemPrompt =
    "You are an expert in financial assessment.\n"
    "\n"
    "Your task is to do assessment based on the financial status provided by attributes.\n"
    "\n"
    "Respond in the following XML format with <reasoning> and <answer> tags:\n"
    "\n"
    "<reasoning>\n"
    "...\n"
    "</reasoning>\n"
    "<answer>\n"
    "...\n"
    "</answer>";

constexpr std::string_view kCreditQuery =
    "Assess the creditworthiness of the following client as either 'good' or 'bad' based on the "
    "provided attributes.";
constexpr std::string_view kBankruptcyQuery =
    "Predict whether the company will face bankruptcy as either 'yes' or 'no' based on the "
    "following financial attributes.";

std::vector<TaskInfo> builtin_tasks() {
  const std::vector<std::string> good_bad = {"good", "bad"};
  const std::vector<std::string> yes_no = {"yes", "no"};
  return {
      {"german", std::string(kCreditQuery), good_bad},
      {"australian",
       std::string(kCreditQuery) +
           " All the table attribute names including 8 categorical attributes and 6 numerical "
           "attributes and values have been changed to meaningless symbols to protect "
           "confidentiality of the data.",
       good_bad},
      {"lendingclub",
       "Assess the client's loan status as either 'good' or 'bad' based on the following loan "
       "records from Lending Club.",
       good_bad},
      {"ccf",
       "Detect the credit card fraud as either 'yes' or 'no' using the following financial table "
       "attributes. The attributes contains 28 numerical input variables V1, V2, …, and V28 "
       "which are the result of a PCA transformation and 1 input variable 'Amount' which has not "
       "been transformed with PCA. The feature 'Amount' is the transaction Amount, this feature "
       "can be used for example-dependent cost-sensitive learning.",
       yes_no},
      {"ccfraud",
       "Detect the credit card fraud as either 'yes' or 'no' using the following financial table "
       "attributes.",
       yes_no},
      {"polish", std::string(kBankruptcyQuery), yes_no},
      {"taiwan", std::string(kBankruptcyQuery), yes_no},
      {"portoseguro",
       "Determine whether to file a claim for the auto insurance policyholder as either 'yes' or "
       "'no' based on the following table attributes of their financial profile. The table "
       "attributes that belong to similar groupings are tagged as such in the feature names "
       "(e.g., ind, reg, car, calc). In addition, feature names include the postfix bin to "
       "indicate binary features and cat to indicate categorical features. Features without "
       "these designations are either continuous or ordinal. Values of -1 indicate that the "
       "feature was missing from the observation.",
       yes_no},
      {"travelinsurance",
       "Determine the claim status as either 'yes' or 'no' based on the following table "
       "attributes for travel insurance status. The table attributes including 5 categorical "
       "attributes and 4 numerical attributes are as follows: Agency: Name of agency "
       "(categorical). Agency Type: Type of travel insurance agencies (categorical). "
       "Distribution Channel: Distribution channel of travel insurance agencies (categorical). "
       "Product Name: Name of the travel insurance products (categorical). Duration: Duration of "
       "travel (numerical). Destination: Destination of travel (categorical). Net Sales: Amount "
       "of sales of travel insurance policies (numerical). Commission: Commission received for "
       "travel insurance agency (numerical). Age: Age of insured (numerical).",
       yes_no},
  };
}

const TaskRegistry& builtin_registry() {
  static const TaskRegistry registry = TaskRegistry::with_builtin_tasks();
  return registry;
}

}  // namespace

TaskRegistry TaskRegistry::with_builtin_tasks() {
  TaskRegistry registry;
  for (auto& task : builtin_tasks()) registry.add(std::move(task));
  return registry;
}

void TaskRegistry::add(TaskInfo task) {
  if (task.id.empty()) fail(ErrorCode::kConfig, "task id must be non-empty");
  for (auto& label : task.labels) label = normalize_label(label);
  auto id = task.id;
  tasks_.insert_or_assign(std::move(id), std::move(task));
}

void TaskRegistry::add_templated(std::string id, std::vector<std::string> labels) {
  auto query = templated_query(labels);
  add({std::move(id), std::move(query), std::move(labels)});
}

bool TaskRegistry::contains(std::string_view id) const { return tasks_.find(id) != tasks_.end(); }

const TaskInfo& TaskRegistry::at(std::string_view id) const {
  const auto it = tasks_.find(id);
  if (it == tasks_.end()) fail(ErrorCode::kLookup, "unregistered task '" + std::string(id) + "'");
  return it->second;
}

std::vector<std::string> TaskRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, task] : tasks_) out.push_back(id);
  return out;
}

std::string_view system_prompt() { return kSystemPrompt; }

std::string query_prompt(std::string_view task_id) {
  return query_prompt(builtin_registry(), task_id);
}

std::string query_prompt(const TaskRegistry& registry, std::string_view task_id) {
  return registry.at(task_id).query;
}

std::string templated_query(const std::vector<std::string>& labels) {
  std::string choices;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) choices += (i + 1 == labels.size()) ? " or " : ", ";
    choices += "'" + labels[i] + "'";
  }
  return "Classify the following record as either " + choices +
         " based on the provided attributes.";
}

Prompt build_prompt(const TaskRegistry& registry, std::string_view task_id, const Record& record,
                    const Schema& schema, const PromptOptions& options) {
  Prompt prompt;
  prompt.task_id = std::string(task_id);
  prompt.text = std::string(system_prompt());
  prompt.text += '\n';
  prompt.text += query_prompt(registry, task_id);

  std::string attributes = serialize_record(record, schema, options.max_features);
  const std::size_t total = schema.feature_names.size();
  if (options.max_features != 0 && options.max_features < total) {
    attributes += " (" + std::to_string(total - options.max_features) +
                  " further attributes omitted.)";
  }
  if (!attributes.empty()) {
    prompt.text += '\n';
    prompt.text += attributes;
  }
  prompt.allowed_labels = schema.allowed_labels;
  prompt.gold_label = record.label;
  return prompt;
}

void encode_prompt(Prompt& prompt, const Vocab& vocab) { prompt.token_ids = vocab.encode(prompt.text); }

std::vector<Prompt> build_prompts(const TaskRegistry& registry, const Dataset& dataset,
                                  const Vocab& vocab, const PromptOptions& options) {
  std::vector<Prompt> prompts;
  prompts.reserve(dataset.size());
  for (const auto& record : dataset.records) {
    auto prompt = build_prompt(registry, dataset.schema.task_id, record, dataset.schema, options);
    encode_prompt(prompt, vocab);
    prompts.push_back(std::move(prompt));
  }
  return prompts;
}

}  // namespace tabgrpo
