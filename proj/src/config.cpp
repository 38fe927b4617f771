#include "tabgrpo/config.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace tabgrpo {
namespace {

using nlohmann::json;

struct Field {
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&, const std::filesystem::path&)> set;
};

template <typename T>
T as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::kConfig, "config key '" + key + "' has the wrong type");
  }
}

#define TABGRPO_FIELD(KEY, TYPE, MEMBER)                                              \
  Field {                                                                             \
    KEY, [](const RunConfig& c) { return json(c.MEMBER); },                           \
        [](RunConfig& c, const json& v, const std::filesystem::path&) {               \
          c.MEMBER = as<TYPE>(v, KEY);                                                \
        }                                                                             \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      TABGRPO_FIELD("seed", std::uint64_t, seed),
      {"out_dir", [](const RunConfig& c) { return json(c.out_dir.string()); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         c.out_dir = as<std::string>(v, "out_dir");
       }},
      TABGRPO_FIELD("task.id", std::string, task_id),
      {"task.query", [](const RunConfig& c) { return c.task_query ? json(*c.task_query) : json(nullptr); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         if (v.is_null()) c.task_query.reset();
         else c.task_query = as<std::string>(v, "task.query");
       }},
      TABGRPO_FIELD("task.labels", std::vector<std::string>, labels),
      {"data.source",
       [](const RunConfig& c) { return json(c.source == DataSource::kCsv ? "csv" : "synthetic"); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         const auto s = as<std::string>(v, "data.source");
         if (s == "csv") c.source = DataSource::kCsv;
         else if (s == "synthetic") c.source = DataSource::kSynthetic;
         else fail(ErrorCode::kConfig, "data.source must be 'csv' or 'synthetic'");
       }},
      {"data.csv", [](const RunConfig& c) { return json(c.csv_path.string()); },
       [](RunConfig& c, const json& v, const std::filesystem::path& base) {
         const std::filesystem::path p = as<std::string>(v, "data.csv");
         c.csv_path = p.empty() || p.is_absolute() ? p : base / p;
       }},
      TABGRPO_FIELD("data.features", std::vector<std::string>, features),
      TABGRPO_FIELD("data.label_column", std::string, label_column),
      {"data.missing_marker",
       [](const RunConfig& c) { return c.missing_marker ? json(*c.missing_marker) : json(nullptr); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         if (v.is_null()) c.missing_marker.reset();
         else c.missing_marker = as<std::string>(v, "data.missing_marker");
       }},
      {"data.synthetic.rule",
       [](const RunConfig& c) { return json(std::string(to_string(c.synthetic.rule))); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         c.synthetic.rule = parse_label_rule(as<std::string>(v, "data.synthetic.rule"));
       }},
      TABGRPO_FIELD("data.synthetic.rule_features", std::vector<std::string>, synthetic.rule_features),
      TABGRPO_FIELD("data.synthetic.cutoff", double, synthetic.cutoff),
      TABGRPO_FIELD("data.synthetic.weights", std::vector<double>, synthetic.weights),
      TABGRPO_FIELD("data.synthetic.bias", double, synthetic.bias),
      TABGRPO_FIELD("data.synthetic.balance", double, synthetic.balance),
      TABGRPO_FIELD("data.synthetic.decimals", int, synthetic.decimals),
      TABGRPO_FIELD("data.synthetic.n", std::size_t, synthetic_n),
      {"data.split",
       [](const RunConfig& c) { return json::array({c.split.train, c.split.val, c.split.test}); },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         const auto f = as<std::vector<double>>(v, "data.split");
         if (f.size() != 3) fail(ErrorCode::kConfig, "data.split needs three fractions");
         c.split = {f[0], f[1], f[2]};
       }},
      TABGRPO_FIELD("prompt.max_features", std::size_t, prompt.max_features),
      TABGRPO_FIELD("vocab.max_size", std::size_t, vocab_max_size),
      {"vocab.source",
       [](const RunConfig& c) {
         return json(c.vocab_source == VocabSource::kAttributes ? "attributes" : "prompts");
       },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         const auto s = as<std::string>(v, "vocab.source");
         if (s == "attributes") c.vocab_source = VocabSource::kAttributes;
         else if (s == "prompts") c.vocab_source = VocabSource::kPrompts;
         else fail(ErrorCode::kConfig, "vocab.source must be 'attributes' or 'prompts'");
       }},
      TABGRPO_FIELD("policy.embed_dim", int, arch.embed_dim),
      TABGRPO_FIELD("policy.hidden_dim", int, arch.hidden_dim),
      TABGRPO_FIELD("policy.prompt_window", int, arch.prompt_window),
      TABGRPO_FIELD("policy.output_window", int, arch.output_window),
      TABGRPO_FIELD("policy.max_positions", int, arch.max_positions),
      TABGRPO_FIELD("grpo.group_size", int, train.grpo.group_size),
      TABGRPO_FIELD("grpo.clip_eps", double, train.grpo.clip_eps),
      TABGRPO_FIELD("grpo.kl_beta", double, train.grpo.kl_beta),
      TABGRPO_FIELD("grpo.std_floor", double, train.grpo.std_floor),
      TABGRPO_FIELD("grpo.inner_updates", int, train.grpo.inner_updates),
      TABGRPO_FIELD("grpo.learning_rate", double, train.grpo.learning_rate),
      TABGRPO_FIELD("grpo.adam_beta1", double, train.grpo.adam_beta1),
      TABGRPO_FIELD("grpo.adam_beta2", double, train.grpo.adam_beta2),
      TABGRPO_FIELD("grpo.adam_eps", double, train.grpo.adam_eps),
      {"grpo.optimizer",
       [](const RunConfig& c) {
         return json(c.train.grpo.optimizer == OptimizerKind::kAdam ? "adam" : "sgd");
       },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         const auto s = as<std::string>(v, "grpo.optimizer");
         if (s == "adam") c.train.grpo.optimizer = OptimizerKind::kAdam;
         else if (s == "sgd") c.train.grpo.optimizer = OptimizerKind::kGradientAscent;
         else fail(ErrorCode::kConfig, "grpo.optimizer must be 'adam' or 'sgd'");
       }},
      TABGRPO_FIELD("grpo.length_normalize", bool, train.grpo.length_normalize),
      TABGRPO_FIELD("grpo.epochs", int, train.grpo.epochs),
      {"grpo.time_budget_seconds",
       [](const RunConfig& c) {
         return c.train.grpo.time_budget_seconds ? json(*c.train.grpo.time_budget_seconds) : json(nullptr);
       },
       [](RunConfig& c, const json& v, const std::filesystem::path&) {
         if (v.is_null()) c.train.grpo.time_budget_seconds.reset();
         else c.train.grpo.time_budget_seconds = as<double>(v, "grpo.time_budget_seconds");
       }},
      TABGRPO_FIELD("grpo.prompts_per_step", int, train.grpo.prompts_per_step),
      TABGRPO_FIELD("sampler.train.temperature", double, train.train_sampler.temperature),
      TABGRPO_FIELD("sampler.train.top_p", double, train.train_sampler.top_p),
      TABGRPO_FIELD("sampler.train.top_k", int, train.train_sampler.top_k),
      TABGRPO_FIELD("sampler.train.max_len", int, train.train_sampler.max_len),
      TABGRPO_FIELD("sampler.eval.temperature", double, train.eval_sampler.temperature),
      TABGRPO_FIELD("sampler.eval.top_p", double, train.eval_sampler.top_p),
      TABGRPO_FIELD("sampler.eval.top_k", int, train.eval_sampler.top_k),
      TABGRPO_FIELD("sampler.eval.max_len", int, train.eval_sampler.max_len),
      TABGRPO_FIELD("sampler.eval.seed", std::uint64_t, train.eval_sampler.seed),
      TABGRPO_FIELD("reward.format", double, train.rewards.format),
      TABGRPO_FIELD("reward.validity", double, train.rewards.validity),
      TABGRPO_FIELD("reward.correctness", double, train.rewards.correctness),
  };
  return table;
}

#undef TABGRPO_FIELD

void check(const RunConfig& c) {
  if (c.labels.size() < 2) fail(ErrorCode::kConfig, "task.labels needs at least two labels");
  if (c.source == DataSource::kCsv) {
    if (c.csv_path.empty()) fail(ErrorCode::kConfig, "data.csv is required for csv data");
    if (!std::filesystem::exists(c.csv_path)) {
      fail(ErrorCode::kConfig, "data.csv file does not exist: " + c.csv_path.string());
    }
    if (c.features.empty()) fail(ErrorCode::kConfig, "data.features is required for csv data");
  }
  if (c.synthetic_n < 1) fail(ErrorCode::kConfig, "data.synthetic.n must be at least 1");
  c.train.grpo.validate();
  c.train.train_sampler.validate();
  c.train.eval_sampler.validate();
}

}  // namespace

Schema RunConfig::schema() const {
  if (source == DataSource::kSynthetic) {
    SyntheticSpec spec = synthetic;
    spec.task_id = task_id;
    if (!features.empty()) spec.feature_names = features;
    spec.positive_label = labels.at(0);
    spec.negative_label = labels.at(1);
    return spec.schema();
  }
  Schema s;
  s.task_id = task_id;
  s.feature_names = features;
  s.label_column = label_column;
  for (const auto& label : labels) s.allowed_labels.push_back(normalize_label(label));
  s.missing_marker = missing_marker;
  return s;
}

TaskRegistry RunConfig::registry() const {
  TaskRegistry registry = TaskRegistry::with_builtin_tasks();
  if (task_query) {
    registry.add({task_id, *task_query, labels});
  } else if (!registry.contains(task_id)) {
    registry.add_templated(task_id, labels);
  }
  return registry;
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorCode::kConfig, "config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.key == key; });
    if (it == table.end()) fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    it->set(cfg, value, base_dir);
  }
  check(cfg);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kConfig, "cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig cfg = parse_run_config(buffer.str(), path.parent_path());
  if (const char* out = std::getenv("TABGRPO_OUT"); out && *out) cfg.out_dir = out;
  return cfg;
}

std::string to_json_text(const RunConfig& cfg) {
  json doc = json::object();
  for (const auto& field : fields()) doc[field.key] = field.get(cfg);
  return doc.dump(2);
}

std::string config_digest(const RunConfig& cfg) {
  // out_dir does not change what a run computes.
  RunConfig copy = cfg;
  copy.out_dir.clear();
  const std::string text = to_json_text(copy);
  std::uint64_t hash = 1469598103934665603ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

DatasetSplits prepare_splits(const RunConfig& cfg) {
  Dataset all;
  if (cfg.source == DataSource::kCsv) {
    all = load_csv(cfg.csv_path, cfg.schema());
  } else {
    SyntheticSpec spec = cfg.synthetic;
    spec.task_id = cfg.task_id;
    if (!cfg.features.empty()) spec.feature_names = cfg.features;
    spec.positive_label = cfg.labels.at(0);
    spec.negative_label = cfg.labels.at(1);
    all = generate_synthetic(spec, cfg.synthetic_n, cfg.seed);
  }
  return split_dataset(all, cfg.split, cfg.seed);
}

Vocab build_run_vocab(const RunConfig& cfg, const Dataset& train) {
  std::vector<std::string> corpus;
  corpus.reserve(train.size());
  const TaskRegistry registry = cfg.registry();
  for (const auto& record : train.records) {
    if (cfg.vocab_source == VocabSource::kAttributes) {
      corpus.push_back(serialize_record(record, train.schema, cfg.prompt.max_features));
    } else {
      corpus.push_back(build_prompt(registry, cfg.task_id, record, train.schema, cfg.prompt).text);
    }
  }
  return Vocab::build(corpus, cfg.vocab_max_size, train.schema.allowed_labels);
}

}  // namespace tabgrpo
