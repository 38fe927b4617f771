#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabgrpo/common.hpp"

namespace tabgrpo {

/// Column layout of one tabular prediction task.
struct Schema {
  std::string task_id;
  std::vector<std::string> feature_names;  // serialization order
  std::string label_column;
  std::vector<std::string> allowed_labels;  // lowercase, at least two
  std::optional<std::string> missing_marker;

  /// Throws kConfig when the invariants do not hold.
  void validate() const;

  std::optional<std::size_t> feature_index(std::string_view name) const;
  bool allows(std::string_view normalized_label) const;
};

/// One row. values[i] belongs to schema.feature_names[i].
struct Record {
  std::vector<std::string> values;
  std::vector<bool> missing;
  std::string label;

  const std::string& value(const Schema& schema, std::string_view feature) const;

  friend bool operator==(const Record&, const Record&) = default;
};

enum class SplitTag { kTrain, kVal, kTest, kAll };

std::string_view to_string(SplitTag tag);
SplitTag parse_split_tag(std::string_view text);

struct Dataset {
  Schema schema;
  std::vector<Record> records;
  SplitTag split = SplitTag::kAll;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

/// Reads a header-first, comma-separated file. Extra columns are ignored.
Dataset load_csv(const std::filesystem::path& path, const Schema& schema);
Dataset parse_csv(std::istream& in, const Schema& schema);

/// Writes features then the label column, in schema order.
void write_csv(std::ostream& out, const Dataset& dataset);

enum class LabelRule { kThreshold, kConjunction, kLinear };

LabelRule parse_label_rule(std::string_view name);
std::string_view to_string(LabelRule rule);

/// Description of a generated task. The positive label is assigned when the
/// rule fires: x[rule_features[0]] > cutoff for kThreshold, both binary
/// features equal to 1 for kConjunction, and w.x + bias > 0 for kLinear.
struct SyntheticSpec {
  std::string task_id = "synthetic";
  std::vector<std::string> feature_names = {"income", "debt"};
  LabelRule rule = LabelRule::kThreshold;
  std::vector<std::string> rule_features = {"income"};
  double cutoff = 0.5;
  std::vector<double> weights;  // kLinear, one per feature
  double bias = 0.0;
  double balance = 0.5;  // target fraction of positive labels
  int decimals = 1;      // numeric rendering precision
  std::string positive_label = "good";
  std::string negative_label = "bad";

  Schema schema() const;
  /// True when the rule assigns the positive label to this record.
  bool rule_fires(const Record& record) const;
};

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

struct SplitFractions {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;

  const Dataset& at(SplitTag tag) const;
};

/// Shuffled partition; val and test sizes are floor(n * fraction) and the
/// remainder goes to train. Each split keeps the input's relative order.
DatasetSplits split_dataset(const Dataset& dataset, const SplitFractions& fractions,
                            std::uint64_t seed);

/// "The state of {feature} is {value}." per feature, single-space joined.
std::string serialize_record(const Record& record, const Schema& schema);
/// Only the first max_features features; 0 means all of them.
std::string serialize_record(const Record& record, const Schema& schema,
                             std::size_t max_features);

}  // namespace tabgrpo
