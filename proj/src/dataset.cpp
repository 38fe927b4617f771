#include "tabgrpo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace tabgrpo {
namespace {

std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

double parse_number(const std::string& text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorCode::kConfig, "synthetic rule needs a numeric value, got '" + text + "'");
  }
  return value;
}

std::string render_number(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

}  // namespace

void Schema::validate() const {
  if (feature_names.empty()) fail(ErrorCode::kConfig, "schema '" + task_id + "' has no features");
  std::set<std::string> seen;
  for (const auto& name : feature_names) {
    if (!seen.insert(name).second) {
      fail(ErrorCode::kConfig, "duplicate feature '" + name + "' in schema '" + task_id + "'");
    }
  }
  if (seen.contains(label_column)) {
    fail(ErrorCode::kConfig, "label column '" + label_column + "' is also a feature");
  }
  if (allowed_labels.size() < 2) {
    fail(ErrorCode::kConfig, "schema '" + task_id + "' needs at least two labels");
  }
  std::set<std::string> labels;
  for (const auto& label : allowed_labels) {
    if (label != to_lower_ascii(label) || label.empty()) {
      fail(ErrorCode::kConfig, "label '" + label + "' must be non-empty lowercase");
    }
    if (!labels.insert(label).second) fail(ErrorCode::kConfig, "duplicate label '" + label + "'");
  }
}

std::optional<std::size_t> Schema::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return i;
  }
  return std::nullopt;
}

bool Schema::allows(std::string_view normalized_label) const {
  return std::find(allowed_labels.begin(), allowed_labels.end(), normalized_label) !=
         allowed_labels.end();
}

const std::string& Record::value(const Schema& schema, std::string_view feature) const {
  const auto idx = schema.feature_index(feature);
  if (!idx) fail(ErrorCode::kLookup, "unknown feature '" + std::string(feature) + "'");
  return values.at(*idx);
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
    case SplitTag::kAll: return "all";
  }
  return "all";
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::kTrain;
  if (text == "val") return SplitTag::kVal;
  if (text == "test") return SplitTag::kTest;
  if (text == "all") return SplitTag::kAll;
  fail(ErrorCode::kConfig, "unknown split '" + std::string(text) + "'");
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return parse_csv(in, schema);
}

Dataset parse_csv(std::istream& in, const Schema& schema) {
  schema.validate();
  Dataset out;
  out.schema = schema;

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::kSchemaMismatch, "csv has no header row");
  strip_cr(line);
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_commas(line);

  std::unordered_map<std::string, std::size_t> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) column_of.emplace(header[i], i);
  auto column = [&](const std::string& name) {
    const auto it = column_of.find(name);
    if (it == column_of.end()) fail(ErrorCode::kSchemaMismatch, "csv is missing column '" + name + "'");
    return it->second;
  };
  std::vector<std::size_t> feature_cols;
  for (const auto& name : schema.feature_names) feature_cols.push_back(column(name));
  const std::size_t label_col = column(schema.label_column);

  std::size_t row = 0;
  while (std::getline(in, line)) {
    strip_cr(line);
    ++row;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      fail(ErrorCode::kRaggedRow, "row " + std::to_string(row) + " has " +
                                      std::to_string(cells.size()) + " cells, expected " +
                                      std::to_string(header.size()));
    }
    Record record;
    record.values.reserve(feature_cols.size());
    for (const auto col : feature_cols) {
      record.values.push_back(cells[col]);
      record.missing.push_back(schema.missing_marker && cells[col] == *schema.missing_marker);
    }
    record.label = normalize_label(cells[label_col]);
    if (!schema.allows(record.label)) {
      fail(ErrorCode::kLabel, "row " + std::to_string(row) + " has label '" + cells[label_col] +
                                  "' outside the allowed set");
    }
    out.records.push_back(std::move(record));
  }
  return out;
}

void write_csv(std::ostream& out, const Dataset& dataset) {
  const auto& schema = dataset.schema;
  for (const auto& name : schema.feature_names) out << name << ',';
  out << schema.label_column << '\n';
  for (const auto& record : dataset.records) {
    for (const auto& value : record.values) out << value << ',';
    out << record.label << '\n';
  }
}

LabelRule parse_label_rule(std::string_view name) {
  if (name == "threshold") return LabelRule::kThreshold;
  if (name == "conjunction") return LabelRule::kConjunction;
  if (name == "linear") return LabelRule::kLinear;
  fail(ErrorCode::kConfig, "unknown labeling rule '" + std::string(name) + "'");
}

std::string_view to_string(LabelRule rule) {
  switch (rule) {
    case LabelRule::kThreshold: return "threshold";
    case LabelRule::kConjunction: return "conjunction";
    case LabelRule::kLinear: return "linear";
  }
  return "threshold";
}

Schema SyntheticSpec::schema() const {
  Schema schema;
  schema.task_id = task_id;
  schema.feature_names = feature_names;
  schema.label_column = "label";
  schema.allowed_labels = {normalize_label(positive_label), normalize_label(negative_label)};
  return schema;
}

bool SyntheticSpec::rule_fires(const Record& record) const {
  const Schema s = schema();
  switch (rule) {
    case LabelRule::kThreshold:
      return parse_number(record.value(s, rule_features.at(0))) > cutoff;
    case LabelRule::kConjunction:
      return record.value(s, rule_features.at(0)) == "1" &&
             record.value(s, rule_features.at(1)) == "1";
    case LabelRule::kLinear: {
      double score = bias;
      for (std::size_t i = 0; i < feature_names.size(); ++i) {
        score += weights[i] * parse_number(record.values[i]);
      }
      return score > 0.0;
    }
  }
  return false;
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "generate_synthetic needs n >= 1");
  const Schema schema = spec.schema();
  schema.validate();
  const std::size_t needed_rule_features = spec.rule == LabelRule::kThreshold     ? 1
                                           : spec.rule == LabelRule::kConjunction ? 2
                                                                                   : 0;
  if (spec.rule_features.size() < needed_rule_features) {
    fail(ErrorCode::kConfig, std::string(to_string(spec.rule)) + " rule needs " +
                                 std::to_string(needed_rule_features) + " rule features");
  }
  std::vector<bool> binary(spec.feature_names.size(), false);
  for (std::size_t k = 0; k < needed_rule_features; ++k) {
    const auto idx = schema.feature_index(spec.rule_features[k]);
    if (!idx) fail(ErrorCode::kConfig, "rule feature '" + spec.rule_features[k] + "' not in features");
    if (spec.rule == LabelRule::kConjunction) binary[*idx] = true;
  }
  if (spec.rule == LabelRule::kLinear && spec.weights.size() != spec.feature_names.size()) {
    fail(ErrorCode::kConfig, "linear rule needs one weight per feature");
  }
  if (!(spec.balance >= 0.0 && spec.balance <= 1.0)) {
    fail(ErrorCode::kConfig, "balance must lie in [0, 1]");
  }

  Rng rng(seed);
  Dataset out;
  out.schema = schema;
  out.records.reserve(n);
  constexpr int kMaxAttempts = 100000;
  for (std::size_t r = 0; r < n; ++r) {
    const bool want_positive = uniform01(rng) < spec.balance;
    bool done = false;
    for (int attempt = 0; attempt < kMaxAttempts && !done; ++attempt) {
      Record record;
      for (std::size_t f = 0; f < spec.feature_names.size(); ++f) {
        if (binary[f]) {
          record.values.push_back(uniform01(rng) < 0.5 ? "0" : "1");
        } else {
          record.values.push_back(render_number(uniform01(rng), spec.decimals));
        }
        record.missing.push_back(false);
      }
      if (spec.rule_fires(record) == want_positive) {
        record.label = want_positive ? schema.allowed_labels[0] : schema.allowed_labels[1];
        out.records.push_back(std::move(record));
        done = true;
      }
    }
    if (!done) fail(ErrorCode::kConfig, "synthetic rule cannot produce the requested label");
  }
  return out;
}

const Dataset& DatasetSplits::at(SplitTag tag) const {
  switch (tag) {
    case SplitTag::kTrain: return train;
    case SplitTag::kVal: return val;
    case SplitTag::kTest: return test;
    case SplitTag::kAll: break;
  }
  fail(ErrorCode::kLookup, "no 'all' split in a partition");
}

DatasetSplits split_dataset(const Dataset& dataset, const SplitFractions& fractions,
                            std::uint64_t seed) {
  if (dataset.empty()) fail(ErrorCode::kEmptySplit, "cannot split an empty dataset");
  require(fractions.train > 0 && fractions.val > 0 && fractions.test > 0,
          "split fractions must be positive");
  require(std::abs(fractions.train + fractions.val + fractions.test - 1.0) <= 1e-9,
          "split fractions must sum to 1");

  const std::size_t n = dataset.size();
  // The small slack keeps products like 0.29 * 100 from flooring to 28.
  const auto floor_size = [n](double f) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
  };
  const std::size_t n_val = floor_size(fractions.val);
  const std::size_t n_test = floor_size(fractions.test);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  portable_shuffle(order.begin(), order.end(), rng);

  auto take = [&](std::size_t begin, std::size_t end, SplitTag tag) {
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(idx.begin(), idx.end());
    Dataset part;
    part.schema = dataset.schema;
    part.split = tag;
    part.records.reserve(idx.size());
    for (const auto i : idx) part.records.push_back(dataset.records[i]);
    return part;
  };
  DatasetSplits splits;
  splits.val = take(0, n_val, SplitTag::kVal);
  splits.test = take(n_val, n_val + n_test, SplitTag::kTest);
  splits.train = take(n_val + n_test, n, SplitTag::kTrain);
  return splits;
}

std::string serialize_record(const Record& record, const Schema& schema) {
  return serialize_record(record, schema, 0);
}

std::string serialize_record(const Record& record, const Schema& schema,
                             std::size_t max_features) {
  const std::size_t count = max_features == 0
                                ? schema.feature_names.size()
                                : std::min(max_features, schema.feature_names.size());
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i > 0) out += ' ';
    out += "The state of ";
    out += schema.feature_names[i];
    out += " is ";
    out += record.values.at(i);
    out += '.';
  }
  return out;
}

}  // namespace tabgrpo
