#include "tabgrpo/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "tabgrpo/common.hpp"

namespace tabgrpo {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Tags that may appear in raw text; the control tokens never do.
std::optional<std::string_view> tag_at(std::string_view lowered, std::size_t pos) {
  for (std::size_t id = token::kReasoningOpen; id < token::kReservedCount; ++id) {
    const auto tag = token::kReservedText[id];
    if (lowered.compare(pos, tag.size(), tag) == 0) return tag;
  }
  return std::nullopt;
}

bool is_control_word(std::string_view word) {
  return word == token::kReservedText[token::kPad] || word == token::kReservedText[token::kBos] ||
         word == token::kReservedText[token::kEos] || word == token::kReservedText[token::kUnk];
}

}  // namespace

std::vector<std::string> split_words(std::string_view text) {
  const std::string lowered = to_lower_ascii(text);
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  std::size_t i = 0;
  while (i < lowered.size()) {
    if (lowered[i] == '<') {
      if (const auto tag = tag_at(lowered, i)) {
        flush();
        words.emplace_back(*tag);
        i += tag->size();
        continue;
      }
    }
    if (is_space(lowered[i])) {
      flush();
    } else {
      current += lowered[i];
    }
    ++i;
  }
  flush();
  return words;
}

Vocab Vocab::build(std::span<const std::string> corpus, std::size_t max_size,
                   std::span<const std::string> required) {
  std::set<std::string> must_have;
  for (const auto& word : required) {
    for (auto& piece : split_words(word)) must_have.insert(std::move(piece));
  }
  for (std::size_t id = 0; id < token::kReservedCount; ++id) {
    must_have.erase(std::string(token::kReservedText[id]));
  }
  require(max_size >= token::kReservedCount + must_have.size(),
          "vocabulary max_size is smaller than the reserved and required tokens");

  std::vector<std::string> tokens;
  for (const auto text : token::kReservedText) tokens.emplace_back(text);
  tokens.insert(tokens.end(), must_have.begin(), must_have.end());

  std::map<std::string, std::size_t> counts;
  for (const auto& text : corpus) {
    for (auto& word : split_words(text)) {
      if (!is_control_word(word) && !must_have.contains(word)) ++counts[word];
    }
  }
  for (std::size_t id = token::kReasoningOpen; id < token::kReservedCount; ++id) {
    counts.erase(std::string(token::kReservedText[id]));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (auto& [word, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(std::move(word));
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < token::kReservedCount) fail(ErrorCode::kConfig, "vocabulary is missing reserved tokens");
  for (std::size_t id = 0; id < token::kReservedCount; ++id) {
    if (tokens[id] != token::kReservedText[id]) {
      fail(ErrorCode::kConfig, "reserved token " + std::to_string(id) + " is '" + tokens[id] + "'");
    }
  }
  Vocab vocab;
  vocab.tokens_ = std::move(tokens);
  for (std::size_t id = 0; id < vocab.tokens_.size(); ++id) {
    const auto& word = vocab.tokens_[id];
    if (word.empty() || std::any_of(word.begin(), word.end(), is_space)) {
      fail(ErrorCode::kConfig, "vocabulary entry " + std::to_string(id) + " is not a single word");
    }
    if (!vocab.ids_.emplace(word, static_cast<TokenId>(id)).second) {
      fail(ErrorCode::kConfig, "duplicate vocabulary entry '" + word + "'");
    }
  }
  return vocab;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& word : split_words(text)) {
    if (is_control_word(word)) {
      ids.push_back(token::kUnk);
      continue;
    }
    const auto it = ids_.find(word);
    ids.push_back(it == ids_.end() ? token::kUnk : it->second);
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (const auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      fail(ErrorCode::kDecode, "token id " + std::to_string(id) + " outside vocabulary of size " +
                                   std::to_string(tokens_.size()));
    }
    if (id == token::kPad || id == token::kBos || id == token::kEos) continue;
    if (!out.empty()) out += ' ';
    out += tokens_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::optional<TokenId> Vocab::id_of(std::string_view word) const {
  const auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    fail(ErrorCode::kDecode, "token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

}  // namespace tabgrpo
