#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tabgrpo {

using TokenId = std::int32_t;

namespace token {
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kReasoningOpen = 4;
inline constexpr TokenId kReasoningClose = 5;
inline constexpr TokenId kAnswerOpen = 6;
inline constexpr TokenId kAnswerClose = 7;
inline constexpr std::size_t kReservedCount = 8;

inline constexpr std::string_view kReservedText[kReservedCount] = {
    "<pad>", "<bos>", "<eos>", "<unk>", "<reasoning>", "</reasoning>", "<answer>", "</answer>"};
}  // namespace token

/// Lowercases and splits on whitespace; the four structural tags are cut out
/// as their own pieces even when glued to neighbouring text.
std::vector<std::string> split_words(std::string_view text);

/// Word-level vocabulary with atomic structural tags.
class Vocab {
 public:
  /// Words ranked by frequency (ties: lexicographic), truncated so the
  /// vocabulary holds at most max_size entries. `required` words are always
  /// kept, ahead of the frequency ranking.
  static Vocab build(std::span<const std::string> corpus, std::size_t max_size,
                     std::span<const std::string> required = {});

  /// Restores a persisted listing; the reserved prefix must match.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::vector<TokenId> encode(std::string_view text) const;
  /// Throws kDecode for ids outside the vocabulary. PAD, BOS and EOS render
  /// as nothing.
  std::string decode(std::span<const TokenId> ids) const;

  std::optional<TokenId> id_of(std::string_view word) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace tabgrpo
