#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dkg {

/// Lowercases, splits on whitespace, and emits every ASCII punctuation
/// character as its own token.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> index map with reserved ids PAD=0, UNK=1, BOS=2, EOS=3.
class TokenVocab {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;
  static constexpr std::uint32_t kBos = 2;
  static constexpr std::uint32_t kEos = 3;

  TokenVocab();

  /// Adds every token of `text` in first-appearance order.
  void add_text(std::string_view text);
  std::uint32_t add_token(const std::string& token);

  std::uint32_t id(const std::string& token) const;  // UNK when absent
  bool contains(const std::string& token) const {
    return index_.count(token) != 0;
  }
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  std::span<const std::string> tokens() const noexcept { return tokens_; }

  std::vector<std::uint32_t> encode(std::string_view text) const;
  /// Space-joined tokens, stopping at EOS; PAD/BOS are skipped.
  std::string decode(std::span<const std::uint32_t> ids) const;

  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace dkg
