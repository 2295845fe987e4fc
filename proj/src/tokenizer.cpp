#include "dkg/tokenizer.hpp"

#include <cctype>

namespace dkg {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      flush();
    } else if (c < 0x80 && !std::isalnum(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    }
  }
  flush();
  return out;
}

TokenVocab::TokenVocab() {
  for (const char* t : {"<pad>", "<unk>", "<bos>", "<eos>"}) add_token(t);
}

std::uint32_t TokenVocab::add_token(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(tokens_.size());
  index_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

void TokenVocab::add_text(std::string_view text) {
  for (const auto& t : tokenize(text)) add_token(t);
}

std::uint32_t TokenVocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::uint32_t> TokenVocab::encode(std::string_view text) const {
  std::vector<std::uint32_t> ids;
  for (const auto& t : tokenize(text)) ids.push_back(id(t));
  return ids;
}

std::string TokenVocab::decode(std::span<const std::uint32_t> ids) const {
  std::string out;
  for (auto id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::uint64_t TokenVocab::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& t : tokens_) {
    for (char c : t) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dkg
