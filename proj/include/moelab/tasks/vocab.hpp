#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace moelab::tasks {

using TokenId = std::int32_t;

inline constexpr std::string_view kEdge = "<EDGE>";
inline constexpr std::string_view kBos = "<BOS>";
inline constexpr std::string_view kEos = "<EOS>";
inline constexpr std::string_view kPad = "<PAD>";
inline constexpr std::string_view kSep = "<SEP>";
inline constexpr std::string_view kSlash = "/";

// Ordered token list; ids are positions 0..size-1.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  // Vertices "1".."n" (ids 0..n-1) then <EDGE> <BOS> <EOS> <PAD> <SEP> /.
  static Vocabulary graph(int n);
  // a..z, 0..9, <BOS> <EOS> <SEP>: 39 tokens.
  static Vocabulary phonebook();

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::vector<TokenId> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  // One token per line, in id order.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace moelab::tasks
