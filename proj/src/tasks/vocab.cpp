#include "moelab/tasks/vocab.hpp"

#include <fstream>

#include "moelab/errors.hpp"

namespace moelab::tasks {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || tokens_[i].find('\n') != std::string::npos) {
      throw ContractError("vocabulary tokens must be nonempty single-line strings");
    }
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ContractError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::graph(int n) {
  if (n < 1) throw ContractError("graph vocabulary needs n >= 1");
  std::vector<std::string> t;
  for (int v = 1; v <= n; ++v) t.push_back(std::to_string(v));
  for (auto s : {kEdge, kBos, kEos, kPad, kSep, kSlash}) t.emplace_back(s);
  return Vocabulary(std::move(t));
}

Vocabulary Vocabulary::phonebook() {
  std::vector<std::string> t;
  for (char c = 'a'; c <= 'z'; ++c) t.emplace_back(1, c);
  for (char c = '0'; c <= '9'; ++c) t.emplace_back(1, c);
  for (auto s : {kBos, kEos, kSep}) t.emplace_back(s);
  return Vocabulary(std::move(t));
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) throw IndexError("unknown token '" + std::string(token) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) > 0;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw IndexError("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write vocabulary " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read vocabulary " + path.string());
  std::vector<std::string> t;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) t.push_back(line);
  }
  return Vocabulary(std::move(t));
}

}  // namespace moelab::tasks
