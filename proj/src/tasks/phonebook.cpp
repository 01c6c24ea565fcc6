#include "moelab/tasks/phonebook.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "moelab/errors.hpp"
#include "moelab/tasks/rng.hpp"

namespace moelab::tasks {

Phonebook gen_phonebook(std::size_t size, std::uint64_t seed) {
  if (size > kNameSpace || size > kNumberSpace) {
    throw ContractError("phone-book of " + std::to_string(size) + " entries exceeds the name space");
  }
  Rng rng(seed);
  std::unordered_set<std::uint64_t> names, numbers;
  names.reserve(size);
  numbers.reserve(size);
  Phonebook book;
  book.entries.reserve(size);
  while (book.entries.size() < size) {
    PhonebookEntry e;
    std::uint64_t name_code = 0, number_code = 0;
    for (std::size_t i = 0; i < kNameLength; ++i) {
      auto c = rng.below(26);
      name_code = name_code * 26 + c;
      e.name.push_back(static_cast<char>('a' + c));
    }
    for (std::size_t i = 0; i < kNumberLength; ++i) {
      auto c = rng.below(10);
      number_code = number_code * 10 + c;
      e.number.push_back(static_cast<char>('0' + c));
    }
    if (names.count(name_code) || numbers.count(number_code)) continue;
    names.insert(name_code);
    numbers.insert(number_code);
    book.entries.push_back(std::move(e));
  }
  return book;
}

Sample phonebook_sample(const PhonebookEntry& entry, const Vocabulary& vocab) {
  Sample s;
  s.tokens.push_back(vocab.id(kBos));
  for (char c : entry.name) s.tokens.push_back(vocab.id(std::string(1, c)));
  s.tokens.push_back(vocab.id(kSep));
  s.answer_begin = s.tokens.size();
  for (char c : entry.number) s.tokens.push_back(vocab.id(std::string(1, c)));
  s.tokens.push_back(vocab.id(kEos));
  s.answer_end = s.tokens.size();
  s.loss_mask.assign(s.tokens.size(), 1);
  s.meta = {{"task", "phonebook"}, {"name", entry.name}};
  return s;
}

PhonebookData phonebook_samples(const Phonebook& book, const Vocabulary& vocab,
                                std::size_t num_queries, std::uint64_t seed) {
  if (book.entries.empty()) throw ContractError("phone-book is empty");
  PhonebookData out;
  out.train.reserve(book.entries.size());
  for (const auto& e : book.entries) out.train.push_back(phonebook_sample(e, vocab));
  std::vector<std::size_t> order(book.entries.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // partial Fisher-Yates: first k positions are a uniform k-subset
  const std::size_t k = std::min(num_queries, order.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rng.below(order.size() - i);
    std::swap(order[i], order[j]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    Sample q = out.train[order[i]];
    q.meta["entry"] = order[i];
    out.queries.push_back(std::move(q));
  }
  return out;
}

}  // namespace moelab::tasks
