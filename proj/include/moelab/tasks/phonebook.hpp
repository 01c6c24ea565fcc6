#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "moelab/tasks/sample.hpp"
#include "moelab/tasks/vocab.hpp"

namespace moelab::tasks {

inline constexpr std::size_t kNameLength = 5;
inline constexpr std::size_t kNumberLength = 8;
inline constexpr std::uint64_t kNameSpace = 11881376;   // 26^5
inline constexpr std::uint64_t kNumberSpace = 100000000;  // 10^8

struct PhonebookEntry {
  std::string name;    // 5 lowercase letters
  std::string number;  // 8 digits
};

struct Phonebook {
  std::vector<PhonebookEntry> entries;
};

// Uniform rejection sampling of unique names and unique numbers.
Phonebook gen_phonebook(std::size_t size, std::uint64_t seed);

// <BOS> name <SEP> number <EOS>, mask everywhere, answer = number + <EOS>.
Sample phonebook_sample(const PhonebookEntry& entry, const Vocabulary& vocab);

struct PhonebookData {
  std::vector<Sample> train;
  std::vector<Sample> queries;  // drawn from the training entries
};

// Queries: `num_queries` entries without replacement (all entries, shuffled,
// when the book is smaller).
PhonebookData phonebook_samples(const Phonebook& book, const Vocabulary& vocab,
                                std::size_t num_queries, std::uint64_t seed);

}  // namespace moelab::tasks
