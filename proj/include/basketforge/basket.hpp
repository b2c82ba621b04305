#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace basketforge {

using Item = std::string;

/// True when `name` is a valid item token: non-empty, no comma or line
/// break, no surrounding whitespace.
bool is_valid_item(std::string_view name) noexcept;

/// Strictly ascending list of distinct items. Ordering is bytewise, which
/// for UTF-8 text coincides with code point order.
class Itemset {
 public:
  Itemset() = default;

  /// Takes items already in canonical order; throws std::invalid_argument
  /// if they are not strictly ascending or an item is malformed.
  explicit Itemset(std::vector<Item> sorted_items);

  /// Sorts and deduplicates.
  static Itemset from_unsorted(std::vector<Item> items);

  /// Inverse of key().
  static Itemset from_key(std::string_view key);

  const std::vector<Item>& items() const noexcept { return items_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const Item& operator[](std::size_t i) const { return items_[i]; }
  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }

  /// Subset test (this ⊆ other).
  bool is_subset_of(const Itemset& other) const;
  bool contains(const Item& item) const;

  /// Canonical text form: items joined by ','. Items never contain commas,
  /// so the form is unambiguous.
  std::string key() const;

  Itemset with(const Item& item) const;
  Itemset minus(const Itemset& other) const;

  auto operator<=>(const Itemset&) const = default;
  bool operator==(const Itemset&) const = default;

 private:
  std::vector<Item> items_;
};

struct Transaction {
  std::size_t id = 0;
  Itemset items;

  bool operator==(const Transaction&) const = default;
};

class TransactionDataset {
 public:
  TransactionDataset() = default;

  /// Assigns ids 0..n-1 in order. Every itemset must be non-empty.
  explicit TransactionDataset(std::vector<Itemset> baskets);

  const std::vector<Transaction>& transactions() const noexcept { return transactions_; }
  const std::vector<Item>& universe() const noexcept { return universe_; }
  std::size_t size() const noexcept { return transactions_.size(); }
  bool empty() const noexcept { return transactions_.empty(); }

  bool operator==(const TransactionDataset&) const = default;

 private:
  std::vector<Transaction> transactions_;
  std::vector<Item> universe_;
};

struct MiningParams {
  double min_support = 0.5;
  double min_confidence = 0.5;

  /// Throws ConfigError unless both fractions lie in (0, 1].
  void validate() const;

  bool operator==(const MiningParams&) const = default;
};

struct AssociationRule {
  Itemset antecedent;
  Itemset consequent;
  double support = 0.0;
  double confidence = 0.0;
  std::uint64_t union_count = 0;

  bool operator==(const AssociationRule&) const = default;
};

/// Canonical rule order: by antecedent, then consequent.
bool rule_order(const AssociationRule& a, const AssociationRule& b);

/// Reads the basket format: one transaction per line, comma-separated
/// items, surrounding whitespace trimmed, duplicates dropped. Blank lines
/// and lines starting with '#' are skipped.
TransactionDataset parse_transactions(std::istream& source);
TransactionDataset parse_transactions(std::string_view text);

/// One line per transaction, items joined by ','.
std::string serialize_transactions(const TransactionDataset& dataset);

/// Serialized byte length of one transaction line, including the newline.
std::size_t serialized_size(const Transaction& t);

/// ceil(min_support * n), at least 1. Products within 1e-9 of an integer
/// are taken as that integer so decimal fractions like 0.07 * 100 do not
/// round up on binary noise.
std::uint64_t absolute_support_threshold(double min_support, std::size_t n);

/// Exhaustive count of transactions containing `itemset`.
std::uint64_t count_support(const TransactionDataset& dataset, const Itemset& itemset);

}  // namespace basketforge
