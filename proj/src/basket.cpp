#include "basketforge/basket.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "basketforge/errors.hpp"

namespace basketforge {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

bool is_valid_item(std::string_view name) noexcept {
  if (name.empty()) return false;
  if (is_space(name.front()) || is_space(name.back())) return false;
  return name.find_first_of(",\n") == std::string_view::npos;
}

Itemset::Itemset(std::vector<Item> sorted_items) : items_(std::move(sorted_items)) {
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (!is_valid_item(items_[i])) {
      throw std::invalid_argument("invalid item '" + items_[i] + "'");
    }
    if (i > 0 && !(items_[i - 1] < items_[i])) {
      throw std::invalid_argument("itemset items must be strictly ascending");
    }
  }
}

Itemset Itemset::from_unsorted(std::vector<Item> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return Itemset(std::move(items));
}

Itemset Itemset::from_key(std::string_view key) {
  std::vector<Item> items;
  if (key.empty()) return Itemset{};
  std::size_t pos = 0;
  while (true) {
    auto comma = key.find(',', pos);
    items.emplace_back(key.substr(pos, comma == std::string_view::npos ? key.npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return Itemset(std::move(items));
}

bool Itemset::is_subset_of(const Itemset& other) const {
  return std::includes(other.items_.begin(), other.items_.end(), items_.begin(), items_.end());
}

bool Itemset::contains(const Item& item) const {
  return std::binary_search(items_.begin(), items_.end(), item);
}

std::string Itemset::key() const {
  std::string out;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (i > 0) out += ',';
    out += items_[i];
  }
  return out;
}

Itemset Itemset::with(const Item& item) const {
  auto copy = items_;
  copy.insert(std::upper_bound(copy.begin(), copy.end(), item), item);
  return Itemset(std::move(copy));
}

Itemset Itemset::minus(const Itemset& other) const {
  std::vector<Item> out;
  std::set_difference(items_.begin(), items_.end(), other.items_.begin(), other.items_.end(),
                      std::back_inserter(out));
  Itemset result;
  result.items_ = std::move(out);
  return result;
}

TransactionDataset::TransactionDataset(std::vector<Itemset> baskets) {
  transactions_.reserve(baskets.size());
  for (auto& basket : baskets) {
    if (basket.empty()) throw std::invalid_argument("transactions must be non-empty");
    universe_.insert(universe_.end(), basket.begin(), basket.end());
    transactions_.push_back({transactions_.size(), std::move(basket)});
  }
  std::sort(universe_.begin(), universe_.end());
  universe_.erase(std::unique(universe_.begin(), universe_.end()), universe_.end());
}

void MiningParams::validate() const {
  auto in_range = [](double f) { return f > 0.0 && f <= 1.0; };
  if (!in_range(min_support)) throw ConfigError("min_support must be in (0, 1]");
  if (!in_range(min_confidence)) throw ConfigError("min_confidence must be in (0, 1]");
}

bool rule_order(const AssociationRule& a, const AssociationRule& b) {
  if (a.antecedent != b.antecedent) return a.antecedent < b.antecedent;
  return a.consequent < b.consequent;
}

TransactionDataset parse_transactions(std::istream& source) {
  std::vector<Itemset> baskets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == '#') continue;
    if (trim(line).empty()) continue;

    std::vector<Item> items;
    std::string_view rest = line;
    while (true) {
      auto comma = rest.find(',');
      auto token = trim(rest.substr(0, comma));
      if (token.empty()) throw ParseError(line_no, "empty item");
      items.emplace_back(token);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    baskets.push_back(Itemset::from_unsorted(std::move(items)));
  }
  if (baskets.empty()) throw ParseError(0, "no transactions");
  return TransactionDataset(std::move(baskets));
}

TransactionDataset parse_transactions(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_transactions(in);
}

std::string serialize_transactions(const TransactionDataset& dataset) {
  std::string out;
  for (const auto& t : dataset.transactions()) {
    out += t.items.key();
    out += '\n';
  }
  return out;
}

std::size_t serialized_size(const Transaction& t) {
  std::size_t n = t.items.size();  // separators plus newline
  for (const auto& item : t.items) n += item.size();
  return n;
}

std::uint64_t absolute_support_threshold(double min_support, std::size_t n) {
  if (n == 0) throw ConfigError("transaction count must be at least 1");
  if (!(min_support > 0.0 && min_support <= 1.0)) {
    throw ConfigError("min_support must be in (0, 1]");
  }
  const double product = min_support * static_cast<double>(n);
  const double nearest = std::round(product);
  const double count = std::abs(product - nearest) < 1e-9 ? nearest : std::ceil(product);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(count));
}

std::uint64_t count_support(const TransactionDataset& dataset, const Itemset& itemset) {
  std::uint64_t count = 0;
  for (const auto& t : dataset.transactions()) {
    if (itemset.is_subset_of(t.items)) ++count;
  }
  return count;
}

}  // namespace basketforge
