#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

#include "types.hpp"

namespace vardram {

// Translation entries, keyed by a packed 32-bit address key (see key packing
// in address.hpp). Pair entries carry a (target rank, target bank) route and
// resolve in the base traversal; Override entries come from collision
// resolution, carry a full (rank, bank, row', col') and need a second
// retrieval step, surfaced to the controller as an INTERRUPT; RowRedirect
// entries steer whole weak rows to a healthy row; Owner entries appear only
// in the engine's occupancy shadow trie and map a physical slot to the
// logical key that currently lives there.
enum class EntryKind : std::uint8_t { Pair, Override, RowRedirect, Owner };

struct TrieEntry {
  EntryKind kind = EntryKind::Pair;
  std::uint32_t value = 0;

  bool operator==(const TrieEntry&) const = default;
};

inline const char* entry_kind_name(EntryKind k)
{
  switch (k) {
    case EntryKind::Pair: return "pair";
    case EntryKind::Override: return "override";
    case EntryKind::RowRedirect: return "row";
    case EntryKind::Owner: return "owner";
  }
  return "?";
}

// Dual-edge clocked hardware walks the four levels in 3 cycles; pulling a
// collision override out of the leaf costs another 3.
inline constexpr std::uint32_t trie_traverse_cycles = 3;
inline constexpr std::uint32_t trie_override_extra_cycles = 3;

inline std::uint32_t entry_lookup_cycles(const TrieEntry* e)
{
  if (e && (e->kind == EntryKind::Override || e->kind == EntryKind::RowRedirect))
    return trie_traverse_cycles + trie_override_extra_cycles;
  return trie_traverse_cycles;
}

// Four levels of 256-ary nodes over a 32-bit key, most significant byte
// first. The hardware budget is node_count * node_footprint_bytes against a
// fixed capacity; the host-side representation (sorted sparse vectors) is
// irrelevant to that accounting.
class RemapTrie {
public:
  RemapTrie() = default;

  // capacity_bytes == 0 disables the budget check.
  void set_capacity(std::uint64_t capacity_bytes, std::uint32_t node_footprint_bytes)
  {
    if (node_footprint_bytes == 0)
      throw ConfigError("trie: node footprint must be positive");
    capacity_bytes_ = capacity_bytes;
    footprint_ = node_footprint_bytes;
  }

  std::uint64_t size() const { return size_; }
  std::uint64_t node_count() const { return node_count_; }
  std::uint64_t footprint_bytes() const { return node_count_ * footprint_; }
  std::uint64_t capacity_bytes() const { return capacity_bytes_; }

  void insert(std::uint32_t key, TrieEntry entry)
  {
    if (capacity_bytes_ != 0) {
      std::uint64_t grown = node_count_ + missing_nodes(key);
      if (grown * footprint_ > capacity_bytes_)
        throw CapacityError("trie: node budget exceeded");
    }
    Node* n = &root_;
    for (int level = 0; level < 3; ++level) {
      std::uint8_t label = byte_at(key, level);
      Node* child = find_child(n, label);
      if (!child) {
        child = add_child(n, label);
        ++node_count_;
      }
      n = child;
    }
    std::uint8_t label = byte_at(key, 3);
    auto it = lower_bound_item(n, label);
    if (it != n->items.end() && it->first == label) {
      it->second = entry;
      return;
    }
    n->items.insert(it, {label, entry});
    ++size_;
  }

  const TrieEntry* find(std::uint32_t key) const
  {
    const Node* n = &root_;
    for (int level = 0; level < 3; ++level) {
      n = find_child(n, byte_at(key, level));
      if (!n) return nullptr;
    }
    auto it = lower_bound_item(const_cast<Node*>(n), byte_at(key, 3));
    if (it == n->items.end() || it->first != byte_at(key, 3)) return nullptr;
    return &it->second;
  }

  // find() plus the modeled hardware cost of the walk.
  std::pair<const TrieEntry*, std::uint32_t> lookup(std::uint32_t key) const
  {
    const TrieEntry* e = find(key);
    return {e, entry_lookup_cycles(e)};
  }

  bool erase(std::uint32_t key)
  {
    return erase_rec(root_, key, 0);
  }

  // In-order visit of every key in [lo, hi]. The visitor must not mutate the
  // trie.
  void for_each_range(std::uint32_t lo, std::uint32_t hi,
                      const std::function<void(std::uint32_t, const TrieEntry&)>& fn) const
  {
    if (lo > hi) return;
    visit_rec(root_, 0, 0, lo, hi, fn);
  }

  void for_each(const std::function<void(std::uint32_t, const TrieEntry&)>& fn) const
  {
    for_each_range(0, 0xffffffffu, fn);
  }

  void clear()
  {
    root_.kids.clear();
    root_.items.clear();
    size_ = 0;
    node_count_ = 1;
  }

  void dump(std::ostream& os) const
  {
    for_each([&os](std::uint32_t key, const TrieEntry& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%08x %s %08x", key, entry_kind_name(e.kind),
                    e.value);
      os << buf << '\n';
    });
  }

private:
  struct Node {
    std::vector<std::pair<std::uint8_t, std::unique_ptr<Node>>> kids;
    std::vector<std::pair<std::uint8_t, TrieEntry>> items;  // level 3 only
  };

  static std::uint8_t byte_at(std::uint32_t key, int level)
  {
    return std::uint8_t(key >> (8 * (3 - level)));
  }

  static Node* find_child(const Node* n, std::uint8_t label)
  {
    auto it = std::lower_bound(
        n->kids.begin(), n->kids.end(), label,
        [](const auto& kv, std::uint8_t l) { return kv.first < l; });
    if (it == n->kids.end() || it->first != label) return nullptr;
    return it->second.get();
  }

  static Node* add_child(Node* n, std::uint8_t label)
  {
    auto it = std::lower_bound(
        n->kids.begin(), n->kids.end(), label,
        [](const auto& kv, std::uint8_t l) { return kv.first < l; });
    it = n->kids.insert(it, {label, std::make_unique<Node>()});
    return it->second.get();
  }

  static std::vector<std::pair<std::uint8_t, TrieEntry>>::iterator
  lower_bound_item(Node* n, std::uint8_t label)
  {
    return std::lower_bound(
        n->items.begin(), n->items.end(), label,
        [](const auto& kv, std::uint8_t l) { return kv.first < l; });
  }

  std::uint64_t missing_nodes(std::uint32_t key) const
  {
    const Node* n = &root_;
    for (int level = 0; level < 3; ++level) {
      n = find_child(n, byte_at(key, level));
      if (!n) return std::uint64_t(3 - level);
    }
    return 0;
  }

  bool erase_rec(Node& n, std::uint32_t key, int level)
  {
    if (level == 3) {
      auto it = lower_bound_item(&n, byte_at(key, 3));
      if (it == n.items.end() || it->first != byte_at(key, 3)) return false;
      n.items.erase(it);
      --size_;
      return true;
    }
    std::uint8_t label = byte_at(key, level);
    auto it = std::lower_bound(
        n.kids.begin(), n.kids.end(), label,
        [](const auto& kv, std::uint8_t l) { return kv.first < l; });
    if (it == n.kids.end() || it->first != label) return false;
    Node& child = *it->second;
    if (!erase_rec(child, key, level + 1)) return false;
    if (child.kids.empty() && child.items.empty()) {
      n.kids.erase(it);
      --node_count_;
    }
    return true;
  }

  void visit_rec(const Node& n, int level, std::uint32_t prefix, std::uint32_t lo,
                 std::uint32_t hi,
                 const std::function<void(std::uint32_t, const TrieEntry&)>& fn) const
  {
    if (level == 3) {
      for (const auto& [label, entry] : n.items) {
        std::uint32_t key = prefix | label;
        if (key >= lo && key <= hi) fn(key, entry);
      }
      return;
    }
    unsigned shift = 8 * (3 - level);
    for (const auto& [label, child] : n.kids) {
      std::uint32_t base = prefix | (std::uint32_t(label) << shift);
      std::uint32_t span_hi = base | ((std::uint32_t{1} << shift) - 1);
      if (span_hi < lo || base > hi) continue;
      visit_rec(*child, level + 1, base, lo, hi, fn);
    }
  }

  Node root_;
  std::uint64_t size_ = 0;
  std::uint64_t node_count_ = 1;  // root
  std::uint64_t capacity_bytes_ = 0;
  std::uint32_t footprint_ = 16;
};

}  // namespace vardram
