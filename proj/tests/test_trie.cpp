#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <unordered_map>
#include <vector>

#include "vardram/vardram.hpp"

using namespace vardram;

TEST_CASE("trie lookup costs are 3 cycles, 6 for override and redirect entries")
{
  RemapTrie t;
  t.insert(0x00010203u, {EntryKind::Pair, 1});
  t.insert(0x00010204u, {EntryKind::Override, 2});
  t.insert(0x00010205u, {EntryKind::RowRedirect, 3});
  t.insert(0x00010206u, {EntryKind::Owner, 4});

  REQUIRE(t.lookup(0x00010203u).second == 3);
  REQUIRE(t.lookup(0x00010204u).second == 6);
  REQUIRE(t.lookup(0x00010205u).second == 6);
  REQUIRE(t.lookup(0x00010206u).second == 3);
  // A miss still walks the levels.
  REQUIRE(t.lookup(0xdeadbeefu).second == 3);
  REQUIRE(t.lookup(0xdeadbeefu).first == nullptr);
}

TEST_CASE("trie mirrors a reference map over randomized insert/erase/find")
{
  RemapTrie t;
  std::unordered_map<std::uint32_t, TrieEntry> ref;
  std::mt19937_64 rng(42);
  // Clustered keys exercise shared prefixes; sparse ones exercise node growth.
  auto draw_key = [&]() -> std::uint32_t {
    if (rng() % 2) return std::uint32_t(rng() % 4096);
    return std::uint32_t(rng());
  };

  for (int i = 0; i < 30000; ++i) {
    std::uint32_t key = draw_key();
    switch (rng() % 3) {
      case 0: {
        TrieEntry e{EntryKind(rng() % 4), std::uint32_t(rng())};
        t.insert(key, e);
        ref[key] = e;
        break;
      }
      case 1: {
        bool erased = t.erase(key);
        REQUIRE(erased == (ref.erase(key) == 1));
        break;
      }
      default: {
        const TrieEntry* e = t.find(key);
        auto it = ref.find(key);
        if (it == ref.end()) {
          REQUIRE(e == nullptr);
        } else {
          REQUIRE(e != nullptr);
          REQUIRE(e->kind == it->second.kind);
          REQUIRE(e->value == it->second.value);
        }
        break;
      }
    }
    REQUIRE(t.size() == ref.size());
  }
}

TEST_CASE("for_each_range visits keys in order within bounds")
{
  RemapTrie t;
  std::vector<std::uint32_t> keys = {5, 100, 101, 4096, 70000, 0xffff0000u};
  for (std::uint32_t k : keys) t.insert(k, {EntryKind::Owner, k * 2});

  std::vector<std::uint32_t> seen;
  t.for_each_range(100, 70000, [&](std::uint32_t k, const TrieEntry& e) {
    REQUIRE(e.value == k * 2);
    seen.push_back(k);
  });
  REQUIRE(seen == std::vector<std::uint32_t>{100, 101, 4096, 70000});

  seen.clear();
  t.for_each([&](std::uint32_t k, const TrieEntry&) { seen.push_back(k); });
  REQUIRE(seen == keys);
}

TEST_CASE("node budget accounting grows and shrinks with the key set")
{
  RemapTrie t;
  REQUIRE(t.node_count() == 1);  // root always exists
  t.insert(0x01020304u, {EntryKind::Owner, 0});
  REQUIRE(t.node_count() == 4);  // three interior levels on top of the root
  // Same 3-byte prefix: leaf shares the path.
  t.insert(0x01020305u, {EntryKind::Owner, 0});
  REQUIRE(t.node_count() == 4);
  // Divergence at the last interior level adds one node.
  t.insert(0x01020404u, {EntryKind::Owner, 0});
  REQUIRE(t.node_count() == 5);

  t.erase(0x01020304u);
  t.erase(0x01020305u);
  REQUIRE(t.node_count() == 4);  // empty chain pruned
  t.erase(0x01020404u);
  REQUIRE(t.node_count() == 1);
  REQUIRE(t.size() == 0);
}

TEST_CASE("capacity budget rejects growth past the configured bytes")
{
  RemapTrie t;
  t.set_capacity(4 * 16, 16);  // room for the root plus one full path
  t.insert(0x01020304u, {EntryKind::Owner, 0});
  // Same path: no new nodes, accepted.
  REQUIRE_NOTHROW(t.insert(0x01020305u, {EntryKind::Owner, 0}));
  // Any new node would exceed the budget.
  REQUIRE_THROWS_AS(t.insert(0x02000000u, {EntryKind::Owner, 0}),
                    CapacityError);
  REQUIRE_THROWS_AS(t.insert(0x01030000u, {EntryKind::Owner, 0}),
                    CapacityError);
  // The failed inserts left no partial state behind.
  REQUIRE(t.node_count() == 4);
  REQUIRE(t.find(0x02000000u) == nullptr);
  REQUIRE(t.footprint_bytes() == 4 * 16);
}

TEST_CASE("insert overwrites the entry for an existing key")
{
  RemapTrie t;
  t.insert(77, {EntryKind::Pair, 1});
  t.insert(77, {EntryKind::Override, 9});
  REQUIRE(t.size() == 1);
  const TrieEntry* e = t.find(77);
  REQUIRE(e != nullptr);
  REQUIRE(e->kind == EntryKind::Override);
  REQUIRE(e->value == 9);
}
