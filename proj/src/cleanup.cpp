#include <algorithm>
#include <numeric>
#include <vector>

#include "agglomg/agglomerate.hpp"

namespace agglomg {

namespace {

struct Tally {
  Index agg;
  Index faces;
};

// Adds faces shared between `elements` and agglomerates other than `self`.
void tally_neighbours(const Topology& topo, const std::vector<Index>& owner,
                      std::span<const Index> elements, Index self, std::vector<Tally>& out) {
  out.clear();
  const auto& off = topo.dual.adjacency.offsets();
  const auto& adj = topo.dual.adjacency.values();
  for (Index e : elements) {
    for (Index i = off[e]; i < off[e + 1]; ++i) {
      const Index a = owner[adj[i]];
      if (a < 0 || a == self) continue;
      auto it = std::find_if(out.begin(), out.end(), [a](const Tally& t) { return t.agg == a; });
      if (it == out.end()) {
        out.push_back({a, topo.dual.edge_faces[i]});
      } else {
        it->faces += topo.dual.edge_faces[i];
      }
    }
  }
}

// Most shared faces, then smallest agglomerate, then lowest id; -1 if none.
Index best_fit(const std::vector<Tally>& tallies, const std::vector<Index>& size) {
  Index best = -1, best_faces = 0;
  for (const Tally& t : tallies) {
    if (best < 0 || t.faces > best_faces ||
        (t.faces == best_faces &&
         (size[t.agg] < size[best] || (size[t.agg] == size[best] && t.agg < best)))) {
      best = t.agg;
      best_faces = t.faces;
    }
  }
  return best;
}

std::vector<Index> count_sizes(const std::vector<Index>& owner, Index n) {
  std::vector<Index> size(static_cast<std::size_t>(n), 0);
  for (Index a : owner) {
    if (a >= 0) ++size[a];
  }
  return size;
}

// Items 1 and 2: attach unused elements in frontier rounds.
void attach_unused(const Topology& topo, Agglomeration& agg, CleanupReport& report) {
  auto& owner = agg.element_to_agg;
  std::vector<Index> size = count_sizes(owner, agg.num_aggregates);
  std::vector<Index> unused;
  for (Index e = 0; e < topo.num_elements; ++e) {
    if (owner[e] < 0) unused.push_back(e);
  }
  std::vector<Tally> tallies;
  std::vector<std::pair<Index, Index>> moves;
  for (int round = 0; !unused.empty(); ++round) {
    moves.clear();
    for (Index e : unused) {
      tally_neighbours(topo, owner, std::span<const Index>(&e, 1), -1, tallies);
      const Index a = best_fit(tallies, size);
      if (a >= 0) moves.emplace_back(e, a);
    }
    if (moves.empty()) {
      // Unused region with no agglomerate around it: it becomes one.
      const Index seed = unused.front();
      const Index id = agg.num_aggregates++;
      size.push_back(0);
      std::vector<Index> stack{seed};
      owner[seed] = id;
      while (!stack.empty()) {
        const Index x = stack.back();
        stack.pop_back();
        ++size[id];
        ++report.isolated_resolved;
        for (Index y : topo.dual.adjacency[x]) {
          if (owner[y] < 0) {
            owner[y] = id;
            stack.push_back(y);
          }
        }
      }
    } else {
      for (const auto& [e, a] : moves) {
        owner[e] = a;
        ++size[a];
      }
      (round == 0 ? report.unused_attached : report.isolated_resolved) +=
          static_cast<Index>(moves.size());
    }
    std::erase_if(unused, [&](Index e) { return owner[e] >= 0; });
  }
}

// Item 3: keep the largest component of each agglomerate, reattach the rest.
Index split_disconnected(const Topology& topo, Agglomeration& agg) {
  auto& owner = agg.element_to_agg;
  const Csr members = agg.members();
  std::vector<char> seen(static_cast<std::size_t>(topo.num_elements), 0);
  std::vector<std::vector<Index>> fragments;
  std::vector<std::vector<Index>> parts;
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    parts.clear();
    for (Index e : members[a]) {
      if (seen[e]) continue;
      parts.emplace_back();
      auto& part = parts.back();
      seen[e] = 1;
      part.push_back(e);
      for (std::size_t i = 0; i < part.size(); ++i) {
        for (Index y : topo.dual.adjacency[part[i]]) {
          if (!seen[y] && owner[y] == a) {
            seen[y] = 1;
            part.push_back(y);
          }
        }
      }
    }
    if (parts.size() < 2) continue;
    std::size_t keep = 0;
    for (std::size_t i = 1; i < parts.size(); ++i) {
      if (parts[i].size() > parts[keep].size()) keep = i;
    }
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i != keep) fragments.push_back(std::move(parts[i]));
    }
  }
  if (fragments.empty()) return 0;

  for (const auto& frag : fragments) {
    for (Index e : frag) owner[e] = -1;
  }
  std::stable_sort(fragments.begin(), fragments.end(),
                   [](const auto& x, const auto& y) { return x.size() < y.size(); });
  std::vector<Index> size = count_sizes(owner, agg.num_aggregates);
  std::vector<Tally> tallies;
  for (const auto& frag : fragments) {
    tally_neighbours(topo, owner, frag, -1, tallies);
    Index a = best_fit(tallies, size);
    if (a < 0) {
      a = agg.num_aggregates++;
      size.push_back(0);
    }
    for (Index e : frag) owner[e] = a;
    size[a] += static_cast<Index>(frag.size());
  }
  return static_cast<Index>(fragments.size());
}

// Item 4: an agglomerate touching no domain boundary and exactly one other
// agglomerate is merged into it.
Index merge_enclosed(const Topology& topo, Agglomeration& agg) {
  auto& owner = agg.element_to_agg;
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(agg.num_aggregates));
  for (Index e = 0; e < topo.num_elements; ++e) members[owner[e]].push_back(e);
  std::vector<Tally> tallies;
  Index merged = 0;
  for (Index a = 0; a < agg.num_aggregates; ++a) {
    if (members[a].empty()) continue;
    const bool on_boundary = std::any_of(members[a].begin(), members[a].end(), [&](Index e) {
      return std::any_of(topo.element_faces[e].begin(), topo.element_faces[e].end(),
                         [&](Index f) { return topo.faces[f].is_boundary(); });
    });
    if (on_boundary) continue;
    tally_neighbours(topo, owner, members[a], a, tallies);
    if (tallies.size() != 1) continue;
    const Index b = tallies.front().agg;
    for (Index e : members[a]) owner[e] = b;
    members[b].insert(members[b].end(), members[a].begin(), members[a].end());
    members[a].clear();
    ++merged;
  }
  return merged;
}

void densify(Agglomeration& agg) {
  std::vector<Index> remap(static_cast<std::size_t>(agg.num_aggregates), -1);
  for (Index a : agg.element_to_agg) remap[a] = 0;
  Index next = 0;
  for (Index& r : remap) {
    if (r == 0) r = next++;
  }
  for (Index& a : agg.element_to_agg) a = remap[a];
  agg.num_aggregates = next;
}

}  // namespace

CleanupReport cleanup(const Topology& topo, Agglomeration& agg) {
  if (agg.num_elements() != topo.num_elements) {
    throw Error("cleanup: agglomeration covers " + std::to_string(agg.num_elements()) +
                " elements, topology has " + std::to_string(topo.num_elements));
  }
  CleanupReport report;
  attach_unused(topo, agg, report);
  while (true) {
    const Index split = split_disconnected(topo, agg);
    const Index merged = merge_enclosed(topo, agg);
    report.disconnected_split += split;
    report.enclosed_merged += merged;
    if (split == 0 && merged == 0) break;
  }
  densify(agg);
  return report;
}

}  // namespace agglomg
