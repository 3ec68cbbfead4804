#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "agglomg/common.hpp"
#include "agglomg/topology.hpp"

namespace agglomg {

/// Element -> agglomerate map.  Unassigned elements hold -1 until cleanup.
struct Agglomeration {
  std::vector<Index> element_to_agg;
  Index num_aggregates = 0;
  int level = 0;

  Index num_elements() const { return static_cast<Index>(element_to_agg.size()); }
  /// Inverse lists, elements in increasing order.
  Csr members() const;
  std::vector<Index> sizes() const;
};

enum class Algorithm { jones, kraus, rgb, node, greedy, sizebased, aspect };

inline constexpr std::array<Algorithm, 7> kAllAlgorithms{
    Algorithm::jones,  Algorithm::kraus,     Algorithm::rgb,   Algorithm::node,
    Algorithm::greedy, Algorithm::sizebased, Algorithm::aspect};

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);
/// Greedy, sizebased and aspect take a desired agglomerate size.
bool uses_size(Algorithm a);

struct CoarsenConfig {
  Algorithm algorithm = Algorithm::sizebased;
  Index desired_size = 24;
  std::uint64_t seed = 0;
  bool contiguous = true;  // sizebased only
};

/// Per-face and per-edge weights of the Jones/Kraus searches; -1 = consumed.
struct WeightState {
  std::vector<int> face;
  std::vector<int> edge;
};

struct CleanupReport {
  Index unused_attached = 0;
  Index isolated_resolved = 0;
  Index disconnected_split = 0;
  Index enclosed_merged = 0;

  bool all_zero() const {
    return unused_attached == 0 && isolated_resolved == 0 && disconnected_split == 0 &&
           enclosed_merged == 0;
  }
};

// The seven algorithms return their raw (pre-cleanup) agglomerations.

Agglomeration jones_coarsen(const Topology& topo, WeightState* final_state = nullptr);
Agglomeration kraus_coarsen(const Topology& topo, WeightState* final_state = nullptr);
Agglomeration rgb_coarsen(const Topology& topo, std::uint64_t seed);
Agglomeration node_coarsen(const Topology& topo, std::uint64_t seed);
Agglomeration greedy_coarsen(const Topology& topo, Index desired_size, std::uint64_t seed);
Agglomeration sizebased_coarsen(const Topology& topo, Index desired_size, bool contiguous,
                                std::uint64_t seed = 0);
/// Greedy start followed by single-element moves that lower
/// sum(surface^2 / volume) with sizes kept in [max(2, s/2), 2s].
/// `objective_history` receives the objective before and after every pass.
Agglomeration aspect_ratio_coarsen(const Topology& topo, Index desired_size, std::uint64_t seed,
                                   std::vector<double>* objective_history = nullptr);

/// Number of parts requested from the partitioner, floor(n / s).
Index sizebased_parts(Index num_elements, Index desired_size);

/// Repairs an agglomeration in place: attach unused elements, split
/// disconnected agglomerates, merge enclosed ones, re-densify ids.
CleanupReport cleanup(const Topology& topo, Agglomeration& agg);

/// Algorithm followed by cleanup.
Agglomeration coarsen(const Topology& topo, const CoarsenConfig& config,
                      CleanupReport* report = nullptr);

struct AgglomerateStats {
  double average_size = 0.0;
  std::map<Index, Index> size_histogram;
  double mean_aspect = 0.0;  // mean of surface^2 / volume
  Index edge_cut = 0;        // dual edges joining different agglomerates
};

AgglomerateStats agglomerate_stats(const Topology& topo, const Agglomeration& agg);

/// Sum over agglomerates of (external surface)^2 / volume.
double aspect_objective(const Topology& topo, std::span<const Index> element_to_agg,
                        Index num_aggregates);

bool is_total(const Agglomeration& agg);
bool is_dense(const Agglomeration& agg);
bool is_contiguous(const Topology& topo, const Agglomeration& agg);

}  // namespace agglomg
