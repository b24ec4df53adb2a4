#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "licm/graph.hpp"

namespace licm::testing {

// Straight-line walker over the raw edge map: top-n by weight (ties by id),
// then the most cosine-similar candidate to the origin (ties by id).
inline std::vector<graph::NodeId> reference_walk(const graph::EdgeWeights& edges,
                                                 const std::vector<std::vector<double>>& vec,
                                                 graph::NodeId origin, std::size_t top_n,
                                                 std::size_t hops) {
  auto cos = [&](graph::NodeId a, graph::NodeId b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < vec[a].size(); ++i) {
      ab += vec[a][i] * vec[b][i];
      aa += vec[a][i] * vec[a][i];
      bb += vec[b][i] * vec[b][i];
    }
    if (aa == 0 || bb == 0) return -1.0;
    return ab / std::sqrt(aa * bb);
  };
  std::vector<graph::NodeId> chain;
  graph::NodeId v = origin;
  for (std::size_t h = 0; h < hops; ++h) {
    std::vector<std::pair<std::uint32_t, graph::NodeId>> out;
    for (const auto& [k, w] : edges)
      if (k.first == v && w > 0) out.push_back({w, k.second});
    if (out.empty()) break;
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    out.resize(std::min(out.size(), top_n));
    graph::NodeId best = out[0].second;
    double best_sim = cos(origin, best);
    for (std::size_t i = 1; i < out.size(); ++i) {
      const double s = cos(origin, out[i].second);
      if (s > best_sim || (s == best_sim && out[i].second < best)) {
        best = out[i].second;
        best_sim = s;
      }
    }
    chain.push_back(best);
    v = best;
  }
  return chain;
}

}  // namespace licm::testing
