#include "driftrec/recsys.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>

namespace driftrec {

double hit_ratio(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) throw std::invalid_argument("hit_ratio: empty evaluation set");
  std::size_t hits = 0;
  for (int r : ranks) {
    if (r >= 1 && r <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr(const std::vector<int>& ranks, int k) {
  if (ranks.empty()) throw std::invalid_argument("mrr: empty evaluation set");
  double sum = 0;
  for (int r : ranks) {
    if (r >= 1 && r <= k) sum += 1.0 / static_cast<double>(r);
  }
  return sum / static_cast<double>(ranks.size());
}

std::vector<std::size_t> popularity_ranking(const Dataset& dataset) {
  std::vector<std::size_t> counts(dataset.jobs.size(), 0);
  for (const auto& it : dataset.interactions) {
    counts[dataset.job_index.at(it.job_id)] += 1;
  }
  std::vector<std::size_t> order(dataset.jobs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counts[a] != counts[b]) return counts[a] > counts[b];
    return dataset.jobs[a].id < dataset.jobs[b].id;
  });
  return order;
}

std::vector<RankedJob> rank_top_k(const std::vector<std::pair<std::string, double>>& scored,
                                  int k) {
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].second != scored[b].second) return scored[a].second > scored[b].second;
    return scored[a].first < scored[b].first;
  });
  std::vector<RankedJob> top;
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  top.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    top.push_back({scored[order[i]].first, scored[order[i]].second});
  }
  return top;
}

}  // namespace driftrec
