#pragma once

#include "driftrec/data_model.hpp"

#include <string>
#include <vector>

namespace driftrec {

struct RankedJob {
  std::string job_id;
  double score = 0;
};

struct Recommendation {
  std::string user_id;
  int session_index = 0;  // index into Dataset::sessions
  std::vector<RankedJob> ranked;  // scores non-increasing, jobs distinct
};

// One entry per evaluation point: 1-based rank of the true next job inside
// the top-k list, or 0 when it is absent.
struct EvalRanks {
  std::vector<int> ranks;
  std::vector<std::size_t> user_of_point;  // parallel, user index per point
};

double hit_ratio(const std::vector<int>& ranks, int k);
double mrr(const std::vector<int>& ranks, int k);

// Global most-interacted jobs, ties to the lower job id. Returns job indices
// in rank order over the whole candidate set.
std::vector<std::size_t> popularity_ranking(const Dataset& dataset);

// Sort candidate scores into a top-k id list; equal scores break to the
// lexicographically lower job id.
std::vector<RankedJob> rank_top_k(const std::vector<std::pair<std::string, double>>& scored,
                                  int k);

}  // namespace driftrec
