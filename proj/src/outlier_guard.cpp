// Copyright 2026 The EnclaveFL Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "efl/outlier_guard.hpp"

#include <algorithm>
#include <numeric>

#include "efl/error.hpp"

namespace efl::guard {

namespace {

// Mean expressed as an offset from `ref`, so a group of identical utilities
// yields exactly that utility.
double OffsetMean(const std::vector<double>& values, double ref) {
  double acc = 0.0;
  for (double v : values) acc += v - ref;
  return ref + acc / static_cast<double>(values.size());
}

}  // namespace

std::vector<CloneRun> CloneAggregate(std::span<const fl::ModelUpdate> updates,
                                     const fl::Dataset& validation,
                                     const SessionConfig& cfg,
                                     std::uint64_t round_seed) {
  std::vector<const fl::ModelUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->client_id < b->client_id;
  });
  const std::size_t n = sorted.size();

  std::size_t k = 0;
  std::size_t m = 0;
  switch (cfg.clone_mode) {
    case CloneMode::kOff:
      throw Error(ErrorCode::kInvalidConfig, "cloning is disabled");
    case CloneMode::kRandom:
      k = cfg.clone_count;
      m = cfg.clone_subset_size;
      break;
    case CloneMode::kLeaveOneOut:
      k = n;
      m = n == 0 ? 0 : n - 1;
      break;
  }
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "clone count must be >= 1");
  if (m < 1 || m >= n) {
    throw Error(ErrorCode::kInvalidConfig,
                "clone subset size " + std::to_string(m) +
                    " must lie in [1, " + std::to_string(n) + ")");
  }

  std::vector<CloneRun> runs(k);
  std::vector<std::size_t> pool(n);
  for (std::size_t c = 0; c < k; ++c) {
    CloneRun& run = runs[c];
    run.seed = fl::DeriveSeed({cfg.rng_seed, round_seed, c});
    std::vector<std::size_t> chosen;
    if (cfg.clone_mode == CloneMode::kLeaveOneOut) {
      for (std::size_t i = 0; i < n; ++i) {
        if (i != c) chosen.push_back(i);
      }
    } else {
      fl::Rng rng(run.seed);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t i = 0; i < m; ++i) {
        std::swap(pool[i], pool[i + fl::UniformIndex(rng, n - i)]);
      }
      chosen.assign(pool.begin(), pool.begin() + static_cast<long>(m));
      std::sort(chosen.begin(), chosen.end());
    }
    std::vector<fl::ModelUpdate> members;
    for (std::size_t i : chosen) {
      members.push_back(*sorted[i]);
      run.subset.push_back(sorted[i]->client_id);
    }
    run.params = fl::Aggregate(members);
    run.utility = fl::Evaluate(run.params, validation).accuracy;
  }
  return runs;
}

std::vector<InfluenceScore> ScoreClients(std::span<const CloneRun> runs,
                                         std::span<const std::string> roster) {
  std::vector<InfluenceScore> scores;
  const double ref = runs.empty() ? 0.0 : runs.front().utility;
  for (const std::string& id : roster) {
    std::vector<double> in, out;
    for (const CloneRun& run : runs) {
      bool member =
          std::binary_search(run.subset.begin(), run.subset.end(), id);
      (member ? in : out).push_back(run.utility);
    }
    InfluenceScore s;
    s.client_id = id;
    s.in_count = in.size();
    s.out_count = out.size();
    if (!in.empty() && !out.empty()) {
      s.score = OffsetMean(in, ref) - OffsetMean(out, ref);
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

std::set<std::string> FlagOutliers(std::span<const InfluenceScore> scores,
                                   double tau) {
  if (!(tau > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "outlier threshold must be positive");
  }
  std::set<std::string> flagged;
  for (const auto& s : scores) {
    if (s.score && *s.score < -tau) flagged.insert(s.client_id);
  }
  return flagged;
}

Json GuardReport::ToJson() const {
  Json clones = Json::array();
  for (const auto& r : runs) {
    clones.push_back({{"seed", r.seed},
                      {"subset", r.subset},
                      {"utility", r.utility},
                      {"params_hash", HexEncode(r.params.Hash())}});
  }
  Json score_list = Json::array();
  for (const auto& s : scores) {
    Json entry = {{"client_id", s.client_id},
                  {"in_count", s.in_count},
                  {"out_count", s.out_count}};
    entry["score"] = s.score ? Json(*s.score) : Json(nullptr);
    score_list.push_back(std::move(entry));
  }
  return {{"clones", std::move(clones)},
          {"scores", std::move(score_list)},
          {"flagged", std::vector<std::string>(flagged.begin(), flagged.end())}};
}

GuardReport RunGuard(std::span<const fl::ModelUpdate> updates,
                     const fl::Dataset& validation, const SessionConfig& cfg,
                     std::uint64_t round_seed) {
  GuardReport report;
  report.runs = CloneAggregate(updates, validation, cfg, round_seed);
  std::vector<std::string> ids;
  for (const auto& u : updates) ids.push_back(u.client_id);
  std::sort(ids.begin(), ids.end());
  report.scores = ScoreClients(report.runs, ids);
  report.flagged = FlagOutliers(report.scores, cfg.outlier_threshold);
  return report;
}

}  // namespace efl::guard
