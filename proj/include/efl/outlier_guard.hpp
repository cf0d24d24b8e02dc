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

#ifndef EFL_OUTLIER_GUARD_HPP_
#define EFL_OUTLIER_GUARD_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "efl/canonical.hpp"
#include "efl/fl_core.hpp"
#include "efl/session_config.hpp"

// Clone-and-sample poisoning detection. The aggregation is re-run over many
// client subsets; a client whose presence lowers validation accuracy gets a
// negative influence score.
namespace efl::guard {

struct CloneRun {
  std::uint64_t seed = 0;
  // Client ids in ascending order.
  std::vector<std::string> subset;
  fl::ParameterVector params;
  double utility = 0.0;
};

struct InfluenceScore {
  std::string client_id;
  // Mean utility of clones containing the client minus mean utility of the
  // clones without it; empty unless both groups are non-empty.
  std::optional<double> score;
  std::size_t in_count = 0;
  std::size_t out_count = 0;
};

// Error(kInvalidConfig) unless 1 <= m < |updates| and k >= 1 (random mode),
// or when cloning is switched off.
std::vector<CloneRun> CloneAggregate(std::span<const fl::ModelUpdate> updates,
                                     const fl::Dataset& validation,
                                     const SessionConfig& cfg,
                                     std::uint64_t round_seed);

std::vector<InfluenceScore> ScoreClients(std::span<const CloneRun> runs,
                                         std::span<const std::string> roster);

// Clients whose defined score is strictly below -tau.
std::set<std::string> FlagOutliers(std::span<const InfluenceScore> scores,
                                   double tau);

struct GuardReport {
  std::vector<CloneRun> runs;
  std::vector<InfluenceScore> scores;
  std::set<std::string> flagged;

  // Utilities, seeds, subsets, scores and flags; no parameters.
  Json ToJson() const;
};

// Clone, score against the clients that submitted, and flag.
GuardReport RunGuard(std::span<const fl::ModelUpdate> updates,
                     const fl::Dataset& validation, const SessionConfig& cfg,
                     std::uint64_t round_seed);

}  // namespace efl::guard

#endif  // EFL_OUTLIER_GUARD_HPP_
