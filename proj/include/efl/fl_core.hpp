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

#ifndef EFL_FL_CORE_HPP_
#define EFL_FL_CORE_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "efl/bytes.hpp"
#include "efl/crypto.hpp"
#include "efl/session_config.hpp"

// Logistic-regression substrate for federated training: local mini-batch
// SGD, example-weighted averaging, evaluation and stopping rules. Every
// reduction runs in a fixed order so results are bit-reproducible.
namespace efl::fl {

// Weights for d features followed by the bias term.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> weights);
  static ParameterVector Zeros(std::size_t dimension) {
    return ParameterVector(std::vector<double>(dimension, 0.0));
  }

  std::size_t dimension() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }

  bool AllFinite() const;

  // u32be(dimension) | binary64be entries.
  Bytes Serialize() const;
  static ParameterVector Parse(ByteView bytes);
  crypto::Digest Hash() const;

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> weights_;
};

// Rows of (features, 0/1 label), stored row-major.
class Dataset {
 public:
  explicit Dataset(std::size_t features = 0) : features_(features) {}

  void Add(std::span<const double> row, int label);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t features() const { return features_; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * features_, features_};
  }
  int label(std::size_t i) const { return labels_[i]; }

  // Header row, d feature columns, then a 0/1 label column.
  static Dataset ParseCsv(std::string_view text);
  std::string ToCsv() const;

  Dataset Concat(const Dataset& other) const;

 private:
  std::size_t features_;
  std::vector<double> values_;
  std::vector<std::uint8_t> labels_;
};

// Portable deterministic randomness: std::mt19937_64 is fully specified, the
// helpers below avoid the implementation-defined standard distributions.
using Rng = std::mt19937_64;
std::uint64_t DeriveSeed(std::initializer_list<std::uint64_t> parts);
std::uint64_t DeriveSeed(std::uint64_t base, std::string_view label,
                         std::uint64_t index);
std::size_t UniformIndex(Rng& rng, std::size_t n);
double UniformOpen01(Rng& rng);
double StandardNormal(Rng& rng);

// Two classes with means +/- `separation` in every coordinate and unit
// variance; labels are fair coin flips.
Dataset SyntheticGaussian(std::size_t rows, std::size_t features,
                          double separation, std::uint64_t seed);

double Sigmoid(double z);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean logistic loss and its gradient over all rows.
LossGradient LossAndGradient(const ParameterVector& params, const Dataset& data);

struct ModelUpdate {
  std::string client_id;
  std::uint64_t round = 0;
  ParameterVector params;
  std::uint64_t num_examples = 0;
  crypto::Digest params_hash{};

  static ModelUpdate Make(std::string client_id, std::uint64_t round,
                          ParameterVector params, std::uint64_t num_examples);
  // Error(kInvalidInput) when the hash or example count is inconsistent.
  void Validate() const;
};

// local_epochs passes of mini-batch SGD; the batch order comes from `seed`.
// Error(kNumericalDivergence) on non-finite weights.
ModelUpdate LocalTrain(const ParameterVector& start, const Dataset& data,
                       const SessionConfig& cfg, std::uint64_t seed,
                       std::string client_id = {}, std::uint64_t round = 0);

// Example-weighted mean, summed in client-id order.
ParameterVector Aggregate(std::span<const ModelUpdate> updates);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

// A row is predicted positive when sigmoid(score) >= 0.5.
Evaluation Evaluate(const ParameterVector& params, const Dataset& data);

struct RoundMetrics {
  std::uint64_t round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
};

enum class Convergence { kContinue, kTargetReached, kPlateau, kMaxRounds };
std::string_view ConvergenceName(Convergence c);

Convergence CheckConvergence(std::span<const RoundMetrics> history,
                             const SessionConfig& cfg);
inline bool Converged(std::span<const RoundMetrics> history,
                      const SessionConfig& cfg) {
  return CheckConvergence(history, cfg) != Convergence::kContinue;
}

}  // namespace efl::fl

#endif  // EFL_FL_CORE_HPP_
