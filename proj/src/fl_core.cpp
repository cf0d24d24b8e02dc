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

#include "efl/fl_core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "efl/error.hpp"

namespace efl::fl {

ParameterVector::ParameterVector(std::vector<double> weights)
    : weights_(std::move(weights)) {}

bool ParameterVector::AllFinite() const {
  return std::all_of(weights_.begin(), weights_.end(),
                     [](double w) { return std::isfinite(w); });
}

Bytes ParameterVector::Serialize() const {
  ByteWriter w;
  w.U32(static_cast<std::uint32_t>(weights_.size()));
  for (double v : weights_) w.F64(v);
  return std::move(w).Take();
}

ParameterVector ParameterVector::Parse(ByteView bytes) {
  ByteReader r(bytes);
  std::uint32_t dim = r.U32();
  if (r.remaining() != std::size_t{dim} * 8) {
    throw Error(ErrorCode::kDecode, "parameter vector length mismatch");
  }
  std::vector<double> w(dim);
  for (auto& v : w) v = r.F64();
  ParameterVector p(std::move(w));
  if (!p.AllFinite()) {
    throw Error(ErrorCode::kDecode, "parameter vector has non-finite entries");
  }
  return p;
}

crypto::Digest ParameterVector::Hash() const {
  return crypto::Sha256(Serialize());
}

void Dataset::Add(std::span<const double> row, int label) {
  if (row.size() != features_) {
    throw Error(ErrorCode::kInvalidInput,
                "row has " + std::to_string(row.size()) + " features, expected " +
                    std::to_string(features_));
  }
  if (label != 0 && label != 1) {
    throw Error(ErrorCode::kInvalidInput, "labels must be 0 or 1");
  }
  values_.insert(values_.end(), row.begin(), row.end());
  labels_.push_back(static_cast<std::uint8_t>(label));
}

namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double ParseDouble(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(v)) {
    throw Error(ErrorCode::kDecode, "line " + std::to_string(line_no) +
                                        ": bad number '" + std::string(field) +
                                        "'");
  }
  return v;
}

void AppendDouble(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

}  // namespace

Dataset Dataset::ParseCsv(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
      pos = nl == std::string_view::npos ? text.size() : nl + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw Error(ErrorCode::kDecode, "CSV has no header");
  std::size_t columns = SplitFields(line).size();
  if (columns < 2) {
    throw Error(ErrorCode::kDecode, "CSV needs feature columns and a label");
  }
  Dataset data(columns - 1);
  std::vector<double> row(columns - 1);
  while (next_line(line)) {
    auto fields = SplitFields(line);
    if (fields.size() != columns) {
      throw Error(ErrorCode::kDecode, "line " + std::to_string(line_no) +
                                          ": expected " +
                                          std::to_string(columns) + " columns");
    }
    for (std::size_t j = 0; j + 1 < columns; ++j) {
      row[j] = ParseDouble(fields[j], line_no);
    }
    std::string_view label = fields.back();
    if (label != "0" && label != "1") {
      throw Error(ErrorCode::kDecode,
                  "line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    data.Add(row, label == "1" ? 1 : 0);
  }
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "dataset has no rows");
  return data;
}

std::string Dataset::ToCsv() const {
  std::string out;
  for (std::size_t j = 0; j < features_; ++j) {
    out += "x" + std::to_string(j) + ",";
  }
  out += "label\n";
  for (std::size_t i = 0; i < size(); ++i) {
    for (double v : row(i)) {
      AppendDouble(out, v);
      out += ',';
    }
    out += labels_[i] ? "1\n" : "0\n";
  }
  return out;
}

Dataset Dataset::Concat(const Dataset& other) const {
  if (other.features_ != features_) {
    throw Error(ErrorCode::kInvalidInput, "feature counts differ");
  }
  Dataset out = *this;
  out.values_.insert(out.values_.end(), other.values_.begin(),
                     other.values_.end());
  out.labels_.insert(out.labels_.end(), other.labels_.begin(),
                     other.labels_.end());
  return out;
}

std::uint64_t DeriveSeed(std::initializer_list<std::uint64_t> parts) {
  ByteWriter w;
  w.Raw(AsBytes("efl/seed/v1"));
  for (auto p : parts) w.U64(p);
  crypto::Digest d = crypto::Sha256(w.bytes());
  return ByteReader(d).U64();
}

std::uint64_t DeriveSeed(std::uint64_t base, std::string_view label,
                         std::uint64_t index) {
  ByteWriter w;
  w.Raw(AsBytes("efl/seed/v1"));
  w.U64(base);
  w.U32(static_cast<std::uint32_t>(label.size()));
  w.Raw(AsBytes(label));
  w.U64(index);
  crypto::Digest d = crypto::Sha256(w.bytes());
  return ByteReader(d).U64();
}

std::size_t UniformIndex(Rng& rng, std::size_t n) {
  // Rejection sampling keeps the result exactly uniform.
  const std::uint64_t bound = n;
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x > limit);
  return static_cast<std::size_t>(x % bound);
}

double UniformOpen01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double StandardNormal(Rng& rng) {
  double u1 = UniformOpen01(rng);
  double u2 = UniformOpen01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Dataset SyntheticGaussian(std::size_t rows, std::size_t features,
                          double separation, std::uint64_t seed) {
  Rng rng(seed);
  Dataset data(features);
  std::vector<double> row(features);
  for (std::size_t i = 0; i < rows; ++i) {
    int label = static_cast<int>(rng() >> 63);
    double mean = label ? separation : -separation;
    for (auto& v : row) v = mean + StandardNormal(rng);
    data.Add(row, label);
  }
  return data;
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + e^z) without overflow.
double Softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double Score(std::span<const double> w, std::span<const double> x) {
  double z = w.back();
  for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
  return z;
}

void CheckDimensions(const ParameterVector& params, const Dataset& data) {
  if (params.dimension() != data.features() + 1) {
    throw Error(ErrorCode::kInvalidInput,
                "parameter dimension " + std::to_string(params.dimension()) +
                    " does not match " + std::to_string(data.features()) +
                    " features plus bias");
  }
}

}  // namespace

LossGradient LossAndGradient(const ParameterVector& params,
                             const Dataset& data) {
  CheckDimensions(params, data);
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty dataset");
  const std::size_t d = data.features();
  LossGradient out;
  out.gradient.assign(d + 1, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto x = data.row(i);
    double z = Score(params.weights(), x);
    int y = data.label(i);
    out.loss += Softplus(z) - y * z;
    double r = Sigmoid(z) - y;
    for (std::size_t j = 0; j < d; ++j) out.gradient[j] += r * x[j];
    out.gradient[d] += r;
  }
  const double n = static_cast<double>(data.size());
  out.loss /= n;
  for (auto& g : out.gradient) g /= n;
  return out;
}

ModelUpdate ModelUpdate::Make(std::string client_id, std::uint64_t round,
                              ParameterVector params,
                              std::uint64_t num_examples) {
  ModelUpdate u;
  u.client_id = std::move(client_id);
  u.round = round;
  u.params_hash = params.Hash();
  u.params = std::move(params);
  u.num_examples = num_examples;
  return u;
}

void ModelUpdate::Validate() const {
  if (num_examples < 1) {
    throw Error(ErrorCode::kInvalidInput, "update has no examples");
  }
  if (!params.AllFinite()) {
    throw Error(ErrorCode::kInvalidInput, "update has non-finite parameters");
  }
  if (params.Hash() != params_hash) {
    throw Error(ErrorCode::kInvalidInput, "update hash does not match params");
  }
}

ModelUpdate LocalTrain(const ParameterVector& start, const Dataset& data,
                       const SessionConfig& cfg, std::uint64_t seed,
                       std::string client_id, std::uint64_t round) {
  CheckDimensions(start, data);
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty dataset");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw Error(ErrorCode::kInvalidInput, "learning rate must be non-negative");
  }
  if (cfg.batch_size < 1) {
    throw Error(ErrorCode::kInvalidInput, "batch size must be positive");
  }

  const std::size_t n = data.size();
  const std::size_t d = data.features();
  const std::size_t batch = std::min<std::size_t>(cfg.batch_size, n);
  std::vector<double> w(start.weights().begin(), start.weights().end());
  std::vector<double> grad(d + 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);

  for (std::uint32_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[UniformIndex(rng, i)]);
    }
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(n, begin + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = begin; k < end; ++k) {
        auto x = data.row(order[k]);
        double r = Sigmoid(Score(w, x)) - data.label(order[k]);
        for (std::size_t j = 0; j < d; ++j) grad[j] += r * x[j];
        grad[d] += r;
      }
      const double step = cfg.learning_rate / static_cast<double>(end - begin);
      for (std::size_t j = 0; j <= d; ++j) {
        w[j] -= step * grad[j];
        if (!std::isfinite(w[j])) {
          throw Error(ErrorCode::kNumericalDivergence,
                      "weights became non-finite in epoch " +
                          std::to_string(epoch));
        }
      }
    }
  }
  return ModelUpdate::Make(std::move(client_id), round,
                           ParameterVector(std::move(w)), n);
}

ParameterVector Aggregate(std::span<const ModelUpdate> updates) {
  if (updates.empty()) {
    throw Error(ErrorCode::kInvalidInput, "nothing to aggregate");
  }
  std::vector<const ModelUpdate*> sorted;
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const ModelUpdate* a, const ModelUpdate* b) {
              return a->client_id < b->client_id;
            });
  const std::size_t dim = sorted.front()->params.dimension();
  double total = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const ModelUpdate& u = *sorted[i];
    if (i > 0 && u.client_id == sorted[i - 1]->client_id) {
      throw Error(ErrorCode::kInvalidInput,
                  "duplicate update from client " + u.client_id);
    }
    if (u.params.dimension() != dim) {
      throw Error(ErrorCode::kInvalidInput, "update dimensions differ");
    }
    if (u.round != sorted.front()->round) {
      throw Error(ErrorCode::kInvalidInput, "updates span several rounds");
    }
    if (u.num_examples < 1) {
      throw Error(ErrorCode::kInvalidInput, "update has no examples");
    }
    total += static_cast<double>(u.num_examples);
  }

  // Accumulate offsets from the first update so identical inputs reproduce
  // it exactly whatever the weights.
  auto ref = sorted.front()->params.weights();
  std::vector<double> out(ref.begin(), ref.end());
  for (std::size_t j = 0; j < dim; ++j) {
    double acc = 0.0;
    for (const ModelUpdate* u : sorted) {
      acc += static_cast<double>(u->num_examples) * (u->params[j] - ref[j]);
    }
    out[j] += acc / total;
  }
  return ParameterVector(std::move(out));
}

Evaluation Evaluate(const ParameterVector& params, const Dataset& data) {
  CheckDimensions(params, data);
  if (data.empty()) throw Error(ErrorCode::kInvalidInput, "empty dataset");
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double z = Score(params.weights(), data.row(i));
    int y = data.label(i);
    int predicted = Sigmoid(z) >= 0.5 ? 1 : 0;
    if (predicted == y) ++correct;
    loss += Softplus(z) - y * z;
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, loss / n};
}

std::string_view ConvergenceName(Convergence c) {
  switch (c) {
    case Convergence::kContinue: return "continue";
    case Convergence::kTargetReached: return "target-reached";
    case Convergence::kPlateau: return "converged";
    case Convergence::kMaxRounds: return "max-rounds";
  }
  return "continue";
}

Convergence CheckConvergence(std::span<const RoundMetrics> history,
                             const SessionConfig& cfg) {
  if (history.empty()) return Convergence::kContinue;
  const RoundMetrics& last = history.back();
  if (last.accuracy >= cfg.target_accuracy) return Convergence::kTargetReached;
  if (cfg.patience > 0 && history.size() > cfg.patience) {
    bool flat = true;
    for (std::size_t i = history.size() - cfg.patience; i < history.size();
         ++i) {
      if (!(std::abs(history[i].loss - history[i - 1].loss) <
            cfg.convergence_epsilon)) {
        flat = false;
        break;
      }
    }
    if (flat) return Convergence::kPlateau;
  }
  if (last.round >= cfg.max_rounds) return Convergence::kMaxRounds;
  return Convergence::kContinue;
}

}  // namespace efl::fl
