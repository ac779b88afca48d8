// Copyright 2026 The AudioSpa Authors
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

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "audiospa/audio.hpp"
#include "audiospa/common.hpp"

#include <json.hpp>

namespace audiospa {

// Residual floor relative to reference energy; yields the +100 dB cap when
// the estimate matches the reference.
constexpr double kSdrEpsilon = 1e-10;
constexpr double kSdrCapDb = 100.0;

/// Cyclic absolute angular error on the horizontal plane, in [0, 180].
inline double doa_mae(double predicted_deg, double true_deg) {
  if (predicted_deg < 0.0 || predicted_deg >= 360.0 || true_deg < 0.0 || true_deg >= 360.0)
    throw DomainError("doa_mae: angles must lie in [0, 360)");
  const double d = std::abs(predicted_deg - true_deg);
  return std::min(d, 360.0 - d);
}

/// Exact class-match rate as a percentage.
inline double doa_acc(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.empty() || predicted.size() != truth.size())
    throw DomainError("doa_acc: empty or mismatched lists");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == truth[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
}

namespace detail {

inline std::vector<double> flatten(const BinauralClip& x) {
  std::vector<double> v;
  v.reserve(x.left.size() + x.right.size());
  v.insert(v.end(), x.left.begin(), x.left.end());
  v.insert(v.end(), x.right.begin(), x.right.end());
  return v;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Global energy-ratio SDR over the flattened 2N vector, capped at +100 dB.
inline double sdr(const BinauralClip& estimate, const BinauralClip& reference) {
  if (estimate.left.size() != reference.left.size() || estimate.right.size() != reference.right.size())
    throw DomainError("sdr: shape mismatch");
  const std::vector<double> y = detail::flatten(reference);
  const std::vector<double> yhat = detail::flatten(estimate);
  const double ref_energy = detail::dot(y, y);
  if (ref_energy <= 0.0) throw DomainError("sdr: all-zero reference");
  double res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    res += d * d;
  }
  return power_ratio_to_db(ref_energy / std::max(res, kSdrEpsilon * ref_energy));
}

/// Scale-invariant SDR: the reference is first rescaled by the projection
/// coefficient <yhat, y>/|y|^2, so both ears scale together. Orthogonal
/// inputs return -inf.
inline double sisdr(const BinauralClip& estimate, const BinauralClip& reference) {
  if (estimate.left.size() != reference.left.size() || estimate.right.size() != reference.right.size())
    throw DomainError("sisdr: shape mismatch");
  const std::vector<double> y = detail::flatten(reference);
  const std::vector<double> yhat = detail::flatten(estimate);
  const double ref_energy = detail::dot(y, y);
  if (ref_energy <= 0.0) throw DomainError("sisdr: all-zero reference");
  const double alpha = detail::dot(yhat, y) / ref_energy;
  if (alpha == 0.0) return -std::numeric_limits<double>::infinity();
  double proj_energy = 0.0, res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = alpha * y[i];
    proj_energy += p * p;
    const double d = p - yhat[i];
    res += d * d;
  }
  return power_ratio_to_db(proj_energy / std::max(res, kSdrEpsilon * proj_energy));
}

struct EvalRecord {
  int azimuth_true = 0;
  int azimuth_pred = 0;
  double mae_deg = 0.0;
  bool correct = false;
  double sdr_db = 0.0;
  double sisdr_db = 0.0;
};

struct EvalReport {
  std::vector<EvalRecord> records;
  std::string generator_checkpoint;
  std::string localizer_checkpoint;
  std::string dataset_id;
  std::string snr_condition;

  double mean_mae() const {
    double s = 0.0;
    for (const auto& r : records) s += r.mae_deg;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
  }
  double acc_percent() const {
    std::size_t c = 0;
    for (const auto& r : records) c += r.correct ? 1 : 0;
    return records.empty() ? 0.0 : 100.0 * static_cast<double>(c) / static_cast<double>(records.size());
  }
  double mean_sdr() const {
    double s = 0.0;
    for (const auto& r : records) s += r.sdr_db;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
  }
  double mean_sisdr() const {
    double s = 0.0;
    for (const auto& r : records) s += r.sisdr_db;
    return records.empty() ? 0.0 : s / static_cast<double>(records.size());
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["metadata"] = {{"generator_checkpoint", generator_checkpoint},
                     {"localizer_checkpoint", localizer_checkpoint},
                     {"dataset_id", dataset_id},
                     {"snr_condition", snr_condition}};
    j["aggregates"] = {{"mae_deg", mean_mae()},
                       {"acc_percent", acc_percent()},
                       {"sdr_db", mean_sdr()},
                       {"sisdr_db", mean_sisdr()},
                       {"num_examples", records.size()}};
    j["records"] = nlohmann::json::array();
    for (const auto& r : records) {
      j["records"].push_back({{"azimuth_true", r.azimuth_true},
                              {"azimuth_pred", r.azimuth_pred},
                              {"mae_deg", r.mae_deg},
                              {"correct", r.correct},
                              {"sdr_db", r.sdr_db},
                              {"sisdr_db", r.sisdr_db}});
    }
    return j;
  }

  // One aggregate row, columns in the conventional MAE/ACC/SDR/SISDR order.
  std::string to_csv() const {
    std::ostringstream os;
    os << "mae_deg,acc_percent,sdr_db,sisdr_db\n";
    os << mean_mae() << "," << acc_percent() << "," << mean_sdr() << "," << mean_sisdr() << "\n";
    return os.str();
  }
};

}  // namespace audiospa
