#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamo/errors.hpp"

namespace streamo {

enum class LossMode { PlainCe, FixedScale, Focal };

inline std::string_view loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::PlainCe:
      return "plain_ce";
    case LossMode::FixedScale:
      return "fixed_scale";
    case LossMode::Focal:
      return "focal";
  }
  return "focal";
}

inline LossMode parse_loss_mode(std::string_view name) {
  if (name == "plain_ce") return LossMode::PlainCe;
  if (name == "fixed_scale") return LossMode::FixedScale;
  if (name == "focal") return LossMode::Focal;
  throw ConfigError("unknown loss mode \"" + std::string(name) + "\"");
}

/// Weight order throughout is {silence, standby, response}, matching
/// special_token_ids.
struct LossConfig {
  double gamma = 2.0;
  std::array<int32_t, 3> special_token_ids{0, 1, 2};
  LossMode mode = LossMode::Focal;
  std::optional<std::array<double, 3>> fixed_weights;
};

/// Row-major logits, one row of vocab_size reals per position.
struct LossBatch {
  std::vector<double> logits;
  std::vector<int32_t> targets;
  std::vector<uint8_t> mask;
  int32_t vocab_size = 0;
};

struct LossOutput {
  double total = 0.0;
  std::vector<double> per_position;
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  std::array<int64_t, 3> counts{0, 0, 0};
};

inline double focal_weight(double p, double gamma) {
  if (!(p >= 0.0 && p <= 1.0))
    throw DomainError("focal_weight: p must lie in [0,1], got " +
                      std::to_string(p));
  if (gamma < 0.0) throw DomainError("focal_weight: gamma must be >= 0");
  if (gamma == 0.0) return 1.0;
  return std::pow(1.0 - p, gamma);
}

/// Inverse-frequency balancing. Absent classes get weight 0; the 1/3
/// normalizer is fixed so present-class weights do not shift when a class
/// drops out of a batch. Division order keeps small-integer cases exact.
inline std::array<double, 3> alpha_weights(const std::array<int64_t, 3>& counts) {
  for (const auto n : counts)
    if (n < 0) throw DomainError("alpha_weights: counts must be >= 0");
  const int64_t total = counts[0] + counts[1] + counts[2];
  if (total == 0) throw AllZeroCounts("alpha_weights: no state occurrences");
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k)
    if (counts[k] > 0)
      alpha[k] = static_cast<double>(total) / (3.0 * static_cast<double>(counts[k]));
  return alpha;
}

namespace detail {

inline void check_loss_inputs(const LossBatch& batch, const LossConfig& config) {
  if (batch.vocab_size <= 0) throw ShapeMismatch("vocab_size must be > 0");
  if (batch.targets.size() != batch.mask.size())
    throw ShapeMismatch("targets and mask lengths differ");
  if (batch.logits.size() !=
      batch.targets.size() * static_cast<size_t>(batch.vocab_size))
    throw ShapeMismatch("logits size is not positions * vocab_size");
  for (const auto t : batch.targets)
    if (t < 0 || t >= batch.vocab_size)
      throw IdOutOfRange("target id " + std::to_string(t) +
                         " outside vocabulary");
  if (config.gamma < 0.0) throw DomainError("gamma must be >= 0");
  const auto& ids = config.special_token_ids;
  if (ids[0] == ids[1] || ids[0] == ids[2] || ids[1] == ids[2])
    throw DomainError("special token ids must be distinct");
  for (const auto id : ids)
    if (id < 0 || id >= batch.vocab_size)
      throw IdOutOfRange("special token id " + std::to_string(id) +
                         " outside vocabulary");
  if ((config.mode == LossMode::FixedScale) != config.fixed_weights.has_value())
    throw DomainError("fixed_weights required exactly for fixed_scale mode");
  bool any_masked = false;
  for (const auto m : batch.mask) any_masked |= (m != 0);
  if (!any_masked) throw DomainError("batch has no masked-in positions");
}

/// Index of the state class a target belongs to, or -1 for ordinary tokens.
inline int special_class(int32_t target, const std::array<int32_t, 3>& ids) {
  for (int k = 0; k < 3; ++k)
    if (target == ids[k]) return k;
  return -1;
}

inline std::array<int64_t, 3> count_states(const LossBatch& batch,
                                           const LossConfig& config) {
  std::array<int64_t, 3> counts{0, 0, 0};
  for (size_t i = 0; i < batch.targets.size(); ++i) {
    if (!batch.mask[i]) continue;
    const int k = special_class(batch.targets[i], config.special_token_ids);
    if (k >= 0) ++counts[k];
  }
  return counts;
}

/// Stabilized row statistics: log Z and the target's log-probability.
struct RowCe {
  double log_z;
  double ce;
  double p_target;
};

inline RowCe row_ce(const double* row, int32_t vocab, int32_t target) {
  double max_logit = row[0];
  for (int32_t j = 1; j < vocab; ++j) max_logit = std::max(max_logit, row[j]);
  double sum = 0.0;
  for (int32_t j = 0; j < vocab; ++j) sum += std::exp(row[j] - max_logit);
  const double log_z = max_logit + std::log(sum);
  const double ce = log_z - row[target];
  const double p_target = std::exp(row[target] - log_z);
  return {log_z, ce, p_target};
}

}  // namespace detail

inline LossOutput batch_loss(const LossBatch& batch, const LossConfig& config) {
  detail::check_loss_inputs(batch, config);
  LossOutput out;
  out.counts = detail::count_states(batch, config);
  // A batch with no state targets consumes no alpha, so balancing is skipped
  // rather than rejected.
  if (config.mode == LossMode::Focal &&
      out.counts[0] + out.counts[1] + out.counts[2] > 0)
    out.alpha = alpha_weights(out.counts);

  const size_t positions = batch.targets.size();
  out.per_position.assign(positions, 0.0);
  double sum = 0.0;
  int64_t masked = 0;
  for (size_t i = 0; i < positions; ++i) {
    if (!batch.mask[i]) continue;
    ++masked;
    const auto row = detail::row_ce(batch.logits.data() + i * batch.vocab_size,
                                    batch.vocab_size, batch.targets[i]);
    const int k = detail::special_class(batch.targets[i],
                                        config.special_token_ids);
    double loss = row.ce;
    if (k >= 0) {
      if (config.mode == LossMode::Focal) {
        loss = out.alpha[k] * focal_weight(row.p_target, config.gamma) * row.ce;
      } else if (config.mode == LossMode::FixedScale) {
        loss = (*config.fixed_weights)[k] * row.ce;
      }
    }
    out.per_position[i] = loss;
    sum += loss;
  }
  out.total = sum / static_cast<double>(masked);
  return out;
}

/// Analytic d L_total / d z. The focal factor is differentiated through, so
/// each special row scales the classic softmax-minus-onehot direction by
///   -gamma (1-p_t)^(gamma-1) p_t CE - (1-p_t)^gamma
/// with alpha and the counts held constant. Masked-out rows are zero.
inline std::vector<double> batch_loss_grad(const LossBatch& batch,
                                           const LossConfig& config) {
  detail::check_loss_inputs(batch, config);
  const auto counts = detail::count_states(batch, config);
  std::array<double, 3> alpha{0.0, 0.0, 0.0};
  if (config.mode == LossMode::Focal &&
      counts[0] + counts[1] + counts[2] > 0)
    alpha = alpha_weights(counts);

  const size_t positions = batch.targets.size();
  const int32_t vocab = batch.vocab_size;
  std::vector<double> grad(positions * static_cast<size_t>(vocab), 0.0);
  int64_t masked = 0;
  for (const auto m : batch.mask) masked += (m != 0);
  const double inv_m = 1.0 / static_cast<double>(masked);

  for (size_t i = 0; i < positions; ++i) {
    if (!batch.mask[i]) continue;
    const double* row = batch.logits.data() + i * vocab;
    double* out = grad.data() + i * vocab;
    const int32_t target = batch.targets[i];
    const auto stats = detail::row_ce(row, vocab, target);
    const int k = detail::special_class(target, config.special_token_ids);

    // scale multiplies (onehot - softmax); plain CE descends along
    // (softmax - onehot), hence -1 here.
    double scale = -1.0;
    if (k >= 0) {
      if (config.mode == LossMode::Focal) {
        const double q = 1.0 - stats.p_target;
        double bracket;
        if (config.gamma == 0.0) {
          bracket = -1.0;
        } else if (q <= 0.0) {
          bracket = 0.0;
        } else {
          bracket = -config.gamma * std::pow(q, config.gamma - 1.0) *
                        stats.p_target * stats.ce -
                    std::pow(q, config.gamma);
        }
        scale = alpha[k] * bracket;
      } else if (config.mode == LossMode::FixedScale) {
        scale = -(*config.fixed_weights)[k];
      }
    }
    for (int32_t j = 0; j < vocab; ++j) {
      const double p_j = std::exp(row[j] - stats.log_z);
      const double indicator = (j == target) ? 1.0 : 0.0;
      out[j] = scale * (indicator - p_j) * inv_m;
    }
  }
  return grad;
}

}  // namespace streamo
