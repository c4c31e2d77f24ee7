#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "keyformer/evaluation/scores.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

enum class ThresholdPolicy { kAverage, kGlobal, kBoth };

std::string to_string(ThresholdPolicy policy);
/// Accepts "average", "global", "both"; throws ConfigError otherwise.
ThresholdPolicy parse_policy(const std::string& text);

/// Equal error rate with distance semantics: a probe is accepted iff its
/// score <= threshold.
struct EERResult {
  double eer = 0;
  double threshold = 0;
  ThresholdPolicy policy = ThresholdPolicy::kGlobal;
  std::size_t enrolment = 0;
  /// Set when the EER exceeds 0.5, i.e. genuine scores tend to be larger than
  /// impostor scores.
  bool inverted_polarity = false;
};

/// Sweeps every distinct score and every midpoint between consecutive
/// distinct scores, with FRR(t) = #{genuine > t}/n and FAR(t) =
/// #{impostor <= t}/m. Picks the threshold minimising |FAR - FRR| (lowest
/// threshold on ties) and reports (FAR + FRR) / 2 there.
EERResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);

/// Mean of per-subject EERs; `threshold` is the mean per-subject threshold.
EERResult average_eer(std::span<const ScoreSet> scores);
/// EER of the pooled genuine and impostor scores.
EERResult global_eer(std::span<const ScoreSet> scores);

struct DetPoint {
  double threshold;
  double far;
  double frr;
};

/// FAR/FRR at every distinct score, ordered by decreasing threshold (so FAR is
/// non-increasing and FRR non-decreasing along the curve), subsampled to at
/// most `num_points` points keeping both ends.
std::vector<DetPoint> det_curve(std::span<const double> genuine, std::span<const double> impostor,
                                std::size_t num_points = 1000);

void write_det_curve(const std::filesystem::path& path, std::span<const DetPoint> curve);

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
