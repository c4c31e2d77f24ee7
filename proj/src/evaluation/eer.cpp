#include "keyformer/evaluation/eer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "keyformer/core/error.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace evaluation {

std::string to_string(ThresholdPolicy policy) {
  switch (policy) {
    case ThresholdPolicy::kAverage: return "average";
    case ThresholdPolicy::kGlobal: return "global";
    case ThresholdPolicy::kBoth: return "both";
  }
  return "unknown";
}

ThresholdPolicy parse_policy(const std::string& text) {
  if (text == "average") return ThresholdPolicy::kAverage;
  if (text == "global") return ThresholdPolicy::kGlobal;
  if (text == "both") return ThresholdPolicy::kBoth;
  throw ConfigError("unknown threshold policy '" + text + "' (average | global | both)");
}

EERResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) {
    throw ContractError("compute_eer needs non-empty genuine and impostor score lists");
  }
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> values;
  values.reserve(gen.size() + imp.size());
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(values));
  values.erase(std::unique(values.begin(), values.end()), values.end());

  const double n = static_cast<double>(gen.size());
  const double m = static_cast<double>(imp.size());
  std::size_t gen_at_or_below = 0;
  std::size_t imp_at_or_below = 0;
  double best_gap = INFINITY;
  EERResult best;
  auto consider = [&](double threshold) {
    const double frr = static_cast<double>(gen.size() - gen_at_or_below) / n;
    const double far = static_cast<double>(imp_at_or_below) / m;
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best.eer = (far + frr) / 2.0;
      best.threshold = threshold;
    }
  };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = values[i];
    while (gen_at_or_below < gen.size() && gen[gen_at_or_below] <= t) ++gen_at_or_below;
    while (imp_at_or_below < imp.size() && imp[imp_at_or_below] <= t) ++imp_at_or_below;
    consider(t);
    // No score lies strictly between consecutive distinct values, so the
    // midpoint sees the same counts as `t`.
    if (i + 1 < values.size()) consider(0.5 * (t + values[i + 1]));
  }
  best.policy = ThresholdPolicy::kGlobal;
  best.inverted_polarity = best.eer > 0.5;
  return best;
}

EERResult average_eer(std::span<const ScoreSet> scores) {
  if (scores.empty()) throw ContractError("average_eer needs at least one subject");
  double eer_total = 0;
  double threshold_total = 0;
  for (const ScoreSet& s : scores) {
    EERResult r;
    try {
      r = compute_eer(s.genuine, s.impostor);
    } catch (const ContractError& e) {
      throw ContractError("subject " + s.subject_id + ": " + e.what());
    }
    eer_total += r.eer;
    threshold_total += r.threshold;
  }
  EERResult out;
  out.eer = eer_total / static_cast<double>(scores.size());
  out.threshold = threshold_total / static_cast<double>(scores.size());
  out.policy = ThresholdPolicy::kAverage;
  out.inverted_polarity = out.eer > 0.5;
  return out;
}

EERResult global_eer(std::span<const ScoreSet> scores) {
  std::vector<double> genuine;
  std::vector<double> impostor;
  for (const ScoreSet& s : scores) {
    genuine.insert(genuine.end(), s.genuine.begin(), s.genuine.end());
    impostor.insert(impostor.end(), s.impostor.begin(), s.impostor.end());
  }
  EERResult out = compute_eer(genuine, impostor);
  out.policy = ThresholdPolicy::kGlobal;
  return out;
}

std::vector<DetPoint> det_curve(std::span<const double> genuine, std::span<const double> impostor,
                                std::size_t num_points) {
  if (genuine.empty() || impostor.empty()) {
    throw ContractError("det_curve needs non-empty genuine and impostor score lists");
  }
  if (num_points < 2) throw ContractError("det_curve needs num_points >= 2");
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::vector<double> values;
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(values));
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<DetPoint> full;
  full.reserve(values.size());
  for (auto it = values.rbegin(); it != values.rend(); ++it) {
    const double t = *it;
    const auto gen_le = std::upper_bound(gen.begin(), gen.end(), t) - gen.begin();
    const auto imp_le = std::upper_bound(imp.begin(), imp.end(), t) - imp.begin();
    full.push_back({t, static_cast<double>(imp_le) / static_cast<double>(imp.size()),
                    static_cast<double>(static_cast<std::ptrdiff_t>(gen.size()) - gen_le) /
                        static_cast<double>(gen.size())});
  }
  if (full.size() <= num_points) return full;
  std::vector<DetPoint> out;
  out.reserve(num_points);
  for (std::size_t i = 0; i < num_points; ++i) {
    const std::size_t idx = static_cast<std::size_t>(std::llround(
        static_cast<double>(i) * static_cast<double>(full.size() - 1) /
        static_cast<double>(num_points - 1)));
    out.push_back(full[idx]);
  }
  return out;
}

void write_det_curve(const std::filesystem::path& path, std::span<const DetPoint> curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write DET file " + path.string());
  out << "threshold,far,frr\n";
  char line[96];
  for (const DetPoint& p : curve) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n", p.threshold, p.far, p.frr);
    out << line;
  }
  if (!out) throw IoError("error writing DET file " + path.string());
}

}  // namespace evaluation
KEYFORMER_END_NAMESPACE
