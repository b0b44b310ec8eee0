// Copyright 2026 The votedet Authors
// SPDX-License-Identifier: Apache-2.0

#include "votedet/evaluation.hpp"

#include <algorithm>
#include <cctype>

namespace votedet {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

double iou_threshold_for_class(const std::string& class_name) {
  return lower(class_name) == "car" ? 0.7 : 0.5;
}

FrameMatches match_detections(const std::vector<FrameLabel>& detections,
                              const std::vector<FrameLabel>& labels,
                              const std::string& class_name, double iou_threshold,
                              const DifficultySpec& difficulty) {
  const std::string want = lower(class_name);

  // Partition labels: same-class (evaluable or ignored by difficulty) and
  // DontCare regions.
  std::vector<size_t> class_labels;
  std::vector<bool> label_ignored;
  std::vector<const FrameLabel*> dont_care;
  for (size_t i = 0; i < labels.size(); ++i) {
    const FrameLabel& l = labels[i];
    if (l.is_dont_care()) {
      dont_care.push_back(&l);
      continue;
    }
    if (lower(l.type) != want) continue;
    const bool ignored = l.truncation > difficulty.max_truncation ||
                         l.occlusion > difficulty.max_occlusion ||
                         l.bbox.height() < difficulty.min_height_px;
    class_labels.push_back(i);
    label_ignored.push_back(ignored);
  }

  FrameMatches result;
  result.num_positives = static_cast<int>(
      std::count(label_ignored.begin(), label_ignored.end(), false));
  result.outcomes.assign(detections.size(), DetOutcome::kIgnored);
  result.label_found.assign(class_labels.size(), false);

  std::vector<size_t> order(detections.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const double sa = detections[a].score.value_or(0.0);
    const double sb = detections[b].score.value_or(0.0);
    return sa > sb;
  });

  std::vector<bool> matched(class_labels.size(), false);
  for (const size_t di : order) {
    const FrameLabel& det = detections[di];
    if (lower(det.type) != want) continue;

    // Best unmatched proper label first, then best unmatched ignored label.
    int best_proper = -1, best_ignored = -1;
    double best_proper_iou = iou_threshold, best_ignored_iou = iou_threshold;
    for (size_t gi = 0; gi < class_labels.size(); ++gi) {
      if (matched[gi]) continue;
      const double iou = box2d_iou(det.bbox, labels[class_labels[gi]].bbox);
      if (!label_ignored[gi]) {
        if (iou >= best_proper_iou) {
          best_proper_iou = iou;
          best_proper = static_cast<int>(gi);
        }
      } else if (iou >= best_ignored_iou) {
        best_ignored_iou = iou;
        best_ignored = static_cast<int>(gi);
      }
    }

    if (best_proper >= 0) {
      matched[best_proper] = true;
      result.label_found[best_proper] = true;
      result.outcomes[di] = DetOutcome::kTruePositive;
      result.counted.push_back({det.score.value_or(0.0), true});
      continue;
    }
    if (best_ignored >= 0) {
      matched[best_ignored] = true;
      result.outcomes[di] = DetOutcome::kIgnored;
      continue;
    }
    // Detections too small for this difficulty are not penalized.
    if (det.bbox.height() < difficulty.min_height_px) {
      result.outcomes[di] = DetOutcome::kIgnored;
      continue;
    }
    // Detections lying on DontCare regions are not penalized either.
    bool in_dont_care = false;
    for (const FrameLabel* dc : dont_care) {
      const double inter = box2d_intersection_area(det.bbox, dc->bbox);
      if (det.bbox.area() > 0.0 && inter / det.bbox.area() > 0.5) {
        in_dont_care = true;
        break;
      }
    }
    if (in_dont_care) {
      result.outcomes[di] = DetOutcome::kIgnored;
      continue;
    }
    result.outcomes[di] = DetOutcome::kFalsePositive;
    result.counted.push_back({det.score.value_or(0.0), false});
  }
  return result;
}

APResult average_precision(const std::vector<FrameMatches>& frames) {
  APResult result;
  std::vector<std::pair<double, bool>> pool;
  for (const FrameMatches& f : frames) {
    result.num_positives += f.num_positives;
    pool.insert(pool.end(), f.counted.begin(), f.counted.end());
  }
  if (result.num_positives == 0) {
    result.ap = std::nullopt;
    return result;
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second && !b.second;
  });

  int tp = 0, fp = 0;
  result.curve.reserve(pool.size());
  for (const auto& [score, is_tp] : pool) {
    if (is_tp) {
      ++tp;
    } else {
      ++fp;
    }
    PRPoint pt;
    pt.score = score;
    pt.recall = static_cast<double>(tp) / result.num_positives;
    pt.precision = static_cast<double>(tp) / (tp + fp);
    result.curve.push_back(pt);
  }

  double ap = 0.0;
  for (int level = 0; level <= 10; ++level) {
    const double r = level / 10.0;
    double best = 0.0;
    for (const PRPoint& pt : result.curve) {
      if (pt.recall >= r) best = std::max(best, pt.precision);
    }
    ap += best;
  }
  result.ap = ap / 11.0;
  return result;
}

}  // namespace votedet
