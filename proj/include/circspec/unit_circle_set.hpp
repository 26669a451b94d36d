#pragma once

#include "circspec/error.hpp"
#include "circspec/types.hpp"

#include <algorithm>
#include <limits>
#include <utility>
#include <vector>

namespace circspec {

/// Finite subset of the unit circle, stored as angles in [0, 2pi).
///
/// Membership is metric: theta belongs to the set when it is closer than
/// angular_resolution to a listed angle. Listed angles are pairwise at least
/// angular_resolution apart.
class UnitCircleSet {
 public:
  struct Entry {
    double angle;
    double score;
  };

  explicit UnitCircleSet(double angular_resolution = kTwoPi / 720.0) : resolution_(angular_resolution) {
    require(resolution_ > 0.0, ErrorCode::InvalidArgument, "angular_resolution must be positive");
  }

  /// Builds the set from raw candidates. Candidates closer than the
  /// resolution collapse into one entry, the one with the highest score.
  static UnitCircleSet from_candidates(std::vector<Entry> candidates, double angular_resolution) {
    UnitCircleSet set(angular_resolution);
    for (auto& c : candidates) c.angle = wrap_angle(c.angle);
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Entry& a, const Entry& b) { return a.angle < b.angle; });

    std::vector<std::vector<Entry>> clusters;
    for (const auto& c : candidates) {
      if (!clusters.empty() && c.angle - clusters.back().back().angle < angular_resolution)
        clusters.back().push_back(c);
      else
        clusters.push_back({c});
    }
    if (clusters.size() > 1 &&
        clusters.front().front().angle + kTwoPi - clusters.back().back().angle < angular_resolution) {
      clusters.front().insert(clusters.front().end(), clusters.back().begin(), clusters.back().end());
      clusters.pop_back();
    }
    for (const auto& cl : clusters) {
      const Entry* best = &cl.front();
      for (const auto& e : cl)
        if (e.score > best->score) best = &e;
      set.entries_.push_back(*best);
    }
    std::sort(set.entries_.begin(), set.entries_.end(),
              [](const Entry& a, const Entry& b) { return a.angle < b.angle; });
    return set;
  }

  double angular_resolution() const { return resolution_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  std::vector<double> angles() const {
    std::vector<double> out;
    for (const auto& e : entries_) out.push_back(e.angle);
    return out;
  }

  std::vector<double> scores() const {
    std::vector<double> out;
    for (const auto& e : entries_) out.push_back(e.score);
    return out;
  }

  /// Distance from theta to the nearest listed angle (infinity when empty).
  double distance_to(double theta) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : entries_) best = std::min(best, circular_distance(theta, e.angle));
    return best;
  }

  bool contains(double theta) const { return distance_to(theta) < resolution_; }

  /// Every angle of *this is a member of other, using other's resolution.
  bool subset_of(const UnitCircleSet& other) const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [&](const Entry& e) { return other.contains(e.angle); });
  }

  std::vector<double> excess_over(const UnitCircleSet& other) const {
    std::vector<double> out;
    for (const auto& e : entries_)
      if (!other.contains(e.angle)) out.push_back(e.angle);
    return out;
  }

 private:
  double resolution_;
  std::vector<Entry> entries_;
};

/// Hausdorff distance between two angle sets under the circular metric.
/// Two empty sets are at distance 0; one empty set is at infinite distance.
inline double hausdorff_angular_distance(const UnitCircleSet& a, const UnitCircleSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  double h = 0.0;
  for (const auto& e : a.entries()) h = std::max(h, b.distance_to(e.angle));
  for (const auto& e : b.entries()) h = std::max(h, a.distance_to(e.angle));
  return h;
}

}  // namespace circspec
