#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lgnh::nuseghop {

struct GbdtConfig {
  int trees = 100;
  int max_depth = 4;
  double learning_rate = 0.075;
  double l2 = 1.0;
  double min_child_hessian = 1.0;
  int max_bins = 64;

  bool operator==(const GbdtConfig&) const = default;
};

/// Binary gradient-boosted regression trees with logistic loss and
/// histogram split finding.
class GradientBoostedTrees {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    float threshold = 0.0f;     // x <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;

    bool operator==(const Node&) const = default;
  };
  using Tree = std::vector<Node>;

  /// `x` is row-major, rows x features.
  void fit(std::span<const float> x, std::span<const std::uint8_t> labels, int features, const GbdtConfig& cfg);

  double predict_margin(const float* row) const;
  double predict_proba(const float* row) const;

  int feature_count() const { return features_; }
  double base_margin() const { return base_margin_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Rebuilds a fitted ensemble, e.g. after deserialization.
  static GradientBoostedTrees from_parts(int features, double base_margin, std::vector<Tree> trees);

  bool operator==(const GradientBoostedTrees&) const = default;

 private:
  int features_ = 0;
  double base_margin_ = 0.0;
  std::vector<Tree> trees_;
};

}  // namespace lgnh::nuseghop
