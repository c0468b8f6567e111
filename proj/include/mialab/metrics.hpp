#pragma once

#include <map>
#include <string>
#include <vector>

#include "mialab/errors.hpp"

namespace mia {

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

/// Attack metrics at a fixed threshold plus the full ROC sweep.
/// Positive means "predicted member".
struct EvalResult {
    double attack_accuracy = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double auc = 0.0;
    std::vector<RocPoint> roc_points;
    std::map<std::size_t, double> per_class_accuracy; // filled when labels given
};

/// Accuracy/TPR/FPR at `threshold` (score >= threshold predicts member)
/// and an ROC swept over thresholds at midpoints between consecutive
/// distinct scores plus the +/- infinity endpoints.
EvalResult evaluate(const std::vector<double>& scores, const std::vector<int>& membership,
                    double threshold = 0.5);

/// evaluate() plus per-class accuracy for the given class labels.
EvalResult evaluate_per_class(const std::vector<double>& scores,
                              const std::vector<int>& membership,
                              const std::vector<std::size_t>& class_labels,
                              double threshold = 0.5);

/// Per-group gradient-norm statistics over training epochs.
struct GradNormGroup {
    std::string group; // "member" or "nonmember"
    std::size_t epoch = 0;
    std::vector<double> values;
};

struct GradNormStats {
    std::string group;
    std::size_t epoch = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<std::size_t> histogram;
    double hist_lo = 0.0;
    double hist_hi = 0.0;
    bool separated = false; // member/non-member means differ by > pooled std / 2
};

/// Mean, std and a fixed-bin histogram per group; bins span the global
/// value range. The separation flag compares the member and non-member
/// groups of the same epoch.
std::vector<GradNormStats> grad_norm_report(const std::vector<GradNormGroup>& groups,
                                            std::size_t bins = 20);

void write_grad_norm_csv(const std::vector<GradNormStats>& stats, const std::string& path);

/// Scores with optional ground truth as CSV (example id, score, member).
void write_scores_csv(const std::vector<double>& scores, const std::vector<int>& membership,
                      const std::string& path);

} // namespace mia
