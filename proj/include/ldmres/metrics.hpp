#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldmres/tensor.hpp"

namespace ldmres {

struct ConfusionCounts {
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }

    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

// Pixel tallies over fov==1 pixels (all pixels when fov is null). Masks are
// binary (1,1,h,w) tensors with matching dims.
ConfusionCounts confusion(const Tensor4& pred, const Tensor4& gt, const Tensor4* fov = nullptr);

struct MetricSet {
    double se = 0.0, sp = 0.0, acc = 0.0, f1 = 0.0;
    // Set when a 0/0 ratio was defined to 1.0 (e.g. specificity with no
    // negatives in the field of view).
    bool degenerate = false;
};

// Se = TP/(TP+FN), Sp = TN/(TN+FP), Acc = (TP+TN)/total,
// F1 = 2TP/(2TP+FP+FN); 0/0 ratios yield 1.0 with the degenerate flag.
MetricSet compute_metrics(const ConfusionCounts& c);

// Closed-form single-threshold AUC: 1 - (FPR + FNR)/2. Requires both classes
// present.
double auc_formula(const ConfusionCounts& c);

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

// Thresholds strictly decreasing; starts at the (0,0) anchor (threshold
// +infinity) and ends at (1,1) for threshold 0.
struct RocCurve {
    std::vector<RocPoint> points;
};

struct RocResult {
    RocCurve curve;
    double auc = 0.0;
};

// Sweeps `thresholds` uniformly spaced cutoffs descending from 1 to 0
// inclusive (rule: foreground when score >= cutoff) and integrates TPR over
// FPR with the trapezoid rule. Scores must lie in [0,1]; both classes must be
// present within the field of view.
RocResult roc_auc(const Tensor4& fg_probs, const Tensor4& gt, const Tensor4* fov = nullptr,
                  int thresholds = 256);

// CSV emitters; both write a header line.
void write_metrics_csv(const std::string& path, const std::string& dataset, const MetricSet& m,
                       double auc_roc, double auc_formula_value);
void write_roc_csv(const std::string& path, const RocCurve& curve);

}  // namespace ldmres
