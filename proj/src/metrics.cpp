#include "ldmres/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace ldmres {

ConfusionCounts confusion(const Tensor4& pred, const Tensor4& gt, const Tensor4* fov) {
    require_same_shape(pred, gt, "confusion");
    if (fov) require_same_shape(pred, *fov, "confusion fov");

    ConfusionCounts c;
    const float* pp = pred.data();
    const float* gp = gt.data();
    const float* fp = fov ? fov->data() : nullptr;
    const std::size_t n = pred.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (fp && fp[i] == 0.0f) continue;
        const bool p = pp[i] != 0.0f;
        const bool g = gp[i] != 0.0f;
        if (p && g)
            ++c.tp;
        else if (p && !g)
            ++c.fp;
        else if (!p && g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {

double ratio_or_one(std::int64_t num, std::int64_t den, bool* degenerate) {
    if (den == 0) {
        if (degenerate) *degenerate = true;
        return 1.0;
    }
    return double(num) / double(den);
}

}  // namespace

MetricSet compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0)
        throw Error("compute_metrics: no pixels counted");
    MetricSet m;
    m.se = ratio_or_one(c.tp, c.tp + c.fn, &m.degenerate);
    m.sp = ratio_or_one(c.tn, c.tn + c.fp, &m.degenerate);
    m.acc = double(c.tp + c.tn) / double(c.total());
    m.f1 = ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn, &m.degenerate);
    return m;
}

double auc_formula(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
        throw Error("auc_formula: both classes must be present");
    const double fpr = double(c.fp) / double(c.fp + c.tn);
    const double fnr = double(c.fn) / double(c.fn + c.tp);
    return 1.0 - 0.5 * (fpr + fnr);
}

RocResult roc_auc(const Tensor4& fg_probs, const Tensor4& gt, const Tensor4* fov, int thresholds) {
    require_same_shape(fg_probs, gt, "roc_auc");
    if (fov) require_same_shape(fg_probs, *fov, "roc_auc fov");
    if (thresholds < 2)
        throw Error("roc_auc: need at least 2 thresholds");

    // Gather the scored pixels once.
    std::vector<float> scores;
    std::vector<bool> labels;
    const float* sp = fg_probs.data();
    const float* gp = gt.data();
    const float* fp = fov ? fov->data() : nullptr;
    for (std::size_t i = 0; i < fg_probs.size(); ++i) {
        if (fp && fp[i] == 0.0f) continue;
        if (sp[i] < 0.0f || sp[i] > 1.0f)
            throw NumericError("roc_auc: scores must lie in [0,1]");
        scores.push_back(sp[i]);
        labels.push_back(gp[i] != 0.0f);
    }

    std::int64_t pos = 0;
    for (bool l : labels) pos += l;
    const std::int64_t neg = std::int64_t(labels.size()) - pos;
    if (pos == 0 || neg == 0)
        throw Error("roc_auc: both classes must be present");

    RocResult r;
    // Anchor so the curve always contains (0,0): nothing scores >= +inf.
    r.curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

    for (int j = 0; j < thresholds; ++j) {
        const double t = 1.0 - double(j) / double(thresholds - 1);
        std::int64_t tp = 0, fpc = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (double(scores[i]) >= t) {
                if (labels[i])
                    ++tp;
                else
                    ++fpc;
            }
        }
        r.curve.points.push_back({t, double(fpc) / double(neg), double(tp) / double(pos)});
    }

    double auc = 0.0;
    for (std::size_t i = 1; i < r.curve.points.size(); ++i) {
        const RocPoint& a = r.curve.points[i - 1];
        const RocPoint& b = r.curve.points[i];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    r.auc = auc;
    return r;
}

void write_metrics_csv(const std::string& path, const std::string& dataset, const MetricSet& m,
                       double auc_roc, double auc_formula_value) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write report: " + path);
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", dataset.c_str(), m.se,
                  m.sp, m.acc, m.f1, auc_roc, auc_formula_value);
    out << "dataset,se,sp,acc,f1,auc_roc,auc_formula\n" << line << "\n";
    if (!out)
        throw IoError("short write: " + path);
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write ROC csv: " + path);
    out << "threshold,fpr,tpr\n";
    char line[128];
    for (const RocPoint& p : curve.points) {
        std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g", p.threshold, p.fpr, p.tpr);
        out << line << "\n";
    }
    if (!out)
        throw IoError("short write: " + path);
}

}  // namespace ldmres
