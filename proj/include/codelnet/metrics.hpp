#ifndef CODELNET_METRICS_HPP
#define CODELNET_METRICS_HPP

#include <cstdint>
#include <vector>

namespace codelnet {

// 2x2 cross-tabulation; codeleted (label 1) is the positive class.
struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t tn = 0;
    std::int64_t fn = 0;

    std::int64_t total() const { return tp + fp + tn + fn; }
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths);

// Undefined metrics (zero denominator) raise, never return sentinels.
double sensitivity(const ConfusionMatrix& cm); // TP / (TP + FN)
double specificity(const ConfusionMatrix& cm); // TN / (TN + FP)
double accuracy(const ConfusionMatrix& cm);    // (TP + TN) / total

struct Metrics {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
};

Metrics evaluate_metrics(const ConfusionMatrix& cm);

} // namespace codelnet

#endif
