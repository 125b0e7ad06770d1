#include "codelnet/metrics.hpp"

#include <string>

#include "codelnet/errors.hpp"

namespace codelnet {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& truths) {
    if (predictions.size() != truths.size())
        throw invalid_argument_error("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                                     std::to_string(truths.size()) + " truths");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], t = truths[i];
        if ((p != 0 && p != 1) || (t != 0 && t != 1))
            throw invalid_argument_error("confusion: labels must lie in {0,1}");
        if (t == 1) {
            (p == 1 ? cm.tp : cm.fn) += 1;
        } else {
            (p == 1 ? cm.fp : cm.tn) += 1;
        }
    }
    return cm;
}

double sensitivity(const ConfusionMatrix& cm) {
    const std::int64_t denom = cm.tp + cm.fn;
    if (denom == 0) throw invalid_argument_error("sensitivity undefined: TP + FN = 0");
    return static_cast<double>(cm.tp) / static_cast<double>(denom);
}

double specificity(const ConfusionMatrix& cm) {
    const std::int64_t denom = cm.tn + cm.fp;
    if (denom == 0) throw invalid_argument_error("specificity undefined: TN + FP = 0");
    return static_cast<double>(cm.tn) / static_cast<double>(denom);
}

double accuracy(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw invalid_argument_error("accuracy undefined: empty confusion matrix");
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

Metrics evaluate_metrics(const ConfusionMatrix& cm) {
    return Metrics{sensitivity(cm), specificity(cm), accuracy(cm)};
}

} // namespace codelnet
