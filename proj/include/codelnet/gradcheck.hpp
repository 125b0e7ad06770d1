#ifndef CODELNET_GRADCHECK_HPP
#define CODELNET_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "codelnet/tensor.hpp"

namespace codelnet {

// Verification of analytic gradients against central finite differences,
// evaluated in 64-bit so algorithmic error is separated from roundoff.
//
// An op under test maps a list of input tensors to one output tensor. The
// output is contracted with a fixed weighting R to a scalar J = sum(R * f(x));
// the analytic path computes dJ/dx via the op's backward, the numeric path
// uses (J(x+h) - J(x-h)) / 2h per element.

using GradForwardFn = std::function<DTensor(const std::vector<DTensor>&)>;
using GradBackwardFn =
    std::function<std::vector<DTensor>(const std::vector<DTensor>&, const DTensor& upstream)>;

// Max |analytic - numeric| over all elements of all inputs, normalized by the
// largest gradient magnitude seen (relative-to-scale infinity norm).
double gradcheck_max_rel_error(const GradForwardFn& forward, const GradBackwardFn& backward,
                               std::vector<DTensor> inputs, const DTensor& upstream, double h = 1e-3);

struct OpCheckResult {
    std::string op;
    int cases = 0;
    double max_rel_error = 0.0;
};

inline const std::vector<std::string>& gradcheck_op_names() {
    static const std::vector<std::string> names = {"conv2d","relu", "maxpool2d", "dense",
                                                   "concat", "softmax", "softmax_nll"};
    return names;
}

// Runs `cases_per_op` randomized instances of every layer op (or the single
// op named by `op_filter`). Throws on an unknown filter.
std::vector<OpCheckResult> run_gradcheck_suite(std::uint64_t seed, int cases_per_op,
                                               const std::string& op_filter = "");

bool gradcheck_all_below(const std::vector<OpCheckResult>& results, double tolerance);

} // namespace codelnet

#endif
