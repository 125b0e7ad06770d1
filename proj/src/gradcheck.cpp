#include "codelnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "codelnet/errors.hpp"
#include "codelnet/ops.hpp"
#include "codelnet/rng.hpp"

namespace codelnet {

namespace {

double weighted_sum(const DTensor& out, const DTensor& upstream) {
    double j = 0.0;
    for (std::size_t i = 0; i < out.data.size(); ++i) j += out.data[i] * upstream.data[i];
    return j;
}

DTensor uniform_tensor(Rng& rng, std::vector<std::int64_t> shape, double lo, double hi) {
    DTensor t(std::move(shape));
    for (auto& v : t.data) v = rng.range(lo, hi);
    return t;
}

// Values pairwise separated and bounded away from zero, so an h-perturbation
// cannot cross a relu kink or flip a pooling argmax.
DTensor separated_tensor(Rng& rng, std::vector<std::int64_t> shape) {
    DTensor t(std::move(shape));
    const std::int64_t n = t.numel();
    std::vector<std::int64_t> lattice(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t centered = i - n / 2;
        lattice[static_cast<std::size_t>(i)] = centered >= 0 ? centered + 1 : centered;
    }
    for (std::int64_t i = n - 1; i > 0; --i) {
        std::swap(lattice[static_cast<std::size_t>(i)],
                  lattice[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
    for (std::int64_t i = 0; i < n; ++i) {
        t.data[static_cast<std::size_t>(i)] =
            0.07 * static_cast<double>(lattice[static_cast<std::size_t>(i)]) + rng.range(-0.01, 0.01);
    }
    return t;
}

} // namespace

double gradcheck_max_rel_error(const GradForwardFn& forward, const GradBackwardFn& backward,
                               std::vector<DTensor> inputs, const DTensor& upstream, double h) {
    const std::vector<DTensor> analytic = backward(inputs, upstream);
    double max_abs_diff = 0.0;
    double scale = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        for (std::size_t i = 0; i < inputs[t].data.size(); ++i) {
            const double saved = inputs[t].data[i];
            inputs[t].data[i] = saved + h;
            const double jp = weighted_sum(forward(inputs), upstream);
            inputs[t].data[i] = saved - h;
            const double jm = weighted_sum(forward(inputs), upstream);
            inputs[t].data[i] = saved;
            const double numeric = (jp - jm) / (2.0 * h);
            const double a = analytic[t].data[i];
            max_abs_diff = std::max(max_abs_diff, std::abs(a - numeric));
            scale = std::max({scale, std::abs(a), std::abs(numeric)});
        }
    }
    if (scale == 0.0) return max_abs_diff == 0.0 ? 0.0 : max_abs_diff;
    return max_abs_diff / scale;
}

namespace {

double check_conv2d(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 2), c = rng.range_int(1, 2);
    const std::int64_t h = rng.range_int(3, 6), w = rng.range_int(3, 6);
    const std::int64_t kh = rng.range_int(1, std::min<std::int64_t>(3, h));
    const std::int64_t kw = rng.range_int(1, std::min<std::int64_t>(3, w));
    const std::int64_t f = rng.range_int(1, 3);
    const Stride s{rng.range_int(1, 2), rng.range_int(1, 2)};
    std::vector<DTensor> inputs;
    inputs.push_back(uniform_tensor(rng, {n, c, h, w}, -1.0, 1.0));
    inputs.push_back(uniform_tensor(rng, {f, c, kh, kw}, -1.0, 1.0));
    inputs.push_back(uniform_tensor(rng, {f}, -0.5, 0.5));
    DTensor probe = uniform_tensor(rng, {n, f, conv_out_dim(h, kh, s.h), conv_out_dim(w, kw, s.w)}, -1.0, 1.0);
    auto fwd = [s](const std::vector<DTensor>& in) { return conv2d_forward(in[0], in[1], in[2], s); };
    auto bwd = [s](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        conv2d_backward(g[0], g[1], g[2], s, up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad), DTensor(g[1].shape, g[1].grad),
                                    DTensor(g[2].shape, g[2].grad)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

double check_relu(Rng& rng) {
    const std::int64_t n = rng.range_int(2, 4), d = rng.range_int(2, 8);
    std::vector<DTensor> inputs{separated_tensor(rng, {n, d})};
    DTensor probe = uniform_tensor(rng, {n, d}, -1.0, 1.0);
    auto fwd = [](const std::vector<DTensor>& in) { return relu_forward(in[0]); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        relu_backward(g[0], up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

double check_maxpool2d(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 2), c = rng.range_int(1, 2);
    const std::int64_t h = rng.range_int(2, 6), w = rng.range_int(2, 6);
    const Window win{rng.range_int(1, std::min<std::int64_t>(3, h)), rng.range_int(1, std::min<std::int64_t>(3, w))};
    const Stride s{rng.range_int(1, 2), rng.range_int(1, 2)};
    std::vector<DTensor> inputs{separated_tensor(rng, {n, c, h, w})};
    DTensor probe =
        uniform_tensor(rng, {n, c, conv_out_dim(h, win.h, s.h), conv_out_dim(w, win.w, s.w)}, -1.0, 1.0);
    auto fwd = [win, s](const std::vector<DTensor>& in) { return maxpool2d_forward(in[0], win, s); };
    auto bwd = [win, s](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        maxpool2d_backward(g[0], win, s, up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

double check_dense(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 3), d = rng.range_int(1, 6), k = rng.range_int(1, 4);
    std::vector<DTensor> inputs;
    inputs.push_back(uniform_tensor(rng, {n, d}, -1.0, 1.0));
    inputs.push_back(uniform_tensor(rng, {d, k}, -1.0, 1.0));
    inputs.push_back(uniform_tensor(rng, {k}, -0.5, 0.5));
    DTensor probe = uniform_tensor(rng, {n, k}, -1.0, 1.0);
    auto fwd = [](const std::vector<DTensor>& in) { return dense_forward(in[0], in[1], in[2]); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        dense_backward(g[0], g[1], g[2], up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad), DTensor(g[1].shape, g[1].grad),
                                    DTensor(g[2].shape, g[2].grad)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

double check_concat(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 3);
    const int parts = static_cast<int>(rng.range_int(2, 3));
    std::vector<DTensor> inputs;
    std::int64_t total = 0;
    for (int p = 0; p < parts; ++p) {
        const std::int64_t d = rng.range_int(1, 4);
        total += d;
        inputs.push_back(uniform_tensor(rng, {n, d}, -1.0, 1.0));
    }
    DTensor probe = uniform_tensor(rng, {n, total}, -1.0, 1.0);
    auto fwd = [](const std::vector<DTensor>& in) {
        std::vector<const DTensor*> views;
        for (const auto& t : in) views.push_back(&t);
        return concat_forward(views);
    };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        std::vector<DTensor*> views;
        for (auto& t : g) views.push_back(&t);
        concat_backward(views, up);
        std::vector<DTensor> out;
        for (auto& t : g) out.push_back(DTensor(t.shape, t.grad));
        return out;
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

double check_softmax(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 3), k = rng.range_int(2, 5);
    std::vector<DTensor> inputs{uniform_tensor(rng, {n, k}, -2.0, 2.0)};
    DTensor probe = uniform_tensor(rng, {n, k}, -1.0, 1.0);
    auto fwd = [](const std::vector<DTensor>& in) { return softmax_forward(in[0]); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        DTensor probs = softmax_forward(g[0]);
        softmax_backward(g[0], probs, up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

// joint softmax + NLL: scalar output, upstream weight 1
double check_softmax_nll(Rng& rng) {
    const std::int64_t n = rng.range_int(1, 3), k = rng.range_int(2, 5);
    std::vector<DTensor> inputs{uniform_tensor(rng, {n, k}, -2.0, 2.0)};
    std::vector<int> labels;
    for (std::int64_t i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
    DTensor probe({1});
    probe.data[0] = 1.0;
    auto fwd = [labels](const std::vector<DTensor>& in) {
        DTensor out({1});
        out.data[0] = nll_loss(softmax_forward(in[0]), labels);
        return out;
    };
    auto bwd = [labels](const std::vector<DTensor>& in, const DTensor&) {
        return std::vector<DTensor>{softmax_nll_backward(softmax_forward(in[0]), labels)};
    };
    return gradcheck_max_rel_error(fwd, bwd, std::move(inputs), probe);
}

} // namespace

std::vector<OpCheckResult> run_gradcheck_suite(std::uint64_t seed, int cases_per_op, const std::string& op_filter) {
    using CheckFn = double (*)(Rng&);
    static const std::vector<std::pair<std::string, CheckFn>> table = {
        {"conv2d", check_conv2d}, {"relu", check_relu},       {"maxpool2d", check_maxpool2d},
        {"dense", check_dense},   {"concat", check_concat},   {"softmax", check_softmax},
        {"softmax_nll", check_softmax_nll}};

    if (!op_filter.empty()) {
        bool known = false;
        for (const auto& [name, fn] : table) known = known || name == op_filter;
        if (!known) throw invalid_argument_error("gradcheck: unknown op '" + op_filter + "'");
    }

    std::vector<OpCheckResult> results;
    std::uint64_t op_tag = 0;
    for (const auto& [name, fn] : table) {
        ++op_tag;
        if (!op_filter.empty() && name != op_filter) continue;
        OpCheckResult r;
        r.op = name;
        r.cases = cases_per_op;
        for (int c = 0; c < cases_per_op; ++c) {
            Rng rng = rng_stream(seed, {0x6badc0deULL, op_tag, static_cast<std::uint64_t>(c)});
            r.max_rel_error = std::max(r.max_rel_error, fn(rng));
        }
        results.push_back(std::move(r));
    }
    return results;
}

bool gradcheck_all_below(const std::vector<OpCheckResult>& results, double tolerance) {
    for (const auto& r : results) {
        if (!(r.max_rel_error < tolerance)) return false;
    }
    return true;
}

} // namespace codelnet
