#ifndef CODELNET_TESTS_E2E_ORACLE_HPP
#define CODELNET_TESTS_E2E_ORACLE_HPP

// Test-only gradient oracle: a double-precision replica of the network
// forward pass. End-to-end checks compare the float engine's analytic
// gradients against central finite differences of this replica, keeping the
// oracle independent of the backward implementation under test.

#include <string>
#include <vector>

#include "codelnet/network.hpp"
#include "codelnet/ops.hpp"

namespace codelnet::testing {

struct DoubleNet {
    NetworkConfig config;
    std::vector<DTensor> params; // same order as Network::parameters
    std::vector<std::string> names;

    static DoubleNet from(const Network& net) {
        DoubleNet d;
        d.config = net.config;
        for (const auto& p : net.parameters) {
            d.params.push_back(tensor_cast<double>(p.tensor));
            d.names.push_back(p.name);
        }
        return d;
    }

    double loss(const DTensor& batch, const std::vector<int>& labels) const {
        std::size_t idx = 0;
        std::vector<DTensor> flats;
        for (const auto& branch : config.branches) {
            DTensor x = batch;
            for (const auto& stage : branch.stages) {
                const DTensor& w = params[idx++];
                const DTensor& b = params[idx++];
                x = relu_forward(conv2d_forward(x, w, b, stage.stride));
                if (stage.pool) x = maxpool2d_forward(x, *stage.pool, Stride{stage.pool->h, stage.pool->w});
            }
            flats.push_back(flatten_to_2d(x));
        }
        std::vector<const DTensor*> views;
        for (const auto& f : flats) views.push_back(&f);
        DTensor x = concat_forward(views);
        for (std::size_t j = 0; j < config.fc_sizes.size(); ++j) {
            const DTensor& w = params[idx++];
            const DTensor& b = params[idx++];
            x = relu_forward(dense_forward(x, w, b));
        }
        const DTensor& ow = params[idx++];
        const DTensor& ob = params[idx++];
        return nll_loss(softmax_forward(dense_forward(x, ow, ob)), labels);
    }
};

struct E2eCheck {
    double max_rel_error = 0.0;
};

// Analytic float gradients vs double central differences, h = 1e-5.
inline E2eCheck e2e_gradient_check(Network& net, const Tensor& batch, const std::vector<int>& labels) {
    net.zero_grads();
    ForwardTrace trace = forward_trace(net, batch);
    backward(net, trace, labels);

    DoubleNet oracle = DoubleNet::from(net);
    const DTensor dbatch = tensor_cast<double>(batch);
    const double h = 1e-5;

    double max_diff = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < oracle.params.size(); ++t) {
        for (std::size_t i = 0; i < oracle.params[t].data.size(); ++i) {
            const double saved = oracle.params[t].data[i];
            oracle.params[t].data[i] = saved + h;
            const double lp = oracle.loss(dbatch, labels);
            oracle.params[t].data[i] = saved - h;
            const double lm = oracle.loss(dbatch, labels);
            oracle.params[t].data[i] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = static_cast<double>(net.parameters[t].tensor.grad[i]);
            max_diff = std::max(max_diff, std::abs(analytic - numeric));
            scale = std::max({scale, std::abs(analytic), std::abs(numeric)});
        }
    }
    E2eCheck out;
    out.max_rel_error = scale > 0.0 ? max_diff / scale : max_diff;
    return out;
}

} // namespace codelnet::testing

#endif
