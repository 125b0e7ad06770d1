#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "codelnet/gradcheck.hpp"
#include "codelnet/ops.hpp"
#include "codelnet/rng.hpp"

using namespace codelnet;

TEST_CASE("relu gradcheck on [-1, 2]") {
    std::vector<DTensor> inputs{DTensor({2}, {-1.0, 2.0})};
    DTensor upstream({2}, {1.0, 1.0});
    auto fwd = [](const std::vector<DTensor>& in) { return relu_forward(in[0]); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        relu_backward(g[0], up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad)};
    };
    CHECK(gradcheck_max_rel_error(fwd, bwd, inputs, upstream) < 1e-6);
}

TEST_CASE("conv2d gradcheck on a random 4x4 input with 2x2 kernel") {
    Rng rng(97);
    DTensor input({1, 1, 4, 4});
    for (auto& v : input.data) v = rng.range(-1.0, 1.0);
    DTensor kernel({1, 1, 2, 2});
    for (auto& v : kernel.data) v = rng.range(-1.0, 1.0);
    DTensor bias({1});
    bias.data[0] = rng.range(-0.5, 0.5);
    DTensor upstream({1, 1, 3, 3});
    for (auto& v : upstream.data) v = rng.range(-1.0, 1.0);

    auto fwd = [](const std::vector<DTensor>& in) { return conv2d_forward(in[0], in[1], in[2], Stride{1, 1}); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        conv2d_backward(g[0], g[1], g[2], Stride{1, 1}, up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad), DTensor(g[1].shape, g[1].grad),
                                    DTensor(g[2].shape, g[2].grad)};
    };
    CHECK(gradcheck_max_rel_error(fwd, bwd, {input, kernel, bias}, upstream) < 1e-4);
}

TEST_CASE("dense with zero weights matches finite differences to 1e-8") {
    Rng rng(13);
    DTensor input({2, 3});
    for (auto& v : input.data) v = rng.range(-1.0, 1.0);
    DTensor weights({3, 2}); // zeros
    DTensor bias({2});
    DTensor upstream({2, 2});
    for (auto& v : upstream.data) v = rng.range(-1.0, 1.0);

    auto fwd = [](const std::vector<DTensor>& in) { return dense_forward(in[0], in[1], in[2]); };
    auto bwd = [](const std::vector<DTensor>& in, const DTensor& up) {
        std::vector<DTensor> g = in;
        dense_backward(g[0], g[1], g[2], up);
        return std::vector<DTensor>{DTensor(g[0].shape, g[0].grad), DTensor(g[1].shape, g[1].grad),
                                    DTensor(g[2].shape, g[2].grad)};
    };
    CHECK(gradcheck_max_rel_error(fwd, bwd, {input, weights, bias}, upstream) < 1e-8);
}

TEST_CASE("gradcheck suite stays below 1e-4 over randomized instances") {
    const auto results = run_gradcheck_suite(2024, 20);
    CHECK(results.size() == gradcheck_op_names().size());
    for (const auto& r : results) {
        INFO(r.op, " max rel error ", r.max_rel_error);
        CHECK(r.max_rel_error < 1e-4);
    }
    CHECK(gradcheck_all_below(results, 1e-4));
    CHECK_FALSE(gradcheck_all_below(results, 1e-18));
}

TEST_CASE("gradcheck op filter selects one op and rejects unknown names") {
    const auto results = run_gradcheck_suite(7, 3, "conv2d");
    REQUIRE(results.size() == 1);
    CHECK(results[0].op == "conv2d");
    CHECK_THROWS_AS(run_gradcheck_suite(7, 3, "conv3d"), Error);
}
