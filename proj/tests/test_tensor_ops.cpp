#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "codelnet/ops.hpp"
#include "codelnet/rng.hpp"

using namespace codelnet;

namespace {

Tensor make(std::vector<std::int64_t> shape, std::vector<float> data) {
    return Tensor(std::move(shape), std::move(data));
}

Tensor random_tensor(Rng& rng, std::vector<std::int64_t> shape, float lo = -1.0f, float hi = 1.0f) {
    Tensor t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.range(lo, hi));
    return t;
}

} // namespace

TEST_CASE("tensor shape and data length agree") {
    CHECK_THROWS_AS(Tensor({2, 3}, {1.0f, 2.0f}), Error);
    CHECK_THROWS_AS(Tensor({0, 3}), Error);
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK_FALSE(t.has_grad());
    t.ensure_grad();
    CHECK(t.grad.size() == t.data.size());
}

TEST_CASE("conv2d hand cross-correlation") {
    Tensor input = make({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor kernel = make({1, 1, 2, 2}, {1, 0, 0, 1});
    Tensor bias = make({1}, {0});
    Tensor out = conv2d_forward(input, kernel, bias, Stride{1, 1});
    CHECK(out.shape == std::vector<std::int64_t>{1, 1, 2, 2});
    CHECK(out.data[0] == 6.0f);
    CHECK(out.data[1] == 8.0f);
    CHECK(out.data[2] == 12.0f);
    CHECK(out.data[3] == 14.0f);
}

TEST_CASE("conv2d 205-canvas with 200x200 kernel gives 6x6 maps") {
    Rng rng(11);
    Tensor input = random_tensor(rng, {1, 1, 205, 205});
    Tensor kernel = random_tensor(rng, {1, 1, 200, 200});
    Tensor bias({1});
    Tensor out = conv2d_forward(input, kernel, bias, Stride{1, 1});
    CHECK(out.shape == std::vector<std::int64_t>{1, 1, 6, 6});
}

TEST_CASE("conv2d zero kernel broadcasts the bias") {
    Rng rng(5);
    Tensor input = random_tensor(rng, {2, 3, 4, 5});
    Tensor kernel({2, 3, 2, 2});
    Tensor bias = make({2}, {3.5f, -1.25f});
    Tensor out = conv2d_forward(input, kernel, bias, Stride{1, 1});
    for (std::int64_t n = 0; n < 2; ++n) {
        for (std::int64_t f = 0; f < 2; ++f) {
            for (std::int64_t i = 0; i < 3 * 4; ++i) {
                CHECK(out.data[static_cast<std::size_t>(((n * 2 + f) * 3 * 4) + i)] == bias.data[static_cast<std::size_t>(f)]);
            }
        }
    }
}

TEST_CASE("conv2d dimension errors name the offending axes") {
    Tensor input({1, 2, 3, 3});
    Tensor kernel({1, 3, 2, 2});
    Tensor bias({1});
    CHECK_THROWS_WITH_AS(conv2d_forward(input, kernel, bias, Stride{1, 1}),
                         doctest::Contains("axis 1"), Error);
    Tensor big_kernel({1, 2, 4, 4});
    CHECK_THROWS_WITH_AS(conv2d_forward(input, big_kernel, bias, Stride{1, 1}),
                         doctest::Contains("exceeds"), Error);
}

TEST_CASE("conv2d output shape obeys the floor formula") {
    for (std::int64_t h = 1; h <= 12; ++h) {
        for (std::int64_t kh = 1; kh <= h; ++kh) {
            for (std::int64_t s = 1; s <= 3; ++s) {
                Tensor input({1, 1, h, h});
                Tensor kernel({1, 1, kh, kh});
                Tensor bias({1});
                Tensor out = conv2d_forward(input, kernel, bias, Stride{s, s});
                CHECK(out.dim(2) == (h - kh) / s + 1);
                CHECK(out.dim(3) == (h - kh) / s + 1);
            }
        }
    }
}

TEST_CASE("relu definition and backward subgradient") {
    Tensor input = make({3}, {-1, 0, 2});
    Tensor out = relu_forward(input);
    CHECK(out.data == std::vector<float>{0, 0, 2});

    Tensor all_neg = make({3}, {-5, -0.25f, -1e-3f});
    for (float v : relu_forward(all_neg).data) CHECK(v == 0.0f);

    Tensor upstream = make({3}, {1, 1, 1});
    relu_backward(input, upstream);
    CHECK(input.grad == std::vector<float>{0, 0, 1});
}

TEST_CASE("relu backward is zero wherever input <= 0") {
    Rng rng(17);
    for (int c = 0; c < 50; ++c) {
        Tensor input = random_tensor(rng, {4, 6});
        Tensor upstream = random_tensor(rng, {4, 6});
        relu_backward(input, upstream);
        for (std::size_t i = 0; i < input.data.size(); ++i) {
            if (input.data[i] <= 0.0f) CHECK(input.grad[i] == 0.0f);
        }
    }
}

TEST_CASE("maxpool2d forward examples") {
    Tensor a = make({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor pooled = maxpool2d_forward(a, Window{2, 2}, Stride{2, 2});
    CHECK(pooled.shape == std::vector<std::int64_t>{1, 1, 1, 1});
    CHECK(pooled.data[0] == 4.0f);

    Tensor b = make({1, 1, 1, 4}, {1, 3, 2, 4});
    Tensor pooled_b = maxpool2d_forward(b, Window{1, 2}, Stride{1, 2});
    CHECK(pooled_b.data == std::vector<float>{3, 4});
}

TEST_CASE("maxpool2d backward routes to the argmax") {
    Tensor a = make({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor upstream = make({1, 1, 1, 1}, {1});
    maxpool2d_backward(a, Window{2, 2}, Stride{2, 2}, upstream);
    CHECK(a.grad == std::vector<float>{0, 0, 0, 1});
}

TEST_CASE("maxpool2d window larger than input errors") {
    Tensor a({1, 1, 2, 2});
    CHECK_THROWS_AS(maxpool2d_forward(a, Window{3, 3}, Stride{1, 1}), Error);
}

TEST_CASE("maxpool2d backward preserves total gradient") {
    Rng rng(23);
    for (int c = 0; c < 50; ++c) {
        const std::int64_t h = rng.range_int(2, 7), w = rng.range_int(2, 7);
        const std::int64_t wh = rng.range_int(1, h), ww = rng.range_int(1, w);
        Tensor input = random_tensor(rng, {2, 2, h, w});
        Tensor out = maxpool2d_forward(input, Window{wh, ww}, Stride{wh, ww});
        Tensor upstream = random_tensor(rng, out.shape);
        maxpool2d_backward(input, Window{wh, ww}, Stride{wh, ww}, upstream);
        double up_sum = 0.0, in_sum = 0.0;
        for (float v : upstream.data) up_sum += v;
        for (float v : input.grad) in_sum += v;
        CHECK(in_sum == doctest::Approx(up_sum).epsilon(1e-5));
    }
}

TEST_CASE("maxpool2d ties route to the first maximum in scan order") {
    Tensor a = make({1, 1, 2, 2}, {7, 7, 7, 7});
    Tensor upstream = make({1, 1, 1, 1}, {2});
    maxpool2d_backward(a, Window{2, 2}, Stride{2, 2}, upstream);
    CHECK(a.grad == std::vector<float>{2, 0, 0, 0});
}

TEST_CASE("dense examples") {
    Tensor identity_w = make({2, 2}, {1, 0, 0, 1});
    Tensor zero_b = make({2}, {0, 0});
    Tensor x = make({1, 2}, {1, 2});
    CHECK(dense_forward(x, identity_w, zero_b).data == std::vector<float>{1, 2});

    Tensor ones_w = make({2, 1}, {1, 1});
    Tensor b3 = make({1}, {3});
    CHECK(dense_forward(x, ones_w, b3).data == std::vector<float>{6});

    Tensor zero_w({2, 3});
    Tensor b = make({3}, {0.5f, -1, 2});
    Tensor out = dense_forward(make({2, 2}, {1, 2, 3, 4}), zero_w, b);
    for (std::int64_t i = 0; i < 2; ++i) {
        CHECK(out.data[static_cast<std::size_t>(i * 3 + 0)] == 0.5f);
        CHECK(out.data[static_cast<std::size_t>(i * 3 + 1)] == -1.0f);
        CHECK(out.data[static_cast<std::size_t>(i * 3 + 2)] == 2.0f);
    }
}

TEST_CASE("dense dimension mismatch errors") {
    Tensor x({1, 3});
    Tensor w({2, 2});
    Tensor b({2});
    CHECK_THROWS_AS(dense_forward(x, w, b), Error);
}

TEST_CASE("flatten keeps the batch axis") {
    Tensor t({2, 3, 4});
    Tensor flat = flatten_to_2d(t);
    CHECK(flat.shape == std::vector<std::int64_t>{2, 12});
}

TEST_CASE("concat examples") {
    Tensor a = make({1, 1}, {1});
    Tensor b = make({1, 2}, {2, 3});
    std::vector<const Tensor*> ab{&a, &b};
    Tensor out = concat_forward(ab);
    CHECK(out.data == std::vector<float>{1, 2, 3});

    Tensor single = make({2, 2}, {1, 2, 3, 4});
    std::vector<const Tensor*> just{&single};
    Tensor same = concat_forward(just);
    CHECK(same.data == single.data);

    std::vector<Tensor*> inputs{&a, &b};
    concat_backward(inputs, make({1, 3}, {10, 20, 30}));
    CHECK(a.grad == std::vector<float>{10});
    CHECK(b.grad == std::vector<float>{20, 30});
}

TEST_CASE("concat batch mismatch errors") {
    Tensor a({1, 2});
    Tensor b({2, 2});
    std::vector<const Tensor*> ab{&a, &b};
    CHECK_THROWS_WITH_AS(concat_forward(ab), doctest::Contains("batch"), Error);
}

TEST_CASE("concat backward is the exact inverse partition") {
    Rng rng(31);
    for (int c = 0; c < 50; ++c) {
        Tensor a = random_tensor(rng, {3, static_cast<std::int64_t>(rng.range_int(1, 5))});
        Tensor b = random_tensor(rng, {3, static_cast<std::int64_t>(rng.range_int(1, 5))});
        Tensor cc = random_tensor(rng, {3, static_cast<std::int64_t>(rng.range_int(1, 5))});
        std::vector<const Tensor*> abc{&a, &b, &cc};
        Tensor out = concat_forward(abc);
        std::vector<Tensor*> inputs{&a, &b, &cc};
        concat_backward(inputs, out); // feed the concat back through
        CHECK(a.grad == a.data);
        CHECK(b.grad == b.data);
        CHECK(cc.grad == cc.data);
    }
}

TEST_CASE("softmax examples") {
    Tensor even = softmax_forward(make({1, 2}, {0, 0}));
    CHECK(even.data[0] == doctest::Approx(0.5));
    CHECK(even.data[1] == doctest::Approx(0.5));

    Tensor skew = softmax_forward(make({1, 2}, {std::log(3.0f), std::log(1.0f)}));
    CHECK(skew.data[0] == doctest::Approx(0.75));
    CHECK(skew.data[1] == doctest::Approx(0.25));

    Tensor huge = softmax_forward(make({1, 2}, {1000, 0}));
    CHECK(std::isfinite(huge.data[0]));
    CHECK(huge.data[0] == doctest::Approx(1.0));
    CHECK(huge.data[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax rejects non-finite logits") {
    CHECK_THROWS_AS(softmax_forward(make({1, 2}, {std::nanf(""), 0.0f})), Error);
}

TEST_CASE("softmax rows are positive and sum to one") {
    Rng rng(41);
    for (int c = 0; c < 100; ++c) {
        Tensor logits = random_tensor(rng, {4, 5}, -30.0f, 30.0f);
        Tensor probs = softmax_forward(logits);
        for (std::int64_t i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (std::int64_t j = 0; j < 5; ++j) {
                const float p = probs.data[static_cast<std::size_t>(i * 5 + j)];
                CHECK(p > 0.0f);
                CHECK(p <= 1.0f);
                sum += p;
            }
            CHECK(std::abs(sum - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("nll loss examples") {
    CHECK(nll_loss(make({1, 2}, {1.0f, 0.0f}), {0}) == doctest::Approx(0.0));
    CHECK(nll_loss(make({1, 2}, {0.5f, 0.5f}), {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    CHECK(nll_loss(make({2, 2}, {1.0f, 0.0f, 0.5f, 0.5f}), {0, 1}) == doctest::Approx(0.34657).epsilon(1e-4));
}

TEST_CASE("nll label out of range") {
    CHECK_THROWS_AS(nll_loss(make({1, 2}, {0.5f, 0.5f}), {2}), Error);
    CHECK_THROWS_AS(nll_loss(make({1, 2}, {0.5f, 0.5f}), {-1}), Error);
}

TEST_CASE("softmax_nll joint gradient is (p - onehot)/N") {
    Tensor probs = make({2, 2}, {0.75f, 0.25f, 0.4f, 0.6f});
    Tensor grad = softmax_nll_backward(probs, {0, 1});
    CHECK(grad.data[0] == doctest::Approx(-0.125));
    CHECK(grad.data[1] == doctest::Approx(0.125));
    CHECK(grad.data[2] == doctest::Approx(0.2));
    CHECK(grad.data[3] == doctest::Approx(-0.2));
}
