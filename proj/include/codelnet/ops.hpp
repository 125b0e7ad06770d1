#ifndef CODELNET_OPS_HPP
#define CODELNET_OPS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "codelnet/errors.hpp"
#include "codelnet/parallel.hpp"
#include "codelnet/tensor.hpp"

namespace codelnet {

struct Stride {
    std::int64_t h = 1;
    std::int64_t w = 1;
};

struct Window {
    std::int64_t h = 1;
    std::int64_t w = 1;
};

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t s) {
    return (in - k) / s + 1;
}

namespace detail {

// C[m x n] (+)= A[m x k] * B[k x n], row-major. Rows of C are split across
// lanes; the k accumulation runs in a fixed order per element, so the result
// is independent of the worker count.
template <typename T>
void gemm(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            T* crow = c + i * n;
            if (!accumulate) std::fill(crow, crow + n, T(0));
            const T* arow = a + i * k;
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const T av = arow[kk];
                const T* brow = b + kk * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[m x n] (+)= A^T * B with A[k x m], B[k x n]
template <typename T>
void gemm_at(const T* a, const T* b, T* c, std::int64_t k, std::int64_t m, std::int64_t n, bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            T* crow = c + i * n;
            if (!accumulate) std::fill(crow, crow + n, T(0));
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const T av = a[kk * m + i];
                const T* brow = b + kk * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// C[m x n] (+)= A * B^T with A[m x k], B[n x k]. The dot products run over
// eight fixed accumulator lanes reduced in a fixed order, so results stay
// deterministic while the loop vectorizes.
template <typename T>
void gemm_bt(const T* a, const T* b, T* c, std::int64_t m, std::int64_t k, std::int64_t n, bool accumulate) {
    parallel_for(m, [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            const T* arow = a + i * k;
            T* crow = c + i * n;
            for (std::int64_t j = 0; j < n; ++j) {
                const T* brow = b + j * k;
                T lanes[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
                std::int64_t kk = 0;
                for (; kk + 8 <= k; kk += 8) {
                    for (int l = 0; l < 8; ++l) lanes[l] += arow[kk + l] * brow[kk + l];
                }
                T tail = T(0);
                for (; kk < k; ++kk) tail += arow[kk] * brow[kk];
                const T dot = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                              ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7])) + tail;
                crow[j] = accumulate ? crow[j] + dot : dot;
            }
        }
    });
}

// col[(c*kh+ki)*kw+kj, oh*wo+ow] = x[c, oh*sh+ki, ow*sw+kj]
template <typename T>
void im2col(const T* x, T* col, std::int64_t c_in, std::int64_t h, std::int64_t w,
            std::int64_t kh, std::int64_t kw, std::int64_t sh, std::int64_t sw,
            std::int64_t ho, std::int64_t wo) {
    const std::int64_t cols = ho * wo;
    for (std::int64_t c = 0; c < c_in; ++c) {
        for (std::int64_t ki = 0; ki < kh; ++ki) {
            for (std::int64_t kj = 0; kj < kw; ++kj) {
                T* dst = col + ((c * kh + ki) * kw + kj) * cols;
                const T* src = x + c * h * w + ki * w + kj;
                for (std::int64_t oh = 0; oh < ho; ++oh) {
                    const T* s = src + oh * sh * w;
                    for (std::int64_t ow = 0; ow < wo; ++ow) dst[ow] = s[ow * sw];
                    dst += wo;
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, T* x, std::int64_t c_in, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t sh, std::int64_t sw,
                std::int64_t ho, std::int64_t wo) {
    const std::int64_t cols = ho * wo;
    for (std::int64_t c = 0; c < c_in; ++c) {
        for (std::int64_t ki = 0; ki < kh; ++ki) {
            for (std::int64_t kj = 0; kj < kw; ++kj) {
                const T* src = col + ((c * kh + ki) * kw + kj) * cols;
                T* dst = x + c * h * w + ki * w + kj;
                for (std::int64_t oh = 0; oh < ho; ++oh) {
                    T* d = dst + oh * sh * w;
                    for (std::int64_t ow = 0; ow < wo; ++ow) d[ow * sw] += src[ow];
                    src += wo;
                }
            }
        }
    }
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw dimension_error(msg);
}

} // namespace detail

// ---------------------------------------------------------------------------
// conv2d: valid cross-correlation, no padding, no kernel flip

template <typename T>
void conv2d_check(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& bias, Stride stride) {
    using detail::require;
    require(input.rank() == 4, "conv2d: input must be rank 4 [N,C,H,W], got " + Tensor::shape_string(input.shape));
    require(kernel.rank() == 4, "conv2d: kernel must be rank 4 [F,C,kh,kw], got " + Tensor::shape_string(kernel.shape));
    require(bias.rank() == 1, "conv2d: bias must be rank 1 [F]");
    require(input.dim(1) == kernel.dim(1),
            "conv2d: input channels (axis 1) " + std::to_string(input.dim(1)) + " != kernel channels (axis 1) " +
                std::to_string(kernel.dim(1)));
    require(bias.dim(0) == kernel.dim(0),
            "conv2d: bias length " + std::to_string(bias.dim(0)) + " != filter count " + std::to_string(kernel.dim(0)));
    require(kernel.dim(2) <= input.dim(2) && kernel.dim(3) <= input.dim(3),
            "conv2d: kernel " + std::to_string(kernel.dim(2)) + "x" + std::to_string(kernel.dim(3)) +
                " exceeds input " + std::to_string(input.dim(2)) + "x" + std::to_string(input.dim(3)) +
                " (axes 2,3)");
    require(stride.h >= 1 && stride.w >= 1, "conv2d: stride must be positive");
}

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel, const TensorT<T>& bias, Stride stride) {
    conv2d_check(input, kernel, bias, stride);
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const std::int64_t ho = conv_out_dim(h, kh, stride.h);
    const std::int64_t wo = conv_out_dim(w, kw, stride.w);
    const std::int64_t ckk = c * kh * kw;
    const std::int64_t cols = ho * wo;

    TensorT<T> out({n, f, ho, wo});
    parallel_for(n, [&](std::int64_t n0, std::int64_t n1) {
        std::vector<T> col(static_cast<std::size_t>(ckk * cols));
        for (std::int64_t i = n0; i < n1; ++i) {
            detail::im2col(input.data.data() + i * c * h * w, col.data(), c, h, w, kh, kw, stride.h, stride.w, ho, wo);
            T* y = out.data.data() + i * f * cols;
            detail::gemm(kernel.data.data(), col.data(), y, f, ckk, cols, false);
            for (std::int64_t fi = 0; fi < f; ++fi) {
                const T b = bias.data[static_cast<std::size_t>(fi)];
                T* row = y + fi * cols;
                for (std::int64_t j = 0; j < cols; ++j) row[j] += b;
            }
        }
    });
    return out;
}

// Accumulates into input.grad (optional), kernel.grad and bias.grad.
template <typename T>
void conv2d_backward(TensorT<T>& input, TensorT<T>& kernel, TensorT<T>& bias, Stride stride,
                     const TensorT<T>& grad_out, bool compute_input_grad = true) {
    conv2d_check(input, kernel, bias, stride);
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t f = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    const std::int64_t ho = conv_out_dim(h, kh, stride.h);
    const std::int64_t wo = conv_out_dim(w, kw, stride.w);
    detail::require(grad_out.shape == std::vector<std::int64_t>({n, f, ho, wo}),
                    "conv2d backward: upstream gradient shape " + Tensor::shape_string(grad_out.shape) +
                        " does not match output shape [" + std::to_string(n) + "," + std::to_string(f) + "," +
                        std::to_string(ho) + "," + std::to_string(wo) + "]");
    const std::int64_t ckk = c * kh * kw;
    const std::int64_t cols = ho * wo;

    kernel.ensure_grad();
    bias.ensure_grad();
    if (compute_input_grad) input.ensure_grad();

    std::vector<T> col(static_cast<std::size_t>(ckk * cols));
    std::vector<T> dcol(compute_input_grad ? static_cast<std::size_t>(ckk * cols) : 0);

    // samples run serially so kernel/bias gradients accumulate in a fixed order
    for (std::int64_t i = 0; i < n; ++i) {
        const T* x = input.data.data() + i * c * h * w;
        const T* dy = grad_out.data.data() + i * f * cols;
        detail::im2col(x, col.data(), c, h, w, kh, kw, stride.h, stride.w, ho, wo);
        detail::gemm_bt(dy, col.data(), kernel.grad.data(), f, cols, ckk, true);
        for (std::int64_t fi = 0; fi < f; ++fi) {
            const T* row = dy + fi * cols;
            T acc = T(0);
            for (std::int64_t j = 0; j < cols; ++j) acc += row[j];
            bias.grad[static_cast<std::size_t>(fi)] += acc;
        }
        if (compute_input_grad) {
            detail::gemm_at(kernel.data.data(), dy, dcol.data(), f, ckk, cols, false);
            detail::col2im_add(dcol.data(), input.grad.data() + i * c * h * w, c, h, w, kh, kw, stride.h, stride.w,
                               ho, wo);
        }
    }
}

// ---------------------------------------------------------------------------
// relu

template <typename T>
TensorT<T> relu_forward(const TensorT<T>& input) {
    TensorT<T> out;
    out.shape = input.shape;
    out.data.resize(input.data.size());
    for (std::size_t i = 0; i < input.data.size(); ++i) out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    return out;
}

// gradient at exactly 0 is 0
template <typename T>
void relu_backward(TensorT<T>& input, const TensorT<T>& grad_out) {
    detail::require(grad_out.shape == input.shape, "relu backward: gradient shape mismatch");
    input.ensure_grad();
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        if (input.data[i] > T(0)) input.grad[i] += grad_out.data[i];
    }
}

// ---------------------------------------------------------------------------
// maxpool2d

template <typename T>
void maxpool2d_check(const TensorT<T>& input, Window window, Stride stride) {
    using detail::require;
    require(input.rank() == 4, "maxpool2d: input must be rank 4 [N,C,H,W]");
    require(window.h >= 1 && window.w >= 1 && stride.h >= 1 && stride.w >= 1,
            "maxpool2d: window and stride must be positive");
    require(window.h <= input.dim(2) && window.w <= input.dim(3),
            "maxpool2d: window " + std::to_string(window.h) + "x" + std::to_string(window.w) + " exceeds input " +
                std::to_string(input.dim(2)) + "x" + std::to_string(input.dim(3)) + " (axes 2,3)");
}

template <typename T>
TensorT<T> maxpool2d_forward(const TensorT<T>& input, Window window, Stride stride) {
    maxpool2d_check(input, window, stride);
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t ho = conv_out_dim(h, window.h, stride.h);
    const std::int64_t wo = conv_out_dim(w, window.w, stride.w);
    TensorT<T> out({n, c, ho, wo});
    const std::int64_t planes = n * c;
    parallel_for(planes, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const T* x = input.data.data() + p * h * w;
            T* y = out.data.data() + p * ho * wo;
            for (std::int64_t oh = 0; oh < ho; ++oh) {
                for (std::int64_t ow = 0; ow < wo; ++ow) {
                    const std::int64_t hs = oh * stride.h, ws = ow * stride.w;
                    T best = x[hs * w + ws];
                    for (std::int64_t ki = 0; ki < window.h; ++ki) {
                        for (std::int64_t kj = 0; kj < window.w; ++kj) {
                            const T v = x[(hs + ki) * w + ws + kj];
                            if (v > best) best = v;
                        }
                    }
                    y[oh * wo + ow] = best;
                }
            }
        }
    });
    return out;
}

// Routes each output gradient to the first maximum of its window in row-major
// scan order (recomputed from the forward input).
template <typename T>
void maxpool2d_backward(TensorT<T>& input, Window window, Stride stride, const TensorT<T>& grad_out) {
    maxpool2d_check(input, window, stride);
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t ho = conv_out_dim(h, window.h, stride.h);
    const std::int64_t wo = conv_out_dim(w, window.w, stride.w);
    detail::require(grad_out.shape == std::vector<std::int64_t>({n, c, ho, wo}),
                    "maxpool2d backward: upstream gradient shape mismatch");
    input.ensure_grad();
    const std::int64_t planes = n * c;
    parallel_for(planes, [&](std::int64_t p0, std::int64_t p1) {
        for (std::int64_t p = p0; p < p1; ++p) {
            const T* x = input.data.data() + p * h * w;
            const T* dy = grad_out.data.data() + p * ho * wo;
            T* dx = input.grad.data() + p * h * w;
            for (std::int64_t oh = 0; oh < ho; ++oh) {
                for (std::int64_t ow = 0; ow < wo; ++ow) {
                    const std::int64_t hs = oh * stride.h, ws = ow * stride.w;
                    std::int64_t best_ix = hs * w + ws;
                    T best = x[best_ix];
                    for (std::int64_t ki = 0; ki < window.h; ++ki) {
                        for (std::int64_t kj = 0; kj < window.w; ++kj) {
                            const std::int64_t ix = (hs + ki) * w + ws + kj;
                            if (x[ix] > best) {
                                best = x[ix];
                                best_ix = ix;
                            }
                        }
                    }
                    dx[best_ix] += dy[oh * wo + ow];
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// dense (affine)

template <typename T>
TensorT<T> flatten_to_2d(const TensorT<T>& t) {
    detail::require(t.rank() >= 2, "flatten: tensor must have a batch axis");
    std::int64_t n = t.dim(0);
    return t.reshaped({n, t.numel() / n});
}

template <typename T>
void dense_check(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias) {
    using detail::require;
    require(input.rank() == 2, "dense: input must be rank 2 [N,D] (flatten first)");
    require(weights.rank() == 2, "dense: weights must be rank 2 [D,K]");
    require(bias.rank() == 1, "dense: bias must be rank 1 [K]");
    require(input.dim(1) == weights.dim(0), "dense: input features " + std::to_string(input.dim(1)) +
                                                " != weight rows " + std::to_string(weights.dim(0)));
    require(bias.dim(0) == weights.dim(1), "dense: bias length " + std::to_string(bias.dim(0)) +
                                               " != weight cols " + std::to_string(weights.dim(1)));
}

template <typename T>
TensorT<T> dense_forward(const TensorT<T>& input, const TensorT<T>& weights, const TensorT<T>& bias) {
    dense_check(input, weights, bias);
    const std::int64_t n = input.dim(0), d = input.dim(1), k = weights.dim(1);
    TensorT<T> out({n, k});
    detail::gemm(input.data.data(), weights.data.data(), out.data.data(), n, d, k, false);
    for (std::int64_t i = 0; i < n; ++i) {
        T* row = out.data.data() + i * k;
        for (std::int64_t j = 0; j < k; ++j) row[j] += bias.data[static_cast<std::size_t>(j)];
    }
    return out;
}

template <typename T>
void dense_backward(TensorT<T>& input, TensorT<T>& weights, TensorT<T>& bias, const TensorT<T>& grad_out,
                    bool compute_input_grad = true) {
    dense_check(input, weights, bias);
    const std::int64_t n = input.dim(0), d = input.dim(1), k = weights.dim(1);
    detail::require(grad_out.shape == std::vector<std::int64_t>({n, k}),
                    "dense backward: upstream gradient shape mismatch");
    weights.ensure_grad();
    bias.ensure_grad();
    // dW += X^T * dY
    detail::gemm_at(input.data.data(), grad_out.data.data(), weights.grad.data(), n, d, k, true);
    for (std::int64_t j = 0; j < k; ++j) {
        T acc = T(0);
        for (std::int64_t i = 0; i < n; ++i) acc += grad_out.data[static_cast<std::size_t>(i * k + j)];
        bias.grad[static_cast<std::size_t>(j)] += acc;
    }
    if (compute_input_grad) {
        input.ensure_grad();
        // dX += dY * W^T
        detail::gemm_bt(grad_out.data.data(), weights.data.data(), input.grad.data(), n, k, d, true);
    }
}

// ---------------------------------------------------------------------------
// concat along the feature axis of [N, Di] tensors

template <typename T>
void concat_check(const std::vector<const TensorT<T>*>& inputs) {
    detail::require(!inputs.empty(), "concat: needs at least one input");
    for (const auto* t : inputs) {
        detail::require(t->rank() == 2, "concat: inputs must be rank 2 [N,D]");
        detail::require(t->dim(0) == inputs[0]->dim(0),
                        "concat: batch dimension mismatch, " + std::to_string(t->dim(0)) + " vs " +
                            std::to_string(inputs[0]->dim(0)) + " (axis 0)");
    }
}

template <typename T>
TensorT<T> concat_forward(const std::vector<const TensorT<T>*>& inputs) {
    concat_check(inputs);
    const std::int64_t n = inputs[0]->dim(0);
    std::int64_t total = 0;
    for (const auto* t : inputs) total += t->dim(1);
    TensorT<T> out({n, total});
    for (std::int64_t i = 0; i < n; ++i) {
        T* row = out.data.data() + i * total;
        for (const auto* t : inputs) {
            const std::int64_t d = t->dim(1);
            const T* src = t->data.data() + i * d;
            std::copy(src, src + d, row);
            row += d;
        }
    }
    return out;
}

// slices the upstream gradient back into each input's grad buffer
template <typename T>
void concat_backward(std::vector<TensorT<T>*>& inputs, const TensorT<T>& grad_out) {
    std::vector<const TensorT<T>*> views(inputs.begin(), inputs.end());
    concat_check(views);
    const std::int64_t n = inputs[0]->dim(0);
    std::int64_t total = 0;
    for (auto* t : inputs) total += t->dim(1);
    detail::require(grad_out.shape == std::vector<std::int64_t>({n, total}),
                    "concat backward: upstream gradient shape mismatch");
    for (auto* t : inputs) t->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = grad_out.data.data() + i * total;
        for (auto* t : inputs) {
            const std::int64_t d = t->dim(1);
            T* dst = t->grad.data() + i * d;
            for (std::int64_t j = 0; j < d; ++j) dst[j] += row[j];
            row += d;
        }
    }
}

// ---------------------------------------------------------------------------
// softmax and negative log likelihood

template <typename T>
TensorT<T> softmax_forward(const TensorT<T>& logits) {
    detail::require(logits.rank() == 2, "softmax: logits must be rank 2 [N,K]");
    detail::require(logits.dim(1) >= 2, "softmax: needs at least 2 classes");
    const std::int64_t n = logits.dim(0), k = logits.dim(1);
    TensorT<T> out({n, k});
    for (std::int64_t i = 0; i < n; ++i) {
        const T* row = logits.data.data() + i * k;
        T* dst = out.data.data() + i * k;
        T mx = row[0];
        for (std::int64_t j = 0; j < k; ++j) {
            if (!std::isfinite(static_cast<double>(row[j])))
                throw numeric_error("softmax: non-finite logit at row " + std::to_string(i));
            mx = std::max(mx, row[j]);
        }
        T sum = T(0);
        for (std::int64_t j = 0; j < k; ++j) {
            dst[j] = std::exp(row[j] - mx);
            sum += dst[j];
        }
        for (std::int64_t j = 0; j < k; ++j) dst[j] /= sum;
    }
    return out;
}

// full softmax jacobian-vector product: dL/dz_j = p_j * (g_j - sum_i g_i p_i)
template <typename T>
void softmax_backward(TensorT<T>& logits, const TensorT<T>& probs, const TensorT<T>& grad_out) {
    detail::require(grad_out.shape == probs.shape && logits.shape == probs.shape,
                    "softmax backward: shape mismatch");
    logits.ensure_grad();
    const std::int64_t n = probs.dim(0), k = probs.dim(1);
    for (std::int64_t i = 0; i < n; ++i) {
        const T* p = probs.data.data() + i * k;
        const T* g = grad_out.data.data() + i * k;
        T dot = T(0);
        for (std::int64_t j = 0; j < k; ++j) dot += g[j] * p[j];
        T* dz = logits.grad.data() + i * k;
        for (std::int64_t j = 0; j < k; ++j) dz[j] += p[j] * (g[j] - dot);
    }
}

// probability floor inside the log; keeps -log finite on degenerate rows
template <typename T>
inline constexpr T kNllProbFloor = T(1e-12);

template <typename T>
T nll_loss(const TensorT<T>& probs, const std::vector<int>& labels) {
    detail::require(probs.rank() == 2, "nll_loss: probs must be rank 2 [N,K]");
    const std::int64_t n = probs.dim(0), k = probs.dim(1);
    detail::require(static_cast<std::int64_t>(labels.size()) == n,
                    "nll_loss: labels length " + std::to_string(labels.size()) + " != batch " + std::to_string(n));
    double total = 0.0; // accumulated in double even for float probs
    for (std::int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || y >= k)
            throw invalid_argument_error("nll_loss: label " + std::to_string(y) + " out of range [0," +
                                         std::to_string(k) + ") at row " + std::to_string(i));
        const T p = std::max(probs.data[static_cast<std::size_t>(i * k + y)], kNllProbFloor<T>);
        total -= std::log(static_cast<double>(p));
    }
    return static_cast<T>(total / static_cast<double>(n));
}

// joint softmax+NLL gradient w.r.t. the logits: (probs - one_hot) / N
template <typename T>
TensorT<T> softmax_nll_backward(const TensorT<T>& probs, const std::vector<int>& labels) {
    const std::int64_t n = probs.dim(0), k = probs.dim(1);
    detail::require(static_cast<std::int64_t>(labels.size()) == n, "softmax_nll_backward: labels length mismatch");
    TensorT<T> grad({n, k});
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::int64_t i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < k; ++j) {
            const T p = probs.data[static_cast<std::size_t>(i * k + j)];
            grad.data[static_cast<std::size_t>(i * k + j)] = (p - (j == y ? T(1) : T(0))) * inv_n;
        }
    }
    return grad;
}

} // namespace codelnet

#endif
