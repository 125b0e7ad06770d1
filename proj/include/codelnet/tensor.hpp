#ifndef CODELNET_TENSOR_HPP
#define CODELNET_TENSOR_HPP

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "codelnet/errors.hpp"

namespace codelnet {

// Dense row-major N-d array over a scalar type. The engine runs on floats;
// the double instantiation exists for finite-difference verification.
template <typename T>
struct TensorT {
    std::vector<std::int64_t> shape;
    std::vector<T> data;
    std::vector<T> grad; // empty until a backward pass touches this tensor

    TensorT() = default;

    explicit TensorT(std::vector<std::int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(checked_numel(shape)), T(0));
    }

    TensorT(std::vector<std::int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != checked_numel(shape)) {
            throw dimension_error("tensor data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_string(shape));
        }
    }

    static std::int64_t checked_numel(const std::vector<std::int64_t>& s) {
        std::int64_t n = 1;
        for (std::int64_t d : s) {
            if (d < 1) throw dimension_error("tensor shape entries must be >= 1, got " + shape_string(s));
            n *= d;
        }
        return n;
    }

    static std::string shape_string(const std::vector<std::int64_t>& s) {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
        os << "]";
        return os.str();
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    std::int64_t dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool has_grad() const { return !grad.empty(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
    void drop_grad() { grad.clear(); }

    // same data, new shape; element count must not change
    TensorT reshaped(std::vector<std::int64_t> s) const {
        TensorT out(std::move(s), data);
        return out;
    }

    T& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    template <typename... Ix>
    T& at(Ix... ix) {
        return data[static_cast<std::size_t>(flat_index({static_cast<std::int64_t>(ix)...}))];
    }
    template <typename... Ix>
    const T& at(Ix... ix) const {
        return data[static_cast<std::size_t>(flat_index({static_cast<std::int64_t>(ix)...}))];
    }

    std::int64_t flat_index(std::initializer_list<std::int64_t> ix) const {
        if (ix.size() != shape.size()) {
            throw dimension_error("index rank " + std::to_string(ix.size()) + " vs tensor rank " +
                                  std::to_string(shape.size()));
        }
        std::int64_t flat = 0;
        std::size_t k = 0;
        for (std::int64_t i : ix) {
            flat = flat * shape[k] + i;
            ++k;
        }
        return flat;
    }
};

using Tensor = TensorT<float>;
using DTensor = TensorT<double>;

template <typename U, typename T>
TensorT<U> tensor_cast(const TensorT<T>& t) {
    TensorT<U> out;
    out.shape = t.shape;
    out.data.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<U>(t.data[i]);
    return out;
}

// Named trainable tensor. grad lives on the tensor itself.
struct Parameter {
    Tensor tensor;
    std::string name;
    bool trainable = true;
};

} // namespace codelnet

#endif
