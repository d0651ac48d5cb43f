#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lgmc/errors.hpp"

namespace lgmc {

// ---------------------------------------------------------------------------
// Allocation accounting
//
// All tensor storage goes through TrackingAllocator. While an AllocationProbe
// is alive on a thread, every storage allocation made on that thread is
// recorded, which lets tests assert that a kernel never materializes a buffer
// of a given size.
// ---------------------------------------------------------------------------

struct AllocationStats {
    std::size_t count = 0;
    std::size_t total_bytes = 0;
    std::size_t largest_bytes = 0;
};

class AllocationProbe {
public:
    AllocationProbe();
    ~AllocationProbe();
    AllocationProbe(const AllocationProbe&) = delete;
    AllocationProbe& operator=(const AllocationProbe&) = delete;

    const AllocationStats& stats() const { return stats_; }

private:
    friend void record_allocation(std::size_t bytes);
    AllocationStats stats_;
    AllocationProbe* previous_;
};

void record_allocation(std::size_t bytes);

template <class T>
struct TrackingAllocator {
    using value_type = T;

    TrackingAllocator() noexcept = default;
    template <class U>
    TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        record_allocation(n * sizeof(T));
        return std::allocator<T>{}.allocate(n);
    }
    void deallocate(T* p, std::size_t n) noexcept { std::allocator<T>{}.deallocate(p, n); }

    template <class U>
    bool operator==(const TrackingAllocator<U>&) const noexcept {
        return true;
    }
};

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& dims);
std::size_t shape_volume(const Shape& dims);

// Dense row-major array. Rank-2 tensors follow the tokens-as-rows convention:
// rows are spatial positions, columns are channels. Rank-3 tensors are C×H×W.
template <class T>
class BasicTensor {
public:
    using value_type = T;
    using Storage = std::vector<T, TrackingAllocator<T>>;

    BasicTensor() : BasicTensor(Shape{1}) {}
    explicit BasicTensor(Shape dims, T fill = T(0));
    BasicTensor(Shape dims, std::span<const T> values);
    BasicTensor(Shape dims, std::initializer_list<T> values)
        : BasicTensor(std::move(dims), std::span<const T>(values.begin(), values.size())) {}

    // Rank-2 tensor from nested row lists; all rows must have the same length.
    static BasicTensor from_rows(std::initializer_list<std::initializer_list<T>> rows);

    const Shape& dims() const noexcept { return dims_; }
    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }

    std::size_t rows() const;
    std::size_t cols() const;

    std::span<T> values() noexcept { return {data_.data(), data_.size()}; }
    std::span<const T> values() const noexcept { return {data_.data(), data_.size()}; }
    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * dims_[1] + c]; }
    const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * dims_[1] + c]; }
    T& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }
    const T& operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * dims_[1] + y) * dims_[2] + x];
    }

    bool all_finite() const noexcept;

    // Same payload, new extents; the volume must match.
    BasicTensor reshaped(Shape dims) const;

    template <class U>
    BasicTensor<U> cast() const {
        BasicTensor<U> out(dims_);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

    bool operator==(const BasicTensor& other) const = default;

private:
    Shape dims_;
    Storage data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Throws ShapeError unless t has the given rank.
template <class T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what);

// ---------------------------------------------------------------------------
// Kernels. No broadcasting: shapes must match exactly.
// ---------------------------------------------------------------------------

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a);

template <class T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& a);

// In-place variant used where the input buffer is the only large allocation.
template <class T>
void softmax_rows_inplace(BasicTensor<T>& a);

template <class T>
BasicTensor<T> softmax_cols(const BasicTensor<T>& a);

template <class T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

// Channels [begin, begin + count) of a C×H×W tensor.
template <class T>
BasicTensor<T> slice_channels(const BasicTensor<T>& a, std::size_t begin, std::size_t count);

// Elementwise a + b and alpha * a.
template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T alpha);

template <class T>
struct MatmulGrad {
    BasicTensor<T> d_a;
    BasicTensor<T> d_b;
};

// d_a = d_out·bᵀ, d_b = aᵀ·d_out.
template <class T>
MatmulGrad<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& d_out);

// y is a softmax_rows output; returns the per-row Jacobian-vector product.
template <class T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& d_out);

template <class T>
BasicTensor<T> softmax_cols_backward(const BasicTensor<T>& y, const BasicTensor<T>& d_out);

using ScalarFunction = std::function<double(const Tensor64&)>;

// Central differences in 64-bit. Throws EvaluationError if f is non-finite at
// any probe point.
Tensor64 finite_difference_gradient(const ScalarFunction& f, const Tensor64& x, double eps);

// Max over elements of |a-b| / max(|a|, |b|, floor). Used by gradient checks.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8);

}  // namespace lgmc
