#include "lgmc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lgmc {

namespace {
thread_local AllocationProbe* active_probe = nullptr;
}

AllocationProbe::AllocationProbe() : previous_(active_probe) { active_probe = this; }

AllocationProbe::~AllocationProbe() { active_probe = previous_; }

void record_allocation(std::size_t bytes) {
    for (AllocationProbe* p = active_probe; p != nullptr; p = p->previous_) {
        ++p->stats_.count;
        p->stats_.total_bytes += bytes;
        p->stats_.largest_bytes = std::max(p->stats_.largest_bytes, bytes);
    }
}

std::string shape_string(const Shape& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << 'x';
        os << dims[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_volume(const Shape& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

namespace {

void validate_dims(const Shape& dims) {
    if (dims.empty()) throw ShapeError("tensor rank must be at least 1");
    for (auto d : dims) {
        if (d == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(dims));
    }
}

}  // namespace

template <class T>
BasicTensor<T>::BasicTensor(Shape dims, T fill) : dims_(std::move(dims)) {
    validate_dims(dims_);
    data_.assign(shape_volume(dims_), fill);
}

template <class T>
BasicTensor<T>::BasicTensor(Shape dims, std::span<const T> values) : dims_(std::move(dims)) {
    validate_dims(dims_);
    if (values.size() != shape_volume(dims_)) {
        throw ShapeError("payload of " + std::to_string(values.size()) +
                         " elements does not fill shape " + shape_string(dims_));
    }
    data_.assign(values.begin(), values.end());
}

template <class T>
BasicTensor<T> BasicTensor<T>::from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    if (rows.size() == 0) throw ShapeError("from_rows needs at least one row");
    const std::size_t n = rows.begin()->size();
    BasicTensor out(Shape{rows.size(), n});
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != n) throw ShapeError("from_rows: ragged rows");
        std::copy(row.begin(), row.end(), out.data() + r * n);
        ++r;
    }
    return out;
}

template <class T>
std::size_t BasicTensor<T>::rows() const {
    if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape_string(dims_));
    return dims_[0];
}

template <class T>
std::size_t BasicTensor<T>::cols() const {
    if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape_string(dims_));
    return dims_[1];
}

template <class T>
bool BasicTensor<T>::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape dims) const {
    if (shape_volume(dims) != data_.size()) {
        throw ShapeError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
    }
    return BasicTensor(std::move(dims), values());
}

template <class T>
void require_rank(const BasicTensor<T>& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.dims()));
    }
}

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_string(a.dims()) + " and " +
                         shape_string(b.dims()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    BasicTensor<T> out(Shape{m, n});
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    // i-k-j order keeps the innermost loop contiguous in both b and out.
    for (std::size_t i = 0; i < m; ++i) {
        T* orow = po + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T av = pa[i * k + kk];
            const T* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    BasicTensor<T> out(Shape{n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
    return out;
}

template <class T>
void softmax_rows_inplace(BasicTensor<T>& a) {
    require_rank(a, 2, "softmax_rows");
    const std::size_t m = a.dim(0), n = a.dim(1);
    for (std::size_t i = 0; i < m; ++i) {
        T* row = a.data() + i * n;
        const T mx = *std::max_element(row, row + n);
        T sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const T inv = T(1) / sum;
        for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
    }
}

template <class T>
BasicTensor<T> softmax_rows(const BasicTensor<T>& a) {
    BasicTensor<T> out = a;
    softmax_rows_inplace(out);
    return out;
}

template <class T>
BasicTensor<T> softmax_cols(const BasicTensor<T>& a) {
    require_rank(a, 2, "softmax_cols");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<T> mx(a.data(), a.data() + n);
    for (std::size_t i = 1; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) mx[j] = std::max(mx[j], a(i, j));
    BasicTensor<T> out(a.dims());
    std::vector<T> sum(n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const T e = std::exp(a(i, j) - mx[j]);
            out(i, j) = e;
            sum[j] += e;
        }
    }
    for (auto& s : sum) s = T(1) / s;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) *= sum[j];
    return out;
}

template <class T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
    if (parts.empty()) throw ShapeError("concat_channels: no parts");
    const auto& first = parts.front();
    require_rank(first, 3, "concat_channels");
    std::size_t channels = 0;
    for (const auto& p : parts) {
        require_rank(p, 3, "concat_channels");
        if (p.dim(1) != first.dim(1) || p.dim(2) != first.dim(2)) {
            throw ShapeError("concat_channels: spatial mismatch " + shape_string(first.dims()) +
                             " vs " + shape_string(p.dims()));
        }
        channels += p.dim(0);
    }
    BasicTensor<T> out(Shape{channels, first.dim(1), first.dim(2)});
    T* dst = out.data();
    for (const auto& p : parts) dst = std::copy(p.data(), p.data() + p.size(), dst);
    return out;
}

template <class T>
BasicTensor<T> slice_channels(const BasicTensor<T>& a, std::size_t begin, std::size_t count) {
    require_rank(a, 3, "slice_channels");
    if (count == 0 || begin + count > a.dim(0)) {
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") outside " + shape_string(a.dims()));
    }
    const std::size_t plane = a.dim(1) * a.dim(2);
    return BasicTensor<T>(Shape{count, a.dim(1), a.dim(2)},
                          std::span<const T>(a.data() + begin * plane, count * plane));
}

namespace {

template <class T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.dims() != b.dims()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(a.dims()) + " vs " +
                         shape_string(b.dims()));
    }
}

}  // namespace

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "add");
    BasicTensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T alpha) {
    BasicTensor<T> out = a;
    for (auto& v : out.values()) v *= alpha;
    return out;
}

template <class T>
MatmulGrad<T> matmul_backward(const BasicTensor<T>& a, const BasicTensor<T>& b,
                              const BasicTensor<T>& d_out) {
    if (a.rank() != 2 || b.rank() != 2 || d_out.rank() != 2 || a.dim(1) != b.dim(0) ||
        d_out.dim(0) != a.dim(0) || d_out.dim(1) != b.dim(1)) {
        throw ShapeError("matmul_backward: inconsistent shapes a=" + shape_string(a.dims()) +
                         " b=" + shape_string(b.dims()) + " d_out=" + shape_string(d_out.dims()));
    }
    return {matmul(d_out, transpose(b)), matmul(transpose(a), d_out)};
}

template <class T>
BasicTensor<T> softmax_rows_backward(const BasicTensor<T>& y, const BasicTensor<T>& d_out) {
    require_rank(y, 2, "softmax_rows_backward");
    require_same_shape(y, d_out, "softmax_rows_backward");
    const std::size_t m = y.dim(0), n = y.dim(1);
    BasicTensor<T> d_in(y.dims());
    for (std::size_t i = 0; i < m; ++i) {
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += d_out(i, j) * y(i, j);
        for (std::size_t j = 0; j < n; ++j) d_in(i, j) = y(i, j) * (d_out(i, j) - dot);
    }
    return d_in;
}

template <class T>
BasicTensor<T> softmax_cols_backward(const BasicTensor<T>& y, const BasicTensor<T>& d_out) {
    require_rank(y, 2, "softmax_cols_backward");
    require_same_shape(y, d_out, "softmax_cols_backward");
    const std::size_t m = y.dim(0), n = y.dim(1);
    std::vector<T> dot(n, T(0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) dot[j] += d_out(i, j) * y(i, j);
    BasicTensor<T> d_in(y.dims());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d_in(i, j) = y(i, j) * (d_out(i, j) - dot[j]);
    return d_in;
}

Tensor64 finite_difference_gradient(const ScalarFunction& f, const Tensor64& x, double eps) {
    if (!(eps > 0.0)) throw DomainError("finite_difference_gradient: eps must be positive");
    Tensor64 grad(x.dims());
    Tensor64 probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + eps;
        const double hi = f(probe);
        probe[i] = orig - eps;
        const double lo = f(probe);
        probe[i] = orig;
        if (!std::isfinite(hi) || !std::isfinite(lo)) {
            throw EvaluationError("finite_difference_gradient: non-finite function value at element " +
                                  std::to_string(i));
        }
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

#define LGMC_INSTANTIATE(T)                                                                          \
    template class BasicTensor<T>;                                                                   \
    template void require_rank(const BasicTensor<T>&, std::size_t, const char*);                     \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
    template BasicTensor<T> transpose(const BasicTensor<T>&);                                        \
    template BasicTensor<T> softmax_rows(const BasicTensor<T>&);                                     \
    template void softmax_rows_inplace(BasicTensor<T>&);                                             \
    template BasicTensor<T> softmax_cols(const BasicTensor<T>&);                                     \
    template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);                        \
    template BasicTensor<T> slice_channels(const BasicTensor<T>&, std::size_t, std::size_t);         \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                       \
    template BasicTensor<T> scale(const BasicTensor<T>&, T);                                         \
    template MatmulGrad<T> matmul_backward(const BasicTensor<T>&, const BasicTensor<T>&,             \
                                           const BasicTensor<T>&);                                   \
    template BasicTensor<T> softmax_rows_backward(const BasicTensor<T>&, const BasicTensor<T>&);     \
    template BasicTensor<T> softmax_cols_backward(const BasicTensor<T>&, const BasicTensor<T>&);

LGMC_INSTANTIATE(float)
LGMC_INSTANTIATE(double)

#undef LGMC_INSTANTIATE

}  // namespace lgmc
