#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "diffgan/rng.hpp"

namespace diffgan {

/// Dense row-major real tensor. 64-bit values throughout; training state
/// that must round-trip through 32-bit checkpoints is quantized explicitly
/// (see quantize_f32).
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor. Every dimension must be positive.
    explicit Tensor(std::vector<int> shape);

    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(const std::vector<int>& shape) { return Tensor(shape); }
    static Tensor full(const std::vector<int>& shape, double value);
    static Tensor ones(const std::vector<int>& shape) { return full(shape, 1.0); }
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    /// i.i.d. standard normal entries (Box-Muller), deterministic per rng stream.
    static Tensor randn(Rng& rng, const std::vector<int>& shape);

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    /// Row-major element access for up to 4 indices (tests and kernels).
    double& at(std::initializer_list<int> idx);
    double at(std::initializer_list<int> idx) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(double value);

    std::string shape_str() const;

    /// Round every value to the nearest float32. Keeps the tensor inside the
    /// set of exactly representable checkpoint values.
    void quantize_f32();

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int64_t checked_numel(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

}  // namespace diffgan
