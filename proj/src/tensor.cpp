#include "diffgan/tensor.hpp"

#include <cmath>
#include <sstream>

#include "diffgan/error.hpp"

namespace diffgan {

int64_t checked_numel(const std::vector<int>& shape) {
    if (shape.empty()) throw ArgError("tensor shape must have at least one dimension");
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ArgError("tensor dimensions must be positive, got " + shape_to_string(shape));
        n *= d;
        if (n > (int64_t(1) << 33)) throw ArgError("tensor too large: " + shape_to_string(shape));
    }
    return n;
}

std::string shape_to_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(checked_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_numel(shape_) != static_cast<int64_t>(data_.size()))
        throw DimError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
    Tensor t(shape);
    t.fill(value);
    return t;
}

Tensor Tensor::randn(Rng& rng, const std::vector<int>& shape) {
    Tensor t(shape);  // throws ArgError on non-positive dims
    for (auto& v : t.data_) v = rng.normal();
    return t;
}

namespace {

int64_t flat_offset(const std::vector<int>& shape, std::initializer_list<int> idx) {
    if (idx.size() != shape.size())
        throw ArgError("at(): expected " + std::to_string(shape.size()) + " indices");
    int64_t off = 0;
    auto it = idx.begin();
    for (size_t d = 0; d < shape.size(); ++d, ++it) off = off * shape[d] + *it;
    return off;
}

}  // namespace

double& Tensor::at(std::initializer_list<int> idx) {
    return data_[static_cast<size_t>(flat_offset(shape_, idx))];
}

double Tensor::at(std::initializer_list<int> idx) const {
    return data_[static_cast<size_t>(flat_offset(shape_, idx))];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(double value) {
    for (auto& v : data_) v = value;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

void Tensor::quantize_f32() {
    for (auto& v : data_) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace diffgan
