#include "sifmi/tensor.hpp"

#include <cmath>
#include <sstream>

namespace sifmi {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_product(shape))
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::checked(std::vector<std::size_t> shape, std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        if (!std::isfinite(t.data[i]))
            throw NumericError("non-finite tensor entry at flat index " + std::to_string(i));
    }
    return t;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::size_t Batch::sample_size() const {
    if (inputs.shape.empty()) throw DimensionError("batch inputs have no shape");
    return inputs.size() / inputs.shape[0];
}

const double* Batch::sample(std::size_t i) const {
    return inputs.data.data() + i * sample_size();
}

Batch make_batch(const std::vector<Tensor>& inputs, const std::vector<int>& labels) {
    if (inputs.empty()) throw DimensionError("batch must contain at least one sample");
    if (inputs.size() != labels.size())
        throw DimensionError("batch inputs/labels count mismatch");
    std::vector<std::size_t> shape;
    shape.push_back(inputs.size());
    for (std::size_t d : inputs[0].shape) shape.push_back(d);
    Batch b;
    b.inputs = Tensor::zeros(shape);
    std::size_t per = inputs[0].size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (!inputs[i].same_shape(inputs[0]))
            throw DimensionError("batch sample " + std::to_string(i) + " shape " +
                                 inputs[i].shape_str() + " differs from " + inputs[0].shape_str());
        std::copy(inputs[i].data.begin(), inputs[i].data.end(),
                  b.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    b.labels = labels;
    return b;
}

}  // namespace sifmi
