#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sifmi/common.hpp"

namespace sifmi {

// Dense row-major tensor of 64-bit floats.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<std::size_t> shape);
    // Validating constructor for data coming from files or user input:
    // rejects NaN/Inf and shape/data length mismatch.
    static Tensor checked(std::vector<std::size_t> shape, std::vector<double> data);

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

// A labeled minibatch; inputs leading dim is the batch size.
struct Batch {
    Tensor inputs;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    // Per-sample flat view helpers.
    std::size_t sample_size() const;
    const double* sample(std::size_t i) const;
};

Batch make_batch(const std::vector<Tensor>& inputs, const std::vector<int>& labels);

}  // namespace sifmi
