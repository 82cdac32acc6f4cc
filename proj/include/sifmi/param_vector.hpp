#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sifmi/common.hpp"

namespace sifmi {

// One named contiguous parameter block. `regularized` marks blocks that the
// l2 penalty covers; normalization-style scale/shift blocks would clear it.
struct LayerSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t length = 0;
    bool regularized = true;

    bool operator==(const LayerSlice&) const = default;
};

using ParamLayout = std::vector<LayerSlice>;

std::size_t layout_size(const ParamLayout& layout);
void validate_layout(const ParamLayout& layout);

// Flattened model parameter / gradient vector with a named-layer layout.
// Two ParamVectors combine only when their layouts agree.
class ParamVector {
public:
    ParamVector() = default;
    ParamVector(ParamLayout layout, std::vector<double> data);
    static ParamVector zeros(const ParamLayout& layout);

    std::size_t size() const { return data_.size(); }
    const ParamLayout& layout() const { return layout_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_layout(const ParamVector& o) const { return layout_ == o.layout_; }
    void require_same_layout(const ParamVector& o, const char* what) const;

    ParamVector& operator+=(const ParamVector& o);
    ParamVector& operator-=(const ParamVector& o);
    ParamVector& operator*=(double s);
    // this += s * o
    void axpy(double s, const ParamVector& o);

    double dot(const ParamVector& o) const;
    double norm2() const;
    bool all_finite() const;

    friend ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
    friend ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
    friend ParamVector operator*(double s, ParamVector a) { return a *= s; }

private:
    ParamLayout layout_;
    std::vector<double> data_;
};

}  // namespace sifmi
