#include "sifmi/param_vector.hpp"

#include <cmath>

namespace sifmi {

std::size_t layout_size(const ParamLayout& layout) {
    std::size_t n = 0;
    for (const auto& s : layout) n += s.length;
    return n;
}

void validate_layout(const ParamLayout& layout) {
    std::size_t expect = 0;
    for (const auto& s : layout) {
        if (s.offset != expect)
            throw DimensionError("layout slice '" + s.name + "' offset " +
                                 std::to_string(s.offset) + " is not contiguous (expected " +
                                 std::to_string(expect) + ")");
        expect += s.length;
    }
}

ParamVector::ParamVector(ParamLayout layout, std::vector<double> data)
    : layout_(std::move(layout)), data_(std::move(data)) {
    validate_layout(layout_);
    if (data_.size() != layout_size(layout_))
        throw DimensionError("param data length " + std::to_string(data_.size()) +
                             " does not match layout total " +
                             std::to_string(layout_size(layout_)));
}

ParamVector ParamVector::zeros(const ParamLayout& layout) {
    return ParamVector(layout, std::vector<double>(layout_size(layout), 0.0));
}

void ParamVector::require_same_layout(const ParamVector& o, const char* what) const {
    if (!same_layout(o))
        throw DimensionError(std::string("param layout mismatch in ") + what);
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
    require_same_layout(o, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& o) {
    require_same_layout(o, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

ParamVector& ParamVector::operator*=(double s) {
    for (double& x : data_) x *= s;
    return *this;
}

void ParamVector::axpy(double s, const ParamVector& o) {
    require_same_layout(o, "axpy");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
}

double ParamVector::dot(const ParamVector& o) const {
    require_same_layout(o, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * o.data_[i];
    return acc;
}

double ParamVector::norm2() const {
    double acc = 0.0;
    for (double x : data_) acc += x * x;
    return std::sqrt(acc);
}

bool ParamVector::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace sifmi
