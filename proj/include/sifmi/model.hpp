#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sifmi/param_vector.hpp"
#include "sifmi/tensor.hpp"

namespace sifmi {

enum class Arch { LogReg, Mlp, SmallCnn };

// Architecture descriptor for the three supported model families. ReLU is the
// only activation. Parameter count is capped so the dense-Hessian oracle path
// stays feasible.
struct ModelSpec {
    Arch arch = Arch::LogReg;
    int input_dim = 0;            // logreg / mlp: flattened input size
    std::vector<int> hidden;      // mlp hidden widths
    int in_channels = 0;          // smallcnn input planes
    int in_h = 0, in_w = 0;       // smallcnn input spatial dims
    int conv_channels = 0;        // smallcnn first-conv width (second is 2x)
    int num_classes = 0;

    static constexpr std::size_t kParamCap = 100000;

    static ModelSpec logreg(int dim, int classes);
    static ModelSpec mlp(int dim, std::vector<int> hidden, int classes);
    static ModelSpec smallcnn(int in_channels, int h, int w, int channels, int classes);

    ParamLayout layout() const;
    std::size_t param_count() const;
    std::string arch_name() const;
    // Expected per-sample input element count.
    std::size_t sample_elems() const;

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);

    bool operator==(const ModelSpec&) const = default;
};

// Mean cross-entropy over the batch plus (l2/2)*||theta_reg||^2, where
// theta_reg spans the layout slices flagged `regularized`.
double forward_loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                    double l2);

// Exact reverse-mode gradient of forward_loss w.r.t. all parameters.
ParamVector grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                 double l2);

// Hessian-vector product of forward_loss, computed by tangent propagation
// through the gradient evaluation (forward-over-reverse); never materializes
// the Hessian.
ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                const ParamVector& v, double l2);

// Raw class scores for a single input.
std::vector<double> logits(const ModelSpec& spec, const ParamVector& params,
                           const Tensor& input);

struct Prediction {
    int label = 0;
    std::vector<double> probabilities;
};

// Softmax argmax; ties resolve to the smallest class id.
Prediction predict(const ModelSpec& spec, const ParamVector& params, const Tensor& input);

}  // namespace sifmi
