// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tridf/tensor.hpp"

namespace tridf {

class Tape;

// Handle to a tensor recorded on a tape.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff tape. Forward evaluation is eager: every primitive
// computes its result at record time and stores a backward closure. Node
// order is recording order; backward walks it in reverse. Gradients
// accumulate with a fixed recording-order reduction so identical runs are
// bit-identical.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves.
    Value constant(TensorF t);
    Value constant_scalar(double v);
    Value param(const TensorF& t);  // registered leaf with gradient buffer

    // Elementwise binary ops. Broadcasting: scalar against anything, a 1-D
    // [cols] bias row against a 2-D matrix (add/sub), and a [K,1] column
    // against [K,C] (mul/div).
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);

    Value matmul(Value a, Value b);

    // y = scale*x + shift, elementwise.
    Value affine(Value x, double scale, double shift);

    Value sum(Value a);
    Value mean(Value a);

    Value exp_(Value a);
    Value log_(Value a);
    Value sin_(Value a);
    Value cos_(Value a);
    Value relu(Value a);
    Value softplus(Value a);
    Value sigmoid(Value a);
    Value abs_(Value a);
    Value square(Value a);
    Value clamp(Value a, double lo, double hi);

    Value concat_cols(Value a, Value b);
    Value slice_cols(Value a, std::size_t c0, std::size_t c1);
    Value gather_rows(Value a, std::vector<std::size_t> idx);
    // Rows of `a` placed at `idx` in a [total_rows, C] zero tensor.
    Value scatter_rows(Value a, std::vector<std::size_t> idx,
                       std::size_t total_rows);

    // Emission-absorption compositing over n_rays rays of n_samples samples
    // each. sigma is [R*S], rgb is [R*S,3]; deltas/ts are fixed sample
    // geometry. Output is [R,5]: (r, g, b, depth, opacity). The color gets a
    // background term weighted by residual transmittance; depth does not.
    Value composite(Value sigma, Value rgb, const TensorF& deltas,
                    const TensorF& ts, const std::array<double, 3>& background,
                    std::size_t n_rays, std::size_t n_samples);

    const TensorF& value(Value v) const;
    bool requires_grad(Value v) const;

    // Gradient of the last backward() pass w.r.t. a registered leaf.
    const TensorF& grad(Value v) const;

    void backward(Value scalar_loss);
    void reset_grads();

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        TensorF val;
        TensorF grad;  // allocated at backward time when needed
        std::function<void()> back;  // null for leaves/constants
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    bool backward_done_ = false;

    Value push(TensorF val, bool needs_grad, std::function<void()> back);
    Node& node(Value v);
    const Node& node(Value v) const;
    TensorF& grad_buf(int id);
    void check_finite(const TensorF& t, const char* op) const;

    Value unary(Value a, const char* name,
                const std::function<double(double)>& f,
                const std::function<double(double, double)>& df);
};

// Max relative error between the tape gradient and central finite
// differences of a scalar-valued function of the given parameters.
// `build` records the loss for one set of parameter values.
double grad_check(
    const std::function<Value(Tape&, const std::vector<Value>&)>& build,
    const std::vector<TensorF>& params, double eps);

}  // namespace tridf
