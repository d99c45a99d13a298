#pragma once

#include "fadelab/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fadelab {

// A named trainable parameter. Parameter identity is the name; gradients and
// optimizer state are keyed by it.
struct Param {
    std::string name;
    Tensor2 value;
};

class ParamStore {
public:
    Param& add(const std::string& name, Tensor2 value);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<Param>& items() noexcept { return params_; }
    const std::vector<Param>& items() const noexcept { return params_; }
    std::size_t size() const noexcept { return params_.size(); }

private:
    std::vector<Param> params_;
};

using GradMap = std::map<std::string, Tensor2>;

// Define-by-run reverse-mode tape. A tape is built fresh for each training
// step; backward() walks the recorded primitives in reverse insertion order,
// which is a reverse topological order by construction.
class GradTape {
public:
    struct Value {
        std::int32_t idx = -1;
    };

    Value constant(Tensor2 v);
    Value scalar_constant(double v) { return constant(Tensor2(1, 1, {v})); }
    // Registers a parameter leaf. Registering the same name twice returns the
    // original leaf so the graph shares it.
    Value param(const Param& p);

    Value matmul(Value a, Value b);
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value hadamard(Value a, Value b);
    Value scale(Value a, double s);
    Value add_scalar(Value a, double c);
    Value tanh(Value a);
    Value relu(Value a);
    Value add_bias_rows(Value x, Value bias);
    Value concat_cols(Value a, Value b);
    Value embed_rows(Value table, std::vector<std::size_t> ids);
    Value sum(Value a);
    Value sumsq(Value a);
    Value softmax_cross_entropy(Value logits, std::vector<std::size_t> labels);

    const Tensor2& value(Value v) const;
    double scalar(Value v) const;

    // Adjoints of every registered parameter with respect to a scalar loss.
    // Parameters not reachable from the loss get zero gradients.
    GradMap backward(Value loss);

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        constant, param, matmul, add, sub, hadamard, scale, add_scalar, tanh_op,
        relu_op, add_bias_rows, concat_cols, embed_rows, sum, sumsq, softmax_xent,
    };

    struct Node {
        Op op;
        std::int32_t a = -1;
        std::int32_t b = -1;
        double s = 0.0;
        Tensor2 val;
        Tensor2 aux;                    // op-specific cache (softmax probabilities)
        std::vector<std::size_t> ids;   // embed row ids / class labels
        std::string pname;              // parameter leaves only
    };

    Value push(Node n);
    const Node& node(Value v) const;

    std::vector<Node> nodes_;
    std::map<std::string, std::int32_t> param_leaves_;
};

} // namespace fadelab
