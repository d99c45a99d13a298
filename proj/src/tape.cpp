#include "fadelab/tape.hpp"

#include <algorithm>
#include <cmath>

namespace fadelab {

Param& ParamStore::add(const std::string& name, Tensor2 value) {
    require(!has(name), ErrorKind::contract, "parameter '" + name + "' already registered");
    params_.push_back(Param{name, std::move(value)});
    return params_.back();
}

Param& ParamStore::at(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw_error(ErrorKind::lookup, "unknown parameter '" + name + "'");
}

const Param& ParamStore::at(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p;
    }
    throw_error(ErrorKind::lookup, "unknown parameter '" + name + "'");
}

bool ParamStore::has(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const Param& p) { return p.name == name; });
}

GradTape::Value GradTape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{static_cast<std::int32_t>(nodes_.size() - 1)};
}

const GradTape::Node& GradTape::node(Value v) const {
    require(v.idx >= 0 && v.idx < static_cast<std::int32_t>(nodes_.size()), ErrorKind::contract,
            "tape value handle out of range");
    return nodes_[static_cast<std::size_t>(v.idx)];
}

GradTape::Value GradTape::constant(Tensor2 v) {
    Node n;
    n.op = Op::constant;
    n.val = std::move(v);
    return push(std::move(n));
}

GradTape::Value GradTape::param(const Param& p) {
    auto it = param_leaves_.find(p.name);
    if (it != param_leaves_.end()) {
        return Value{it->second};
    }
    Node n;
    n.op = Op::param;
    n.val = p.value;
    n.pname = p.name;
    Value v = push(std::move(n));
    param_leaves_[p.name] = v.idx;
    return v;
}

GradTape::Value GradTape::matmul(Value a, Value b) {
    const Tensor2& av = node(a).val;
    const Tensor2& bv = node(b).val;
    require(av.cols() == bv.rows(), ErrorKind::shape,
            "matmul: inner dimensions differ, " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::matmul;
    n.a = a.idx;
    n.b = b.idx;
    n.val = fadelab::matmul(av, bv);
    return push(std::move(n));
}

GradTape::Value GradTape::add(Value a, Value b) {
    Node n;
    n.op = Op::add;
    n.a = a.idx;
    n.b = b.idx;
    n.val = fadelab::add(node(a).val, node(b).val);
    return push(std::move(n));
}

GradTape::Value GradTape::sub(Value a, Value b) {
    Node n;
    n.op = Op::sub;
    n.a = a.idx;
    n.b = b.idx;
    n.val = fadelab::sub(node(a).val, node(b).val);
    return push(std::move(n));
}

GradTape::Value GradTape::hadamard(Value a, Value b) {
    Node n;
    n.op = Op::hadamard;
    n.a = a.idx;
    n.b = b.idx;
    n.val = fadelab::hadamard(node(a).val, node(b).val);
    return push(std::move(n));
}

GradTape::Value GradTape::scale(Value a, double s) {
    Node n;
    n.op = Op::scale;
    n.a = a.idx;
    n.s = s;
    n.val = scaled(s, node(a).val);
    return push(std::move(n));
}

GradTape::Value GradTape::add_scalar(Value a, double c) {
    Node n;
    n.op = Op::add_scalar;
    n.a = a.idx;
    n.s = c;
    n.val = node(a).val;
    for (double& v : n.val.raw()) v += c;
    return push(std::move(n));
}

GradTape::Value GradTape::tanh(Value a) {
    Node n;
    n.op = Op::tanh_op;
    n.a = a.idx;
    n.val = node(a).val;
    for (double& v : n.val.raw()) v = std::tanh(v);
    return push(std::move(n));
}

GradTape::Value GradTape::relu(Value a) {
    Node n;
    n.op = Op::relu_op;
    n.a = a.idx;
    n.val = node(a).val;
    for (double& v : n.val.raw()) v = v > 0.0 ? v : 0.0;
    return push(std::move(n));
}

GradTape::Value GradTape::add_bias_rows(Value x, Value bias) {
    const Tensor2& xv = node(x).val;
    const Tensor2& bv = node(bias).val;
    require(bv.rows() == 1 && bv.cols() == xv.cols(), ErrorKind::shape,
            "add_bias_rows: bias " + bv.shape_str() + " does not match " + xv.shape_str());
    Node n;
    n.op = Op::add_bias_rows;
    n.a = x.idx;
    n.b = bias.idx;
    n.val = xv;
    kernels::active().add_bias_rows(n.val.data(), bv.data(), n.val.rows(), n.val.cols());
    return push(std::move(n));
}

GradTape::Value GradTape::concat_cols(Value a, Value b) {
    const Tensor2& av = node(a).val;
    const Tensor2& bv = node(b).val;
    require(av.rows() == bv.rows(), ErrorKind::shape,
            "concat_cols: row counts differ, " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::concat_cols;
    n.a = a.idx;
    n.b = b.idx;
    n.val = Tensor2(av.rows(), av.cols() + bv.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        std::copy(av.row_ptr(i), av.row_ptr(i) + av.cols(), n.val.row_ptr(i));
        std::copy(bv.row_ptr(i), bv.row_ptr(i) + bv.cols(), n.val.row_ptr(i) + av.cols());
    }
    return push(std::move(n));
}

GradTape::Value GradTape::embed_rows(Value table, std::vector<std::size_t> ids) {
    const Tensor2& tv = node(table).val;
    for (std::size_t id : ids) {
        require(id < tv.rows(), ErrorKind::lookup,
                "embed_rows: row " + std::to_string(id) + " out of range for table " + tv.shape_str());
    }
    Node n;
    n.op = Op::embed_rows;
    n.a = table.idx;
    n.val = Tensor2(ids.size(), tv.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::copy(tv.row_ptr(ids[i]), tv.row_ptr(ids[i]) + tv.cols(), n.val.row_ptr(i));
    }
    n.ids = std::move(ids);
    return push(std::move(n));
}

GradTape::Value GradTape::sum(Value a) {
    Node n;
    n.op = Op::sum;
    n.a = a.idx;
    n.val = Tensor2(1, 1, {sum_all(node(a).val)});
    return push(std::move(n));
}

GradTape::Value GradTape::sumsq(Value a) {
    Node n;
    n.op = Op::sumsq;
    n.a = a.idx;
    n.val = Tensor2(1, 1, {fadelab::sumsq(node(a).val)});
    return push(std::move(n));
}

GradTape::Value GradTape::softmax_cross_entropy(Value logits, std::vector<std::size_t> labels) {
    const Tensor2& lv = node(logits).val;
    require(labels.size() == lv.rows(), ErrorKind::shape, "softmax_cross_entropy: one label per row required");
    Node n;
    n.op = Op::softmax_xent;
    n.a = logits.idx;
    n.aux = Tensor2(lv.rows(), lv.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < lv.rows(); ++i) {
        require(labels[i] < lv.cols(), ErrorKind::lookup, "softmax_cross_entropy: label out of range");
        const double* row = lv.row_ptr(i);
        double mx = row[0];
        for (std::size_t j = 1; j < lv.cols(); ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < lv.cols(); ++j) z += std::exp(row[j] - mx);
        const double logz = std::log(z) + mx;
        for (std::size_t j = 0; j < lv.cols(); ++j) n.aux(i, j) = std::exp(row[j] - logz);
        loss -= row[labels[i]] - logz;
    }
    n.val = Tensor2(1, 1, {loss / static_cast<double>(lv.rows())});
    n.ids = std::move(labels);
    return push(std::move(n));
}

const Tensor2& GradTape::value(Value v) const { return node(v).val; }

double GradTape::scalar(Value v) const {
    const Tensor2& t = node(v).val;
    require(t.rows() == 1 && t.cols() == 1, ErrorKind::contract, "value is not a scalar");
    return t(0, 0);
}

GradMap GradTape::backward(Value loss) {
    require(!nodes_.empty(), ErrorKind::contract, "backward on an empty tape");
    const Node& ln = node(loss);
    require(ln.val.rows() == 1 && ln.val.cols() == 1, ErrorKind::contract,
            "backward requires a scalar loss, got " + ln.val.shape_str());

    std::vector<Tensor2> adj(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        adj[i] = Tensor2(nodes_[i].val.rows(), nodes_[i].val.cols());
    }
    adj[static_cast<std::size_t>(loss.idx)](0, 0) = 1.0;

    const auto& k = kernels::active();
    for (std::size_t pos = nodes_.size(); pos-- > 0;) {
        const Node& n = nodes_[pos];
        const Tensor2& g = adj[pos];
        switch (n.op) {
            case Op::constant:
            case Op::param:
                break;
            case Op::matmul: {
                const Tensor2& av = nodes_[n.a].val;
                const Tensor2& bv = nodes_[n.b].val;
                // dA += g * B^T ; dB += A^T * g
                k.gemm_nt_acc(g.data(), bv.data(), adj[n.a].data(), g.rows(), g.cols(), bv.rows());
                k.gemm_tn_acc(av.data(), g.data(), adj[n.b].data(), av.rows(), av.cols(), g.cols());
                break;
            }
            case Op::add:
                k.axpy(1.0, g.data(), adj[n.a].data(), g.size());
                k.axpy(1.0, g.data(), adj[n.b].data(), g.size());
                break;
            case Op::sub:
                k.axpy(1.0, g.data(), adj[n.a].data(), g.size());
                k.axpy(-1.0, g.data(), adj[n.b].data(), g.size());
                break;
            case Op::hadamard: {
                Tensor2 tmp(g.rows(), g.cols());
                k.mul(g.data(), nodes_[n.b].val.data(), tmp.data(), g.size());
                k.axpy(1.0, tmp.data(), adj[n.a].data(), g.size());
                k.mul(g.data(), nodes_[n.a].val.data(), tmp.data(), g.size());
                k.axpy(1.0, tmp.data(), adj[n.b].data(), g.size());
                break;
            }
            case Op::scale:
                k.axpy(n.s, g.data(), adj[n.a].data(), g.size());
                break;
            case Op::add_scalar:
                k.axpy(1.0, g.data(), adj[n.a].data(), g.size());
                break;
            case Op::tanh_op: {
                Tensor2& target = adj[n.a];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    const double y = n.val.raw()[i];
                    target.raw()[i] += g.raw()[i] * (1.0 - y * y);
                }
                break;
            }
            case Op::relu_op: {
                Tensor2& target = adj[n.a];
                for (std::size_t i = 0; i < g.size(); ++i) {
                    if (nodes_[n.a].val.raw()[i] > 0.0) target.raw()[i] += g.raw()[i];
                }
                break;
            }
            case Op::add_bias_rows: {
                k.axpy(1.0, g.data(), adj[n.a].data(), g.size());
                Tensor2& db = adj[n.b];
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    k.axpy(1.0, g.row_ptr(i), db.data(), g.cols());
                }
                break;
            }
            case Op::concat_cols: {
                Tensor2& da = adj[n.a];
                Tensor2& db = adj[n.b];
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    k.axpy(1.0, g.row_ptr(i), da.row_ptr(i), da.cols());
                    k.axpy(1.0, g.row_ptr(i) + da.cols(), db.row_ptr(i), db.cols());
                }
                break;
            }
            case Op::embed_rows: {
                Tensor2& dt = adj[n.a];
                for (std::size_t i = 0; i < n.ids.size(); ++i) {
                    k.axpy(1.0, g.row_ptr(i), dt.row_ptr(n.ids[i]), g.cols());
                }
                break;
            }
            case Op::sum: {
                const double gs = g(0, 0);
                Tensor2& da = adj[n.a];
                for (double& v : da.raw()) v += gs;
                break;
            }
            case Op::sumsq:
                k.axpy(2.0 * g(0, 0), nodes_[n.a].val.data(), adj[n.a].data(), nodes_[n.a].val.size());
                break;
            case Op::softmax_xent: {
                const double gs = g(0, 0) / static_cast<double>(n.aux.rows());
                Tensor2& da = adj[n.a];
                for (std::size_t i = 0; i < n.aux.rows(); ++i) {
                    for (std::size_t j = 0; j < n.aux.cols(); ++j) {
                        const double onehot = n.ids[i] == j ? 1.0 : 0.0;
                        da(i, j) += gs * (n.aux(i, j) - onehot);
                    }
                }
                break;
            }
        }
    }

    GradMap grads;
    for (const auto& [name, idx] : param_leaves_) {
        grads.emplace(name, std::move(adj[static_cast<std::size_t>(idx)]));
    }
    return grads;
}

} // namespace fadelab
