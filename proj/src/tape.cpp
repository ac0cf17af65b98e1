#include "nesycl/tape.hpp"

#include <stdexcept>

#include "nesycl/kernels.hpp"

namespace nesycl {

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;  // 0 * log 0 := 0
        acc += p[i] * (floored_log(p[i]) - floored_log(q[i]));
    }
    return acc;
}

double l1_distance(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("l1_distance: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return acc;
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor* param) {
    Node n;
    n.op = Op::kLeaf;
    n.value = *param;  // copy; grads flow back through `bound`
    n.bound = param;
    n.needs_grad = param->requires_grad;
    n.grad.assign(n.value.size(), 0.0);
    return {push(std::move(n))};
}

Var Tape::constant(Tensor value) {
    Node n;
    n.op = Op::kConst;
    n.value = std::move(value);
    n.grad.assign(n.value.size(), 0.0);
    return {push(std::move(n))};
}

Var Tape::constant_row(std::span<const double> values) {
    return constant(Tensor::row(std::vector<double>(values.begin(), values.end())));
}

Var Tape::scalar(double v) { return constant(Tensor::scalar(v)); }

Var Tape::unary(Op op, Var a, Tensor value) {
    Node n;
    n.op = op;
    n.parent[0] = a.id;
    n.needs_grad = nodes_[a.id].needs_grad;
    n.value = std::move(value);
    n.grad.assign(n.value.size(), 0.0);
    return {push(std::move(n))};
}

Var Tape::binary(Op op, Var a, Var b, Tensor value) {
    Node n;
    n.op = op;
    n.parent[0] = a.id;
    n.parent[1] = b.id;
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = std::move(value);
    n.grad.assign(n.value.size(), 0.0);
    return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) throw std::invalid_argument("add: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return binary(Op::kAdd, a, b, std::move(out));
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) throw std::invalid_argument("sub: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
    return binary(Op::kSub, a, b, std::move(out));
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (!ta.same_shape(tb)) throw std::invalid_argument("mul: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
    return binary(Op::kMul, a, b, std::move(out));
}

Var Tape::scale(Var a, double s) {
    Tensor out = nodes_[a.id].value;
    for (double& v : out.data) v *= s;
    Var r = unary(Op::kScale, a, std::move(out));
    nodes_[r.id].scalar = s;
    return r;
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = nodes_[a.id].value;
    const Tensor& tb = nodes_[b.id].value;
    if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
        throw std::invalid_argument("matmul: shape mismatch");
    Tensor out = Tensor::zeros({ta.rows(), tb.cols()});
    kernels::matmul(ta.data.data(), tb.data.data(), out.data.data(), ta.rows(), ta.cols(), tb.cols(), false);
    return binary(Op::kMatmul, a, b, std::move(out));
}

Var Tape::add_rowvec(Var m, Var bias) {
    const Tensor& tm = nodes_[m.id].value;
    const Tensor& tb = nodes_[bias.id].value;
    if (tm.rank() != 2 || tb.rank() != 2 || tb.rows() != 1 || tb.cols() != tm.cols())
        throw std::invalid_argument("add_rowvec: shape mismatch");
    Tensor out = tm;
    for (std::size_t i = 0; i < tm.rows(); ++i)
        for (std::size_t j = 0; j < tm.cols(); ++j) out.data[i * tm.cols() + j] += tb.data[j];
    return binary(Op::kAddRowVec, m, bias, std::move(out));
}

Var Tape::relu(Var a) {
    const Tensor& ta = nodes_[a.id].value;
    Tensor out = ta;
    kernels::relu(ta.data.data(), out.data.data(), ta.size());
    return unary(Op::kRelu, a, std::move(out));
}

Var Tape::softmax_rows(Var logits) {
    const Tensor& ta = nodes_[logits.id].value;
    if (ta.rank() != 2) throw std::invalid_argument("softmax_rows: expects a rank-2 tensor");
    for (double v : ta.data)
        if (std::isnan(v)) throw std::invalid_argument("softmax_rows: NaN input");
    Tensor out = ta;
    kernels::softmax_rows(ta.data.data(), out.data.data(), ta.rows(), ta.cols());
    return unary(Op::kSoftmaxRows, logits, std::move(out));
}

Var Tape::log_floored(Var a) {
    Tensor out = nodes_[a.id].value;
    for (double& v : out.data) v = floored_log(v);
    return unary(Op::kLogFloored, a, std::move(out));
}

Var Tape::sum(Var a) {
    double acc = 0.0;
    for (double v : nodes_[a.id].value.data) acc += v;
    return unary(Op::kSum, a, Tensor::scalar(acc));
}

Var Tape::mean(Var a) {
    double acc = 0.0;
    const std::size_t n = nodes_[a.id].value.size();
    for (double v : nodes_[a.id].value.data) acc += v;
    return unary(Op::kMean, a, Tensor::scalar(acc / static_cast<double>(n)));
}

Var Tape::pick(Var a, std::size_t index) {
    const Tensor& ta = nodes_[a.id].value;
    if (index >= ta.size()) throw std::invalid_argument("pick: index out of range");
    Var r = unary(Op::kPick, a, Tensor::scalar(ta.data[index]));
    nodes_[r.id].index = index;
    return r;
}

Var Tape::nll(Var prob_scalar) {
    const Tensor& ta = nodes_[prob_scalar.id].value;
    if (ta.size() != 1) throw std::invalid_argument("nll: expects a scalar");
    return unary(Op::kNll, prob_scalar, Tensor::scalar(nll_scalar(ta.data[0])));
}

Var Tape::kl_to_const(Var p, std::span<const double> q) {
    const Tensor& tp = nodes_[p.id].value;
    if (tp.size() != q.size()) throw std::invalid_argument("kl_to_const: length mismatch");
    Var r = unary(Op::kKlToConst, p, Tensor::scalar(kl_divergence(tp.data, q)));
    nodes_[r.id].payload.assign(q.begin(), q.end());
    return r;
}

Var Tape::mse_to_const(Var x, std::span<const double> q) {
    const Tensor& tx = nodes_[x.id].value;
    if (tx.size() != q.size()) throw std::invalid_argument("mse_to_const: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += (tx.data[i] - q[i]) * (tx.data[i] - q[i]);
    Var r = unary(Op::kMseToConst, x, Tensor::scalar(acc / static_cast<double>(q.size())));
    nodes_[r.id].payload.assign(q.begin(), q.end());
    return r;
}

Var Tape::mul_const(Var a, std::span<const double> w) {
    const Tensor& ta = nodes_[a.id].value;
    if (ta.size() != w.size()) throw std::invalid_argument("mul_const: length mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < w.size(); ++i) out.data[i] *= w[i];
    Var r = unary(Op::kMulConst, a, std::move(out));
    nodes_[r.id].payload.assign(w.begin(), w.end());
    return r;
}

Var Tape::sub_const(Var a, std::span<const double> w) {
    const Tensor& ta = nodes_[a.id].value;
    if (ta.size() != w.size()) throw std::invalid_argument("sub_const: length mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < w.size(); ++i) out.data[i] -= w[i];
    Var r = unary(Op::kSubConst, a, std::move(out));
    nodes_[r.id].payload.assign(w.begin(), w.end());
    return r;
}

Var Tape::bilinear(Var z1, Var z2, Var w) {
    const Tensor& t1 = nodes_[z1.id].value;
    const Tensor& t2 = nodes_[z2.id].value;
    const Tensor& tw = nodes_[w.id].value;
    if (t1.rank() != 2 || t1.rows() != 1 || t2.rank() != 2 || t2.rows() != 1 || tw.rank() != 3)
        throw std::invalid_argument("bilinear: expects row vectors and a rank-3 weight");
    const std::size_t d1 = t1.cols(), d2 = t2.cols(), classes = tw.shape[0];
    if (tw.shape[1] != d1 || tw.shape[2] != d2) throw std::invalid_argument("bilinear: weight shape mismatch");
    Tensor out = Tensor::zeros({1, classes});
    for (std::size_t y = 0; y < classes; ++y) {
        double acc = 0.0;
        const double* wy = tw.data.data() + y * d1 * d2;
        for (std::size_t a = 0; a < d1; ++a)
            for (std::size_t b = 0; b < d2; ++b) acc += t1.data[a] * wy[a * d2 + b] * t2.data[b];
        out.data[y] = acc;
    }
    Node n;
    n.op = Op::kBilinear;
    n.parent = {z1.id, z2.id, w.id};
    n.needs_grad = nodes_[z1.id].needs_grad || nodes_[z2.id].needs_grad || nodes_[w.id].needs_grad;
    n.value = std::move(out);
    n.grad.assign(classes, 0.0);
    return {push(std::move(n))};
}

Var Tape::custom(Tensor value, std::vector<Var> parents, std::function<void(Tape&, int)> backward) {
    Node n;
    n.op = Op::kCustom;
    n.custom_parents.reserve(parents.size());
    for (Var p : parents) {
        n.custom_parents.push_back(p.id);
        n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
    }
    n.value = std::move(value);
    n.grad.assign(n.value.size(), 0.0);
    n.custom_backward = std::move(backward);
    return {push(std::move(n))};
}

void Tape::backward(Var loss) {
    if (!loss.valid() || nodes_[loss.id].value.size() != 1)
        throw std::invalid_argument("backward: loss must be a scalar on the tape");
    nodes_[loss.id].grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) backward_node(i);
}

void Tape::backward_node(int id) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    auto pgrad = [&](int slot) -> std::vector<double>& { return nodes_[n.parent[slot]].grad; };
    auto pval = [&](int slot) -> const Tensor& { return nodes_[n.parent[slot]].value; };
    switch (n.op) {
        case Op::kLeaf:
            if (n.bound && n.bound->requires_grad)
                for (std::size_t i = 0; i < n.grad.size(); ++i) n.bound->grad[i] += n.grad[i];
            break;
        case Op::kConst:
            break;
        case Op::kAdd: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i];
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(1)[i] += n.grad[i];
            break;
        }
        case Op::kSub: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i];
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(1)[i] -= n.grad[i];
            break;
        }
        case Op::kMul: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i] * pval(1).data[i];
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(1)[i] += n.grad[i] * pval(0).data[i];
            break;
        }
        case Op::kScale: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i] * n.scalar;
            break;
        }
        case Op::kMatmul: {
            const Tensor& a = pval(0);
            const Tensor& b = pval(1);
            kernels::matmul_nt(n.grad.data(), b.data.data(), pgrad(0).data(), a.rows(), b.cols(), a.cols(), true);
            kernels::matmul_tn(a.data.data(), n.grad.data(), pgrad(1).data(), a.rows(), a.cols(), b.cols(), true);
            break;
        }
        case Op::kAddRowVec: {
            const Tensor& m = pval(0);
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i];
            for (std::size_t i = 0; i < m.rows(); ++i)
                for (std::size_t j = 0; j < m.cols(); ++j) pgrad(1)[j] += n.grad[i * m.cols() + j];
            break;
        }
        case Op::kRelu:
            kernels::relu_backward(pval(0).data.data(), n.grad.data(), pgrad(0).data(), n.grad.size());
            break;
        case Op::kSoftmaxRows:
            kernels::softmax_rows_backward(n.value.data.data(), n.grad.data(), pgrad(0).data(),
                                           n.value.rows(), n.value.cols());
            break;
        case Op::kLogFloored: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                double p = pval(0).data[i];
                if (p > kLogEps) pgrad(0)[i] += n.grad[i] / p;
            }
            break;
        }
        case Op::kSum: {
            for (std::size_t i = 0; i < pgrad(0).size(); ++i) pgrad(0)[i] += n.grad[0];
            break;
        }
        case Op::kMean: {
            const double inv = 1.0 / static_cast<double>(pgrad(0).size());
            for (std::size_t i = 0; i < pgrad(0).size(); ++i) pgrad(0)[i] += n.grad[0] * inv;
            break;
        }
        case Op::kPick:
            pgrad(0)[n.index] += n.grad[0];
            break;
        case Op::kNll: {
            double p = pval(0).data[0];
            if (p > kLogEps) pgrad(0)[0] += n.grad[0] * (-1.0 / p);
            break;
        }
        case Op::kKlToConst: {
            for (std::size_t i = 0; i < n.payload.size(); ++i) {
                double p = pval(0).data[i];
                pgrad(0)[i] += n.grad[0] * (floored_log(p) - floored_log(n.payload[i]) + 1.0);
            }
            break;
        }
        case Op::kMseToConst: {
            const double inv = 2.0 / static_cast<double>(n.payload.size());
            for (std::size_t i = 0; i < n.payload.size(); ++i)
                pgrad(0)[i] += n.grad[0] * inv * (pval(0).data[i] - n.payload[i]);
            break;
        }
        case Op::kMulConst: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i] * n.payload[i];
            break;
        }
        case Op::kSubConst: {
            for (std::size_t i = 0; i < n.grad.size(); ++i) pgrad(0)[i] += n.grad[i];
            break;
        }
        case Op::kBilinear: {
            const Tensor& z1 = pval(0);
            const Tensor& z2 = pval(1);
            const Tensor& w = pval(2);
            const std::size_t d1 = z1.cols(), d2 = z2.cols(), classes = w.shape[0];
            for (std::size_t y = 0; y < classes; ++y) {
                const double gy = n.grad[y];
                if (gy == 0.0) continue;
                const double* wy = w.data.data() + y * d1 * d2;
                double* dwy = nodes_[n.parent[2]].grad.data() + y * d1 * d2;
                for (std::size_t a = 0; a < d1; ++a) {
                    for (std::size_t b = 0; b < d2; ++b) {
                        pgrad(0)[a] += gy * wy[a * d2 + b] * z2.data[b];
                        pgrad(1)[b] += gy * wy[a * d2 + b] * z1.data[a];
                        dwy[a * d2 + b] += gy * z1.data[a] * z2.data[b];
                    }
                }
            }
            break;
        }
        case Op::kCustom:
            n.custom_backward(*this, id);
            break;
    }
}

}  // namespace nesycl
