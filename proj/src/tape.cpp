// SPDX-License-Identifier: Apache-2.0
#include "tridf/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tridf {

namespace {

// C += A(m,k) * B(k,n)
void mm_nn(const double* A, const double* B, double* C, std::size_t m,
           std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = a[l];
            if (av == 0.0) continue;
            const double* b = B + l * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

// C += A(m,k) * B(n,k)^T
void mm_nt(const double* A, const double* B, double* C, std::size_t m,
           std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        double* c = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* b = B + j * k;
            double acc = 0.0;
            for (std::size_t l = 0; l < k; ++l) acc += a[l] * b[l];
            c[j] += acc;
        }
    }
}

// C += A(k,m)^T * B(k,n)
void mm_tn(const double* A, const double* B, double* C, std::size_t m,
           std::size_t k, std::size_t n) {
    for (std::size_t l = 0; l < k; ++l) {
        const double* a = A + l * m;
        const double* b = B + l * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = a[i];
            if (av == 0.0) continue;
            double* c = C + i * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += av * b[j];
        }
    }
}

}  // namespace

Value Tape::push(TensorF val, bool needs_grad, std::function<void()> back) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

Tape::Node& Tape::node(Value v) {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::logic_error("Tape: invalid value handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

const Tape::Node& Tape::node(Value v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
        throw std::logic_error("Tape: invalid value handle");
    return nodes_[static_cast<std::size_t>(v.id)];
}

TensorF& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) n.grad = TensorF(n.val.shape, 0.0);
    return n.grad;
}

void Tape::check_finite(const TensorF& t, const char* op) const {
    if (!t.all_finite())
        throw std::runtime_error(std::string("Tape: non-finite result in ") + op);
}

const TensorF& Tape::value(Value v) const { return node(v).val; }
bool Tape::requires_grad(Value v) const { return node(v).needs_grad; }

const TensorF& Tape::grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.data.empty())
        throw std::runtime_error("Tape: gradient not available (run backward)");
    return n.grad;
}

Value Tape::constant(TensorF t) {
    check_finite(t, "constant");
    return push(std::move(t), false, nullptr);
}

Value Tape::constant_scalar(double v) {
    return constant(TensorF({1}, std::vector<double>{v}));
}

Value Tape::param(const TensorF& t) {
    check_finite(t, "param");
    return push(t, true, nullptr);
}

Value Tape::add(Value a, Value b) {
    const TensorF& ta = node(a).val;
    const TensorF& tb = node(b).val;
    TensorF out;
    enum class Mode { Same, ScalarB, ScalarA, BiasRow } mode;
    if (same_shape(ta, tb)) {
        mode = Mode::Same;
        out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += tb.data[i];
    } else if (tb.is_scalar()) {
        mode = Mode::ScalarB;
        out = ta;
        for (double& v : out.data) v += tb.data[0];
    } else if (ta.is_scalar()) {
        mode = Mode::ScalarA;
        out = tb;
        for (double& v : out.data) v += ta.data[0];
    } else if (tb.shape.size() == 1 && ta.shape.size() == 2 &&
               tb.shape[0] == ta.shape[1]) {
        mode = Mode::BiasRow;
        out = ta;
        const std::size_t r = ta.rows(), c = ta.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] += tb.data[j];
    } else {
        throw std::invalid_argument("Tape::add shape mismatch " + shape_str(ta) +
                                    " vs " + shape_str(tb));
    }
    check_finite(out, "add");
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.id, ib = b.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, ib, io, mode]() {
            const TensorF& g = nodes_[io].grad;
            if (nodes_[ia].needs_grad) {
                TensorF& ga = grad_buf(ia);
                if (mode == Mode::ScalarA) {
                    for (double v2 : g.data) ga.data[0] += v2;
                } else {
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        ga.data[i] += g.data[i];
                }
            }
            if (nodes_[ib].needs_grad) {
                TensorF& gb = grad_buf(ib);
                if (mode == Mode::ScalarB) {
                    for (double v2 : g.data) gb.data[0] += v2;
                } else if (mode == Mode::BiasRow) {
                    const std::size_t c = gb.numel();
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        gb.data[i % c] += g.data[i];
                } else {
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        gb.data[i] += g.data[i];
                }
            }
        };
    }
    return v;
}

Value Tape::sub(Value a, Value b) {
    Value nb = affine(b, -1.0, 0.0);
    return add(a, nb);
}

Value Tape::mul(Value a, Value b) {
    const TensorF& ta = node(a).val;
    const TensorF& tb = node(b).val;
    enum class Mode { Same, ScalarB, ScalarA, ColA } mode;
    TensorF out;
    if (same_shape(ta, tb)) {
        mode = Mode::Same;
        out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= tb.data[i];
    } else if (tb.is_scalar()) {
        mode = Mode::ScalarB;
        out = ta;
        for (double& v : out.data) v *= tb.data[0];
    } else if (ta.is_scalar()) {
        mode = Mode::ScalarA;
        out = tb;
        for (double& v : out.data) v *= ta.data[0];
    } else if (ta.shape.size() == 2 && ta.shape[1] == 1 &&
               tb.shape.size() == 2 && tb.shape[0] == ta.shape[0]) {
        // [K,1] column against [K,C]
        mode = Mode::ColA;
        out = tb;
        const std::size_t r = tb.rows(), c = tb.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) out.data[i * c + j] *= ta.data[i];
    } else {
        throw std::invalid_argument("Tape::mul shape mismatch " + shape_str(ta) +
                                    " vs " + shape_str(tb));
    }
    check_finite(out, "mul");
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.id, ib = b.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, ib, io, mode]() {
            const TensorF& g = nodes_[io].grad;
            const TensorF& ta2 = nodes_[ia].val;
            const TensorF& tb2 = nodes_[ib].val;
            if (nodes_[ia].needs_grad) {
                TensorF& ga = grad_buf(ia);
                switch (mode) {
                    case Mode::Same:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[i] += g.data[i] * tb2.data[i];
                        break;
                    case Mode::ScalarB:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[i] += g.data[i] * tb2.data[0];
                        break;
                    case Mode::ScalarA:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[0] += g.data[i] * tb2.data[i];
                        break;
                    case Mode::ColA: {
                        const std::size_t c = tb2.cols();
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[i / c] += g.data[i] * tb2.data[i];
                        break;
                    }
                }
            }
            if (nodes_[ib].needs_grad) {
                TensorF& gb = grad_buf(ib);
                switch (mode) {
                    case Mode::Same:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[i] += g.data[i] * ta2.data[i];
                        break;
                    case Mode::ScalarB:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[0] += g.data[i] * ta2.data[i];
                        break;
                    case Mode::ScalarA:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[i] += g.data[i] * ta2.data[0];
                        break;
                    case Mode::ColA: {
                        const std::size_t c = gb.cols();
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[i] += g.data[i] * ta2.data[i / c];
                        break;
                    }
                }
            }
        };
    }
    return v;
}

Value Tape::div(Value a, Value b) {
    const TensorF& ta = node(a).val;
    const TensorF& tb = node(b).val;
    enum class Mode { Same, ScalarB, ScalarA } mode;
    TensorF out;
    if (same_shape(ta, tb)) {
        mode = Mode::Same;
        out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] /= tb.data[i];
    } else if (tb.is_scalar()) {
        mode = Mode::ScalarB;
        out = ta;
        for (double& v : out.data) v /= tb.data[0];
    } else if (ta.is_scalar()) {
        mode = Mode::ScalarA;
        out = tb;
        for (double& v : out.data) v = ta.data[0] / v;
    } else {
        throw std::invalid_argument("Tape::div shape mismatch " + shape_str(ta) +
                                    " vs " + shape_str(tb));
    }
    check_finite(out, "div");
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.id, ib = b.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, ib, io, mode]() {
            const TensorF& g = nodes_[io].grad;
            const TensorF& ta2 = nodes_[ia].val;
            const TensorF& tb2 = nodes_[ib].val;
            if (nodes_[ia].needs_grad) {
                TensorF& ga = grad_buf(ia);
                switch (mode) {
                    case Mode::Same:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[i] += g.data[i] / tb2.data[i];
                        break;
                    case Mode::ScalarB:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[i] += g.data[i] / tb2.data[0];
                        break;
                    case Mode::ScalarA:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            ga.data[0] += g.data[i] / tb2.data[i];
                        break;
                }
            }
            if (nodes_[ib].needs_grad) {
                TensorF& gb = grad_buf(ib);
                switch (mode) {
                    case Mode::Same:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[i] -= g.data[i] * ta2.data[i] /
                                          (tb2.data[i] * tb2.data[i]);
                        break;
                    case Mode::ScalarB:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[0] -= g.data[i] * ta2.data[i] /
                                          (tb2.data[0] * tb2.data[0]);
                        break;
                    case Mode::ScalarA:
                        for (std::size_t i = 0; i < g.numel(); ++i)
                            gb.data[i] -= g.data[i] * ta2.data[0] /
                                          (tb2.data[i] * tb2.data[i]);
                        break;
                }
            }
        };
    }
    return v;
}

Value Tape::matmul(Value a, Value b) {
    const TensorF& ta = node(a).val;
    const TensorF& tb = node(b).val;
    if (ta.shape.size() != 2 || tb.shape.size() != 2 ||
        ta.shape[1] != tb.shape[0])
        throw std::invalid_argument("Tape::matmul shape mismatch " +
                                    shape_str(ta) + " x " + shape_str(tb));
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    TensorF out({m, n}, 0.0);
    mm_nn(ta.data.data(), tb.data.data(), out.data.data(), m, k, n);
    check_finite(out, "matmul");
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.id, ib = b.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, ib, io, m, k, n]() {
            const TensorF& g = nodes_[io].grad;
            if (nodes_[ia].needs_grad) {
                TensorF& ga = grad_buf(ia);
                mm_nt(g.data.data(), nodes_[ib].val.data.data(), ga.data.data(),
                      m, n, k);
            }
            if (nodes_[ib].needs_grad) {
                TensorF& gb = grad_buf(ib);
                mm_tn(nodes_[ia].val.data.data(), g.data.data(), gb.data.data(),
                      k, m, n);
            }
        };
    }
    return v;
}

Value Tape::affine(Value x, double scale, double shift) {
    const TensorF& tx = node(x).val;
    TensorF out = tx;
    for (double& v : out.data) v = scale * v + shift;
    check_finite(out, "affine");
    bool ng = node(x).needs_grad;
    int ix = x.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ix, io, scale]() {
            const TensorF& g = nodes_[io].grad;
            TensorF& gx = grad_buf(ix);
            for (std::size_t i = 0; i < g.numel(); ++i)
                gx.data[i] += scale * g.data[i];
        };
    }
    return v;
}

Value Tape::sum(Value a) {
    const TensorF& ta = node(a).val;
    double s = 0.0;
    for (double v : ta.data) s += v;
    TensorF out({1}, std::vector<double>{s});
    check_finite(out, "sum");
    bool ng = node(a).needs_grad;
    int ia = a.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, io]() {
            const double g = nodes_[io].grad.data[0];
            TensorF& ga = grad_buf(ia);
            for (double& v2 : ga.data) v2 += g;
        };
    }
    return v;
}

Value Tape::mean(Value a) {
    const std::size_t n = node(a).val.numel();
    return affine(sum(a), 1.0 / static_cast<double>(n), 0.0);
}

Value Tape::unary(Value a, const char* name,
                  const std::function<double(double)>& f,
                  const std::function<double(double, double)>& df) {
    const TensorF& ta = node(a).val;
    TensorF out = ta;
    for (double& v : out.data) v = f(v);
    check_finite(out, name);
    bool ng = node(a).needs_grad;
    int ia = a.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, io, df]() {
            const TensorF& g = nodes_[io].grad;
            const TensorF& x = nodes_[ia].val;
            const TensorF& y = nodes_[io].val;
            TensorF& ga = grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i)
                ga.data[i] += g.data[i] * df(x.data[i], y.data[i]);
        };
    }
    return v;
}

Value Tape::exp_(Value a) {
    return unary(a, "exp", [](double x) { return std::exp(x); },
                 [](double, double y) { return y; });
}

Value Tape::log_(Value a) {
    return unary(a, "log", [](double x) { return std::log(x); },
                 [](double x, double) { return 1.0 / x; });
}

Value Tape::sin_(Value a) {
    return unary(a, "sin", [](double x) { return std::sin(x); },
                 [](double x, double) { return std::cos(x); });
}

Value Tape::cos_(Value a) {
    return unary(a, "cos", [](double x) { return std::cos(x); },
                 [](double x, double) { return -std::sin(x); });
}

Value Tape::relu(Value a) {
    // subgradient 0 at the kink
    return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value Tape::softplus(Value a) {
    return unary(a, "softplus",
                 [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                 [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Value Tape::sigmoid(Value a) {
    return unary(a, "sigmoid",
                 [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Value Tape::abs_(Value a) {
    return unary(a, "abs", [](double x) { return std::fabs(x); },
                 [](double x, double) {
                     return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                 });
}

Value Tape::square(Value a) {
    return unary(a, "square", [](double x) { return x * x; },
                 [](double x, double) { return 2.0 * x; });
}

Value Tape::clamp(Value a, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("Tape::clamp lo > hi");
    return unary(a, "clamp",
                 [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                 [lo, hi](double x, double) {
                     return (x > lo && x < hi) ? 1.0 : 0.0;
                 });
}

Value Tape::concat_cols(Value a, Value b) {
    const TensorF& ta = node(a).val;
    const TensorF& tb = node(b).val;
    if (ta.shape.size() != 2 || tb.shape.size() != 2 ||
        ta.shape[0] != tb.shape[0])
        throw std::invalid_argument("Tape::concat_cols shape mismatch");
    const std::size_t r = ta.shape[0], ca = ta.shape[1], cb = tb.shape[1];
    TensorF out({r, ca + cb}, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(&ta.data[i * ca], ca, &out.data[i * (ca + cb)]);
        std::copy_n(&tb.data[i * cb], cb, &out.data[i * (ca + cb) + ca]);
    }
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.id, ib = b.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, ib, io, r, ca, cb]() {
            const TensorF& g = nodes_[io].grad;
            if (nodes_[ia].needs_grad) {
                TensorF& ga = grad_buf(ia);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < ca; ++j)
                        ga.data[i * ca + j] += g.data[i * (ca + cb) + j];
            }
            if (nodes_[ib].needs_grad) {
                TensorF& gb = grad_buf(ib);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < cb; ++j)
                        gb.data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
            }
        };
    }
    return v;
}

Value Tape::slice_cols(Value a, std::size_t c0, std::size_t c1) {
    const TensorF& ta = node(a).val;
    if (ta.shape.size() != 2 || c1 > ta.shape[1] || c0 >= c1)
        throw std::invalid_argument("Tape::slice_cols bad range");
    const std::size_t r = ta.shape[0], c = ta.shape[1], w = c1 - c0;
    TensorF out({r, w}, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(&ta.data[i * c + c0], w, &out.data[i * w]);
    bool ng = node(a).needs_grad;
    int ia = a.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, io, r, c, c0, w]() {
            const TensorF& g = nodes_[io].grad;
            TensorF& ga = grad_buf(ia);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    ga.data[i * c + c0 + j] += g.data[i * w + j];
        };
    }
    return v;
}

Value Tape::gather_rows(Value a, std::vector<std::size_t> idx) {
    const TensorF& ta = node(a).val;
    if (ta.shape.size() != 2)
        throw std::invalid_argument("Tape::gather_rows needs 2-D input");
    const std::size_t c = ta.shape[1];
    for (std::size_t i : idx)
        if (i >= ta.shape[0])
            throw std::invalid_argument("Tape::gather_rows index out of range");
    TensorF out({idx.size(), c}, 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(&ta.data[idx[i] * c], c, &out.data[i * c]);
    bool ng = node(a).needs_grad;
    int ia = a.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, io, idx = std::move(idx), c]() {
            const TensorF& g = nodes_[io].grad;
            TensorF& ga = grad_buf(ia);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < c; ++j)
                    ga.data[idx[i] * c + j] += g.data[i * c + j];
        };
    }
    return v;
}

Value Tape::scatter_rows(Value a, std::vector<std::size_t> idx,
                         std::size_t total_rows) {
    const TensorF& ta = node(a).val;
    if (ta.shape.size() != 2 || ta.shape[0] != idx.size())
        throw std::invalid_argument("Tape::scatter_rows shape mismatch");
    const std::size_t c = ta.shape[1];
    for (std::size_t i : idx)
        if (i >= total_rows)
            throw std::invalid_argument("Tape::scatter_rows index out of range");
    TensorF out({total_rows, c}, 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(&ta.data[i * c], c, &out.data[idx[i] * c]);
    bool ng = node(a).needs_grad;
    int ia = a.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        nodes_.back().back = [this, ia, io, idx = std::move(idx), c]() {
            const TensorF& g = nodes_[io].grad;
            TensorF& ga = grad_buf(ia);
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < c; ++j)
                    ga.data[i * c + j] += g.data[idx[i] * c + j];
        };
    }
    return v;
}

Value Tape::composite(Value sigma, Value rgb, const TensorF& deltas,
                      const TensorF& ts, const std::array<double, 3>& bg,
                      std::size_t n_rays, std::size_t n_samples) {
    const TensorF& s = node(sigma).val;
    const TensorF& c = node(rgb).val;
    const std::size_t total = n_rays * n_samples;
    if (s.numel() != total || c.rows() != total || c.cols() != 3 ||
        deltas.numel() != total || ts.numel() != total)
        throw std::invalid_argument("Tape::composite shape mismatch");
    for (double v : s.data)
        if (v < 0.0)
            throw std::invalid_argument("Tape::composite negative sigma");
    for (double v : deltas.data)
        if (v < 0.0)
            throw std::invalid_argument("Tape::composite negative delta");

    TensorF out({n_rays, 5}, 0.0);
    for (std::size_t r = 0; r < n_rays; ++r) {
        const std::size_t base = r * n_samples;
        double T = 1.0;
        double col[3] = {0, 0, 0};
        double depth = 0.0, opac = 0.0;
        for (std::size_t i = 0; i < n_samples; ++i) {
            const double a = s.data[base + i] * deltas.data[base + i];
            const double w = T * (1.0 - std::exp(-a));
            for (int ch = 0; ch < 3; ++ch)
                col[ch] += w * c.data[(base + i) * 3 + ch];
            depth += w * ts.data[base + i];
            opac += w;
            T *= std::exp(-a);
        }
        for (int ch = 0; ch < 3; ++ch) out.data[r * 5 + ch] = col[ch] + T * bg[ch];
        out.data[r * 5 + 3] = depth;
        out.data[r * 5 + 4] = opac;
    }
    check_finite(out, "composite");

    bool ng = node(sigma).needs_grad || node(rgb).needs_grad;
    int is = sigma.id, ic = rgb.id;
    Value v = push(std::move(out), ng, nullptr);
    int io = v.id;
    if (ng) {
        TensorF d = deltas, t = ts;
        std::array<double, 3> bgc = bg;
        nodes_.back().back = [this, is, ic, io, d = std::move(d),
                              t = std::move(t), bgc, n_rays, n_samples]() {
            const TensorF& g = nodes_[io].grad;
            const TensorF& s2 = nodes_[is].val;
            const TensorF& c2 = nodes_[ic].val;
            const bool gs = nodes_[is].needs_grad;
            const bool gc = nodes_[ic].needs_grad;
            TensorF* gsig = gs ? &grad_buf(is) : nullptr;
            TensorF* grgb = gc ? &grad_buf(ic) : nullptr;
            std::vector<double> w(n_samples), G(n_samples), Ti(n_samples);
            for (std::size_t r = 0; r < n_rays; ++r) {
                const std::size_t base = r * n_samples;
                const double* gr = &g.data[r * 5];
                double T = 1.0;
                for (std::size_t i = 0; i < n_samples; ++i) {
                    const double a = s2.data[base + i] * d.data[base + i];
                    Ti[i] = T;
                    w[i] = T * (1.0 - std::exp(-a));
                    T *= std::exp(-a);
                    // payload derivative: color channels + depth + opacity
                    G[i] = gr[3] * t.data[base + i] + gr[4];
                    for (int ch = 0; ch < 3; ++ch)
                        G[i] += gr[ch] * c2.data[(base + i) * 3 + ch];
                    if (gc) {
                        for (int ch = 0; ch < 3; ++ch)
                            (*grgb).data[(base + i) * 3 + ch] += w[i] * gr[ch];
                    }
                }
                if (!gs) continue;
                const double Tres = T;
                // opacity is a pure sum of weights, so only the background
                // color contributes through the residual transmittance
                const double H = gr[0] * bgc[0] + gr[1] * bgc[1] + gr[2] * bgc[2];
                // suffix sum of w_k * G_k
                double suffix = 0.0;
                for (std::size_t ii = n_samples; ii-- > 0;) {
                    const double a = s2.data[base + ii] * d.data[base + ii];
                    const double da =
                        Ti[ii] * std::exp(-a) * G[ii] - suffix - Tres * H;
                    (*gsig).data[base + ii] += da * d.data[base + ii];
                    suffix += w[ii] * G[ii];
                }
            }
        };
    }
    return v;
}

void Tape::backward(Value scalar_loss) {
    if (backward_done_)
        throw std::runtime_error("Tape: repeated backward without reset");
    const Node& loss = node(scalar_loss);
    if (!loss.val.is_scalar())
        throw std::invalid_argument("Tape::backward: loss must be scalar");
    backward_done_ = true;
    // Make sure every registered leaf has a (possibly zero) gradient buffer.
    for (Node& n : nodes_)
        if (n.needs_grad && n.grad.data.empty()) n.grad = TensorF(n.val.shape, 0.0);
    grad_buf(scalar_loss.id).data[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.back && n.needs_grad && !n.grad.data.empty()) n.back();
    }
}

void Tape::reset_grads() {
    for (Node& n : nodes_) n.grad = TensorF();
    backward_done_ = false;
}

double grad_check(
    const std::function<Value(Tape&, const std::vector<Value>&)>& build,
    const std::vector<TensorF>& params, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be > 0");

    auto eval = [&](const std::vector<TensorF>& p) {
        Tape tape;
        std::vector<Value> vals;
        vals.reserve(p.size());
        for (const TensorF& t : p) vals.push_back(tape.param(t));
        Value loss = build(tape, vals);
        const TensorF& lv = tape.value(loss);
        if (!lv.is_scalar())
            throw std::invalid_argument("grad_check: fn must be scalar-valued");
        if (!lv.all_finite())
            throw std::runtime_error("grad_check: non-finite fn output");
        return lv.data[0];
    };

    // Analytic gradients once.
    Tape tape;
    std::vector<Value> vals;
    for (const TensorF& t : params) vals.push_back(tape.param(t));
    Value loss = build(tape, vals);
    if (!tape.value(loss).all_finite())
        throw std::runtime_error("grad_check: non-finite fn output");
    tape.backward(loss);

    double max_err = 0.0;
    std::vector<TensorF> p = params;
    for (std::size_t pi = 0; pi < p.size(); ++pi) {
        const TensorF& ga = tape.grad(vals[pi]);
        for (std::size_t i = 0; i < p[pi].numel(); ++i) {
            const double orig = p[pi].data[i];
            p[pi].data[i] = orig + eps;
            const double fp = eval(p);
            p[pi].data[i] = orig - eps;
            const double fm = eval(p);
            p[pi].data[i] = orig;
            const double gfd = (fp - fm) / (2.0 * eps);
            const double gad = ga.data[i];
            const double err = std::fabs(gad - gfd) /
                               std::max(1e-8, std::fabs(gad) + std::fabs(gfd));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace tridf
