#include "sgfn/autodiff.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sgfn::ad {

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "[" << t.rows() << "x" << t.cols() << "]";
    return os.str();
}

Parameter::Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    zero_grad();
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

const Tensor& Tape::value(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref != nullptr ? *n.ref : n.value;
}

Var Tape::constant(Tensor value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(double value) {
    Tensor t(1, 1);
    t(0, 0) = value;
    return constant(std::move(t));
}

Var Tape::param(Parameter& p) {
    Node n;
    n.ref = &p.value;
    n.param = &p;
    n.needs_grad = true;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backprop backprop) {
    Node n;
    n.value = std::move(value);
    for (const Var& v : inputs) {
        if (v.tape() != this) {
            throw std::invalid_argument("autodiff: operands recorded on different tapes");
        }
        n.needs_grad = n.needs_grad || needs_grad(v.id());
    }
    if (n.needs_grad) {
        n.backprop = std::move(backprop);
    }
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
    if (root.tape() != this) {
        throw std::invalid_argument("autodiff: root does not belong to this tape");
    }
    const Tensor& rv = root.value();
    if (rv.rows() != 1 || rv.cols() != 1) {
        throw std::invalid_argument("autodiff: backward needs a scalar root, got " + shape_str(rv));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        Node& n = nodes_[i];
        if (n.needs_grad) {
            const Tensor& v = value(static_cast<int>(i));
            n.grad.setZero(v.rows(), v.cols());
        } else {
            n.grad.resize(0, 0);
        }
    }
    if (!nodes_[static_cast<std::size_t>(root.id())].needs_grad) {
        return;
    }
    nodes_[static_cast<std::size_t>(root.id())].grad(0, 0) = 1.0;
    for (int i = root.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad) {
            continue;
        }
        if (n.backprop) {
            n.backprop(*this, i);
        }
        if (n.param != nullptr) {
            n.param->grad += n.grad;
        }
    }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string("autodiff: ") + op + " shape mismatch " + shape_str(a) + " vs " +
                                    shape_str(b));
    }
}

void accumulate(Tape& t, Var v, const Tensor& g) {
    if (t.needs_grad(v.id())) {
        t.grad_mut(v.id()) += g;
    }
}

}  // namespace

Var add(Var a, Var b) {
    require_same_shape("add", a.value(), b.value());
    Tape& t = *a.tape();
    return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& tp, int self) {
        accumulate(tp, a, tp.grad(self));
        accumulate(tp, b, tp.grad(self));
    });
}

Var sub(Var a, Var b) {
    require_same_shape("sub", a.value(), b.value());
    Tape& t = *a.tape();
    return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& tp, int self) {
        accumulate(tp, a, tp.grad(self));
        accumulate(tp, b, -tp.grad(self));
    });
}

Var mul(Var a, Var b) {
    require_same_shape("mul", a.value(), b.value());
    Tape& t = *a.tape();
    Tensor out = a.value().cwiseProduct(b.value());
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(a.id())) {
            tp.grad_mut(a.id()) += g.cwiseProduct(b.value());
        }
        if (tp.needs_grad(b.id())) {
            tp.grad_mut(b.id()) += g.cwiseProduct(a.value());
        }
    });
}

Var square(Var a) {
    Tape& t = *a.tape();
    Tensor out = a.value().array().square().matrix();
    return t.record(std::move(out), {a}, [a](Tape& tp, int self) {
        tp.grad_mut(a.id()) += 2.0 * tp.grad(self).cwiseProduct(a.value());
    });
}

Var scale(Var a, double k) {
    Tape& t = *a.tape();
    return t.record(a.value() * k, {a}, [a, k](Tape& tp, int self) { tp.grad_mut(a.id()) += k * tp.grad(self); });
}

Var add_const(Var a, const Tensor& c) {
    require_same_shape("add_const", a.value(), c);
    Tape& t = *a.tape();
    return t.record(a.value() + c, {a}, [a](Tape& tp, int self) { tp.grad_mut(a.id()) += tp.grad(self); });
}

Var mul_const(Var a, const Tensor& c) {
    require_same_shape("mul_const", a.value(), c);
    Tape& t = *a.tape();
    return t.record(a.value().cwiseProduct(c), {a},
                    [a, c](Tape& tp, int self) { tp.grad_mut(a.id()) += tp.grad(self).cwiseProduct(c); });
}

Var sum(Var a) {
    Tape& t = *a.tape();
    Tensor out(1, 1);
    out(0, 0) = a.value().sum();
    return t.record(std::move(out), {a},
                    [a](Tape& tp, int self) { tp.grad_mut(a.id()).array() += tp.grad(self)(0, 0); });
}

Var mean(Var a) {
    const auto n = static_cast<double>(a.value().size());
    if (n == 0) {
        throw std::invalid_argument("autodiff: mean of an empty tensor");
    }
    Tape& t = *a.tape();
    Tensor out(1, 1);
    out(0, 0) = a.value().sum() / n;
    return t.record(std::move(out), {a},
                    [a, n](Tape& tp, int self) { tp.grad_mut(a.id()).array() += tp.grad(self)(0, 0) / n; });
}

Var matmul(Var a, Var b) {
    if (a.value().cols() != b.value().rows()) {
        throw std::invalid_argument("autodiff: matmul shape mismatch " + shape_str(a.value()) + " vs " +
                                    shape_str(b.value()));
    }
    Tape& t = *a.tape();
    Tensor out = a.value() * b.value();
    return t.record(std::move(out), {a, b}, [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(a.id())) {
            tp.grad_mut(a.id()).noalias() += g * b.value().transpose();
        }
        if (tp.needs_grad(b.id())) {
            tp.grad_mut(b.id()).noalias() += a.value().transpose() * g;
        }
    });
}

Var affine(Var w, Var b, Var x) {
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    const Tensor& xv = x.value();
    if (xv.cols() != wv.rows() || bv.rows() != 1 || bv.cols() != wv.cols()) {
        throw std::invalid_argument("autodiff: affine shape mismatch x" + shape_str(xv) + " W" + shape_str(wv) +
                                    " b" + shape_str(bv));
    }
    Tape& t = *x.tape();
    Tensor out = xv * wv;
    out.rowwise() += bv.row(0);
    return t.record(std::move(out), {w, b, x}, [w, b, x](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(x.id())) {
            tp.grad_mut(x.id()).noalias() += g * w.value().transpose();
        }
        if (tp.needs_grad(w.id())) {
            tp.grad_mut(w.id()).noalias() += x.value().transpose() * g;
        }
        if (tp.needs_grad(b.id())) {
            tp.grad_mut(b.id()) += g.colwise().sum();
        }
    });
}

Var clamp_min(Var x, double lo) {
    Tape& t = *x.tape();
    Tensor out = x.value().cwiseMax(lo);
    return t.record(std::move(out), {x}, [x, lo](Tape& tp, int self) {
        const Tensor& xv = x.value();
        Tensor d = xv.unaryExpr([lo](double v) { return v > lo ? 1.0 : 0.0; });
        tp.grad_mut(x.id()) += tp.grad(self).cwiseProduct(d);
    });
}

Var relu(Var x) { return leaky_relu(x, 0.0); }

Var leaky_relu(Var x, double slope) {
    Tape& t = *x.tape();
    const Tensor& xv = x.value();
    Tensor out = xv.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    return t.record(std::move(out), {x}, [x, slope](Tape& tp, int self) {
        const Tensor& xv2 = x.value();
        Tensor d = xv2.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; });
        tp.grad_mut(x.id()) += tp.grad(self).cwiseProduct(d);
    });
}

Var log_softmax(Var x) {
    Mask all = Mask::Constant(x.rows(), x.cols(), true);
    return masked_log_softmax(x, all);
}

Var masked_log_softmax(Var x, const Mask& mask) {
    const Tensor& xv = x.value();
    if (mask.rows() != xv.rows() || mask.cols() != xv.cols()) {
        throw std::invalid_argument("autodiff: masked_log_softmax mask [" + std::to_string(mask.rows()) + "x" +
                                    std::to_string(mask.cols()) + "] vs logits " + shape_str(xv));
    }
    Tensor out = Tensor::Zero(xv.rows(), xv.cols());
    Tensor probs = Tensor::Zero(xv.rows(), xv.cols());
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < xv.cols(); ++c) {
            if (mask(r, c) && xv(r, c) > mx) {
                mx = xv(r, c);
            }
        }
        if (!std::isfinite(mx)) {
            continue;
        }
        double z = 0.0;
        for (Eigen::Index c = 0; c < xv.cols(); ++c) {
            if (mask(r, c)) {
                z += std::exp(xv(r, c) - mx);
            }
        }
        const double lse = mx + std::log(z);
        for (Eigen::Index c = 0; c < xv.cols(); ++c) {
            if (mask(r, c)) {
                out(r, c) = xv(r, c) - lse;
                probs(r, c) = std::exp(out(r, c));
            }
        }
    }
    Tape& t = *x.tape();
    return t.record(std::move(out), {x}, [x, mask, probs](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(x.id());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            double gs = 0.0;
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                if (mask(r, c)) {
                    gs += g(r, c);
                }
            }
            for (Eigen::Index c = 0; c < g.cols(); ++c) {
                if (mask(r, c)) {
                    gx(r, c) += g(r, c) - probs(r, c) * gs;
                }
            }
        }
    });
}

Var slice_rows(Var x, Eigen::Index begin, Eigen::Index count) {
    const Tensor& xv = x.value();
    if (begin < 0 || count < 0 || begin + count > xv.rows()) {
        throw std::invalid_argument("autodiff: slice_rows [" + std::to_string(begin) + ", +" +
                                    std::to_string(count) + ") out of range for " + shape_str(xv));
    }
    Tape& t = *x.tape();
    Tensor out = xv.middleRows(begin, count);
    return t.record(std::move(out), {x}, [x, begin, count](Tape& tp, int self) {
        tp.grad_mut(x.id()).middleRows(begin, count) += tp.grad(self);
    });
}

Var slice_cols(Var x, Eigen::Index begin, Eigen::Index count) {
    const Tensor& xv = x.value();
    if (begin < 0 || count < 0 || begin + count > xv.cols()) {
        throw std::invalid_argument("autodiff: slice_cols [" + std::to_string(begin) + ", +" +
                                    std::to_string(count) + ") out of range for " + shape_str(xv));
    }
    Tape& t = *x.tape();
    Tensor out = xv.middleCols(begin, count);
    return t.record(std::move(out), {x}, [x, begin, count](Tape& tp, int self) {
        tp.grad_mut(x.id()).middleCols(begin, count) += tp.grad(self);
    });
}

Var gather_rows(Var x, const std::vector<int>& rows) {
    const Tensor& xv = x.value();
    Tensor out(static_cast<Eigen::Index>(rows.size()), xv.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= xv.rows()) {
            throw std::invalid_argument("autodiff: gather_rows index " + std::to_string(rows[i]) +
                                        " out of range for " + shape_str(xv));
        }
        out.row(static_cast<Eigen::Index>(i)) = xv.row(rows[i]);
    }
    Tape& t = *x.tape();
    return t.record(std::move(out), {x}, [x, rows](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(x.id());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            gx.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        }
    });
}

Var gather_cols(Var x, const std::vector<int>& cols) {
    const Tensor& xv = x.value();
    if (static_cast<Eigen::Index>(cols.size()) != xv.rows()) {
        throw std::invalid_argument("autodiff: gather_cols needs one index per row, got " +
                                    std::to_string(cols.size()) + " for " + shape_str(xv));
    }
    Tensor out(xv.rows(), 1);
    for (Eigen::Index r = 0; r < xv.rows(); ++r) {
        const int c = cols[static_cast<std::size_t>(r)];
        if (c < 0 || c >= xv.cols()) {
            throw std::invalid_argument("autodiff: gather_cols index " + std::to_string(c) + " out of range for " +
                                        shape_str(xv));
        }
        out(r, 0) = xv(r, c);
    }
    Tape& t = *x.tape();
    return t.record(std::move(out), {x}, [x, cols](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(x.id());
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            gx(r, cols[static_cast<std::size_t>(r)]) += g(r, 0);
        }
    });
}

Var segment_sum(Var x, const std::vector<int>& seg, int nseg) {
    const Tensor& xv = x.value();
    if (xv.cols() != 1 || static_cast<Eigen::Index>(seg.size()) != xv.rows()) {
        throw std::invalid_argument("autodiff: segment_sum expects a column vector with one segment id per row, got " +
                                    shape_str(xv) + " and " + std::to_string(seg.size()) + " ids");
    }
    Tensor out = Tensor::Zero(nseg, 1);
    for (std::size_t i = 0; i < seg.size(); ++i) {
        if (seg[i] < 0 || seg[i] >= nseg) {
            throw std::invalid_argument("autodiff: segment id " + std::to_string(seg[i]) + " out of range");
        }
        out(seg[i], 0) += xv(static_cast<Eigen::Index>(i), 0);
    }
    Tape& t = *x.tape();
    return t.record(std::move(out), {x}, [x, seg](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad_mut(x.id());
        for (std::size_t i = 0; i < seg.size(); ++i) {
            gx(static_cast<Eigen::Index>(i), 0) += g(seg[i], 0);
        }
    });
}

Var broadcast(Var s, Eigen::Index rows, Eigen::Index cols) {
    if (s.value().size() != 1) {
        throw std::invalid_argument("autodiff: broadcast expects a scalar, got " + shape_str(s.value()));
    }
    Tape& t = *s.tape();
    Tensor out = Tensor::Constant(rows, cols, s.scalar());
    return t.record(std::move(out), {s},
                    [s](Tape& tp, int self) { tp.grad_mut(s.id())(0, 0) += tp.grad(self).sum(); });
}

}  // namespace sgfn::ad
