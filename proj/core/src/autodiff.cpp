#include "aal/autodiff.hpp"

#include "aal/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aal::ad {

// ---------------------------------------------------------------------------
// Value

std::size_t Value::rows() const { return data().rows; }
std::size_t Value::cols() const { return data().cols; }

const Matrix& Value::data() const {
    tape().check(*this);
    return tape_->value(id_);
}

const Matrix& Value::grad() const {
    tape().check(*this);
    return tape_->grad(id_);
}

bool Value::requires_grad() const {
    tape().check(*this);
    return tape_->requires_grad(id_);
}

double Value::item() const {
    const Matrix& m = data();
    if (m.rows != 1 || m.cols != 1) {
        throw ContractError("item() on non-scalar value " + m.shape_string());
    }
    return m.data[0];
}

Tape& Value::tape() const {
    if (tape_ == nullptr) throw ContractError("use of an unbound Value");
    return *tape_;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check(const Value& v) const {
    if (v.tape_ != this) throw ContractError("Value belongs to a different tape");
    if (v.epoch_ != epoch_ || v.id_ >= nodes_.size()) {
        throw ContractError("stale Value used after Tape::reset()");
    }
}

Value Tape::leaf(Matrix m, bool requires_grad) {
    Node node;
    node.op = requires_grad ? "variable" : "constant";
    node.value = std::move(m);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Value(this, nodes_.size() - 1, epoch_);
}

Value Tape::record(std::string op, std::vector<Value> inputs, Matrix output, BackwardFn backward) {
    Node node;
    node.op = std::move(op);
    node.value = std::move(output);
    node.inputs.reserve(inputs.size());
    for (const Value& in : inputs) {
        check(in);
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Value(this, nodes_.size() - 1, epoch_);
}

Matrix* Tape::grad_sink(std::size_t id) {
    Node& n = nodes_[id];
    return n.requires_grad ? &n.grad : nullptr;
}

void Tape::backward(const Value& root) {
    check(root);
    const Matrix& rv = nodes_[root.id()].value;
    if (rv.rows != 1 || rv.cols != 1) {
        throw ContractError("backward() requires a 1x1 root, got " + rv.shape_string());
    }
    for (Node& n : nodes_) {
        if (n.requires_grad) {
            n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
        } else {
            n.grad = Matrix();
        }
    }
    if (!nodes_[root.id()].requires_grad) return;
    nodes_[root.id()].grad.data[0] = 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backward) n.backward(*this, i);
    }
}

void Tape::reset() {
    nodes_.clear();
    ++epoch_;
}

// ---------------------------------------------------------------------------
// Operators

namespace {

Tape& common_tape(const Value& a, const Value& b) {
    if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
    return a.tape();
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

// out = a·b, with optional transposes, accumulated into out.
void gemm_acc(const Matrix& a, bool ta, const Matrix& b, bool tb, Matrix& out) {
    const std::size_t m = ta ? a.cols : a.rows;
    const std::size_t k = ta ? a.rows : a.cols;
    const std::size_t n = tb ? b.rows : b.cols;
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ta ? a(p, i) : a(i, p);
            if (av == 0.0) continue;
            if (tb) {
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * b(j, p);
            } else {
                const double* brow = b.data.data() + p * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Value matmul(const Value& a, const Value& b) {
    Tape& tape = common_tape(a, b);
    const Matrix& am = a.data();
    const Matrix& bm = b.data();
    if (am.cols != bm.rows) {
        throw DimensionError("matmul: inner dimensions differ, " + am.shape_string() + " * " +
                             bm.shape_string());
    }
    Matrix out(am.rows, bm.cols, 0.0);
    gemm_acc(am, false, bm, false, out);
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return tape.record("matmul", {a, b}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (Matrix* ga = t.grad_sink(ia)) gemm_acc(g, false, t.value(ib), true, *ga);
        if (Matrix* gb = t.grad_sink(ib)) gemm_acc(t.value(ia), true, g, false, *gb);
    });
}

Value add(const Value& a, const Value& b) {
    Tape& tape = common_tape(a, b);
    require_same_shape("add", a.data(), b.data());
    Matrix out = a.data();
    const Matrix& bm = b.data();
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] += bm.data[k];
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return tape.record("add", {a, b}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        for (std::size_t in : {ia, ib}) {
            if (Matrix* gi = t.grad_sink(in)) {
                for (std::size_t k = 0; k < g.size(); ++k) gi->data[k] += g.data[k];
            }
        }
    });
}

Value sub(const Value& a, const Value& b) {
    Tape& tape = common_tape(a, b);
    require_same_shape("sub", a.data(), b.data());
    Matrix out = a.data();
    const Matrix& bm = b.data();
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] -= bm.data[k];
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return tape.record("sub", {a, b}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (Matrix* ga = t.grad_sink(ia)) {
            for (std::size_t k = 0; k < g.size(); ++k) ga->data[k] += g.data[k];
        }
        if (Matrix* gb = t.grad_sink(ib)) {
            for (std::size_t k = 0; k < g.size(); ++k) gb->data[k] -= g.data[k];
        }
    });
}

Value add_row(const Value& x, const Value& row) {
    Tape& tape = common_tape(x, row);
    const Matrix& xm = x.data();
    const Matrix& rm = row.data();
    if (rm.rows != 1 || rm.cols != xm.cols) {
        throw DimensionError("add_row: cannot broadcast " + rm.shape_string() + " over " +
                             xm.shape_string());
    }
    Matrix out = xm;
    for (std::size_t i = 0; i < out.rows; ++i) {
        auto r = out.row(i);
        for (std::size_t j = 0; j < out.cols; ++j) r[j] += rm.data[j];
    }
    const std::size_t ix = x.id();
    const std::size_t ir = row.id();
    return tape.record("add_row", {x, row}, std::move(out), [ix, ir](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (Matrix* gx = t.grad_sink(ix)) {
            for (std::size_t k = 0; k < g.size(); ++k) gx->data[k] += g.data[k];
        }
        if (Matrix* gr = t.grad_sink(ir)) {
            for (std::size_t i = 0; i < g.rows; ++i) {
                auto r = g.row(i);
                for (std::size_t j = 0; j < g.cols; ++j) gr->data[j] += r[j];
            }
        }
    });
}

Value mul(const Value& a, const Value& b) {
    Tape& tape = common_tape(a, b);
    require_same_shape("mul", a.data(), b.data());
    Matrix out = a.data();
    const Matrix& bm = b.data();
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= bm.data[k];
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    return tape.record("mul", {a, b}, std::move(out), [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (Matrix* ga = t.grad_sink(ia)) {
            const Matrix& bv = t.value(ib);
            for (std::size_t k = 0; k < g.size(); ++k) ga->data[k] += g.data[k] * bv.data[k];
        }
        if (Matrix* gb = t.grad_sink(ib)) {
            const Matrix& av = t.value(ia);
            for (std::size_t k = 0; k < g.size(); ++k) gb->data[k] += g.data[k] * av.data[k];
        }
    });
}

Value scale(const Value& x, double s) { return affine(x, s, 0.0); }

Value affine(const Value& x, double a, double b) {
    Matrix out = x.data();
    for (double& v : out.data) v = a * v + b;
    const std::size_t ix = x.id();
    return x.tape().record("affine", {x}, std::move(out), [ix, a](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            for (std::size_t k = 0; k < g.size(); ++k) gx->data[k] += a * g.data[k];
        }
    });
}

Value relu(const Value& x) {
    Matrix out = x.data();
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    const std::size_t ix = x.id();
    return x.tape().record("relu", {x}, std::move(out), [ix](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            const Matrix& in = t.value(ix);
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (in.data[k] > 0.0) gx->data[k] += g.data[k];
            }
        }
    });
}

Value sigmoid(const Value& x) {
    Matrix out = x.data();
    for (double& v : out.data) v = stable_sigmoid(v);
    const std::size_t ix = x.id();
    return x.tape().record("sigmoid", {x}, std::move(out), [ix](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            const Matrix& y = t.value(self);
            for (std::size_t k = 0; k < g.size(); ++k) {
                gx->data[k] += g.data[k] * y.data[k] * (1.0 - y.data[k]);
            }
        }
    });
}

Value softmax_rows(const Value& x) {
    const Matrix& xm = x.data();
    if (xm.cols == 0) throw DimensionError("softmax_rows: zero columns");
    Matrix out(xm.rows, xm.cols);
    for (std::size_t i = 0; i < xm.rows; ++i) {
        auto in = xm.row(i);
        auto o = out.row(i);
        double mx = in[0];
        for (double v : in) {
            if (!std::isfinite(v)) throw NumericError("softmax_rows: non-finite input");
            mx = std::max(mx, v);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            total += o[j];
        }
        for (double& v : o) v /= total;
    }
    const std::size_t ix = x.id();
    return x.tape().record("softmax_rows", {x}, std::move(out), [ix](Tape& t, std::size_t self) {
        Matrix* gx = t.grad_sink(ix);
        if (gx == nullptr) return;
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        for (std::size_t i = 0; i < g.rows; ++i) {
            auto gr = g.row(i);
            auto yr = y.row(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < g.cols; ++j) dot += gr[j] * yr[j];
            auto out_row = gx->row(i);
            for (std::size_t j = 0; j < g.cols; ++j) out_row[j] += yr[j] * (gr[j] - dot);
        }
    });
}

Value log_clamped(const Value& x, double floor) {
    Matrix out = x.data();
    for (double& v : out.data) v = std::log(std::max(v, floor));
    const std::size_t ix = x.id();
    return x.tape().record("log", {x}, std::move(out), [ix, floor](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            const Matrix& in = t.value(ix);
            for (std::size_t k = 0; k < g.size(); ++k) {
                if (in.data[k] > floor) gx->data[k] += g.data[k] / in.data[k];
            }
        }
    });
}

Value grad_reverse(const Value& x, double lambda) {
    if (!(lambda >= 0.0)) throw ContractError("grad_reverse: lambda must be >= 0");
    const std::size_t ix = x.id();
    return x.tape().record("grad_reverse", {x}, x.data(), [ix, lambda](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            for (std::size_t k = 0; k < g.size(); ++k) gx->data[k] -= lambda * g.data[k];
        }
    });
}

Value detach(const Value& x) { return x.tape().constant(x.data()); }

Value dropout(const Value& x, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout: rate must lie in [0,1)");
    const Matrix& xm = x.data();
    Matrix mask(xm.rows, xm.cols, 1.0);
    if (rate > 0.0) {
        std::mt19937_64 gen(seed);
        const double keep_scale = 1.0 / (1.0 - rate);
        for (double& m : mask.data) {
            const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            m = u >= rate ? keep_scale : 0.0;
        }
    }
    Matrix out = xm;
    for (std::size_t k = 0; k < out.size(); ++k) out.data[k] *= mask.data[k];
    const std::size_t ix = x.id();
    return x.tape().record("dropout", {x}, std::move(out),
                           [ix, mask = std::move(mask)](Tape& t, std::size_t self) {
                               if (Matrix* gx = t.grad_sink(ix)) {
                                   const Matrix& g = t.grad(self);
                                   for (std::size_t k = 0; k < g.size(); ++k) {
                                       gx->data[k] += g.data[k] * mask.data[k];
                                   }
                               }
                           });
}

Value outer_flatten(const Value& f, const Value& p) {
    Tape& tape = common_tape(f, p);
    const Matrix& fm = f.data();
    const Matrix& pm = p.data();
    if (fm.rows != pm.rows) {
        throw DimensionError("outer_flatten: row counts differ, " + fm.shape_string() + " vs " +
                             pm.shape_string());
    }
    const std::size_t d = fm.cols;
    const std::size_t c = pm.cols;
    Matrix out(fm.rows, d * c);
    for (std::size_t i = 0; i < fm.rows; ++i) {
        auto fr = fm.row(i);
        auto pr = pm.row(i);
        auto o = out.row(i);
        for (std::size_t j = 0; j < c; ++j) {
            for (std::size_t k = 0; k < d; ++k) o[j * d + k] = pr[j] * fr[k];
        }
    }
    const std::size_t ifeat = f.id();
    const std::size_t iprob = p.id();
    return tape.record("outer_flatten", {f, p}, std::move(out),
                       [ifeat, iprob, d, c](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           const Matrix& fv = t.value(ifeat);
                           const Matrix& pv = t.value(iprob);
                           Matrix* gf = t.grad_sink(ifeat);
                           Matrix* gp = t.grad_sink(iprob);
                           for (std::size_t i = 0; i < g.rows; ++i) {
                               auto gr = g.row(i);
                               for (std::size_t j = 0; j < c; ++j) {
                                   double acc_p = 0.0;
                                   for (std::size_t k = 0; k < d; ++k) {
                                       const double gv = gr[j * d + k];
                                       if (gf) (*gf)(i, k) += pv(i, j) * gv;
                                       acc_p += fv(i, k) * gv;
                                   }
                                   if (gp) (*gp)(i, j) += acc_p;
                               }
                           }
                       });
}

Value slice_rows(const Value& x, std::size_t begin, std::size_t end) {
    Matrix out = take_rows(x.data(), begin, end);
    const std::size_t ix = x.id();
    return x.tape().record("slice_rows", {x}, std::move(out), [ix, begin](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const Matrix& g = t.grad(self);
            const std::size_t offset = begin * g.cols;
            for (std::size_t k = 0; k < g.size(); ++k) gx->data[offset + k] += g.data[k];
        }
    });
}

Value concat_rows(const Value& a, const Value& b) {
    Tape& tape = common_tape(a, b);
    const Matrix& am = a.data();
    const Matrix& bm = b.data();
    if (am.cols != bm.cols) {
        throw DimensionError("concat_rows: column counts differ, " + am.shape_string() + " vs " +
                             bm.shape_string());
    }
    Matrix out(am.rows + bm.rows, am.cols);
    std::copy(am.data.begin(), am.data.end(), out.data.begin());
    std::copy(bm.data.begin(), bm.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(am.size()));
    const std::size_t ia = a.id();
    const std::size_t ib = b.id();
    const std::size_t split = am.size();
    return tape.record("concat_rows", {a, b}, std::move(out), [ia, ib, split](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (Matrix* ga = t.grad_sink(ia)) {
            for (std::size_t k = 0; k < split; ++k) ga->data[k] += g.data[k];
        }
        if (Matrix* gb = t.grad_sink(ib)) {
            for (std::size_t k = split; k < g.size(); ++k) gb->data[k - split] += g.data[k];
        }
    });
}

Value sum(const Value& x) {
    double total = 0.0;
    for (double v : x.data().data) total += v;
    const std::size_t ix = x.id();
    return x.tape().record("sum", {x}, Matrix(1, 1, total), [ix](Tape& t, std::size_t self) {
        if (Matrix* gx = t.grad_sink(ix)) {
            const double g = t.grad(self).data[0];
            for (double& v : gx->data) v += g;
        }
    });
}

Value weighted_sum(const Value& x, std::span<const double> weights) {
    const Matrix& xm = x.data();
    if (weights.size() != xm.size()) {
        throw DimensionError("weighted_sum: " + std::to_string(weights.size()) +
                             " weights for value " + xm.shape_string());
    }
    double total = 0.0;
    for (std::size_t k = 0; k < xm.size(); ++k) total += weights[k] * xm.data[k];
    const std::size_t ix = x.id();
    std::vector<double> w(weights.begin(), weights.end());
    return x.tape().record("weighted_sum", {x}, Matrix(1, 1, total),
                           [ix, w = std::move(w)](Tape& t, std::size_t self) {
                               if (Matrix* gx = t.grad_sink(ix)) {
                                   const double g = t.grad(self).data[0];
                                   for (std::size_t k = 0; k < w.size(); ++k) gx->data[k] += g * w[k];
                               }
                           });
}

Value weighted_nll(const Value& logp, std::span<const int> labels, std::span<const double> weights) {
    const Matrix& lm = logp.data();
    if (labels.size() != lm.rows || weights.size() != lm.rows) {
        throw DimensionError("weighted_nll: " + std::to_string(labels.size()) + " labels and " +
                             std::to_string(weights.size()) + " weights for " + lm.shape_string());
    }
    double wsum = 0.0;
    for (std::size_t i = 0; i < lm.rows; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= lm.cols) {
            throw ContractError("weighted_nll: label " + std::to_string(labels[i]) +
                                " outside [0," + std::to_string(lm.cols) + ")");
        }
        if (!(weights[i] >= 0.0)) throw ContractError("weighted_nll: negative weight");
        wsum += weights[i];
    }
    if (!(wsum > 0.0)) {
        throw ContractError("weighted_nll: degenerate batch, all weights are zero");
    }
    // Coefficient on each selected log-probability.
    std::vector<double> coeff(lm.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < lm.rows; ++i) {
        const std::size_t k = i * lm.cols + static_cast<std::size_t>(labels[i]);
        coeff[k] = -weights[i] / wsum;
        if (weights[i] != 0.0) loss += coeff[k] * lm.data[k];
    }
    const std::size_t il = logp.id();
    return logp.tape().record("weighted_nll", {logp}, Matrix(1, 1, loss),
                              [il, coeff = std::move(coeff)](Tape& t, std::size_t self) {
                                  if (Matrix* gl = t.grad_sink(il)) {
                                      const double g = t.grad(self).data[0];
                                      for (std::size_t k = 0; k < coeff.size(); ++k) {
                                          gl->data[k] += g * coeff[k];
                                      }
                                  }
                              });
}

// ---------------------------------------------------------------------------
// Finite differences

std::vector<std::string> FdReport::failing() const {
    std::vector<std::string> names;
    for (const auto& p : params) {
        if (!p.pass) names.push_back(p.name);
    }
    return names;
}

namespace {

double evaluate(const GraphBuilder& builder, const std::vector<FdParam>& params) {
    Tape tape;
    std::vector<Value> leaves;
    leaves.reserve(params.size());
    for (const auto& p : params) leaves.push_back(tape.constant(p.value));
    return builder(tape, leaves).item();
}

} // namespace

FdReport finite_diff_check(const GraphBuilder& builder, std::vector<FdParam> params, double h, double tol) {
    if (!(h > 0.0)) throw ContractError("finite_diff_check: h must be positive");
    FdReport report;
    if (params.empty()) return report;

    std::vector<Matrix> ad_grads;
    double base = 0.0;
    {
        Tape tape;
        std::vector<Value> leaves;
        for (const auto& p : params) leaves.push_back(tape.variable(p.value));
        Value root = builder(tape, leaves);
        base = root.item();
        tape.backward(root);
        for (const Value& leaf : leaves) ad_grads.push_back(leaf.grad());
    }
    if (evaluate(builder, params) != base) {
        throw ContractError("finite_diff_check: builder is not deterministic (repeated forward differs)");
    }

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        FdParamReport pr;
        pr.name = params[pi].name;
        Matrix& value = params[pi].value;
        for (std::size_t k = 0; k < value.size(); ++k) {
            const double saved = value.data[k];
            value.data[k] = saved + h;
            const double up = evaluate(builder, params);
            value.data[k] = saved - h;
            const double down = evaluate(builder, params);
            value.data[k] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double ad = ad_grads[pi].data[k];
            const double err = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
            // NaN compares false, so a non-finite error always becomes the worst entry.
            if (k == 0 || !(err <= pr.max_rel_error)) {
                pr.max_rel_error = err;
                pr.worst_index = k;
                pr.worst_ad = ad;
                pr.worst_fd = fd;
            }
        }
        pr.pass = pr.max_rel_error < tol;
        report.pass = report.pass && pr.pass;
        if (!(pr.max_rel_error <= report.max_rel_error)) report.max_rel_error = pr.max_rel_error;
        report.params.push_back(std::move(pr));
    }
    return report;
}

} // namespace aal::ad
