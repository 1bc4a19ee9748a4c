#pragma once

// Define-by-run reverse-mode differentiation over dense rank-2 arrays.
//
// A Tape owns every node created during one forward pass. Values are cheap
// handles (tape pointer + node index + epoch). Calling Tape::reset() invalidates
// all outstanding handles; using a stale handle throws ContractError.
//
// A tape and its Values are single-threaded. Separate tapes share no state.

#include "aal/matrix.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace aal::ad {

class Tape;

class Value {
public:
    Value() = default;

    std::size_t rows() const;
    std::size_t cols() const;
    /// Valid until the next node is recorded on the tape; copy to keep it longer.
    const Matrix& data() const;
    /// Gradient buffer; empty until backward() has run on this tape.
    const Matrix& grad() const;
    bool requires_grad() const;
    /// The single entry of a 1×1 value.
    double item() const;

    Tape& tape() const;
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Value(Tape* tape, std::size_t id, std::uint64_t epoch) : tape_(tape), id_(id), epoch_(epoch) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
    std::uint64_t epoch_ = 0;
};

class Tape {
public:
    /// Local gradient rule. Receives the tape and the node's own id; it reads the
    /// node's output gradient and accumulates into inputs that require grad.
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Value variable(Matrix m) { return leaf(std::move(m), true); }
    Value constant(Matrix m) { return leaf(std::move(m), false); }
    Value leaf(Matrix m, bool requires_grad);

    /// Appends an operation node. requires_grad is inherited from the inputs.
    Value record(std::string op, std::vector<Value> inputs, Matrix output, BackwardFn backward);

    /// Reverse sweep from a 1×1 root. Gradients accumulate additively across fan-out.
    void backward(const Value& root);

    void reset();
    std::size_t size() const noexcept { return nodes_.size(); }
    std::uint64_t epoch() const noexcept { return epoch_; }

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    /// Mutable gradient of an input node, or nullptr when it does not take gradients.
    Matrix* grad_sink(std::size_t id);
    const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    const std::string& op(std::size_t id) const { return nodes_[id].op; }

    void check(const Value& v) const;

private:
    struct Node {
        std::string op;
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::uint64_t epoch_ = 0;
};

// ---------------------------------------------------------------------------
// Operators. All inputs must live on the same tape.

Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
/// m×n plus a 1×n row broadcast over every row.
Value add_row(const Value& x, const Value& row);
Value mul(const Value& a, const Value& b);
Value scale(const Value& x, double s);
/// a·x + b elementwise.
Value affine(const Value& x, double a, double b);

Value relu(const Value& x);
Value sigmoid(const Value& x);
Value softmax_rows(const Value& x);
/// log(max(x, floor)); gradient is zero where the floor is active.
Value log_clamped(const Value& x, double floor = 1e-12);

/// Identity forward; backward multiplies the incoming gradient by −lambda.
Value grad_reverse(const Value& x, double lambda);
/// Copy with requires_grad = false.
Value detach(const Value& x);
/// Inverted dropout with a mask drawn from `seed`. rate = 0 is the identity.
Value dropout(const Value& x, double rate, std::uint64_t seed);

/// Row i becomes the flattened outer product f_i ⊗ p_i; block j has length d
/// and equals p_i(j)·f_i.
Value outer_flatten(const Value& f, const Value& p);

Value slice_rows(const Value& x, std::size_t begin, std::size_t end);
Value concat_rows(const Value& a, const Value& b);

Value sum(const Value& x);
/// Σ_k weights[k]·x[k] over the row-major payload.
Value weighted_sum(const Value& x, std::span<const double> weights);

/// −Σ_i w_i·logp[i, labels_i] / Σ_i w_i. Throws ContractError when Σ w = 0.
Value weighted_nll(const Value& logp, std::span<const int> labels, std::span<const double> weights);

// ---------------------------------------------------------------------------
// Finite-difference checking.

struct FdParam {
    std::string name;
    Matrix value;
};

/// Builds a scalar graph on `tape` from leaves bound to the parameters, in order.
using GraphBuilder = std::function<Value(Tape& tape, std::span<const Value> params)>;

struct FdParamReport {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double worst_ad = 0.0;
    double worst_fd = 0.0;
    bool pass = true;
};

struct FdReport {
    std::vector<FdParamReport> params;
    bool pass = true;
    double max_rel_error = 0.0;

    /// Names of parameters whose error reached the tolerance.
    std::vector<std::string> failing() const;
};

/// Compares reverse-mode gradients with central differences. The error for one
/// entry is |g_ad − g_fd| / max(1, |g_fd|). Throws ContractError when two
/// forward passes at the same point disagree (non-deterministic builder).
FdReport finite_diff_check(const GraphBuilder& builder, std::vector<FdParam> params, double h,
                           double tol);

} // namespace aal::ad
