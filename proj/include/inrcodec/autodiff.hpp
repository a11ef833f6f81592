#pragma once

#include "inrcodec/array.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace inrcodec {

// Reverse-mode differentiation over an immutable expression DAG.
//
// Gradients are built as new graph nodes, so the result of a gradient is
// itself differentiable. That is what allows the meta-learning outer loop to
// differentiate through unrolled inner-loop gradient steps.

enum class Op : uint8_t {
    kLeaf,
    kConst,
    kAdd,           // elementwise, same shape
    kSub,           // elementwise, same shape
    kMul,           // elementwise, same shape
    kScale,         // multiply by compile-time scalar c
    kScaleBy,       // multiply by a scalar-shaped expression, broadcast
    kMatMul,        // (m x k)*(k x n) -> m x n, or (m x k)*(k) -> (m)
    kTranspose,     // rank-2 only
    kReshape,       // same element count
    kSin,
    kCos,
    kAddRowVec,     // (n x d) + broadcast row vector (d)
    kSumCols,       // (n x d) -> (d), sum over rows
    kBroadcastRows, // (d) -> (n x d)
    kSumAll,        // any -> scalar
    kMeanSquares,   // any -> scalar, mean of squared elements
};

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node : std::enable_shared_from_this<Node> {
    Op op;
    std::vector<int> shape;
    std::vector<Expr> args;
    std::string name;  // kLeaf
    Array value;       // kConst
    double c = 0.0;    // kScale factor
    int n_rows = 0;    // kBroadcastRows row count

    // Lazily created sin<->cos partner sharing the same argument, so that
    // higher-order gradients reuse one evaluation instead of spawning fresh
    // trig nodes on every differentiation pass.
    mutable std::weak_ptr<const Node> trig_partner;
};

const char* op_name(Op op);

// Builders. Shape errors are raised at construction time and name the
// offending primitive together with the operand shapes.
Expr leaf(std::string name, std::vector<int> shape);
Expr constant(Array value);
Expr constant_scalar(double x);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr scale(Expr a, double c);
Expr scale_by(Expr a, Expr scalar);
Expr matmul(Expr a, Expr b);
Expr transpose(Expr a);
Expr reshape(Expr a, std::vector<int> shape);
Expr sine(Expr a);
Expr cosine(Expr a);
Expr add_rowvec(Expr m, Expr v);
Expr sum_cols(Expr m);
Expr broadcast_rows(Expr v, int n_rows);
Expr sum_all(Expr a);
Expr mean_squares(Expr a);

using Bindings = std::map<std::string, Array>;

// Evaluates several roots of one shared graph in a single pass; every node is
// computed exactly once. Deterministic for fixed bindings.
std::vector<Array> evaluate_many(std::span<const Expr> roots, const Bindings& leaves);
Array evaluate(const Expr& root, const Bindings& leaves);

// Builds the adjoint of a scalar-valued `root` with respect to each target
// node, as new graph nodes. Targets may be leaves or interior nodes; an
// interior target is treated as the independent variable (its own inputs are
// held fixed), which is exactly the "theta kept fixed" reading of the
// inner-loop gradient.
std::vector<Expr> build_gradients(const Expr& root, std::span<const Expr> wrt);
Expr build_gradient(const Expr& root, const Expr& wrt);

// Name-addressed convenience ops.
Array gradient(const Expr& root, const Bindings& leaves, const std::string& wrt);
// d/d outer of sum(d root / d inner): verifies second-order support.
Array gradient_of_gradient(const Expr& root, const Bindings& leaves, const std::string& inner_wrt,
                           const std::string& outer_wrt);

// All leaf nodes in the graph with the given name (empty if none).
std::vector<Expr> find_leaves(const Expr& root, const std::string& name);

}  // namespace inrcodec
