#include "inrcodec/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <unordered_map>

namespace inrcodec {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using CMapMat = Eigen::Map<const EMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

[[noreturn]] void shape_fail(Op op, const std::vector<int>& a, const std::vector<int>& b) {
    throw ShapeError(std::string("shape mismatch in ") + op_name(op) + ": " + Array::shape_str(a) + " vs " +
                     Array::shape_str(b));
}

[[noreturn]] void shape_fail(Op op, const std::vector<int>& a) {
    throw ShapeError(std::string("shape mismatch in ") + op_name(op) + ": got " + Array::shape_str(a));
}

Expr make(Op op, std::vector<int> shape, std::vector<Expr> args) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->shape = std::move(shape);
    n->args = std::move(args);
    return n;
}

// Post-order of the subgraph under `roots`, each node once.
std::vector<const Node*> topo_order(std::span<const Expr> roots) {
    std::vector<const Node*> order;
    std::unordered_map<const Node*, int> state;  // 0 unseen, 1 open, 2 done
    std::vector<std::pair<const Node*, size_t>> stack;
    for (const auto& r : roots) {
        if (!r) throw ValueError("null expression");
        if (state[r.get()] == 2) continue;
        stack.push_back({r.get(), 0});
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (state[node] == 2) {
                stack.pop_back();
                continue;
            }
            state[node] = 1;
            if (next < node->args.size()) {
                const Node* child = node->args[next].get();
                next++;
                if (state[child] != 2) stack.push_back({child, 0});
            } else {
                state[node] = 2;
                order.push_back(node);
                stack.pop_back();
            }
        }
    }
    return order;
}

}  // namespace

const char* op_name(Op op) {
    switch (op) {
        case Op::kLeaf: return "leaf";
        case Op::kConst: return "const";
        case Op::kAdd: return "add";
        case Op::kSub: return "sub";
        case Op::kMul: return "mul";
        case Op::kScale: return "scale";
        case Op::kScaleBy: return "scale_by";
        case Op::kMatMul: return "matmul";
        case Op::kTranspose: return "transpose";
        case Op::kReshape: return "reshape";
        case Op::kSin: return "sin";
        case Op::kCos: return "cos";
        case Op::kAddRowVec: return "add_rowvec";
        case Op::kSumCols: return "sum_cols";
        case Op::kBroadcastRows: return "broadcast_rows";
        case Op::kSumAll: return "sum_all";
        case Op::kMeanSquares: return "mean_squares";
    }
    return "?";
}

Expr leaf(std::string name, std::vector<int> shape) {
    auto n = std::make_shared<Node>();
    n->op = Op::kLeaf;
    n->shape = std::move(shape);
    n->name = std::move(name);
    return n;
}

Expr constant(Array value) {
    auto n = std::make_shared<Node>();
    n->op = Op::kConst;
    n->shape = value.shape();
    n->value = std::move(value);
    return n;
}

Expr constant_scalar(double x) { return constant(Array::scalar(x)); }

Expr add(Expr a, Expr b) {
    if (a->shape != b->shape) shape_fail(Op::kAdd, a->shape, b->shape);
    auto shape = a->shape;
    return make(Op::kAdd, std::move(shape), {std::move(a), std::move(b)});
}

Expr sub(Expr a, Expr b) {
    if (a->shape != b->shape) shape_fail(Op::kSub, a->shape, b->shape);
    auto shape = a->shape;
    return make(Op::kSub, std::move(shape), {std::move(a), std::move(b)});
}

Expr mul(Expr a, Expr b) {
    if (a->shape != b->shape) shape_fail(Op::kMul, a->shape, b->shape);
    auto shape = a->shape;
    return make(Op::kMul, std::move(shape), {std::move(a), std::move(b)});
}

Expr scale(Expr a, double c) {
    auto shape = a->shape;
    auto n = make(Op::kScale, std::move(shape), {std::move(a)});
    const_cast<Node*>(n.get())->c = c;
    return n;
}

Expr scale_by(Expr a, Expr scalar) {
    if (!scalar->shape.empty()) shape_fail(Op::kScaleBy, scalar->shape);
    auto shape = a->shape;
    return make(Op::kScaleBy, std::move(shape), {std::move(a), std::move(scalar)});
}

Expr matmul(Expr a, Expr b) {
    if (a->shape.size() != 2 || (b->shape.size() != 2 && b->shape.size() != 1))
        shape_fail(Op::kMatMul, a->shape, b->shape);
    if (a->shape[1] != b->shape[0]) shape_fail(Op::kMatMul, a->shape, b->shape);
    std::vector<int> shape =
        b->shape.size() == 2 ? std::vector<int>{a->shape[0], b->shape[1]} : std::vector<int>{a->shape[0]};
    return make(Op::kMatMul, std::move(shape), {std::move(a), std::move(b)});
}

Expr transpose(Expr a) {
    if (a->shape.size() != 2) shape_fail(Op::kTranspose, a->shape);
    std::vector<int> shape{a->shape[1], a->shape[0]};
    return make(Op::kTranspose, std::move(shape), {std::move(a)});
}

Expr reshape(Expr a, std::vector<int> shape) {
    if (Array::count(shape) != Array::count(a->shape)) shape_fail(Op::kReshape, a->shape, shape);
    return make(Op::kReshape, std::move(shape), {std::move(a)});
}

Expr sine(Expr a) {
    auto shape = a->shape;
    return make(Op::kSin, std::move(shape), {std::move(a)});
}

Expr cosine(Expr a) {
    auto shape = a->shape;
    return make(Op::kCos, std::move(shape), {std::move(a)});
}

Expr add_rowvec(Expr m, Expr v) {
    if (m->shape.size() != 2 || v->shape.size() != 1 || m->shape[1] != v->shape[0])
        shape_fail(Op::kAddRowVec, m->shape, v->shape);
    auto shape = m->shape;
    return make(Op::kAddRowVec, std::move(shape), {std::move(m), std::move(v)});
}

Expr sum_cols(Expr m) {
    if (m->shape.size() != 2) shape_fail(Op::kSumCols, m->shape);
    std::vector<int> shape{m->shape[1]};
    return make(Op::kSumCols, std::move(shape), {std::move(m)});
}

Expr broadcast_rows(Expr v, int n_rows) {
    if (v->shape.size() != 1 || n_rows <= 0) shape_fail(Op::kBroadcastRows, v->shape);
    std::vector<int> shape{n_rows, v->shape[0]};
    auto n = make(Op::kBroadcastRows, std::move(shape), {std::move(v)});
    const_cast<Node*>(n.get())->n_rows = n_rows;
    return n;
}

Expr sum_all(Expr a) { return make(Op::kSumAll, {}, {std::move(a)}); }

Expr mean_squares(Expr a) {
    if (Array::count(a->shape) == 0) shape_fail(Op::kMeanSquares, a->shape);
    return make(Op::kMeanSquares, {}, {std::move(a)});
}

namespace {

Array eval_node(const Node* n, const std::unordered_map<const Node*, Array>& memo, const Bindings& leaves) {
    auto arg = [&](size_t i) -> const Array& { return memo.at(n->args[i].get()); };
    switch (n->op) {
        case Op::kLeaf: {
            auto it = leaves.find(n->name);
            if (it == leaves.end()) throw ValueError("unbound leaf '" + n->name + "'");
            if (it->second.shape() != n->shape)
                throw ShapeError("leaf '" + n->name + "' bound to " + Array::shape_str(it->second.shape()) +
                                 ", declared " + Array::shape_str(n->shape));
            return it->second;
        }
        case Op::kConst: return n->value;
        case Op::kAdd: {
            Array r = arg(0);
            const Array& b = arg(1);
            for (long i = 0; i < r.size(); i++) r[i] += b[i];
            return r;
        }
        case Op::kSub: {
            Array r = arg(0);
            const Array& b = arg(1);
            for (long i = 0; i < r.size(); i++) r[i] -= b[i];
            return r;
        }
        case Op::kMul: {
            Array r = arg(0);
            const Array& b = arg(1);
            for (long i = 0; i < r.size(); i++) r[i] *= b[i];
            return r;
        }
        case Op::kScale: {
            Array r = arg(0);
            for (long i = 0; i < r.size(); i++) r[i] *= n->c;
            return r;
        }
        case Op::kScaleBy: {
            Array r = arg(0);
            const double s = arg(1)[0];
            for (long i = 0; i < r.size(); i++) r[i] *= s;
            return r;
        }
        case Op::kMatMul: {
            const Array& a = arg(0);
            const Array& b = arg(1);
            Array r = Array::zeros(n->shape);
            CMapMat am(a.data(), a.shape()[0], a.shape()[1]);
            if (b.rank() == 2) {
                CMapMat bm(b.data(), b.shape()[0], b.shape()[1]);
                MapMat rm(r.data(), r.shape()[0], r.shape()[1]);
                rm.noalias() = am * bm;
            } else {
                CMapVec bv(b.data(), b.size());
                MapVec rv(r.data(), r.size());
                rv.noalias() = am * bv;
            }
            return r;
        }
        case Op::kTranspose: {
            const Array& a = arg(0);
            Array r = Array::zeros(n->shape);
            CMapMat am(a.data(), a.shape()[0], a.shape()[1]);
            MapMat rm(r.data(), r.shape()[0], r.shape()[1]);
            rm = am.transpose();
            return r;
        }
        case Op::kReshape: {
            const Array& a = arg(0);
            return Array(n->shape, std::vector<double>(a.data(), a.data() + a.size()));
        }
        case Op::kSin: {
            Array r = arg(0);
            for (long i = 0; i < r.size(); i++) r[i] = std::sin(r[i]);
            return r;
        }
        case Op::kCos: {
            Array r = arg(0);
            for (long i = 0; i < r.size(); i++) r[i] = std::cos(r[i]);
            return r;
        }
        case Op::kAddRowVec: {
            Array r = arg(0);
            const Array& v = arg(1);
            const int rows = r.shape()[0], cols = r.shape()[1];
            for (int i = 0; i < rows; i++) {
                double* row = r.data() + (long)i * cols;
                for (int j = 0; j < cols; j++) row[j] += v[j];
            }
            return r;
        }
        case Op::kSumCols: {
            const Array& m = arg(0);
            const int rows = m.shape()[0], cols = m.shape()[1];
            Array r = Array::zeros({cols});
            for (int i = 0; i < rows; i++) {
                const double* row = m.data() + (long)i * cols;
                for (int j = 0; j < cols; j++) r[j] += row[j];
            }
            return r;
        }
        case Op::kBroadcastRows: {
            const Array& v = arg(0);
            Array r = Array::zeros(n->shape);
            const int cols = (int)v.size();
            for (int i = 0; i < n->n_rows; i++)
                for (int j = 0; j < cols; j++) r[(long)i * cols + j] = v[j];
            return r;
        }
        case Op::kSumAll: {
            const Array& a = arg(0);
            double s = 0;
            for (long i = 0; i < a.size(); i++) s += a[i];
            return Array::scalar(s);
        }
        case Op::kMeanSquares: {
            const Array& a = arg(0);
            double s = 0;
            for (long i = 0; i < a.size(); i++) s += a[i] * a[i];
            return Array::scalar(s / (double)a.size());
        }
    }
    throw Error("unhandled op");
}

}  // namespace

std::vector<Array> evaluate_many(std::span<const Expr> roots, const Bindings& leaves) {
    auto order = topo_order(roots);
    std::unordered_map<const Node*, Array> memo;
    memo.reserve(order.size() * 2);
    for (const Node* n : order) memo.emplace(n, eval_node(n, memo, leaves));
    std::vector<Array> out;
    out.reserve(roots.size());
    for (const auto& r : roots) out.push_back(memo.at(r.get()));
    return out;
}

Array evaluate(const Expr& root, const Bindings& leaves) {
    return evaluate_many(std::span<const Expr>(&root, 1), leaves)[0];
}

namespace {

// cos(x) for a sin(x) node (and vice versa), cached on the node so repeated
// differentiation shares one evaluation.
Expr trig_partner_of(const Node* n) {
    if (auto p = n->trig_partner.lock()) return p;
    Expr partner = n->op == Op::kSin ? cosine(n->args[0]) : sine(n->args[0]);
    n->trig_partner = partner;
    if (auto self = n->weak_from_this().lock()) partner->trig_partner = self;
    return partner;
}

// Adjoint contribution flowing from `n` (whose adjoint is `g`) into args[i].
Expr vjp(const Node* n, size_t i, const Expr& g) {
    switch (n->op) {
        case Op::kAdd: return g;
        case Op::kSub: return i == 0 ? g : scale(g, -1.0);
        case Op::kMul: return mul(g, n->args[1 - i]);
        case Op::kScale: return scale(g, n->c);
        case Op::kScaleBy:
            if (i == 0) return scale_by(g, n->args[1]);
            return sum_all(mul(g, n->args[0]));
        case Op::kMatMul: {
            const Expr& a = n->args[0];
            const Expr& b = n->args[1];
            if (b->shape.size() == 2) {
                if (i == 0) return matmul(g, transpose(b));
                return matmul(transpose(a), g);
            }
            // a (m x k) * b (k) -> (m)
            if (i == 0) return matmul(reshape(g, {a->shape[0], 1}), reshape(b, {1, b->shape[0]}));
            return matmul(transpose(a), g);
        }
        case Op::kTranspose: return transpose(g);
        case Op::kReshape: return reshape(g, n->args[0]->shape);
        case Op::kSin: return mul(g, trig_partner_of(n));
        case Op::kCos: return scale(mul(g, trig_partner_of(n)), -1.0);
        case Op::kAddRowVec: return i == 0 ? g : sum_cols(g);
        case Op::kSumCols: return broadcast_rows(g, n->args[0]->shape[0]);
        case Op::kBroadcastRows: return sum_cols(g);
        case Op::kSumAll: return scale_by(constant(Array::full(n->args[0]->shape, 1.0)), g);
        case Op::kMeanSquares:
            return scale(scale_by(n->args[0], g), 2.0 / (double)Array::count(n->args[0]->shape));
        case Op::kLeaf:
        case Op::kConst: break;
    }
    throw Error("vjp: unexpected op");
}

}  // namespace

std::vector<Expr> build_gradients(const Expr& root, std::span<const Expr> wrt) {
    if (!root->shape.empty())
        throw ValueError(std::string("gradient of non-scalar expression of shape ") + Array::shape_str(root->shape));
    auto order = topo_order(std::span<const Expr>(&root, 1));

    std::unordered_map<const Node*, bool> depends;
    depends.reserve(order.size() * 2);
    for (const Node* n : order) {
        bool d = false;
        for (const auto& t : wrt)
            if (t.get() == n) d = true;
        if (!d)
            for (const auto& a : n->args)
                if (depends[a.get()]) d = true;
        depends[n] = d;
    }

    std::unordered_map<const Node*, Expr> adj;
    adj.reserve(order.size());
    adj[root.get()] = constant_scalar(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const Node* n = *it;
        auto ait = adj.find(n);
        if (ait == adj.end() || !depends[n]) continue;
        bool is_target = false;
        for (const auto& t : wrt)
            if (t.get() == n) is_target = true;
        if (is_target) continue;  // the target is the independent variable; do not descend
        for (size_t i = 0; i < n->args.size(); i++) {
            const Node* a = n->args[i].get();
            if (!depends[a]) continue;
            Expr contrib = vjp(n, i, ait->second);
            auto cit = adj.find(a);
            if (cit == adj.end())
                adj.emplace(a, std::move(contrib));
            else
                cit->second = add(cit->second, contrib);
        }
    }

    std::vector<Expr> out;
    out.reserve(wrt.size());
    for (const auto& t : wrt) {
        auto it = adj.find(t.get());
        out.push_back(it != adj.end() ? it->second : constant(Array::zeros(t->shape)));
    }
    return out;
}

Expr build_gradient(const Expr& root, const Expr& wrt) {
    return build_gradients(root, std::span<const Expr>(&wrt, 1))[0];
}

std::vector<Expr> find_leaves(const Expr& root, const std::string& name) {
    std::vector<Expr> found;
    std::unordered_map<const Node*, bool> seen;
    std::vector<Expr> stack{root};
    while (!stack.empty()) {
        Expr n = stack.back();
        stack.pop_back();
        if (seen[n.get()]) continue;
        seen[n.get()] = true;
        if (n->op == Op::kLeaf && n->name == name) found.push_back(n);
        for (const auto& a : n->args) stack.push_back(a);
    }
    return found;
}

Array gradient(const Expr& root, const Bindings& leaves, const std::string& wrt) {
    auto targets = find_leaves(root, wrt);
    if (targets.empty()) throw ValueError("unknown leaf '" + wrt + "'");
    auto grads = build_gradients(root, targets);
    Expr total = grads[0];
    for (size_t i = 1; i < grads.size(); i++) total = add(total, grads[i]);
    return evaluate(total, leaves);
}

Array gradient_of_gradient(const Expr& root, const Bindings& leaves, const std::string& inner_wrt,
                           const std::string& outer_wrt) {
    auto inner_targets = find_leaves(root, inner_wrt);
    if (inner_targets.empty()) throw ValueError("unknown leaf '" + inner_wrt + "'");
    auto grads = build_gradients(root, inner_targets);
    Expr g = grads[0];
    for (size_t i = 1; i < grads.size(); i++) g = add(g, grads[i]);
    Expr s = g->shape.empty() ? g : sum_all(g);
    return gradient(s, leaves, outer_wrt);
}

}  // namespace inrcodec
