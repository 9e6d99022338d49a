#include "skillrl/tape.hpp"

#include <cmath>
#include <cstddef>

#include "skillrl/errors.hpp"

namespace skillrl::ad {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// broadcast modes for add / mul / gaussian_logpdf second (or third) operand
enum BroadcastMode : int { kSame = 0, kRow = 1, kScalar = 2 };

double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double stable_softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

// C(M,N) (+)= A(M,K) * B(K,N)
void mm_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(M,N) += A(M,K) * B(N,K)^T
void mm_nt(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
            crow[j] += s;
        }
    }
}

// C(K,N) += A(M,K)^T * B(M,N)
void mm_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        const double* brow = b + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Leaf: return "leaf";
        case OpKind::Matmul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Mul: return "mul";
        case OpKind::Tanh: return "tanh";
        case OpKind::Relu: return "relu";
        case OpKind::Softplus: return "softplus";
        case OpKind::Exp: return "exp";
        case OpKind::Log: return "log";
        case OpKind::Sum: return "sum";
        case OpKind::Mean: return "mean";
        case OpKind::Slice: return "slice";
        case OpKind::Concat: return "concat";
        case OpKind::GaussianLogPdf: return "gaussian_logpdf";
        case OpKind::LstmCell: return "lstm_cell";
    }
    return "?";
}

void Tape::check_finite(const Node& n, OpKind kind) const {
    if (!n.value.all_finite() || (n.value2.numel() > 0 && !n.value2.all_finite())) {
        throw NumericError(std::string("op ") + op_name(kind) +
                           " produced a non-finite value (output shape " +
                           n.value.shape_str() + ")");
    }
}

bool Tape::input_needs_grad(const Node& n) const {
    for (const Var& v : n.inputs) {
        if (nodes_[static_cast<size_t>(v.id)].needs_grad) return true;
    }
    return false;
}

int Tape::push(Node n) {
    if (n.kind != OpKind::Leaf) {
        n.needs_grad = input_needs_grad(n);
        check_finite(n, n.kind);
    }
    nodes_.push_back(std::move(n));
    backward_done_ = false;
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor t) {
    if (!t.all_finite()) {
        throw NumericError("leaf tensor contains non-finite values, shape " + t.shape_str());
    }
    Node n;
    n.kind = OpKind::Leaf;
    n.needs_grad = t.requires_grad;
    n.value = std::move(t);
    return {push(std::move(n)), 0};
}

Var Tape::constant(Tensor t) {
    t.requires_grad = false;
    return leaf(std::move(t));
}

Var Tape::constant_scalar(double v) { return constant(Tensor::scalar(v)); }

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    // rank-1 operands behave as a row (left) or column (right) vector
    const int m = ta.rank() == 2 ? ta.shape[0] : 1;
    const int k = ta.rank() == 2 ? ta.shape[1] : ta.shape[0];
    const int kb = tb.rank() == 2 ? tb.shape[0] : tb.shape[0];
    const int ncols = tb.rank() == 2 ? tb.shape[1] : 1;
    if (k != kb) {
        throw ShapeError(std::string("matmul: inner dimensions differ, ") + ta.shape_str() +
                         " vs " + tb.shape_str());
    }
    Node n;
    n.kind = OpKind::Matmul;
    n.inputs = {a, b};
    std::vector<int> out_shape;
    if (ta.rank() == 2 && tb.rank() == 2) out_shape = {m, ncols};
    else if (ta.rank() == 2) out_shape = {m};          // (M,K) x (K) -> (M)
    else if (tb.rank() == 2) out_shape = {ncols};      // (K) x (K,N) -> (N)
    else out_shape = {1};                              // dot product
    n.value = Tensor::zeros(out_shape);
    mm_nn(ta.values.data(), tb.values.data(), n.value.values.data(), m, k, ncols);
    return {push(std::move(n)), 0};
}

namespace {

int classify_broadcast(const char* op, const Tensor& a, const Tensor& b) {
    if (a.same_shape(b)) return kSame;
    if (b.numel() == 1) return kScalar;
    if (a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1]) return kRow;
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str() +
                     " (allowed: equal, rank-1 row vs rank-2, or scalar second operand)");
}

}  // namespace

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const int mode = classify_broadcast("add", ta, tb);
    Node n;
    n.kind = OpKind::Add;
    n.inputs = {a, b};
    n.aux0 = mode;
    n.value = ta;
    n.value.requires_grad = false;
    double* out = n.value.values.data();
    const double* bv = tb.values.data();
    const size_t total = n.value.values.size();
    if (mode == kSame) {
        for (size_t i = 0; i < total; ++i) out[i] += bv[i];
    } else if (mode == kScalar) {
        for (size_t i = 0; i < total; ++i) out[i] += bv[0];
    } else {
        const size_t c = static_cast<size_t>(ta.cols());
        for (size_t i = 0; i < total; ++i) out[i] += bv[i % c];
    }
    return {push(std::move(n)), 0};
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    const int mode = classify_broadcast("mul", ta, tb);
    Node n;
    n.kind = OpKind::Mul;
    n.inputs = {a, b};
    n.aux0 = mode;
    n.value = ta;
    n.value.requires_grad = false;
    double* out = n.value.values.data();
    const double* bv = tb.values.data();
    const size_t total = n.value.values.size();
    if (mode == kSame) {
        for (size_t i = 0; i < total; ++i) out[i] *= bv[i];
    } else if (mode == kScalar) {
        for (size_t i = 0; i < total; ++i) out[i] *= bv[0];
    } else {
        const size_t c = static_cast<size_t>(ta.cols());
        for (size_t i = 0; i < total; ++i) out[i] *= bv[i % c];
    }
    return {push(std::move(n)), 0};
}

namespace {

template <typename F>
Tensor map_unary(const Tensor& x, F f) {
    Tensor out = x;
    out.requires_grad = false;
    for (double& v : out.values) v = f(v);
    return out;
}

}  // namespace

Var Tape::tanh(Var x) {
    Node n;
    n.kind = OpKind::Tanh;
    n.inputs = {x};
    n.value = map_unary(value(x), [](double v) { return std::tanh(v); });
    return {push(std::move(n)), 0};
}

Var Tape::relu(Var x) {
    Node n;
    n.kind = OpKind::Relu;
    n.inputs = {x};
    n.value = map_unary(value(x), [](double v) { return v > 0.0 ? v : 0.0; });
    return {push(std::move(n)), 0};
}

Var Tape::softplus(Var x) {
    Node n;
    n.kind = OpKind::Softplus;
    n.inputs = {x};
    n.value = map_unary(value(x), stable_softplus);
    return {push(std::move(n)), 0};
}

Var Tape::exp(Var x) {
    Node n;
    n.kind = OpKind::Exp;
    n.inputs = {x};
    n.value = map_unary(value(x), [](double v) { return std::exp(v); });
    return {push(std::move(n)), 0};
}

Var Tape::log(Var x) {
    Node n;
    n.kind = OpKind::Log;
    n.inputs = {x};
    n.value = map_unary(value(x), [](double v) { return std::log(v); });
    return {push(std::move(n)), 0};
}

Var Tape::sum(Var x) {
    Node n;
    n.kind = OpKind::Sum;
    n.inputs = {x};
    double s = 0.0;
    for (double v : value(x).values) s += v;
    n.value = Tensor::scalar(s);
    return {push(std::move(n)), 0};
}

Var Tape::mean(Var x) {
    Node n;
    n.kind = OpKind::Mean;
    n.inputs = {x};
    double s = 0.0;
    for (double v : value(x).values) s += v;
    n.value = Tensor::scalar(s / static_cast<double>(value(x).numel()));
    return {push(std::move(n)), 0};
}

Var Tape::slice(Var x, int c0, int c1) {
    const Tensor& tx = value(x);
    const int width = tx.cols();
    if (c0 < 0 || c1 <= c0 || c1 > width) {
        throw ShapeError("slice: range [" + std::to_string(c0) + "," + std::to_string(c1) +
                         ") invalid for shape " + tx.shape_str());
    }
    Node n;
    n.kind = OpKind::Slice;
    n.inputs = {x};
    n.aux0 = c0;
    n.aux1 = c1;
    const int span = c1 - c0;
    if (tx.rank() == 1) {
        n.value = Tensor::zeros({span});
        for (int j = 0; j < span; ++j) n.value.values[static_cast<size_t>(j)] = tx.values[static_cast<size_t>(c0 + j)];
    } else {
        n.value = Tensor::zeros({tx.shape[0], span});
        for (int i = 0; i < tx.shape[0]; ++i) {
            for (int j = 0; j < span; ++j) n.value.at(i, j) = tx.at(i, c0 + j);
        }
    }
    return {push(std::move(n)), 0};
}

Var Tape::concat(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.rank() != tb.rank()) {
        throw ShapeError(std::string("concat: rank mismatch ") + ta.shape_str() + " vs " +
                         tb.shape_str());
    }
    Node n;
    n.kind = OpKind::Concat;
    n.inputs = {a, b};
    if (ta.rank() == 1) {
        n.value = Tensor::zeros({ta.shape[0] + tb.shape[0]});
        std::copy(ta.values.begin(), ta.values.end(), n.value.values.begin());
        std::copy(tb.values.begin(), tb.values.end(), n.value.values.begin() + ta.shape[0]);
    } else {
        if (ta.shape[0] != tb.shape[0]) {
            throw ShapeError(std::string("concat: row counts differ, ") + ta.shape_str() +
                             " vs " + tb.shape_str());
        }
        const int rows = ta.shape[0];
        const int ca = ta.shape[1], cb = tb.shape[1];
        n.value = Tensor::zeros({rows, ca + cb});
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < ca; ++j) n.value.at(i, j) = ta.at(i, j);
            for (int j = 0; j < cb; ++j) n.value.at(i, ca + j) = tb.at(i, j);
        }
    }
    n.aux0 = ta.rank() == 1 ? ta.shape[0] : ta.shape[1];
    return {push(std::move(n)), 0};
}

Var Tape::gaussian_logpdf(Var x, Var mu, Var sigma) {
    const Tensor& tx = value(x);
    const Tensor& tmu = value(mu);
    const Tensor& tsig = value(sigma);
    if (!tx.same_shape(tmu)) {
        throw ShapeError(std::string("gaussian_logpdf: x ") + tx.shape_str() +
                         " and mu " + tmu.shape_str() + " must match");
    }
    const int mode = classify_broadcast("gaussian_logpdf", tx, tsig);
    for (double s : tsig.values) {
        if (!(s > 0.0)) throw NumericError("gaussian_logpdf: sigma must be strictly positive");
    }
    Node n;
    n.kind = OpKind::GaussianLogPdf;
    n.inputs = {x, mu, sigma};
    n.aux0 = mode;
    n.value = Tensor::zeros(tx.shape);
    const size_t total = n.value.values.size();
    const size_t c = static_cast<size_t>(tx.cols());
    for (size_t i = 0; i < total; ++i) {
        const double s =
            mode == kSame ? tsig.values[i] : (mode == kScalar ? tsig.values[0] : tsig.values[i % c]);
        const double d = (tx.values[i] - tmu.values[i]) / s;
        n.value.values[i] = -0.5 * kLogTwoPi - std::log(s) - 0.5 * d * d;
    }
    return {push(std::move(n)), 0};
}

std::pair<Var, Var> Tape::lstm_cell(Var x, Var h_prev, Var c_prev, Var w_ih, Var w_hh, Var b) {
    const Tensor& tx = value(x);
    const Tensor& th = value(h_prev);
    const Tensor& tc = value(c_prev);
    const Tensor& wih = value(w_ih);
    const Tensor& whh = value(w_hh);
    const Tensor& tb = value(b);
    if (tx.rank() != 2 || th.rank() != 2 || tc.rank() != 2 || wih.rank() != 2 || whh.rank() != 2 ||
        tb.rank() != 1) {
        throw ShapeError("lstm_cell: expected ranks x(B,I) h(B,H) c(B,H) w_ih(I,4H) w_hh(H,4H) b(4H)");
    }
    const int batch = tx.shape[0];
    const int in_dim = tx.shape[1];
    const int hidden = th.shape[1];
    if (th.shape[0] != batch || tc.shape[0] != batch || tc.shape[1] != hidden ||
        wih.shape[0] != in_dim || wih.shape[1] != 4 * hidden || whh.shape[0] != hidden ||
        whh.shape[1] != 4 * hidden || tb.shape[0] != 4 * hidden) {
        throw ShapeError(std::string("lstm_cell: inconsistent shapes x") + tx.shape_str() + " h" +
                         th.shape_str() + " c" + tc.shape_str() + " w_ih" + wih.shape_str() +
                         " w_hh" + whh.shape_str() + " b" + tb.shape_str());
    }

    Tensor pre = Tensor::zeros({batch, 4 * hidden});
    mm_nn(tx.values.data(), wih.values.data(), pre.values.data(), batch, in_dim, 4 * hidden);
    mm_nn(th.values.data(), whh.values.data(), pre.values.data(), batch, hidden, 4 * hidden);
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < 4 * hidden; ++j) pre.at(i, j) += tb.values[static_cast<size_t>(j)];
    }

    Tensor gi = Tensor::zeros({batch, hidden});
    Tensor gf = Tensor::zeros({batch, hidden});
    Tensor gg = Tensor::zeros({batch, hidden});
    Tensor go = Tensor::zeros({batch, hidden});
    Tensor tanh_c = Tensor::zeros({batch, hidden});

    Node n;
    n.kind = OpKind::LstmCell;
    n.inputs = {x, h_prev, c_prev, w_ih, w_hh, b};
    n.value = Tensor::zeros({batch, hidden});   // h'
    n.value2 = Tensor::zeros({batch, hidden});  // c'
    for (int i = 0; i < batch; ++i) {
        for (int j = 0; j < hidden; ++j) {
            const double vi = stable_sigmoid(pre.at(i, j));
            const double vf = stable_sigmoid(pre.at(i, hidden + j));
            const double vg = std::tanh(pre.at(i, 2 * hidden + j));
            const double vo = stable_sigmoid(pre.at(i, 3 * hidden + j));
            const double c_new = vf * tc.at(i, j) + vi * vg;
            const double tc_new = std::tanh(c_new);
            gi.at(i, j) = vi;
            gf.at(i, j) = vf;
            gg.at(i, j) = vg;
            go.at(i, j) = vo;
            tanh_c.at(i, j) = tc_new;
            n.value2.at(i, j) = c_new;
            n.value.at(i, j) = vo * tc_new;
        }
    }
    n.saved = {std::move(gi), std::move(gf), std::move(gg), std::move(go), std::move(tanh_c)};
    const int id = push(std::move(n));
    return {Var{id, 0}, Var{id, 1}};
}

const Tensor& Tape::value(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw Error("tape: invalid node handle");
    }
    const Node& n = node(v);
    return v.slot == 0 ? n.value : n.value2;
}

const std::vector<double>& Tape::grad(Var v) const {
    if (!backward_done_) {
        throw Error("tape: gradient requested before backward()");
    }
    const Node& n = node(v);
    return v.slot == 0 ? n.grad : n.grad2;
}

void Tape::backward(Var loss) {
    if (nodes_.empty()) throw Error("tape: backward() on empty tape");
    if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size())) {
        throw Error("tape: backward() on invalid handle");
    }
    if (value(loss).numel() != 1) {
        throw ShapeError("tape: backward() requires a scalar loss, got " +
                         value(loss).shape_str());
    }
    for (size_t i = 0; i <= static_cast<size_t>(loss.id); ++i) {
        Node& n = nodes_[i];
        n.grad.assign(n.value.values.size(), 0.0);
        n.grad2.assign(n.value2.values.size(), 0.0);
    }
    (loss.slot == 0 ? node(loss).grad : node(loss).grad2)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) backward_node(id);
    backward_done_ = true;
}

void Tape::backward_node(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.kind == OpKind::Leaf || !n.needs_grad) return;

    auto gin = [&](int k) -> std::vector<double>& {
        Node& src = node(n.inputs[static_cast<size_t>(k)]);
        return n.inputs[static_cast<size_t>(k)].slot == 0 ? src.grad : src.grad2;
    };
    auto in_needs = [&](int k) {
        return node(n.inputs[static_cast<size_t>(k)]).needs_grad;
    };
    auto inval = [&](int k) -> const Tensor& { return value(n.inputs[static_cast<size_t>(k)]); };

    const std::vector<double>& g = n.grad;

    switch (n.kind) {
        case OpKind::Matmul: {
            const Tensor& ta = inval(0);
            const Tensor& tb = inval(1);
            const int m = ta.rank() == 2 ? ta.shape[0] : 1;
            const int k = ta.rank() == 2 ? ta.shape[1] : ta.shape[0];
            const int ncols = tb.rank() == 2 ? tb.shape[1] : 1;
            if (in_needs(0)) {
                mm_nt(g.data(), tb.values.data(), gin(0).data(), m, ncols, k);
            }
            if (in_needs(1)) {
                mm_tn(ta.values.data(), g.data(), gin(1).data(), m, k, ncols);
            }
            break;
        }
        case OpKind::Add: {
            if (in_needs(0)) {
                std::vector<double>& ga = gin(0);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (in_needs(1)) {
                std::vector<double>& gb = gin(1);
                if (n.aux0 == kSame) {
                    for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                } else if (n.aux0 == kScalar) {
                    for (size_t i = 0; i < g.size(); ++i) gb[0] += g[i];
                } else {
                    const size_t c = gb.size();
                    for (size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
                }
            }
            break;
        }
        case OpKind::Mul: {
            const Tensor& ta = inval(0);
            const Tensor& tb = inval(1);
            const size_t c = tb.values.size();
            if (in_needs(0)) {
                std::vector<double>& ga = gin(0);
                if (n.aux0 == kSame) {
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb.values[i];
                } else if (n.aux0 == kScalar) {
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb.values[0];
                } else {
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * tb.values[i % c];
                }
            }
            if (in_needs(1)) {
                std::vector<double>& gb = gin(1);
                if (n.aux0 == kSame) {
                    for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ta.values[i];
                } else if (n.aux0 == kScalar) {
                    for (size_t i = 0; i < g.size(); ++i) gb[0] += g[i] * ta.values[i];
                } else {
                    for (size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i] * ta.values[i];
                }
            }
            break;
        }
        case OpKind::Tanh: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < g.size(); ++i) {
                const double y = n.value.values[i];
                gx[i] += g[i] * (1.0 - y * y);
            }
            break;
        }
        case OpKind::Relu: {
            if (!in_needs(0)) break;
            const Tensor& tx = inval(0);
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < g.size(); ++i) {
                if (tx.values[i] > 0.0) gx[i] += g[i];
            }
            break;
        }
        case OpKind::Softplus: {
            if (!in_needs(0)) break;
            const Tensor& tx = inval(0);
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < g.size(); ++i) {
                gx[i] += g[i] * stable_sigmoid(tx.values[i]);
            }
            break;
        }
        case OpKind::Exp: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * n.value.values[i];
            break;
        }
        case OpKind::Log: {
            if (!in_needs(0)) break;
            const Tensor& tx = inval(0);
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] / tx.values[i];
            break;
        }
        case OpKind::Sum: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = gin(0);
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
            break;
        }
        case OpKind::Mean: {
            if (!in_needs(0)) break;
            std::vector<double>& gx = gin(0);
            const double inv = 1.0 / static_cast<double>(gx.size());
            for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * inv;
            break;
        }
        case OpKind::Slice: {
            if (!in_needs(0)) break;
            const Tensor& tx = inval(0);
            std::vector<double>& gx = gin(0);
            const int c0 = n.aux0, c1 = n.aux1;
            const int span = c1 - c0;
            if (tx.rank() == 1) {
                for (int j = 0; j < span; ++j) gx[static_cast<size_t>(c0 + j)] += g[static_cast<size_t>(j)];
            } else {
                const int width = tx.shape[1];
                for (int i = 0; i < tx.shape[0]; ++i) {
                    for (int j = 0; j < span; ++j) {
                        gx[static_cast<size_t>(i) * width + c0 + j] +=
                            g[static_cast<size_t>(i) * span + j];
                    }
                }
            }
            break;
        }
        case OpKind::Concat: {
            const Tensor& ta = inval(0);
            const Tensor& tb = inval(1);
            if (ta.rank() == 1) {
                if (in_needs(0)) {
                    std::vector<double>& ga = gin(0);
                    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                }
                if (in_needs(1)) {
                    std::vector<double>& gb = gin(1);
                    for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[ta.values.size() + i];
                }
            } else {
                const int rows = ta.shape[0];
                const int ca = ta.shape[1], cb = tb.shape[1];
                const int cw = ca + cb;
                if (in_needs(0)) {
                    std::vector<double>& ga = gin(0);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < ca; ++j)
                            ga[static_cast<size_t>(i) * ca + j] += g[static_cast<size_t>(i) * cw + j];
                }
                if (in_needs(1)) {
                    std::vector<double>& gb = gin(1);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cb; ++j)
                            gb[static_cast<size_t>(i) * cb + j] +=
                                g[static_cast<size_t>(i) * cw + ca + j];
                }
            }
            break;
        }
        case OpKind::GaussianLogPdf: {
            const Tensor& tx = inval(0);
            const Tensor& tmu = inval(1);
            const Tensor& tsig = inval(2);
            const size_t c = tsig.values.size();
            auto sig_at = [&](size_t i) {
                return n.aux0 == kSame ? tsig.values[i]
                                       : (n.aux0 == kScalar ? tsig.values[0] : tsig.values[i % c]);
            };
            for (size_t i = 0; i < g.size(); ++i) {
                const double s = sig_at(i);
                const double d = tx.values[i] - tmu.values[i];
                const double inv_s2 = 1.0 / (s * s);
                if (in_needs(0)) gin(0)[i] += g[i] * (-d * inv_s2);
                if (in_needs(1)) gin(1)[i] += g[i] * (d * inv_s2);
                if (in_needs(2)) {
                    const double ds = d * d * inv_s2 / s - 1.0 / s;
                    std::vector<double>& gs = gin(2);
                    if (n.aux0 == kSame) gs[i] += g[i] * ds;
                    else if (n.aux0 == kScalar) gs[0] += g[i] * ds;
                    else gs[i % c] += g[i] * ds;
                }
            }
            break;
        }
        case OpKind::LstmCell: {
            const Tensor& tx = inval(0);
            const Tensor& th = inval(1);
            const Tensor& tc = inval(2);
            const Tensor& wih = inval(3);
            const Tensor& whh = inval(4);
            const Tensor& gi = n.saved[0];
            const Tensor& gf = n.saved[1];
            const Tensor& gg = n.saved[2];
            const Tensor& go = n.saved[3];
            const Tensor& tanh_c = n.saved[4];
            const int batch = tx.shape[0];
            const int in_dim = tx.shape[1];
            const int hidden = th.shape[1];
            const std::vector<double>& gh = n.grad;
            const std::vector<double>& gc_out = n.grad2;

            Tensor dpre = Tensor::zeros({batch, 4 * hidden});
            std::vector<double>* gc_prev = in_needs(2) ? &gin(2) : nullptr;
            for (int i = 0; i < batch; ++i) {
                for (int j = 0; j < hidden; ++j) {
                    const size_t idx = static_cast<size_t>(i) * hidden + j;
                    const double vi = gi.values[idx], vf = gf.values[idx];
                    const double vg = gg.values[idx], vo = go.values[idx];
                    const double tch = tanh_c.values[idx];
                    const double d_h = gh[idx];
                    const double d_o = d_h * tch;
                    const double d_c = gc_out[idx] + d_h * vo * (1.0 - tch * tch);
                    const double d_i = d_c * vg;
                    const double d_g = d_c * vi;
                    const double d_f = d_c * tc.values[idx];
                    if (gc_prev) (*gc_prev)[idx] += d_c * vf;
                    dpre.at(i, j) = d_i * vi * (1.0 - vi);
                    dpre.at(i, hidden + j) = d_f * vf * (1.0 - vf);
                    dpre.at(i, 2 * hidden + j) = d_g * (1.0 - vg * vg);
                    dpre.at(i, 3 * hidden + j) = d_o * vo * (1.0 - vo);
                }
            }
            if (in_needs(0)) {
                mm_nt(dpre.values.data(), wih.values.data(), gin(0).data(), batch, 4 * hidden,
                      in_dim);
            }
            if (in_needs(1)) {
                mm_nt(dpre.values.data(), whh.values.data(), gin(1).data(), batch, 4 * hidden,
                      hidden);
            }
            if (in_needs(3)) {
                mm_tn(tx.values.data(), dpre.values.data(), gin(3).data(), batch, in_dim,
                      4 * hidden);
            }
            if (in_needs(4)) {
                mm_tn(th.values.data(), dpre.values.data(), gin(4).data(), batch, hidden,
                      4 * hidden);
            }
            if (in_needs(5)) {
                std::vector<double>& gb = gin(5);
                for (int i = 0; i < batch; ++i) {
                    for (int j = 0; j < 4 * hidden; ++j) {
                        gb[static_cast<size_t>(j)] += dpre.at(i, j);
                    }
                }
            }
            break;
        }
        case OpKind::Leaf:
            break;
    }
}

void Tape::reset() {
    nodes_.clear();
    backward_done_ = false;
}

Var sub(Tape& t, Var a, Var b) { return t.add(a, neg(t, b)); }

Var neg(Tape& t, Var x) { return t.mul(x, t.constant_scalar(-1.0)); }

Var scale(Tape& t, Var x, double c) { return t.mul(x, t.constant_scalar(c)); }

Var shift(Tape& t, Var x, double c) { return t.add(x, t.constant_scalar(c)); }

Var square(Tape& t, Var x) { return t.mul(x, x); }

}  // namespace skillrl::ad
