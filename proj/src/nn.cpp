#include "skillrl/nn.hpp"

#include <cmath>

#include "skillrl/errors.hpp"
#include "skillrl/hash.hpp"

namespace skillrl::nn {

int ParamStore::add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw Error("params: duplicate parameter name '" + name + "'");
    t.requires_grad = true;
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    const int idx = static_cast<int>(tensors_.size()) - 1;
    index_[name] = idx;
    return idx;
}

int ParamStore::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int ParamStore::require(const std::string& name) const {
    const int idx = find(name);
    if (idx < 0) throw Error("params: missing parameter '" + name + "'");
    return idx;
}

int64_t ParamStore::total_count() const {
    int64_t n = 0;
    for (const Tensor& t : tensors_) n += t.numel();
    return n;
}

std::string ParamStore::content_hash() const {
    Sha256 h;
    for (int i = 0; i < size(); ++i) {
        h.update(names_[static_cast<size_t>(i)]);
        const Tensor& t = tensors_[static_cast<size_t>(i)];
        h.update(t.shape.data(), t.shape.size() * sizeof(int));
        h.update(t.values);
    }
    return h.hex();
}

Bound bind(Tape& tape, const ParamStore& params) {
    Bound b;
    b.vars.reserve(static_cast<size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
        b.vars.push_back(tape.leaf(params.tensor(i)));
    }
    return b;
}

std::vector<std::vector<double>> collect_grads(const Tape& tape, const Bound& bound,
                                               const ParamStore& params) {
    std::vector<std::vector<double>> out(static_cast<size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
        out[static_cast<size_t>(i)] = tape.grad(bound[i]);
    }
    return out;
}

Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Tensor t = Tensor::zeros({fan_in, fan_out});
    for (double& v : t.values) v = rng.uniform(-limit, limit);
    return t;
}

Tensor zeros_param(std::vector<int> shape) { return Tensor::zeros(std::move(shape)); }

Linear Linear::create(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                      Rng& rng, bool zero_init) {
    Linear l;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    Tensor w = zero_init ? Tensor::zeros({in_dim, out_dim}) : glorot_uniform(in_dim, out_dim, rng);
    l.w = ps.add(prefix + ".w", std::move(w));
    l.b = ps.add(prefix + ".b", Tensor::zeros({out_dim}));
    return l;
}

Var Linear::forward(Tape& tape, const Bound& bound, Var x) const {
    return tape.add(tape.matmul(x, bound[w]), bound[b]);
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& prefix, int dim) {
    LayerNorm ln;
    ln.dim = dim;
    ln.gamma = ps.add(prefix + ".gamma", Tensor::full({dim}, 1.0));
    ln.beta = ps.add(prefix + ".beta", Tensor::zeros({dim}));
    return ln;
}

Var LayerNorm::forward(Tape& tape, const Bound& bound, Var x) const {
    // Row statistics are expressed with matmuls against constant one-vectors
    // so the whole normalisation stays inside the primitive set.
    const Tensor& tx = tape.value(x);
    const int n = tx.cols();
    if (n != dim) {
        throw ShapeError("layer_norm: input width " + std::to_string(n) + " != " +
                         std::to_string(dim));
    }
    Var avg_vec = tape.constant(Tensor::full({n, 1}, 1.0 / n));
    Var ones_row = tape.constant(Tensor::full({1, n}, 1.0));

    Var row_mean = tape.matmul(x, avg_vec);                    // (B,1)
    Var mean_full = tape.matmul(row_mean, ones_row);           // (B,N)
    Var centered = ad::sub(tape, x, mean_full);
    Var var_row = tape.matmul(ad::square(tape, centered), avg_vec);  // (B,1)
    Var inv_std = tape.exp(ad::scale(tape, tape.log(ad::shift(tape, var_row, 1e-5)), -0.5));
    Var inv_full = tape.matmul(inv_std, ones_row);             // (B,N)
    Var normed = tape.mul(centered, inv_full);
    return tape.add(tape.mul(normed, bound[gamma]), bound[beta]);
}

Mlp Mlp::create(ParamStore& ps, const std::string& prefix, int in_dim,
                const std::vector<int>& hidden, Activation act, bool layer_norm, Rng& rng) {
    Mlp m;
    m.act = act;
    m.layer_norm = layer_norm;
    int cur = in_dim;
    for (size_t i = 0; i < hidden.size(); ++i) {
        const std::string name = prefix + ".l" + std::to_string(i);
        m.layers.push_back(Linear::create(ps, name, cur, hidden[i], rng));
        if (layer_norm) m.norms.push_back(LayerNorm::create(ps, name + ".ln", hidden[i]));
        cur = hidden[i];
    }
    return m;
}

Var Mlp::forward(Tape& tape, const Bound& bound, Var x) const {
    Var h = x;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = layers[i].forward(tape, bound, h);
        if (layer_norm) h = norms[i].forward(tape, bound, h);
        h = act == Activation::Relu ? tape.relu(h) : tape.tanh(h);
    }
    return h;
}

LstmCell LstmCell::create(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                          Rng& rng) {
    LstmCell c;
    c.in_dim = in_dim;
    c.hidden = hidden;
    c.w_ih = ps.add(prefix + ".w_ih", glorot_uniform(in_dim, 4 * hidden, rng));
    c.w_hh = ps.add(prefix + ".w_hh", glorot_uniform(hidden, 4 * hidden, rng));
    c.b = ps.add(prefix + ".b", Tensor::zeros({4 * hidden}));
    return c;
}

std::pair<Var, Var> LstmCell::forward(Tape& tape, const Bound& bound, Var x, Var h, Var c) const {
    return tape.lstm_cell(x, h, c, bound[w_ih], bound[w_hh], bound[b]);
}

}  // namespace skillrl::nn
