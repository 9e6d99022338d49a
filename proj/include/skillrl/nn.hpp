#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "skillrl/rng.hpp"
#include "skillrl/tape.hpp"
#include "skillrl/tensor.hpp"

namespace skillrl::nn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// Named, ordered parameter container. Order is insertion order and defines
// the binding order on a tape, the Adam slot order, and the checkpoint
// layout, so training is bit-reproducible run to run.
class ParamStore {
public:
    int add(const std::string& name, Tensor t);
    int find(const std::string& name) const;  // -1 when absent
    int require(const std::string& name) const;

    Tensor& tensor(int idx) { return tensors_[static_cast<size_t>(idx)]; }
    const Tensor& tensor(int idx) const { return tensors_[static_cast<size_t>(idx)]; }
    const std::string& name(int idx) const { return names_[static_cast<size_t>(idx)]; }
    int size() const { return static_cast<int>(tensors_.size()); }
    int64_t total_count() const;

    // stable content fingerprint over names, shapes and raw values
    std::string content_hash() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, int> index_;
};

// Per-step binding of every parameter as a tape leaf.
struct Bound {
    std::vector<Var> vars;
    Var operator[](int idx) const { return vars[static_cast<size_t>(idx)]; }
};

Bound bind(Tape& tape, const ParamStore& params);

// Gradients aligned with ParamStore order; call after tape.backward().
std::vector<std::vector<double>> collect_grads(const Tape& tape, const Bound& bound,
                                               const ParamStore& params);

// ---- initializers ----

// uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out))
Tensor glorot_uniform(int fan_in, int fan_out, Rng& rng);
Tensor zeros_param(std::vector<int> shape);

// ---- layers ----

struct Linear {
    int w = -1, b = -1;
    int in_dim = 0, out_dim = 0;

    static Linear create(ParamStore& ps, const std::string& prefix, int in_dim, int out_dim,
                         Rng& rng, bool zero_init = false);
    Var forward(Tape& tape, const Bound& bound, Var x) const;
};

// gain/bias layer-norm over the feature axis, built from tape primitives
struct LayerNorm {
    int gamma = -1, beta = -1;
    int dim = 0;

    static LayerNorm create(ParamStore& ps, const std::string& prefix, int dim);
    Var forward(Tape& tape, const Bound& bound, Var x) const;
};

enum class Activation { Relu, Tanh };

// stack of Linear(+optional LayerNorm)+activation blocks; no output head
struct Mlp {
    std::vector<Linear> layers;
    std::vector<LayerNorm> norms;  // empty when layer_norm == false
    Activation act = Activation::Relu;
    bool layer_norm = false;

    static Mlp create(ParamStore& ps, const std::string& prefix, int in_dim,
                      const std::vector<int>& hidden, Activation act, bool layer_norm, Rng& rng);
    Var forward(Tape& tape, const Bound& bound, Var x) const;
};

struct LstmCell {
    int w_ih = -1, w_hh = -1, b = -1;
    int in_dim = 0, hidden = 0;

    static LstmCell create(ParamStore& ps, const std::string& prefix, int in_dim, int hidden,
                           Rng& rng);
    // returns (h', c')
    std::pair<Var, Var> forward(Tape& tape, const Bound& bound, Var x, Var h, Var c) const;
};

}  // namespace skillrl::nn
