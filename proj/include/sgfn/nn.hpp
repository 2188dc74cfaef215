#pragma once

#include "sgfn/autodiff.hpp"
#include "sgfn/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace sgfn::nn {

using ad::Parameter;
using ad::Tensor;

enum class Activation { relu, leaky_relu };

Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

// Fully connected network: in -> hidden... -> out, activation between layers,
// linear output. Weights are stored [in x out].
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, Activation act, Rng& rng);

    ad::Var forward(ad::Tape& tape, ad::Var x);
    // Inference without recording a tape.
    Tensor forward(const Tensor& x) const;

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    int in_features() const { return in_; }
    int out_features() const { return out_; }
    Activation activation() const { return act_; }

private:
    struct Layer {
        std::unique_ptr<Parameter> w;
        std::unique_ptr<Parameter> b;
    };
    std::vector<Layer> layers_;
    Activation act_ = Activation::leaky_relu;
    int in_ = 0;
    int out_ = 0;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Each registered parameter carries its own learning
// rate so logZ can move faster than the network weights.
class Adam {
public:
    explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

    void add(Parameter& p, double lr);
    // Applies one update using every parameter's accumulated grad.
    // Throws std::runtime_error naming the parameter if a gradient is not finite.
    void step();
    void zero_grad();

    std::int64_t t() const { return t_; }
    const AdamHyper& hyper() const { return hyper_; }

private:
    struct Slot {
        Parameter* param;
        double lr;
        Tensor m;
        Tensor v;
    };
    AdamHyper hyper_;
    std::vector<Slot> slots_;
    std::int64_t t_ = 0;
};

// Text checkpoint: see README "Checkpoint format".
using TensorMap = std::map<std::string, Tensor>;
void save_checkpoint(const std::string& path, const TensorMap& tensors);
TensorMap load_checkpoint(const std::string& path);

}  // namespace sgfn::nn
