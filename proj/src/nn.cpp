#include "sgfn/nn.hpp"

#include "sgfn/errors.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sgfn::nn {

Activation parse_activation(const std::string& s) {
    if (s == "relu") {
        return Activation::relu;
    }
    if (s == "leaky_relu") {
        return Activation::leaky_relu;
    }
    throw ConfigError("unknown activation '" + s + "' (expected relu or leaky_relu)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "leaky_relu"; }

Mlp::Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out, Activation act, Rng& rng)
    : act_(act), in_(in), out_(out) {
    std::vector<int> dims;
    dims.push_back(in);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        // PyTorch nn.Linear default: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and bias.
        const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        std::uniform_real_distribution<double> u(-bound, bound);
        Tensor w(dims[l], dims[l + 1]);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = u(rng);
        }
        Tensor b(1, dims[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            b.data()[i] = u(rng);
        }
        Layer layer;
        layer.w = std::make_unique<Parameter>(name + ".l" + std::to_string(l) + ".w", std::move(w));
        layer.b = std::make_unique<Parameter>(name + ".l" + std::to_string(l) + ".b", std::move(b));
        layers_.push_back(std::move(layer));
    }
}

ad::Var Mlp::forward(ad::Tape& tape, ad::Var x) {
    ad::Var h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = ad::affine(tape.param(*layers_[l].w), tape.param(*layers_[l].b), h);
        if (l + 1 < layers_.size()) {
            h = act_ == Activation::relu ? ad::relu(h) : ad::leaky_relu(h);
        }
    }
    return h;
}

Tensor Mlp::forward(const Tensor& x) const {
    Tensor h = x;
    const double slope = act_ == Activation::relu ? 0.0 : 0.01;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Tensor z = h * layers_[l].w->value;
        z.rowwise() += layers_[l].b->value.row(0);
        if (l + 1 < layers_.size()) {
            z = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
        }
        h = std::move(z);
    }
    return h;
}

std::vector<Parameter*> Mlp::parameters() {
    std::vector<Parameter*> out;
    for (auto& l : layers_) {
        out.push_back(l.w.get());
        out.push_back(l.b.get());
    }
    return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& l : layers_) {
        out.push_back(l.w.get());
        out.push_back(l.b.get());
    }
    return out;
}

void Adam::add(Parameter& p, double lr) {
    slots_.push_back(Slot{&p, lr, Tensor::Zero(p.value.rows(), p.value.cols()),
                          Tensor::Zero(p.value.rows(), p.value.cols())});
}

void Adam::zero_grad() {
    for (auto& s : slots_) {
        s.param->zero_grad();
    }
}

void Adam::step() {
    for (const auto& s : slots_) {
        if (!s.param->grad.allFinite()) {
            throw std::runtime_error("adam: non-finite gradient in parameter '" + s.param->name + "'");
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
    for (auto& s : slots_) {
        const Tensor& g = s.param->grad;
        s.m = hyper_.beta1 * s.m + (1.0 - hyper_.beta1) * g;
        s.v = hyper_.beta2 * s.v + (1.0 - hyper_.beta2) * g.cwiseProduct(g);
        const double lr = s.lr;
        const double eps = hyper_.eps;
        s.param->value.array() -=
            lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + eps);
    }
}

void save_checkpoint(const std::string& path, const TensorMap& tensors) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write checkpoint '" + path + "'");
    }
    out << "sgfn-checkpoint 1\n" << tensors.size() << "\n";
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& [name, t] : tensors) {
        out << name << " " << t.rows() << " " << t.cols() << "\n";
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            out << (i == 0 ? "" : " ") << t.data()[i];
        }
        out << "\n";
    }
}

TensorMap load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read checkpoint '" + path + "'");
    }
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    in >> magic >> version >> count;
    if (magic != "sgfn-checkpoint" || version != 1) {
        throw std::runtime_error("'" + path + "' is not an sgfn checkpoint (v1)");
    }
    TensorMap out;
    for (std::size_t k = 0; k < count; ++k) {
        std::string name;
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
        if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) {
            throw std::runtime_error("checkpoint '" + path + "': bad header for tensor " + std::to_string(k));
        }
        Tensor t(rows, cols);
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            if (!(in >> t.data()[i])) {
                throw std::runtime_error("checkpoint '" + path + "': truncated data for '" + name + "'");
            }
        }
        out.emplace(name, std::move(t));
    }
    return out;
}

}  // namespace sgfn::nn
