#include "sgfn/autodiff.hpp"
#include "sgfn/nn.hpp"

#include <doctest.h>

#include "testutil.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>

using namespace sgfn;
using ad::Tensor;
using testutil::check_gradient;
using testutil::random_tensor;

namespace {

Tensor mat(int r, int c, std::initializer_list<double> v) {
    Tensor t(r, c);
    int i = 0;
    for (double x : v) {
        t.data()[i++] = x;
    }
    return t;
}

}  // namespace

TEST_CASE("log_softmax of equal logits is -ln2") {
    ad::Tape t;
    ad::Var y = ad::log_softmax(t.constant(mat(1, 2, {0, 0})));
    CHECK(y.value()(0, 0) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
    CHECK(y.value()(0, 1) == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("log_softmax rows exponentiate to one") {
    Rng rng = make_stream(1, 0);
    ad::Tape t;
    ad::Var y = ad::log_softmax(t.constant(random_tensor(20, 7, rng, 30.0)));
    for (Eigen::Index r = 0; r < 20; ++r) {
        CHECK(std::abs(y.value().row(r).array().exp().sum() - 1.0) < 1e-9);
    }
}

TEST_CASE("masked log_softmax normalises over the mask only") {
    ad::Tape t;
    ad::Mask m(2, 3);
    m << true, false, true, false, false, false;
    ad::Var y = ad::masked_log_softmax(t.constant(mat(2, 3, {1, 50, 1, 3, 4, 5})), m);
    CHECK(y.value()(0, 0) == doctest::Approx(-std::log(2.0)));
    CHECK(y.value()(0, 1) == 0.0);
    CHECK(y.value()(1, 0) == 0.0);
    CHECK(y.value()(1, 2) == 0.0);
}

TEST_CASE("square, affine identity, x^2 gradient") {
    ad::Tape t;
    CHECK(ad::square(t.constant(3.0)).scalar() == 9.0);

    Tensor x = mat(2, 3, {1, 2, 3, 4, 5, 6});
    ad::Var y = ad::affine(t.constant(Tensor::Identity(3, 3)), t.constant(Tensor::Zero(1, 3)), t.constant(x));
    CHECK(y.value() == x);

    ad::Parameter p("x", mat(1, 1, {3.0}));
    ad::Tape t2;
    t2.backward(ad::square(t2.param(p)));
    CHECK(p.grad(0, 0) == 6.0);
}

TEST_CASE("sum of log_softmax at [1,2] matches finite differences") {
    ad::Parameter z("z", mat(1, 2, {1, 2}));
    check_gradient({&z}, [&](ad::Tape& t) { return ad::sum(ad::log_softmax(t.param(z))); });
}

TEST_CASE("disconnected leaf gets an exactly zero gradient") {
    ad::Parameter a("a", mat(1, 1, {2.0}));
    ad::Parameter b("b", mat(1, 1, {5.0}));
    a.zero_grad();
    b.zero_grad();
    ad::Tape t;
    t.param(b);
    t.backward(ad::square(t.param(a)));
    CHECK(b.grad(0, 0) == 0.0);
    CHECK(a.grad(0, 0) == 4.0);
}

TEST_CASE("non-scalar root is a usage error") {
    ad::Tape t;
    ad::Var v = t.constant(Tensor::Zero(2, 2));
    CHECK_THROWS_AS(t.backward(v), std::invalid_argument);
}

TEST_CASE("shape mismatch names both shapes") {
    ad::Tape t;
    try {
        ad::add(t.constant(Tensor::Zero(2, 3)), t.constant(Tensor::Zero(3, 2)));
        FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[3x2]") != std::string::npos);
    }
    CHECK_THROWS_AS(ad::matmul(t.constant(Tensor::Zero(2, 3)), t.constant(Tensor::Zero(2, 3))),
                    std::invalid_argument);
}

TEST_CASE("every primitive matches finite differences on random inputs") {
    Rng rng = make_stream(7, 0);
    ad::Parameter a("a", random_tensor(4, 3, rng));
    ad::Parameter b("b", random_tensor(4, 3, rng));
    ad::Parameter w("w", random_tensor(3, 5, rng));
    ad::Parameter bias("bias", random_tensor(1, 5, rng));
    ad::Parameter s("s", random_tensor(1, 1, rng));
    const Tensor c = random_tensor(4, 3, rng);
    const Tensor proj = random_tensor(5, 2, rng);
    ad::Mask m(4, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = (i % 3) != 1;
    }

    SUBCASE("add sub mul square scale") {
        check_gradient({&a, &b}, [&](ad::Tape& t) {
            ad::Var x = ad::mul(ad::add(t.param(a), t.param(b)), ad::sub(t.param(a), ad::scale(t.param(b), 0.3)));
            return ad::sum(ad::square(x));
        });
    }
    SUBCASE("constants, mean, clamp") {
        check_gradient({&a}, [&](ad::Tape& t) {
            ad::Var x = ad::mul_const(ad::add_const(t.param(a), c), c);
            return ad::mean(ad::square(ad::clamp_min(x, -0.05)));
        });
    }
    SUBCASE("matmul, affine, activations") {
        check_gradient({&a, &w, &bias}, [&](ad::Tape& t) {
            ad::Var h = ad::affine(t.param(w), t.param(bias), t.param(a));
            ad::Var g = ad::matmul(ad::leaky_relu(h), ad::matmul(t.constant(proj), t.constant(Tensor::Ones(2, 1))));
            return ad::sum(ad::add(ad::relu(h), ad::broadcast(ad::sum(g), 4, 5)));
        });
    }
    SUBCASE("log_softmax variants and gathers") {
        check_gradient({&w, &a, &bias}, [&](ad::Tape& t) {
            ad::Var h = ad::affine(t.param(w), t.param(bias), t.param(a));
            ad::Var l = ad::masked_log_softmax(h, m);
            ad::Var g = ad::gather_cols(l, {0, 2, 3, 4});
            ad::Var r = ad::gather_rows(ad::log_softmax(h), {3, 0, 0});
            ad::Var seg = ad::segment_sum(g, {0, 1, 1, 0}, 2);
            return ad::add(ad::sum(ad::square(seg)),
                           ad::sum(ad::add(ad::slice_rows(r, 1, 2), ad::slice_rows(r, 0, 2))));
        });
    }
    SUBCASE("slices and scalar broadcast") {
        check_gradient({&w, &s}, [&](ad::Tape& t) {
            ad::Var x = ad::slice_cols(t.param(w), 1, 3);
            return ad::sum(ad::square(ad::sub(x, ad::broadcast(t.param(s), 3, 3))));
        });
    }
}

TEST_CASE("mlp forward on a tape agrees with the tape-free forward") {
    Rng rng = make_stream(3, 0);
    nn::Mlp net("net", 6, {8, 8}, 4, nn::Activation::leaky_relu, rng);
    Tensor x = random_tensor(5, 6, rng);
    ad::Tape t;
    CHECK((net.forward(t, t.constant(x)).value() - net.forward(x)).cwiseAbs().maxCoeff() < 1e-14);
    auto params = net.parameters();
    check_gradient(params, [&](ad::Tape& tp) { return ad::sum(ad::log_softmax(net.forward(tp, tp.constant(x)))); });
}

TEST_CASE("adam: zero gradient leaves params unchanged and still counts the step") {
    ad::Parameter p("p", mat(1, 2, {1.5, -2.0}));
    nn::Adam opt;
    opt.add(p, 0.1);
    opt.zero_grad();
    opt.step();
    CHECK(p.value(0, 0) == 1.5);
    CHECK(p.value(0, 1) == -2.0);
    CHECK(opt.t() == 1);
}

TEST_CASE("adam: first step with g=1 moves by lr/(1+1e-8)") {
    ad::Parameter p("p", mat(1, 1, {0.0}));
    nn::Adam opt;
    opt.add(p, 0.1);
    p.grad(0, 0) = 1.0;
    opt.step();
    // Hand evaluation at t=1: m^ = 1, v^ = 1, update = lr * 1 / (1 + eps).
    CHECK(p.value(0, 0) == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam: identical params with identical grads stay identical") {
    ad::Parameter a("a", mat(1, 3, {0.3, -0.2, 1.0}));
    ad::Parameter b("b", mat(1, 3, {0.3, -0.2, 1.0}));
    nn::Adam opt;
    opt.add(a, 0.01);
    opt.add(b, 0.01);
    for (int i = 0; i < 50; ++i) {
        a.grad = a.value * 0.7 + Tensor::Constant(1, 3, i * 0.01);
        b.grad = b.value * 0.7 + Tensor::Constant(1, 3, i * 0.01);
        opt.step();
    }
    CHECK(a.value == b.value);
}

TEST_CASE("adam: non-finite gradient names the parameter") {
    ad::Parameter p("gfn.trunk.l0.w", mat(1, 1, {0.0}));
    nn::Adam opt;
    opt.add(p, 0.1);
    p.grad(0, 0) = std::nan("");
    try {
        opt.step();
        FAIL("expected an error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("gfn.trunk.l0.w") != std::string::npos);
    }
    CHECK(opt.t() == 0);
}

TEST_CASE("checkpoint round trip is exact") {
    Rng rng = make_stream(11, 0);
    nn::TensorMap m;
    m["a.w"] = random_tensor(3, 4, rng, 1e3);
    m["logZ"] = mat(1, 1, {1.0 / 3.0});
    const std::string path = "sgfn_test_ckpt.txt";
    nn::save_checkpoint(path, m);
    const nn::TensorMap back = nn::load_checkpoint(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == 2);
    CHECK(back.at("a.w") == m.at("a.w"));
    CHECK(back.at("logZ") == m.at("logZ"));
}

TEST_CASE("determinism: same inputs give bit-identical outputs") {
    Rng r1 = make_stream(5, 9);
    Rng r2 = make_stream(5, 9);
    nn::Mlp a("n", 4, {16}, 3, nn::Activation::relu, r1);
    nn::Mlp b("n", 4, {16}, 3, nn::Activation::relu, r2);
    Rng rx = make_stream(5, 10);
    Tensor x = random_tensor(7, 4, rx);
    CHECK(a.forward(x) == b.forward(x));
}
