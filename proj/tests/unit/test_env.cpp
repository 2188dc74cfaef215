#include "sgfn/envs.hpp"
#include "sgfn/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

using namespace sgfn;

namespace {

EnvSpec grid_spec(int H, double alpha, int ndim = 2) {
    EnvSpec s;
    s.kind = EnvKind::hypergrid;
    s.H = H;
    s.ndim = ndim;
    s.alpha = alpha;
    return s;
}

EnvSpec bits_spec(int n, int k, double alpha) {
    EnvSpec s;
    s.kind = EnvKind::bitseq;
    s.n = n;
    s.k = k;
    s.alpha = alpha;
    s.num_modes = 2;
    return s;
}

EvenState cell(int x, int y) { return EvenState{{x, y}, false}; }

std::vector<int> ids(const std::vector<ActionId>& v) {
    std::vector<int> out;
    for (auto a : v) {
        out.push_back(a.index);
    }
    return out;
}

// Potential that every kernel edge increases by exactly one.
int potential(const EvenState& s) {
    int p = 0;
    for (int v : s.payload) {
        p += v;
    }
    return p;
}

std::vector<std::unique_ptr<Env>> small_envs() {
    std::vector<std::unique_ptr<Env>> out;
    out.push_back(std::make_unique<Figure1Toy>(0.5));
    out.push_back(std::make_unique<HyperGrid>(grid_spec(4, 0.25)));
    out.push_back(std::make_unique<HyperGrid>(grid_spec(3, 0.5, 3)));
    EnvSpec noisy = grid_spec(4, 0.3);
    noisy.stop_noisy = true;
    out.push_back(std::make_unique<HyperGrid>(noisy));
    out.push_back(std::make_unique<BitSeq>(bits_spec(6, 2, 0.3)));
    out.push_back(std::make_unique<HyperGrid>(grid_spec(4, 0.0)));
    return out;
}

}  // namespace

TEST_CASE("hypergrid actions: increments below the boundary plus stop") {
    HyperGrid g(grid_spec(8, 0.25));
    CHECK(ids(g.actions(cell(0, 0))) == std::vector<int>{0, 1, 2});
    CHECK(ids(g.actions(cell(7, 7))) == std::vector<int>{2});
    CHECK(ids(g.actions(cell(7, 3))) == std::vector<int>{1, 2});
    CHECK_THROWS_AS(g.actions(EvenState{{1, 1}, true}), UsageError);
}

TEST_CASE("bitseq k=4 offers 16 actions at every non-full prefix") {
    BitSeq b(bits_spec(16, 4, 0.1));
    CHECK(b.actions(b.initial()).size() == 16);
    CHECK(b.actions(EvenState{{3, 9, 1}, false}).size() == 16);
}

TEST_CASE("figure1 actions") {
    Figure1Toy f;
    CHECK(ids(f.actions(f.initial())) == std::vector<int>{0, 1});
}

TEST_CASE("hypergrid slip kernel at the origin") {
    HyperGrid g(grid_spec(8, 0.25));
    const auto k = g.kernel_support(cell(0, 0), ActionId{0});
    REQUIRE(k.size() == 2);
    std::map<EvenState, double> m;
    for (const auto& o : k) {
        m[o.next] = o.prob;
    }
    CHECK(m[cell(1, 0)] == doctest::Approx(0.875).epsilon(1e-15));
    CHECK(m[cell(0, 1)] == doctest::Approx(0.125).epsilon(1e-15));
    // stop stays deterministic by default
    const auto s = g.kernel_support(cell(3, 3), g.stop());
    REQUIRE(s.size() == 1);
    CHECK(s[0].next == EvenState{{3, 3}, true});
    CHECK(s[0].prob == 1.0);
}

TEST_CASE("boundary slip renormalises over valid moves") {
    HyperGrid g(grid_spec(8, 0.25));
    const auto k = g.kernel_support(cell(7, 2), ActionId{1});
    REQUIRE(k.size() == 1);
    CHECK(k[0].next == cell(7, 3));
    CHECK(k[0].prob == doctest::Approx(1.0));
}

TEST_CASE("figure1 kernel is 0.75 / 0.25") {
    Figure1Toy f;
    const auto k = f.kernel_support(f.initial(), ActionId{0});
    REQUIRE(k.size() == 2);
    for (const auto& o : k) {
        CHECK(o.prob == doctest::Approx(o.next == Figure1Toy::terminal(0) ? 0.75 : 0.25));
    }
}

TEST_CASE("alpha = 0 gives a single outcome with probability 1") {
    for (auto& env : {std::unique_ptr<Env>(new HyperGrid(grid_spec(5, 0.0))),
                      std::unique_ptr<Env>(new BitSeq(bits_spec(6, 2, 0.0))),
                      std::unique_ptr<Env>(new Figure1Toy(0.0))}) {
        for (const OddState& o : env->enumerate_states().odds) {
            const auto k = env->kernel_support(o.even, o.action);
            REQUIRE(k.size() == 1);
            CHECK(k[0].prob == 1.0);
            CHECK(k[0].next == env->intended_outcome(o.even, o.action));
        }
    }
}

TEST_CASE("step: alpha = 0 always lands on the intended cell; stop is terminal with its reward") {
    HyperGrid g(grid_spec(8, 0.0));
    Rng rng = make_stream(1, 0);
    for (int i = 0; i < 100; ++i) {
        CHECK(g.step(cell(0, 0), ActionId{0}, rng).s_next == cell(1, 0));
    }
    const StepRecord r = g.step(cell(3, 3), g.stop(), rng);
    CHECK(r.terminal);
    CHECK(r.reward == g.reward(EvenState{{3, 3}, true}));
}

TEST_CASE("figure1 step frequencies, 10^6 draws") {
    Figure1Toy f;
    Rng rng = make_stream(2, 0);
    int hits = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        hits += f.step(f.initial(), ActionId{0}, rng).s_next == Figure1Toy::terminal(0);
    }
    CHECK(std::abs(hits / double(n) - 0.75) < 0.002);
}

TEST_CASE("hypergrid parents of (1,1)") {
    HyperGrid noisy(grid_spec(8, 0.25));
    std::set<OddState> got;
    for (const auto& o : noisy.parents(cell(1, 1))) {
        got.insert(o);
    }
    const std::set<OddState> want = {{cell(0, 1), {0}}, {cell(0, 1), {1}}, {cell(1, 0), {0}}, {cell(1, 0), {1}}};
    CHECK(got == want);

    HyperGrid det(grid_spec(8, 0.0));
    got.clear();
    for (const auto& o : det.parents(cell(1, 1))) {
        got.insert(o);
    }
    CHECK(got == std::set<OddState>{{cell(0, 1), {0}}, {cell(1, 0), {1}}});
    CHECK_THROWS_AS(det.parents(det.initial()), UsageError);
}

TEST_CASE("bitseq k=2: a two-token child has 4 odd parents") {
    BitSeq b(bits_spec(4, 2, 0.2));
    const EvenState ab{{0, 1}, true};
    const auto ps = b.parents(ab);
    REQUIRE(ps.size() == 4);
    for (const auto& o : ps) {
        CHECK(o.even == EvenState{{0}, false});
    }
}

TEST_CASE("rewards") {
    HyperGrid g(grid_spec(8, 0.25));
    CHECK(g.reward(EvenState{{1, 1}, true}) == doctest::Approx(2.501).epsilon(1e-12));
    CHECK(g.reward(EvenState{{4, 4}, true}) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(g.reward(EvenState{{0, 0}, true}) == doctest::Approx(0.501).epsilon(1e-12));
    CHECK_THROWS_AS(g.reward(cell(1, 1)), UsageError);

    EnvSpec lit = grid_spec(8, 0.25);
    lit.R0 = 2.0;
    lit.R1 = 0.5;
    lit.R2 = 0.001;
    HyperGrid literal(lit);
    CHECK(literal.reward(EvenState{{1, 1}, true}) == doctest::Approx(2.501).epsilon(1e-12));
    CHECK(literal.reward(EvenState{{4, 4}, true}) == doctest::Approx(2.0).epsilon(1e-12));

    BitSeq b(bits_spec(8, 2, 0.1));
    const auto& m = b.modes()[0];
    std::vector<int> tok;
    for (std::size_t i = 0; i < m.size(); i += 2) {
        tok.push_back(m[i] * 2 + m[i + 1]);
    }
    CHECK(b.reward(EvenState{tok, true}) == doctest::Approx(1.0));

    Figure1Toy f;
    CHECK(f.reward(Figure1Toy::terminal(0)) == 1.0);
    CHECK(f.reward(Figure1Toy::terminal(1)) == 2.0);
}

TEST_CASE("enumeration sizes") {
    Figure1Toy f;
    const StateGraph fg = f.enumerate_states();
    CHECK(fg.evens.size() == 3);
    CHECK(fg.odds.size() == 2);

    HyperGrid g(grid_spec(4, 0.25));
    const StateGraph gg = g.enumerate_states();
    int interior = 0;
    int terminal = 0;
    std::size_t odds = 0;
    for (const auto& s : gg.evens) {
        (s.terminal ? terminal : interior)++;
        if (!s.terminal) {
            odds += g.actions(s).size();
        }
    }
    CHECK(interior == 16);
    CHECK(terminal == 16);
    CHECK(gg.odds.size() == odds);

    BitSeq big(bits_spec(120, 4, 0.1));
    CHECK_FALSE(big.enumerable());
    CHECK_THROWS_AS(big.enumerate_states(), NotEnumerableError);
}

TEST_CASE("edit distance") {
    const std::vector<int> a{1, 0, 1, 1};
    const std::vector<int> b{0, 1, 1};
    CHECK(edit_distance(a, b) == 1);
    CHECK(edit_distance(std::vector<int>{1, 1, 0}, std::vector<int>{0, 1, 1}) == 2);
    CHECK(edit_distance(a, a) == 0);
    CHECK(edit_distance(a, std::vector<int>{}) == 4);
}

TEST_CASE("spec validation names the field") {
    EnvSpec s = grid_spec(8, 1.5);
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("alpha"), ConfigError);
    s = grid_spec(1, 0.1);
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("env.H"), ConfigError);
    s = bits_spec(10, 4, 0.1);
    CHECK_THROWS_WITH_AS(s.validate(), doctest::Contains("env.n"), ConfigError);
}

TEST_CASE("state text round trip") {
    for (const EvenState& s : {cell(3, 0), EvenState{{2, 5, 1}, true}, EvenState{}}) {
        CHECK(parse_state(format_state(s)) == s);
    }
}

// ---- properties over every small env ----

TEST_CASE("kernel normalisation, bipartiteness and acyclicity") {
    for (const auto& env : small_envs()) {
        CAPTURE(env->fingerprint());
        const StateGraph g = env->enumerate_states();
        std::map<EvenState, std::size_t> pos;
        for (std::size_t i = 0; i < g.evens.size(); ++i) {
            pos[g.evens[i]] = i;
        }
        for (const OddState& o : g.odds) {
            double total = 0.0;
            for (const Outcome& oc : env->kernel_support(o.even, o.action)) {
                CHECK(oc.prob > 0.0);
                total += oc.prob;
                CHECK(pos.at(oc.next) > pos.at(o.even));
                if (env->kind() != EnvKind::figure1) {
                    if (oc.next.terminal && !o.even.terminal && oc.next.payload == o.even.payload) {
                        CHECK(potential(oc.next) == potential(o.even));
                    } else if (env->kind() == EnvKind::hypergrid) {
                        CHECK(potential(oc.next) == potential(o.even) + 1);
                    } else {
                        CHECK(oc.next.payload.size() == o.even.payload.size() + 1);
                    }
                }
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        for (const EvenState& s : g.evens) {
            if (s.terminal) {
                CHECK_THROWS_AS(env->actions(s), UsageError);
            } else {
                CHECK_FALSE(env->actions(s).empty());
            }
        }
    }
}

TEST_CASE("parent/child duality, exhaustive") {
    for (const auto& env : small_envs()) {
        CAPTURE(env->fingerprint());
        const StateGraph g = env->enumerate_states();
        std::map<EvenState, std::set<OddState>> from_kernel;
        for (const OddState& o : g.odds) {
            for (const Outcome& oc : env->kernel_support(o.even, o.action)) {
                from_kernel[oc.next].insert(o);
            }
        }
        for (const EvenState& s : g.evens) {
            if (s == env->initial()) {
                CHECK(from_kernel.count(s) == 0);
                continue;
            }
            const auto listed = env->parents(s);
            const std::set<OddState> ps(listed.begin(), listed.end());
            CHECK(ps.size() == listed.size());
            CHECK(ps == from_kernel[s]);
            CHECK_FALSE(ps.empty());
            // distinct backward slots for distinct parents
            std::set<int> slots;
            for (const auto& o : ps) {
                const int slot = env->backward_slot(o, s);
                CHECK(slot >= 0);
                CHECK(slot < env->num_backward_slots());
                slots.insert(slot);
            }
            CHECK(slots.size() == ps.size());
            // even view: the slot of each even parent is that of its intended odd parent
            for (const EvenState& p : env->even_parents(s)) {
                const auto a = env->intended_action(p, s);
                REQUIRE(a.has_value());
                CHECK(ps.count(OddState{p, *a}) == 1);
                CHECK(env->even_backward_slot(p, s) == env->backward_slot(OddState{p, *a}, s));
            }
        }
    }
}

TEST_CASE("Monte-Carlo step frequencies within 4 sigma at 10^5 draws") {
    Rng rng = make_stream(4, 0);
    for (const auto& env : small_envs()) {
        CAPTURE(env->fingerprint());
        const StateGraph g = env->enumerate_states();
        // a handful of odd states per env keeps this quick
        for (std::size_t i = 0; i < g.odds.size(); i += std::max<std::size_t>(1, g.odds.size() / 4)) {
            const OddState& o = g.odds[i];
            const auto k = env->kernel_support(o.even, o.action);
            std::map<EvenState, int> count;
            const int n = 100000;
            for (int d = 0; d < n; ++d) {
                ++count[env->step(o.even, o.action, rng).s_next];
            }
            for (const Outcome& oc : k) {
                const double sigma = std::sqrt(oc.prob * (1 - oc.prob) / n);
                CHECK(std::abs(count[oc.next] / double(n) - oc.prob) <= 4 * sigma + 1e-12);
            }
            int total = 0;
            for (const auto& [s, c] : count) {
                total += c;
            }
            CHECK(total == n);
        }
    }
}

TEST_CASE("external reward table: prefix trie, modes, diagnostics") {
    const std::string path = "sgfn_test_rewards.txt";
    {
        std::ofstream out(path);
        out << "ab 1.0\nba 3.0\naa 0.5\n";
    }
    EnvSpec s;
    s.kind = EnvKind::external;
    s.reward_file = path;
    s.alpha = 0.2;
    s.mode_threshold = 2.0;
    auto env = make_env(s);
    CHECK(env->num_modes() == 1);
    CHECK(env->terminals().size() == 3);
    double total = 0.0;
    for (const auto& x : env->terminals()) {
        total += env->reward(x);
    }
    CHECK(total == doctest::Approx(4.5));
    {
        std::ofstream out(path);
        out << "ab 1.0\nba -3\n";
    }
    CHECK_THROWS_WITH_AS(make_env(s), doctest::Contains(":2:"), ConfigError);
    std::remove(path.c_str());
}
