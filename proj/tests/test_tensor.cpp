#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

#include "lwal/autodiff.hpp"
#include "lwal/errors.hpp"
#include "lwal/tensor.hpp"

using lwal::Tape;
using lwal::Tensor;
using lwal::Var;
using testutil::random_tensor;

TEST_CASE("tensor shape bookkeeping") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK(t.all_finite());
    CHECK_THROWS_AS(Tensor({2, 0}), lwal::ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), lwal::ShapeError);
}

TEST_CASE("matmul identity and basis selection") {
    Tape t;
    Var eye = t.leaf(Tensor::matrix(2, 2, {1, 0, 0, 1}));
    Var a = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK(t.value(t.matmul(eye, a)) == Tensor::matrix(2, 2, {1, 2, 3, 4}));

    Var basis = t.leaf(Tensor::matrix(1, 2, {1, 0}));
    Var col = t.leaf(Tensor::matrix(2, 1, {2, 5}));
    CHECK(t.value(t.matmul(basis, col)) == Tensor::matrix(1, 1, {2}));

    CHECK_THROWS_AS(t.matmul(a, basis), lwal::ShapeError);
}

TEST_CASE("matmul gradient of sum(a*b) wrt a is ones*b^T") {
    std::mt19937_64 rng(11);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);

    Tape t;
    Var av = t.leaf(a, true);
    Var bv = t.leaf(b);
    t.backward(t.sum(t.matmul(av, bv)));
    const Tensor& ga = t.grad(av);

    // ones(3x2) * b^T
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            double expected = 0.0;
            for (std::size_t j = 0; j < 2; ++j) expected += b.at(k, j);
            CHECK(ga.at(i, k) == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    const double err = lwal::grad_check(
        [&b](Tape& tape, Var x) { return tape.sum(tape.matmul(x, tape.leaf(b))); }, a);
    CHECK(err < 1e-5);
}

TEST_CASE("elementwise op values") {
    Tape t;
    Var x = t.leaf(Tensor::row({-1, 0, 2}));
    CHECK(t.value(t.relu(x)) == Tensor::row({0, 0, 2}));

    Var half = t.leaf(Tensor::row({0.5}));
    CHECK(t.value(t.log(t.exp(half)))[0] == doctest::Approx(0.5).epsilon(1e-15));

    Var a = t.leaf(Tensor::row({1, 2}));
    Var b = t.leaf(Tensor::row({3, 5}));
    CHECK(t.value(t.add(a, b)) == Tensor::row({4, 7}));
    CHECK(t.value(t.sub(a, b)) == Tensor::row({-2, -3}));
    CHECK(t.value(t.mul(a, b)) == Tensor::row({3, 10}));
    CHECK(t.value(t.scale(a, -2.0)) == Tensor::row({-2, -4}));

    CHECK_THROWS_AS(t.add(a, x), lwal::ShapeError);
    CHECK_THROWS_AS(t.log(t.leaf(Tensor::row({-1.0}))), lwal::DomainError);
    CHECK_THROWS_AS(t.log(t.leaf(Tensor::row({0.0}))), lwal::DomainError);
}

TEST_CASE("relu subgradient is 0 below and at zero, 1 above") {
    Tape t;
    Var x = t.leaf(Tensor::row({-1.0, 0.0, 2.0}), true);
    t.backward(t.sum(t.relu(x)));
    CHECK(t.grad(x) == Tensor::row({0.0, 0.0, 1.0}));
}

TEST_CASE("row_softmax values and stability") {
    Tape t;
    Var uniform = t.leaf(Tensor::matrix(1, 3, {0, 0, 0}));
    const Tensor& pu = t.value(t.row_softmax(uniform));
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(pu[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }

    Var ratios = t.leaf(Tensor::matrix(1, 3, {std::log(1.0), std::log(2.0), std::log(3.0)}));
    const Tensor& pr = t.value(t.row_softmax(ratios));
    CHECK(pr[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(pr[1] == doctest::Approx(2.0 / 6.0).epsilon(1e-12));
    CHECK(pr[2] == doctest::Approx(3.0 / 6.0).epsilon(1e-12));

    Var big = t.leaf(Tensor::matrix(1, 3, {1000, 1000, 999}));
    const Tensor& pb = t.value(t.row_softmax(big));
    double sum = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(std::isfinite(pb[j]));
        sum += pb[j];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("row_softmax rows sum to 1 and shift invariance") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const Tensor logits = random_tensor({4, 5}, rng, -30.0, 30.0);
        Tensor shifted = logits;
        std::uniform_real_distribution<double> shift_dist(-5.0, 5.0);
        for (std::size_t i = 0; i < 4; ++i) {
            const double shift = shift_dist(rng);
            for (std::size_t j = 0; j < 5; ++j) shifted.at(i, j) += shift;
        }
        Tape t;
        const Tensor& p = t.value(t.row_softmax(t.leaf(logits)));
        const Tensor& ps = t.value(t.row_softmax(t.leaf(shifted)));
        for (std::size_t i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 5; ++j) {
                sum += p.at(i, j);
                CHECK(p.at(i, j) == doctest::Approx(ps.at(i, j)).epsilon(1e-9));
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("row_l2_distance values") {
    Tape t;
    Var z = t.leaf(Tensor::matrix(1, 2, {0, 0}));
    Var c = t.leaf(Tensor::matrix(1, 2, {3, 4}));
    CHECK(t.value(t.row_l2_distance(z, c))[0] == doctest::Approx(5.0).epsilon(1e-6));

    // Coincident row: smoothed distance sqrt(eps), finite gradient.
    Tape t2;
    Var z2 = t2.leaf(Tensor::matrix(1, 2, {1, 2}), true);
    Var c2 = t2.leaf(Tensor::matrix(1, 2, {1, 2}));
    Var d2 = t2.row_l2_distance(z2, c2);
    CHECK(t2.value(d2)[0] == doctest::Approx(1e-6).epsilon(1e-9));
    t2.backward(t2.sum(d2));
    CHECK(t2.grad(z2).all_finite());

    Tape t3;
    CHECK_THROWS_AS(
        t3.row_l2_distance(t3.leaf(Tensor::matrix(1, 2, {0, 0})),
                           t3.leaf(Tensor::matrix(1, 3, {0, 0, 0}))),
        lwal::ShapeError);
}

TEST_CASE("row_l2_distance matches the double-loop oracle") {
    std::mt19937_64 rng(31);
    const Tensor z = random_tensor({4, 3}, rng, -2.0, 2.0);
    const Tensor c = random_tensor({2, 3}, rng, -2.0, 2.0);
    Tape t;
    const Tensor& d = t.value(t.row_l2_distance(t.leaf(z), t.leaf(c)));
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            double s = 1e-12;
            for (std::size_t k = 0; k < 3; ++k) {
                s += (z.at(i, k) - c.at(j, k)) * (z.at(i, k) - c.at(j, k));
            }
            CHECK(std::abs(d.at(i, j) - std::sqrt(s)) < 1e-12);
        }
    }
}

TEST_CASE("row_l2_distance role symmetry and nonnegativity") {
    std::mt19937_64 rng(41);
    const Tensor z = random_tensor({3, 4}, rng);
    const Tensor c = random_tensor({5, 4}, rng);
    Tape t;
    const Tensor& d1 = t.value(t.row_l2_distance(t.leaf(z), t.leaf(c)));
    const Tensor& d2 = t.value(t.row_l2_distance(t.leaf(c), t.leaf(z)));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(d1.at(i, j) == d2.at(j, i));
            CHECK(d1.at(i, j) >= 0.0);
        }
    }
}

TEST_CASE("cosine_sim values and bounds") {
    Tape t;
    Var u = t.leaf(Tensor::row({1, 2}));
    CHECK(t.value(t.cosine_sim(u, u))[0] == doctest::Approx(1.0).epsilon(1e-12));

    Var e1 = t.leaf(Tensor::row({1, 0}));
    Var e2 = t.leaf(Tensor::row({0, 1}));
    CHECK(t.value(t.cosine_sim(e1, e2))[0] == doctest::Approx(0.0).epsilon(1e-15));

    Var p = t.leaf(Tensor::row({1, 1}));
    Var n = t.leaf(Tensor::row({-1, -1}));
    CHECK(t.value(t.cosine_sim(p, n))[0] == doctest::Approx(-1.0).epsilon(1e-12));

    CHECK_THROWS_AS(t.cosine_sim(t.leaf(Tensor::row({0, 0})), e1), lwal::DomainError);

    std::mt19937_64 rng(51);
    for (int rep = 0; rep < 50; ++rep) {
        Tape tt;
        const Tensor a = random_tensor({4}, rng, -3.0, 3.0);
        const Tensor b = random_tensor({4}, rng, -3.0, 3.0);
        const double s = tt.value(tt.cosine_sim(tt.leaf(a), tt.leaf(b)))[0];
        CHECK(std::abs(s) <= 1.0 + 1e-12);
        const double self = tt.value(tt.cosine_sim(tt.leaf(a), tt.leaf(a)))[0];
        CHECK(self == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("backward basics") {
    Tape t;
    Var w = t.leaf(Tensor::row({1, 2, 3}), true);
    t.backward(t.sum(w));
    CHECK(t.grad(w) == Tensor::row({1, 1, 1}));

    Tape t2;
    Var w2 = t2.leaf(Tensor::row({1, 2}), true);
    t2.backward(t2.sum(t2.mul(w2, w2)));
    CHECK(t2.grad(w2) == Tensor::row({2, 4}));
}

TEST_CASE("tape is single use and rejects non-scalar roots") {
    Tape t;
    Var w = t.leaf(Tensor::row({1, 2}), true);
    Var loss = t.sum(w);
    t.backward(loss);
    CHECK(t.consumed());
    CHECK_THROWS_AS(t.backward(loss), lwal::UsageError);
    CHECK_THROWS_AS(t.sum(w), lwal::UsageError); // no recording after backward

    Tape t2;
    Var w2 = t2.leaf(Tensor::row({1, 2}), true);
    CHECK_THROWS_AS(t2.backward(w2), lwal::UsageError);
}

TEST_CASE("non-finite values are rejected") {
    Tape t;
    CHECK_THROWS_AS(t.leaf(Tensor::row({std::nan("")})), lwal::DomainError);
    CHECK_THROWS_AS(t.exp(t.leaf(Tensor::row({1000.0}))), lwal::NumericError);
}

TEST_CASE("grad_check on x^2 at 3") {
    const double err = lwal::grad_check(
        [](Tape& t, Var x) { return t.mul(x, x); }, Tensor::scalar(3.0));
    CHECK(err < 1e-8);
}

TEST_CASE("grad_check on softmax cross entropy") {
    std::mt19937_64 rng(61);
    const Tensor logits = random_tensor({3, 4}, rng, -1.0, 1.0);
    const std::vector<int> labels{1, 0, 3};
    const double err = lwal::grad_check(
        [&labels](Tape& t, Var x) { return t.nll_mean(t.row_softmax(x), labels); }, logits);
    CHECK(err < 1e-5);
}

TEST_CASE("grad_check on repel loss, 4 vectors, 2 classes") {
    std::mt19937_64 rng(71);
    const Tensor z = random_tensor({4, 3}, rng, 0.5, 2.0);
    const std::vector<int> labels{0, 0, 1, 1};
    const double err = lwal::grad_check(
        [&labels](Tape& t, Var x) { return t.repel_sum(x, labels); }, z);
    CHECK(err < 1e-5);
}

// Every differentiable op against central finite differences at random
// points kept away from relu kinks and coincident rows.
TEST_CASE("gradient property sweep over all ops") {
    std::mt19937_64 rng(81);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Tensor a = random_tensor({3, 4}, rng, 0.2, 1.5);
        const Tensor b = random_tensor({4, 2}, rng, -1.5, -0.2);
        const Tensor sq = random_tensor({3, 4}, rng, -2.0, -0.1);
        const std::vector<int> labels{0, 1, 2};

        const auto check = [&worst](const std::function<Var(Tape&, Var)>& fn, const Tensor& x) {
            worst = std::max(worst, lwal::grad_check(fn, x));
        };

        check([&b](Tape& t, Var x) { return t.sum(t.matmul(x, t.leaf(b))); }, a);
        check([&a](Tape& t, Var x) { return t.sum(t.matmul(t.leaf(a), x)); }, b);
        check([&sq](Tape& t, Var x) { return t.sum(t.add(x, t.leaf(sq))); }, a);
        check([&sq](Tape& t, Var x) { return t.sum(t.sub(x, t.leaf(sq))); }, a);
        check([&sq](Tape& t, Var x) { return t.sum(t.mul(x, t.leaf(sq))); }, a);
        check([](Tape& t, Var x) { return t.sum(t.scale(x, -2.5)); }, a);
        check([](Tape& t, Var x) { return t.sum(t.relu(x)); }, sq); // negative side only
        check([](Tape& t, Var x) { return t.sum(t.relu(x)); }, a);  // positive side only
        check([](Tape& t, Var x) { return t.sum(t.log(x)); }, a);
        check([](Tape& t, Var x) { return t.sum(t.exp(x)); }, sq);
        check([](Tape& t, Var x) { return t.sum(t.row_softmax(x)); }, sq);
        check([&labels](Tape& t, Var x) { return t.nll_mean(t.row_softmax(x), labels); }, sq);

        const Tensor bias = random_tensor({4}, rng);
        check([&bias](Tape& t, Var x) { return t.sum(t.add_rowvec(x, t.leaf(bias))); }, a);
        check([&a](Tape& t, Var x) { return t.sum(t.add_rowvec(t.leaf(a), x)); }, bias);

        const Tensor z = random_tensor({3, 3}, rng, 0.5, 2.0);
        const Tensor c = random_tensor({2, 3}, rng, -2.0, -0.5);
        check([&c](Tape& t, Var x) { return t.sum(t.row_l2_distance(x, t.leaf(c))); }, z);
        check([&z](Tape& t, Var x) { return t.sum(t.row_l2_distance(t.leaf(z), x)); }, c);

        const Tensor u = random_tensor({3}, rng, 0.5, 1.5);
        const Tensor v = random_tensor({3}, rng, -1.5, -0.5);
        check([&v](Tape& t, Var x) { return t.cosine_sim(x, t.leaf(v)); }, u);
        check([&u](Tape& t, Var x) { return t.cosine_sim(t.leaf(u), x); }, v);

        const std::vector<int> rlabels{0, 1, 1};
        check([&rlabels](Tape& t, Var x) { return t.repel_sum(x, rlabels); }, z);
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("composed toy loss passes the finite-difference check") {
    const testutil::ToySetup setup = testutil::make_toy_setup();
    REQUIRE(testutil::min_abs_preactivation(setup) > 1e-4);
    double worst = 0.0;
    const int tensors = static_cast<int>(2 * setup.params.num_layers());
    for (int index = 0; index < tensors; ++index) {
        const Tensor& target = (index % 2 == 0) ? setup.params.weights[index / 2]
                                                : setup.params.biases[index / 2];
        const double err = lwal::grad_check(
            [&setup, index](Tape& t, Var x) { return testutil::toy_loss(t, setup, index, x); },
            target);
        worst = std::max(worst, err);
    }
    CHECK(worst < 1e-5);
}
