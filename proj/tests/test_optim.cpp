#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vortexlab/nn.hpp"
#include "vortexlab/tape.hpp"

using namespace vortexlab;

TEST_CASE("adam: zero gradient from a fresh state leaves parameters unchanged") {
    ParameterStore<double> params;
    params.params["w"] = Tensor<double>({1, 2}, {0.5, -0.25});
    AdamState<double> st;
    std::map<std::string, Tensor<double>> grads;
    grads["w"] = Tensor<double>::zeros({1, 2});
    adam_step(params, grads, st, 1e-3);
    CHECK(params.params["w"].data[0] == 0.5);
    CHECK(params.params["w"].data[1] == -0.25);
    CHECK(st.step == 1);
}

TEST_CASE("adam: zero gradient decays existing moments by the beta factors") {
    ParameterStore<double> params;
    params.params["w"] = Tensor<double>({1, 2}, {0.5, -0.25});
    AdamState<double> st;
    st.m["w"] = Tensor<double>({1, 2}, {0.1, 0.2});
    st.v["w"] = Tensor<double>({1, 2}, {0.3, 0.4});
    std::map<std::string, Tensor<double>> grads;
    grads["w"] = Tensor<double>::zeros({1, 2});
    adam_step(params, grads, st, 1e-3);
    CHECK(st.m["w"].data[0] == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(st.m["w"].data[1] == doctest::Approx(0.18).epsilon(1e-12));
    CHECK(st.v["w"].data[0] == doctest::Approx(0.3 * 0.999).epsilon(1e-12));
    CHECK(st.v["w"].data[1] == doctest::Approx(0.4 * 0.999).epsilon(1e-12));
}

TEST_CASE("adam: first step moves by about -lr for unit gradient") {
    // bias correction makes mhat = g and vhat = g^2 on step one
    for (double g0 : {1.0, -2.0}) {
        ParameterStore<double> params;
        params.params["w"] = Tensor<double>({1, 1}, {0.0});
        AdamState<double> st;
        std::map<std::string, Tensor<double>> grads;
        grads["w"] = Tensor<double>({1, 1}, {g0});
        adam_step(params, grads, st, 1e-3);
        const double expect = -1e-3 * g0 / (std::abs(g0) + 1e-8);
        CHECK(std::abs(params.params["w"].data[0] - expect) < 1e-8);
    }
}

TEST_CASE("adam: shape mismatch errors") {
    ParameterStore<double> params;
    params.params["w"] = Tensor<double>::zeros({1, 2});
    AdamState<double> st;
    std::map<std::string, Tensor<double>> grads;
    grads["w"] = Tensor<double>::zeros({1, 3});
    CHECK_THROWS_AS(adam_step(params, grads, st, 1e-3), std::invalid_argument);
}

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK(cosine_lr(0, 100, 1e-3) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(cosine_lr(50, 100, 1e-3) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(cosine_lr(100, 100, 1e-3) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(cosine_lr(101, 100, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(-1, 100, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(0, 0, 1e-3), std::invalid_argument);
}

TEST_CASE("finite differences are exact for linear functions") {
    // a wide step keeps rounding noise out; truncation is zero for linear
    auto fn = [](const std::vector<double>& x) { return 3.0 * x[0] - 2.0 * x[1] + 0.5 * x[2]; };
    CHECK(finite_diff_check(fn, {0.3, -0.7, 1.1}, {3.0, -2.0, 0.5}, 1e-3) < 1e-10);
}

TEST_CASE("finite differences agree on a softmax cross-entropy toy") {
    const std::vector<double> x0{0.4, -0.3, 0.8, 0.1, -0.6, 0.2};
    auto eval = [](const std::vector<double>& flat) {
        Tape<double> t;
        const int logits = t.leaf(Tensor<double>({2, 3}, flat), true);
        const int lse = t.row_logsumexp(logits);
        const int correct = t.gather(logits, {0, 5}); // class 0 then class 2
        return t.val(t.mean_all(t.sub(lse, correct))).data[0];
    };
    Tape<double> t;
    const int logits = t.leaf(Tensor<double>({2, 3}, x0), true);
    const int lse = t.row_logsumexp(logits);
    const int correct = t.gather(logits, {0, 5});
    const int loss = t.mean_all(t.sub(lse, correct));
    const auto g = t.backward(loss);
    CHECK(finite_diff_check(eval, x0, t.grad_of(g, logits).data) < 1e-6);
}

TEST_CASE("deterministic training trajectory over 10 steps") {
    auto run = [] {
        ParameterStore<double> params;
        params.params["w"] = Tensor<double>({1, 3}, {1.0, -2.0, 0.5});
        AdamState<double> st;
        std::vector<double> losses;
        for (int i = 0; i < 10; ++i) {
            Tape<double> tape;
            const int w = tape.leaf(params.params["w"], true);
            const int loss = tape.sum_all(tape.mul(w, w));
            losses.push_back(tape.val(loss).data[0]);
            auto g = tape.backward(loss);
            std::map<std::string, Tensor<double>> grads{{"w", tape.grad_of(g, w)}};
            adam_step(params, grads, st, 1e-2);
        }
        return losses;
    };
    CHECK(run() == run());
}
