#include <cmath>
#include <vector>

#include "doctest.h"
#include "prt/mlp.h"

using namespace prt;

namespace {

// 2-2-2 network small enough to run on paper.
Mlp paper_net() {
    Mlp m(std::vector<int>{2, 2, 2});
    auto w0 = m.weight(0);
    w0(0, 0) = 2.0f;
    w0(0, 1) = 0.0f;
    w0(1, 0) = -1.0f;
    w0(1, 1) = 0.0f;
    auto b0 = m.bias(0);
    b0[0] = 0.5f;
    b0[1] = -0.25f;
    auto w1 = m.weight(1);
    w1(0, 0) = 1.0f;
    w1(0, 1) = 2.0f;
    w1(1, 0) = 3.0f;
    w1(1, 1) = -1.0f;
    auto b1 = m.bias(1);
    b1[0] = 0.1f;
    b1[1] = -0.2f;
    return m;
}

}  // namespace

TEST_CASE("mlp: parameter layout and counts") {
    Mlp m(std::vector<int>{3, 5, 2});
    CHECK(m.input_size() == 3);
    CHECK(m.output_size() == 2);
    CHECK(m.layer_count() == 2);
    CHECK(m.params().size() == size_t(3 * 5 + 5 + 5 * 2 + 2));

    // Maps view the flat buffer: a write through one shows up in the other.
    m.weight(0)(1, 2) = 7.0f;
    CHECK(m.params()[2 * 5 + 1] == 7.0f);  // column-major (row 1, col 2)
    m.bias(1)[1] = -3.0f;
    CHECK(m.params().back() == -3.0f);

    CHECK_THROWS_AS(Mlp(std::vector<int>{4}), std::invalid_argument);
    CHECK_THROWS_AS(Mlp(std::vector<int>{4, 0, 2}), std::invalid_argument);
}

TEST_CASE("mlp: hand-computed forward pass") {
    Mlp m = paper_net();
    Eigen::MatrixXf x(2, 1);
    x << 1.0f, 0.0f;
    Mlp::Workspace ws;
    const Eigen::MatrixXf& y = m.forward(x, ws);
    // pre0 = (2.5, -1.25), relu -> (2.5, 0), out = (2.6, 7.3)
    CHECK(y(0, 0) == doctest::Approx(2.6f).epsilon(1e-6));
    CHECK(y(1, 0) == doctest::Approx(7.3f).epsilon(1e-6));

    Eigen::MatrixXf bad(3, 1);
    bad.setZero();
    CHECK_THROWS_AS(m.forward(bad, ws), std::invalid_argument);
}

TEST_CASE("mlp: hand-computed backward pass") {
    Mlp m = paper_net();
    Eigen::MatrixXf x(2, 1);
    x << 1.0f, 0.0f;
    Mlp::Workspace ws;
    m.forward(x, ws);

    Eigen::MatrixXf d_out(2, 1);
    d_out << 1.0f, 0.0f;
    std::vector<float> grads(m.params().size(), 0.0f);
    Eigen::MatrixXf d_in;
    m.backward(ws, d_out, grads.data(), &d_in);

    Mlp g(std::vector<int>{2, 2, 2});
    g.params() = grads;
    // Layer 1: gW1 = d_out * h^T with h = (2.5, 0); gb1 = d_out.
    CHECK(g.weight(1)(0, 0) == doctest::Approx(2.5f));
    CHECK(g.weight(1)(0, 1) == 0.0f);
    CHECK(g.weight(1)(1, 0) == 0.0f);
    CHECK(g.bias(1)[0] == 1.0f);
    CHECK(g.bias(1)[1] == 0.0f);
    // delta0 = relu-masked W1^T d_out = (1, 0); gW0 = delta0 * x^T.
    CHECK(g.weight(0)(0, 0) == doctest::Approx(1.0f));
    CHECK(g.weight(0)(0, 1) == 0.0f);
    CHECK(g.weight(0)(1, 0) == 0.0f);
    CHECK(g.bias(0)[0] == 1.0f);
    CHECK(g.bias(0)[1] == 0.0f);
    // d_input = W0^T delta0 = (2, 0).
    CHECK(d_in(0, 0) == doctest::Approx(2.0f));
    CHECK(d_in(1, 0) == 0.0f);
}

TEST_CASE("mlp: zero parameters give zero output") {
    Mlp m(std::vector<int>{4, 8, 3});
    Rng rng(3, 0);
    Eigen::MatrixXf x(4, 5);
    for (int c = 0; c < 5; ++c)
        for (int r = 0; r < 4; ++r) x(r, c) = 2.0f * rng.next_float() - 1.0f;
    Mlp::Workspace ws;
    const Eigen::MatrixXf& y = m.forward(x, ws);
    CHECK(y.cwiseAbs().maxCoeff() == 0.0f);
}

TEST_CASE("mlp: init is bounded by fan-in and seeded") {
    Mlp a(std::vector<int>{16, 32, 8});
    Mlp b(std::vector<int>{16, 32, 8});
    Mlp c(std::vector<int>{16, 32, 8});
    Rng r1(42, 0), r2(42, 0), r3(43, 0);
    a.init_fan_in(r1);
    b.init_fan_in(r2);
    c.init_fan_in(r3);
    CHECK(a.params() == b.params());
    CHECK(a.params() != c.params());

    const float bound0 = 1.0f / std::sqrt(16.0f);
    CHECK(a.weight(0).cwiseAbs().maxCoeff() <= bound0);
    CHECK(a.weight(0).cwiseAbs().maxCoeff() > 0.5f * bound0);  // not degenerate
    const float bound1 = 1.0f / std::sqrt(32.0f);
    CHECK(a.weight(1).cwiseAbs().maxCoeff() <= bound1);
}

TEST_CASE("mlp: batched forward matches per-column forward") {
    Mlp m(std::vector<int>{6, 12, 12, 4});
    Rng rng(7, 0);
    m.init_fan_in(rng);
    const int batch = 9;
    Eigen::MatrixXf x(6, batch);
    for (int c = 0; c < batch; ++c)
        for (int r = 0; r < 6; ++r) x(r, c) = 2.0f * rng.next_float() - 1.0f;

    Mlp::Workspace ws;
    Eigen::MatrixXf y = m.forward(x, ws);
    for (int c = 0; c < batch; ++c) {
        Mlp::Workspace one;
        const Eigen::MatrixXf& yc = m.forward(x.col(c), one);
        for (int r = 0; r < 4; ++r)
            CHECK(y(r, c) == doctest::Approx(yc(r, 0)).epsilon(1e-5));
    }
}

TEST_CASE("mlp: finite differences confirm every gradient class") {
    Mlp m(std::vector<int>{3, 5, 4, 2});
    Rng rng(11, 0);
    m.init_fan_in(rng);

    const int batch = 3;
    Eigen::MatrixXf x(3, batch), target(2, batch);
    for (int c = 0; c < batch; ++c) {
        for (int r = 0; r < 3; ++r) x(r, c) = 2.0f * rng.next_float() - 1.0f;
        for (int r = 0; r < 2; ++r) target(r, c) = 2.0f * rng.next_float() - 1.0f;
    }

    // Quadratic loss keeps the objective smooth; d_out = diff.
    const auto loss_at = [&](const Mlp& net) {
        Mlp::Workspace ws;
        const Eigen::MatrixXf& y = net.forward(x, ws);
        return 0.5 * (y - target).array().square().cast<double>().sum();
    };

    Mlp::Workspace ws;
    const Eigen::MatrixXf& y = m.forward(x, ws);
    std::vector<float> grads(m.params().size(), 0.0f);
    Eigen::MatrixXf d_in;
    m.backward(ws, y - target, grads.data(), &d_in);

    const float h = 1e-3f;
    int checked = 0;
    for (size_t i = 0; i < m.params().size(); ++i) {
        Mlp probe = m;
        probe.params()[i] = m.params()[i] + h;
        const double up = loss_at(probe);
        probe.params()[i] = m.params()[i] - h;
        const double down = loss_at(probe);
        const double fd = (up - down) / (2.0 * double(h));
        CHECK(std::abs(fd - double(grads[i])) <=
              1e-3 * (1.0 + std::abs(double(grads[i]))));
        ++checked;
    }
    CHECK(checked == int(m.params().size()));

    // Input gradient, same scheme.
    for (int c = 0; c < batch; ++c) {
        for (int r = 0; r < 3; ++r) {
            Eigen::MatrixXf xs = x;
            xs(r, c) = x(r, c) + h;
            Mlp::Workspace w2;
            const double up =
                0.5 *
                (m.forward(xs, w2) - target).array().square().cast<double>().sum();
            xs(r, c) = x(r, c) - h;
            const double down =
                0.5 *
                (m.forward(xs, w2) - target).array().square().cast<double>().sum();
            const double fd = (up - down) / (2.0 * double(h));
            CHECK(std::abs(fd - double(d_in(r, c))) <=
                  1e-3 * (1.0 + std::abs(double(d_in(r, c)))));
        }
    }
}

TEST_CASE("mlp: backward accumulates across calls") {
    Mlp m = paper_net();
    Eigen::MatrixXf x(2, 1);
    x << 1.0f, 0.0f;
    Mlp::Workspace ws;
    m.forward(x, ws);
    Eigen::MatrixXf d_out(2, 1);
    d_out << 1.0f, 0.0f;

    std::vector<float> once(m.params().size(), 0.0f);
    m.backward(ws, d_out, once.data());
    std::vector<float> twice(m.params().size(), 0.0f);
    m.backward(ws, d_out, twice.data());
    m.backward(ws, d_out, twice.data());
    for (size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(2.0f * once[i]));
}

TEST_CASE("adam: constant unit gradient moves a parameter by lr per step") {
    std::vector<float> params = {1.0f};
    std::vector<float> grads = {1.0f};
    AdamState state;
    state.resize(1);
    const float lr = 0.01f;
    for (int step = 1; step <= 5; ++step) {
        state.t++;
        adam_step(params, grads, state, lr);
        // mhat = vhat = 1 exactly under a constant gradient.
        CHECK(params[0] ==
              doctest::Approx(1.0f - lr * float(step)).epsilon(1e-4));
    }
    CHECK(state.t == 5);
}

TEST_CASE("adam: descends a quadratic bowl") {
    std::vector<float> params = {2.0f, -3.0f};
    AdamState state;
    state.resize(2);
    std::vector<float> grads(2);
    for (int step = 1; step <= 2000; ++step) {
        grads[0] = params[0];
        grads[1] = 4.0f * params[1];
        state.t++;
        adam_step(params, grads, state, 0.01f);
    }
    CHECK(std::abs(params[0]) < 1e-2f);
    CHECK(std::abs(params[1]) < 1e-2f);
}
