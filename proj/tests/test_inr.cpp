#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "orthosep/encoding.hpp"
#include "orthosep/errors.hpp"
#include "orthosep/optimizer.hpp"
#include "orthosep/rng.hpp"
#include "orthosep/scheduler.hpp"
#include "orthosep/siren.hpp"

using namespace orthosep;

TEST_CASE("fourier encoding") {
  const auto enc = FourierEncoding::create(8, 3, 1.0, 77);

  SUBCASE("zero input gives sin 0, cos 1") {
    const Eigen::VectorXd phi = enc.encode_one(Eigen::VectorXd::Zero(3));
    for (Eigen::Index j = 0; j < 8; ++j) {
      CHECK(phi[j] == 0.0);
      CHECK(phi[8 + j] == 1.0);
    }
  }

  SUBCASE("per-row sin^2 + cos^2 = 1 and outputs bounded") {
    Rng rng(1);
    Eigen::MatrixXd X(20, 3);
    for (Eigen::Index r = 0; r < 20; ++r) {
      for (Eigen::Index c = 0; c < 3; ++c) X(r, c) = rng.normal();
    }
    const Eigen::MatrixXd phi = enc.encode(X);
    CHECK(phi.minCoeff() >= -1.0);
    CHECK(phi.maxCoeff() <= 1.0);
    for (Eigen::Index r = 0; r < 20; ++r) {
      for (Eigen::Index j = 0; j < 8; ++j) {
        CHECK(phi(r, j) * phi(r, j) + phi(r, 8 + j) * phi(r, 8 + j) ==
              doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  SUBCASE("matches the scalar-loop oracle") {
    Rng rng(2);
    Eigen::VectorXd x(3);
    for (int i = 0; i < 3; ++i) x[i] = rng.normal();
    const Eigen::VectorXd phi = enc.encode_one(x);
    for (Eigen::Index j = 0; j < 8; ++j) {
      double phase = 0.0;
      for (int i = 0; i < 3; ++i) phase += enc.B(j, i) * x[i];
      phase *= 2.0 * 3.14159265358979323846;
      CHECK(phi[j] == doctest::Approx(std::sin(phase)).epsilon(1e-12));
      CHECK(phi[8 + j] == doctest::Approx(std::cos(phase)).epsilon(1e-12));
    }
  }

  SUBCASE("deterministic per seed") {
    const auto enc2 = FourierEncoding::create(8, 3, 1.0, 77);
    CHECK(enc.B == enc2.B);
    const auto enc3 = FourierEncoding::create(8, 3, 1.0, 78);
    CHECK(enc.B != enc3.B);
  }

  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(enc.encode(Eigen::MatrixXd::Zero(2, 4)), ConfigError);
  }
}

TEST_CASE("siren_init") {
  const std::vector<int> widths{16, 512, 512, 512, 512, 1};

  SUBCASE("deterministic per seed") {
    const auto a = siren_init(widths, 30.0, 9);
    const auto b = siren_init(widths, 30.0, 9);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].W == b[k].W);
      CHECK(a[k].b == b[k].b);
    }
  }

  SUBCASE("first layer bounded by 1/fan_in, later layers by sqrt(6/fan_in)/omega0") {
    const auto layers = siren_init(widths, 30.0, 3);
    CHECK(layers[0].W.cwiseAbs().maxCoeff() <= 1.0 / 16.0);
    const double hidden_bound = std::sqrt(6.0 / 512.0) / 30.0;
    CHECK(hidden_bound == doctest::Approx(3.607e-3).epsilon(1e-3));
    // ~1e6 hidden weights across the three 512x512 layers.
    double max_abs = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 1; k + 1 < layers.size(); ++k) {
      max_abs = std::max(max_abs, layers[k].W.cwiseAbs().maxCoeff());
      sum += layers[k].W.sum();
      count += static_cast<std::size_t>(layers[k].W.size());
    }
    CHECK(max_abs <= hidden_bound);
    CHECK(max_abs > 0.95 * hidden_bound);  // the bound is actually attained
    // Mean of Uniform(-b, b): standard error b/sqrt(3 count).
    const double se = hidden_bound / std::sqrt(3.0 * static_cast<double>(count));
    CHECK(std::abs(sum / static_cast<double>(count)) < 3.0 * se);
    for (const auto& layer : layers) CHECK(layer.b.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("forward pass") {
  SUBCASE("zero weights give zero output") {
    ModelConfig mc;
    mc.fourier_features = 4;
    mc.hidden_width = 8;
    SirenModel model = build_model(mc, 3, 1);
    for (auto& layer : model.layers) {
      layer.W.setZero();
      layer.b.setZero();
    }
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 3);
    CHECK(predict(model, X).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("hidden activations stay within [-1, 1]") {
    ModelConfig mc;
    mc.fourier_features = 16;
    mc.hidden_width = 32;
    SirenModel model = build_model(mc, 5, 2);
    Rng rng(3);
    Eigen::MatrixXd X(50, 5);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = rng.normal();
    }
    ForwardCache cache;
    forward_cached(model, model.encoding.encode(X), cache);
    for (std::size_t k = 1; k + 1 < cache.h.size(); ++k) {
      CHECK(cache.h[k].minCoeff() >= -1.0);
      CHECK(cache.h[k].maxCoeff() <= 1.0);
    }
  }

  SUBCASE("single-unit chain matches the hand-computed sin composition") {
    SirenModel model;
    model.omega0 = 2.0;
    model.encoding = FourierEncoding::create(1, 1, 1.0, 1);
    model.encoding.B(0, 0) = 0.25;  // phase = pi x / 2
    model.layers.resize(3);
    model.layers[0].W = Eigen::MatrixXd::Constant(1, 2, 0.5);
    model.layers[0].b = Eigen::VectorXd::Constant(1, 0.1);
    model.layers[1].W = Eigen::MatrixXd::Constant(1, 1, -0.7);
    model.layers[1].b = Eigen::VectorXd::Constant(1, 0.2);
    model.layers[2].W = Eigen::MatrixXd::Constant(1, 1, 1.5);
    model.layers[2].b = Eigen::VectorXd::Constant(1, -0.3);

    const double x = 0.8;
    const double phase = 2.0 * 3.14159265358979323846 * 0.25 * x;
    const double h0s = std::sin(phase), h0c = std::cos(phase);
    const double h1 = std::sin(2.0 * (0.5 * h0s + 0.5 * h0c + 0.1));
    const double h2 = std::sin(2.0 * (-0.7 * h1 + 0.2));
    const double expected = 1.5 * h2 - 0.3;

    Eigen::MatrixXd X(1, 1);
    X(0, 0) = x;
    CHECK(predict(model, X)[0] == doctest::Approx(expected).epsilon(1e-14));
  }

  SUBCASE("non-finite activations raise with the layer index") {
    ModelConfig mc;
    mc.fourier_features = 2;
    mc.hidden_width = 4;
    SirenModel model = build_model(mc, 2, 1);
    model.layers[1].W(0, 0) = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 2);
    CHECK_THROWS_WITH_AS(predict(model, X), doctest::Contains("layer 1"),
                         NumericError);
  }
}

TEST_CASE("adam with amsgrad") {
  SUBCASE("first step with unit gradient matches the scalar recurrence") {
    // Scalar oracle computed step by step.
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 1e-5;
    const double m = (1 - beta1) * 1.0;
    const double v = (1 - beta2) * 1.0;
    const double mhat = m / (1 - beta1);
    const double vhat = v / (1 - beta2);
    const double expected = -lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(expected == doctest::Approx(-1e-5).epsilon(1e-7));

    std::vector<DenseLayer> params(1);
    params[0].W = Eigen::MatrixXd::Zero(1, 1);
    params[0].b = Eigen::VectorXd::Zero(1);
    std::vector<DenseLayer> grads(1);
    grads[0].W = Eigen::MatrixXd::Ones(1, 1);
    grads[0].b = Eigen::VectorXd::Zero(1);
    auto state = make_optimizer_state(params);
    adam_amsgrad_step(state, params, grads, lr);
    CHECK(params[0].W(0, 0) == expected);
    CHECK(state.step_count == 1);
  }

  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<DenseLayer> params(1);
    params[0].W = Eigen::MatrixXd::Constant(2, 2, 0.37);
    params[0].b = Eigen::VectorXd::Constant(2, -0.5);
    std::vector<DenseLayer> grads(1);
    grads[0].W = Eigen::MatrixXd::Zero(2, 2);
    grads[0].b = Eigen::VectorXd::Zero(2);
    auto state = make_optimizer_state(params);
    for (int k = 0; k < 25; ++k) adam_amsgrad_step(state, params, grads, 1e-3);
    CHECK(params[0].W == Eigen::MatrixXd::Constant(2, 2, 0.37));
    CHECK(params[0].b == Eigen::VectorXd::Constant(2, -0.5));
  }

  SUBCASE("vhat_max is monotone non-decreasing over random steps") {
    std::vector<DenseLayer> params(1);
    params[0].W = Eigen::MatrixXd::Zero(3, 3);
    params[0].b = Eigen::VectorXd::Zero(3);
    auto state = make_optimizer_state(params);
    Rng rng(8);
    Eigen::MatrixXd prev = state.weights[0].vhat_max;
    for (int step = 0; step < 100; ++step) {
      std::vector<DenseLayer> grads(1);
      grads[0].W = Eigen::MatrixXd::Zero(3, 3);
      grads[0].b = Eigen::VectorXd::Zero(3);
      for (Eigen::Index r = 0; r < 3; ++r) {
        for (Eigen::Index c = 0; c < 3; ++c) grads[0].W(r, c) = rng.normal();
      }
      adam_amsgrad_step(state, params, grads, 1e-4);
      CHECK((state.weights[0].vhat_max - prev).minCoeff() >= 0.0);
      prev = state.weights[0].vhat_max;
    }
  }

  SUBCASE("non-finite gradient throws") {
    std::vector<DenseLayer> params(1);
    params[0].W = Eigen::MatrixXd::Zero(1, 1);
    params[0].b = Eigen::VectorXd::Zero(1);
    std::vector<DenseLayer> grads(1);
    grads[0].W = Eigen::MatrixXd::Constant(1, 1, std::nan(""));
    grads[0].b = Eigen::VectorXd::Zero(1);
    auto state = make_optimizer_state(params);
    CHECK_THROWS_AS(adam_amsgrad_step(state, params, grads, 1e-3), NumericError);
  }
}

TEST_CASE("plateau scheduler") {
  SUBCASE("strictly decreasing losses never change the rate") {
    PlateauScheduler sched(PlateauConfig{}, 1e-5);
    double loss = 1.0;
    for (int epoch = 0; epoch < 40; ++epoch) {
      CHECK(sched.step(loss) == 1e-5);
      loss *= 0.9;
    }
  }

  SUBCASE("constant loss for six epochs after the best halves the rate once") {
    PlateauScheduler sched(PlateauConfig{}, 1e-5);
    sched.step(1.0);  // becomes best
    double lr = 1e-5;
    for (int k = 1; k <= 6; ++k) {
      lr = sched.step(1.0);
      if (k < 6) CHECK(lr == 1e-5);
    }
    CHECK(lr == 0.5e-5);
    // Counter reset: five more stalls stay put, the sixth halves again.
    for (int k = 1; k <= 5; ++k) CHECK(sched.step(1.0) == 0.5e-5);
    CHECK(sched.step(1.0) == 0.25e-5);
  }

  SUBCASE("the rate never drops below min_lr") {
    PlateauConfig cfg;
    cfg.min_lr = 1e-8;
    PlateauScheduler sched(cfg, 1e-7);
    sched.step(1.0);
    double lr = 1e-7;
    for (int k = 0; k < 200; ++k) lr = sched.step(1.0);
    CHECK(lr == 1e-8);
  }

  SUBCASE("sub-threshold improvements count as stalls") {
    PlateauConfig cfg;  // rel_threshold 1e-4
    PlateauScheduler sched(cfg, 1e-5);
    sched.step(1.0);
    double loss = 1.0;
    double lr = 1e-5;
    for (int k = 1; k <= 6; ++k) {
      loss *= 1.0 - 1e-6;  // improving, but below the threshold
      lr = sched.step(loss);
    }
    CHECK(lr == 0.5e-5);
  }
}
