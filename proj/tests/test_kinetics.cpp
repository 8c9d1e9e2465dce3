#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "orthosep/errors.hpp"
#include "orthosep/kinetics.hpp"
#include "orthosep/rng.hpp"

using namespace orthosep;

namespace {

TimeGrid uniform_grid(int n, double dt) {
  TimeGrid g;
  g.t.resize(n);
  for (int k = 0; k < n; ++k) g.t[k] = k * dt;
  return g;
}

/// Direct O(n^2) trapezoid of the convolution, independent of the
/// production recursion.
std::vector<double> tofts_forward_direct(const ToftsParams& p, const AIF& aif,
                                         const TimeGrid& g) {
  const double kep = p.ktrans > 0.0 ? p.ktrans / p.ve : 0.0;
  std::vector<double> c(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    double integral = 0.0;
    for (std::size_t j = 1; j <= i; ++j) {
      const double dt = g.t[j] - g.t[j - 1];
      const double f0 = aif.cp[j - 1] * std::exp(-kep * (g.t[i] - g.t[j - 1]));
      const double f1 = aif.cp[j] * std::exp(-kep * (g.t[i] - g.t[j]));
      integral += 0.5 * dt * (f0 + f1);
    }
    c[i] = p.vp * aif.cp[i] + p.ktrans * integral;
  }
  return c;
}

}  // namespace

TEST_CASE("tofts_forward: ktrans = 0 reduces to the plasma term exactly") {
  const TimeGrid g = uniform_grid(241, 1.0);
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  const auto c = tofts_forward(ToftsParams{0.0, 0.4, 0.12}, aif, g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    CHECK(std::abs(c[k] - 0.12 * aif.cp[k]) <= 1e-12);
  }
}

TEST_CASE("tofts_forward: constant input matches the closed form") {
  const TimeGrid g = uniform_grid(241, 1.0);
  AIF aif;
  aif.cp.assign(g.size(), 3.0);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ToftsParams p;
    p.ktrans = rng.uniform(5e-4, 8e-3);
    p.ve = rng.uniform(0.2, 0.6);
    p.vp = rng.uniform(0.0, 0.2);
    const double kep = p.ktrans / p.ve;
    const auto c = tofts_forward(p, aif, g);
    for (std::size_t k = 1; k < g.size(); ++k) {
      const double closed =
          p.vp * 3.0 + 3.0 * p.ve * (1.0 - std::exp(-kep * g.t[k]));
      CHECK(std::abs(c[k] - closed) / closed < 1e-3);
    }
  }
}

TEST_CASE("tofts_forward: stiff limit approaches ve * Cp") {
  const TimeGrid g = uniform_grid(24001, 0.01);  // refined quadrature
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  const ToftsParams p{0.5, 0.5, 0.0};  // kep = 1/s
  const auto c = tofts_forward(p, aif, g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.t[k] < 40.0) continue;  // skip the rise where the lag still shows
    CHECK(c[k] == doctest::Approx(p.ve * aif.cp[k]).epsilon(2e-2));
  }
}

TEST_CASE("tofts_forward: linear in the input function") {
  const TimeGrid g = uniform_grid(121, 2.0);
  const AIF aif = population_aif(g, 8.0, 2.0, 0.06, 0.004);
  AIF scaled;
  scaled.cp = aif.cp;
  for (double& v : scaled.cp) v *= 3.5;
  const ToftsParams p{0.004, 0.35, 0.05};
  const auto c1 = tofts_forward(p, aif, g);
  const auto c2 = tofts_forward(p, scaled, g);
  for (std::size_t k = 1; k < g.size(); ++k) {
    CHECK(std::abs(c2[k] - 3.5 * c1[k]) <= 1e-12 * std::max(1.0, std::abs(c2[k])));
  }
}

TEST_CASE("tofts_forward: recursion equals the direct quadrature") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    TimeGrid g;
    g.t.push_back(0.0);  // non-uniform grid
    double t = 0.0;
    for (int k = 0; k < 60; ++k) {
      t += rng.uniform(0.5, 5.0);
      g.t.push_back(t);
    }
    const AIF aif = population_aif(g, 5.0, 1.5, 0.07, 0.002);
    const ToftsParams p{rng.uniform(1e-3, 8e-3), rng.uniform(0.2, 0.6),
                        rng.uniform(0.0, 0.15)};
    const auto fast = tofts_forward(p, aif, g);
    const auto direct = tofts_forward_direct(p, aif, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
      CHECK(fast[k] == doctest::Approx(direct[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("tofts_forward: quadrature converges at second order") {
  AIF make_aif;
  const ToftsParams p{0.005, 0.4, 0.0};
  const double kep = p.ktrans / p.ve;
  auto error_at = [&](double dt) {
    const int n = static_cast<int>(240.0 / dt) + 1;
    const TimeGrid g = uniform_grid(n, dt);
    AIF aif;
    aif.cp.assign(g.size(), 1.0);
    const auto c = tofts_forward(p, aif, g);
    const double closed = p.ve * (1.0 - std::exp(-kep * 240.0));
    return std::abs(c.back() - closed);
  };
  const double e1 = error_at(2.0);
  const double e2 = error_at(1.0);
  const double e4 = error_at(0.5);
  CHECK(e2 < e1);
  CHECK(e4 < e2);
  const double order = std::log2(e1 / e4) / 2.0;
  CHECK(order == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("tofts_forward: ve = 0 with ktrans > 0 throws") {
  const TimeGrid g = uniform_grid(10, 1.0);
  AIF aif;
  aif.cp.assign(10, 1.0);
  CHECK_THROWS_AS(tofts_forward(ToftsParams{0.01, 0.0, 0.0}, aif, g), NumericError);
}

TEST_CASE("population_aif") {
  const TimeGrid g = uniform_grid(241, 1.0);

  SUBCASE("causal: zero before the delay") {
    const AIF aif = population_aif(g, 30.0, 2.0, 0.05, 0.003);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.t[k] < 30.0) CHECK(aif.cp[k] == 0.0);
      if (g.t[k] > 30.0) CHECK(aif.cp[k] > 0.0);
    }
  }

  SUBCASE("peak sits at delay + ln(d1/d2)/(d1-d2)") {
    const double delay = 10.0, d1 = 0.05, d2 = 0.003;
    const TimeGrid fine = uniform_grid(240001, 0.001);
    const AIF aif = population_aif(fine, delay, 1.0, d1, d2);
    const std::size_t arg = static_cast<std::size_t>(
        std::max_element(aif.cp.begin(), aif.cp.end()) - aif.cp.begin());
    const double expected = delay + std::log(d1 / d2) / (d1 - d2);
    CHECK(fine.t[arg] == doctest::Approx(expected).epsilon(1e-4));
  }

  SUBCASE("amplitude is a pure scale") {
    const AIF a1 = population_aif(g, 10.0, 1.0, 0.05, 0.003);
    const AIF a2 = population_aif(g, 10.0, 2.0, 0.05, 0.003);
    for (std::size_t k = 0; k < g.size(); ++k) {
      CHECK(a2.cp[k] == doctest::Approx(2.0 * a1.cp[k]).epsilon(1e-15));
    }
  }

  SUBCASE("decay ordering is enforced") {
    CHECK_THROWS_AS(population_aif(g, 10.0, 1.0, 0.003, 0.05), ConfigError);
  }
}

TEST_CASE("fit_tofts: recovers noiseless parameters within 2 percent") {
  const TimeGrid g = uniform_grid(121, 2.0);
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  Rng rng(13);
  const ToftsParams init{0.002, 0.3, 0.05};
  for (int trial = 0; trial < 25; ++trial) {
    ToftsParams truth;
    truth.ktrans = rng.uniform(5e-4, 8e-3);
    truth.ve = rng.uniform(0.15, 0.6);
    truth.vp = rng.uniform(0.01, 0.15);
    const double offset = rng.uniform(0.0, 0.2);
    auto y = tofts_forward(truth, aif, g);
    for (double& v : y) v += offset;
    const ToftsFit fit = fit_tofts(y, aif, g, init);
    CHECK(std::abs(fit.params.ktrans - truth.ktrans) / truth.ktrans < 0.02);
    CHECK(std::abs(fit.params.ve - truth.ve) / truth.ve < 0.02);
    CHECK(std::abs(fit.params.vp - truth.vp) / truth.vp < 0.02);
    CHECK(std::abs(fit.offset - offset) < 0.02 * std::max(offset, 0.01));
  }
}

TEST_CASE("fit_tofts: flat zero curve with zero input is degenerate") {
  const TimeGrid g = uniform_grid(40, 3.0);
  AIF zero;
  zero.cp.assign(g.size(), 0.0);
  const std::vector<double> flat(g.size(), 0.0);
  const ToftsFit fit = fit_tofts(flat, zero, g, ToftsParams{0.002, 0.3, 0.05});
  CHECK(fit.degenerate);
  CHECK(fit.params.ktrans == 0.0);
  CHECK(fit.params.vp == 0.0);
}

TEST_CASE("fit_tofts: non-finite curve values throw") {
  const TimeGrid g = uniform_grid(10, 1.0);
  const AIF aif = population_aif(g, 1.0, 1.0, 0.05, 0.003);
  std::vector<double> bad(g.size(), 0.1);
  bad[4] = std::nan("");
  CHECK_THROWS_AS(fit_tofts(bad, aif, g, ToftsParams{0.002, 0.3, 0.05}),
                  NumericError);
}

TEST_CASE("fit_tofts: median error under 1 percent noise stays below 10 percent") {
  const TimeGrid g = uniform_grid(121, 2.0);
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  Rng rng(29);
  std::vector<double> errs_ktrans, errs_ve, errs_vp;
  for (int trial = 0; trial < 100; ++trial) {
    ToftsParams truth;
    truth.ktrans = rng.uniform(1e-3, 8e-3);
    truth.ve = rng.uniform(0.2, 0.6);
    truth.vp = rng.uniform(0.02, 0.15);
    auto y = tofts_forward(truth, aif, g);
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    for (double& v : y) v += rng.normal(0.0, 0.01 * peak);
    const ToftsFit fit = fit_tofts(y, aif, g, ToftsParams{0.002, 0.3, 0.05});
    errs_ktrans.push_back(std::abs(fit.params.ktrans - truth.ktrans) / truth.ktrans);
    errs_ve.push_back(std::abs(fit.params.ve - truth.ve) / truth.ve);
    errs_vp.push_back(std::abs(fit.params.vp - truth.vp) / truth.vp);
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  CHECK(median(errs_ktrans) < 0.10);
  CHECK(median(errs_ve) < 0.10);
  CHECK(median(errs_vp) < 0.10);
}

TEST_CASE("fit_tofts: refitting from the optimum is idempotent") {
  const TimeGrid g = uniform_grid(121, 2.0);
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  const ToftsParams truth{0.004, 0.4, 0.08};
  auto y = tofts_forward(truth, aif, g);
  Rng rng(31);
  double peak = 0.0;
  for (double v : y) peak = std::max(peak, std::abs(v));
  for (double& v : y) v += rng.normal(0.0, 0.02 * peak);

  const ToftsFit first = fit_tofts(y, aif, g, ToftsParams{0.002, 0.3, 0.05});
  const ToftsFit again = fit_tofts(y, aif, g, first.params, first.offset);
  CHECK(std::abs(again.params.ktrans - first.params.ktrans) <
        1e-6 * std::abs(first.params.ktrans));
  CHECK(std::abs(again.params.ve - first.params.ve) < 1e-6 * first.params.ve);
  CHECK(std::abs(again.params.vp - first.params.vp) <
        1e-6 * std::max(first.params.vp, 1e-3));
}

TEST_CASE("tofts outputs stay non-negative for valid inputs") {
  const TimeGrid g = uniform_grid(121, 2.0);
  const AIF aif = population_aif(g, 10.0, 1.0, 0.05, 0.003);
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    ToftsParams p{rng.uniform(0.0, 8e-3), rng.uniform(0.1, 0.6),
                  rng.uniform(0.0, 0.2)};
    for (double v : tofts_forward(p, aif, g)) CHECK(v >= 0.0);
  }
}

TEST_CASE("generate_dce") {
  const GridSpec grid{{3, 2, 1}};
  const TimeGrid tg = uniform_grid(30, 4.0);
  const AIF aif = population_aif(tg, 8.0, 1.0, 0.05, 0.003);
  std::vector<ToftsParams> params(grid.voxel_count(), ToftsParams{0.003, 0.4, 0.05});
  params[0] = ToftsParams{0.0, 0.5, 0.0};  // silent voxel

  SUBCASE("noise-free frames equal the forward model exactly") {
    const auto frames = generate_dce(params, grid, aif, tg, 0.0, 7);
    REQUIRE(frames.size() == tg.size());
    for (std::size_t i = 0; i < grid.voxel_count(); ++i) {
      const auto curve = tofts_forward(params[i], aif, tg);
      for (std::size_t k = 0; k < tg.size(); ++k) {
        CHECK(frames[k].data[i] == curve[k]);
      }
    }
  }

  SUBCASE("same seed reproduces bitwise; different seed does not") {
    const auto a = generate_dce(params, grid, aif, tg, 0.05, 99);
    const auto b = generate_dce(params, grid, aif, tg, 0.05, 99);
    const auto c = generate_dce(params, grid, aif, tg, 0.05, 100);
    bool differs = false;
    for (std::size_t k = 0; k < tg.size(); ++k) {
      CHECK(a[k].data == b[k].data);
      differs = differs || a[k].data != c[k].data;
    }
    CHECK(differs);
  }

  SUBCASE("fitting the noiseless series recovers the inputs within 2 percent") {
    const auto frames = generate_dce(params, grid, aif, tg, 0.0, 7);
    std::vector<double> curve(tg.size());
    for (std::size_t k = 0; k < tg.size(); ++k) curve[k] = frames[k].data[1];
    const ToftsFit fit = fit_tofts(curve, aif, tg, ToftsParams{0.002, 0.3, 0.05});
    CHECK(std::abs(fit.params.ktrans - 0.003) / 0.003 < 0.02);
    CHECK(std::abs(fit.params.ve - 0.4) / 0.4 < 0.02);
    CHECK(std::abs(fit.params.vp - 0.05) / 0.05 < 0.02);
  }
}

TEST_CASE("time grid and parameter validation") {
  TimeGrid bad;
  bad.t = {1.0, 2.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  TimeGrid nonmono;
  nonmono.t = {0.0, 2.0, 1.0};
  CHECK_THROWS_AS(nonmono.validate(), ConfigError);

  CHECK_THROWS_AS(validate_params(ToftsParams{-0.1, 0.5, 0.0}), NumericError);
  CHECK_THROWS_AS(validate_params(ToftsParams{0.0, 0.0, 0.0}), NumericError);
  CHECK_THROWS_AS(validate_params(ToftsParams{0.0, 0.7, 0.4}), NumericError);
  CHECK_NOTHROW(validate_params(ToftsParams{0.005, 0.6, 0.2}));
}
