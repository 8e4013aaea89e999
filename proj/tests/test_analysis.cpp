#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bfm/analysis.hpp"
#include "bfm/data.hpp"
#include "bfm/rng.hpp"
#include "helpers.hpp"

using namespace bfm;

namespace {

Vec constant_image(int N, double v) { return Vec(static_cast<std::size_t>(N) * N, v); }

Vec white_noise(int N, Rng& rng) { return rng.normal_vec(static_cast<std::size_t>(N) * N); }

}  // namespace

TEST_CASE("power spectrum of a constant image concentrates at DC") {
  const int N = 8;
  auto ps = power_spectrum_2d(constant_image(N, 3.0), N);
  const int h = N / 2;
  const double dc = ps.at(h, h);
  CHECK(dc == doctest::Approx(9.0 * N * N));  // sum x^2 = 9 N^2
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      if (r != h || c != h) CHECK(std::abs(ps.at(r, c)) < 1e-9 * dc);
    }
  }
}

TEST_CASE("pure cosine concentrates in its conjugate bins") {
  const int N = 16;
  const int k = 3;
  Vec img(N * N);
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      img[r * N + c] = std::cos(2.0 * std::numbers::pi * k * c / N);
    }
  }
  auto ps = power_spectrum_2d(img, N);
  const int h = N / 2;
  const double there = ps.at(h, h + k) + ps.at(h, h - k);
  CHECK(there / ps.total() > 1.0 - 1e-9);
}

TEST_CASE("Parseval holds on random images") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 8;
    Vec img = white_noise(N, rng);
    auto ps = power_spectrum_2d(img, N);
    double energy = 0.0;
    for (double v : img) energy += v * v;
    CHECK(std::abs(ps.total() - energy) <= 1e-9 * energy);
  }
}

TEST_CASE("power spectrum input validation") {
  CHECK_THROWS_AS(power_spectrum_2d(Vec(12, 0.0), 12), std::invalid_argument);  // not pow2
  CHECK_THROWS_AS(power_spectrum_2d(Vec(10, 0.0), 4), std::invalid_argument);   // not NxN
}

TEST_CASE("azimuthal integration") {
  const int N = 16;
  auto ps = power_spectrum_2d(constant_image(N, 2.0), N);
  auto prof = azimuthal_integrate(ps);
  REQUIRE(prof.mean_power.size() == static_cast<std::size_t>(N / 2 + 1));
  CHECK(prof.mean_power[0] > 0.0);
  for (std::size_t b = 1; b < prof.mean_power.size(); ++b) {
    CHECK(prof.mean_power[b] == 0.0);
  }

  // ring populations partition the grid: sum(profile * count) = total power
  Rng rng(2);
  Vec img = white_noise(N, rng);
  auto ps2 = power_spectrum_2d(img, N);
  auto prof2 = azimuthal_integrate(ps2);
  double covered = 0.0;
  std::uint64_t bins = 0;
  for (std::size_t b = 0; b < prof2.mean_power.size(); ++b) {
    covered += prof2.mean_power[b] * static_cast<double>(prof2.bin_count[b]);
    bins += prof2.bin_count[b];
  }
  CHECK(bins == static_cast<std::uint64_t>(N) * N);
  CHECK(covered == doctest::Approx(ps2.total()).epsilon(1e-12));
}

TEST_CASE("white-noise radial profile is approximately flat") {
  const int N = 16;
  Rng rng(3);
  std::vector<double> acc(N / 2 + 1, 0.0);
  const int n_img = 1000;
  for (int i = 0; i < n_img; ++i) {
    auto prof = azimuthal_integrate(power_spectrum_2d(white_noise(N, rng), N));
    for (std::size_t b = 0; b < acc.size(); ++b) acc[b] += prof.mean_power[b];
  }
  double mean = 0.0;
  for (std::size_t b = 0; b < acc.size(); ++b) {
    acc[b] /= n_img;
    mean += acc[b];
  }
  mean /= static_cast<double>(acc.size());
  double var = 0.0;
  for (double v : acc) var += (v - mean) * (v - mean);
  const double rel_std = std::sqrt(var / acc.size()) / mean;
  CHECK(rel_std < 0.10);
}

TEST_CASE("spectral entropy") {
  const int N = 16;
  auto ps = power_spectrum_2d(constant_image(N, 1.0), N);
  CHECK(spectral_entropy(ps) == 0.0);

  // scale invariance
  Rng rng(4);
  Vec img = white_noise(N, rng);
  auto p1 = power_spectrum_2d(img, N);
  Vec scaled = img;
  for (double& v : scaled) v *= 17.0;
  auto p2 = power_spectrum_2d(scaled, N);
  CHECK(spectral_entropy(p1) == doctest::Approx(spectral_entropy(p2)).epsilon(1e-12));

  // SE bounded by ln(N^2)
  CHECK(spectral_entropy(p1) <= std::log(256.0));

  // the mean white-noise spectrum approaches the flat maximum ln 256
  PowerSpectrum2D mean_ps;
  mean_ps.N = N;
  mean_ps.power.assign(256, 0.0);
  const int draws = 400;
  for (int i = 0; i < draws; ++i) {
    auto p = power_spectrum_2d(white_noise(N, rng), N);
    for (int k = 0; k < 256; ++k) mean_ps.power[k] += p.power[k];
  }
  CHECK(std::abs(spectral_entropy(mean_ps) - std::log(256.0)) / std::log(256.0) < 0.05);

  CHECK_THROWS_AS(spectral_entropy(power_spectrum_2d(constant_image(N, 0.0), N)),
                  std::invalid_argument);
}

TEST_CASE("high frequency ratio") {
  const int N = 16;
  CHECK(high_freq_ratio(power_spectrum_2d(constant_image(N, 1.0), N)) == 0.0);

  // alternating rows: all power at the Nyquist frequency
  Vec nyq(N * N);
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) nyq[r * N + c] = std::cos(std::numbers::pi * r);
  }
  CHECK(high_freq_ratio(power_spectrum_2d(nyq, N)) == doctest::Approx(1.0));

  // white noise: HFR approaches the geometric fraction of bins beyond 0.5
  Rng rng(5);
  const int h = N / 2;
  std::uint64_t beyond = 0;
  for (int r = 0; r < N; ++r) {
    for (int c = 0; c < N; ++c) {
      const double dr = r - h, dc = c - h;
      if (std::sqrt(dr * dr + dc * dc) / h > 0.5) ++beyond;
    }
  }
  const double frac = static_cast<double>(beyond) / (N * N);
  double acc = 0.0;
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    acc += high_freq_ratio(power_spectrum_2d(white_noise(N, rng), N));
  }
  CHECK(std::abs(acc / draws - frac) / frac < 0.05);

  // bounds and monotonicity in the threshold
  Vec img = white_noise(N, rng);
  auto ps = power_spectrum_2d(img, N);
  double prev = high_freq_ratio(ps, 0.0);
  const double non_dc = 1.0 - ps.at(h, h) / ps.total();
  CHECK(prev == doctest::Approx(non_dc).epsilon(1e-12));
  for (double thr : {0.2, 0.4, 0.6, 0.8, 0.95}) {
    const double cur = high_freq_ratio(ps, thr);
    CHECK(cur >= 0.0);
    CHECK(cur <= 1.0);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
  CHECK_THROWS_AS(high_freq_ratio(ps, 1.0), std::invalid_argument);
}

TEST_CASE("noise sweep endpoints and the power-law trend") {
  DatasetSpec spec;
  spec.kind = DatasetKind::GaussianRandomField;
  spec.side = 16;
  spec.n_samples = 40;
  spec.grf_beta = 2.0;
  spec.seed = 8;
  auto imgs = make_grf_images(spec);

  auto rep = noise_sweep_report(imgs.rows, 16, {0.0, 0.5, 1.0}, 77);
  REQUIRE(rep.t.size() == 3);

  // t = 1 reproduces clean-set statistics
  double se_clean = 0.0, hfr_clean = 0.0;
  for (const auto& img : imgs.rows) {
    auto ps = power_spectrum_2d(img, 16);
    se_clean += spectral_entropy(ps);
    hfr_clean += high_freq_ratio(ps);
  }
  se_clean /= static_cast<double>(imgs.rows.size());
  hfr_clean /= static_cast<double>(imgs.rows.size());
  CHECK(rep.se[2] == doctest::Approx(se_clean).epsilon(1e-12));
  CHECK(rep.hfr[2] == doctest::Approx(hfr_clean).epsilon(1e-12));

  // noise is spectrally flat, the power-law fields are not
  CHECK(rep.se[0] > rep.se[2]);
  CHECK(rep.hfr[0] > rep.hfr[2]);

  // t = 0 reproduces pure-noise statistics: compare against an independent
  // white-noise average
  Rng wrng(123);
  double se_noise = 0.0;
  const int n_noise = 200;
  for (int i = 0; i < n_noise; ++i) {
    se_noise += spectral_entropy(power_spectrum_2d(wrng.normal_vec(16 * 16), 16));
  }
  se_noise /= n_noise;
  CHECK(std::abs(rep.se[0] - se_noise) < 0.05);

  CHECK_THROWS_AS(noise_sweep_report({}, 16, {0.5}, 1), std::invalid_argument);
}

TEST_CASE("discrete Frechet distance") {
  std::vector<double> p{1.0, 2.0, 3.0};
  CHECK(frechet_curve_distance(p, p) == 0.0);

  std::vector<double> zeros(5, 0.0), ones(5, 1.0);
  CHECK(frechet_curve_distance(zeros, ones) == doctest::Approx(1.0));

  // hand-traceable 3-point instance, verified by coupling enumeration
  std::vector<double> a{0.0, 1.0, 0.5};
  std::vector<double> b{0.2, 0.9, 0.1};
  CHECK(frechet_curve_distance(a, b) ==
        doctest::Approx(testutil::brute_frechet(a, b)).epsilon(1e-12));

  // random instances up to 6 points per curve
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(0, 5);
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = rng.uniform(-2, 2);
      v[i] = rng.uniform(-2, 2);
    }
    const double dp = frechet_curve_distance(u, v);
    CHECK(dp == doctest::Approx(testutil::brute_frechet(u, v)).epsilon(1e-12));
    CHECK(dp == doctest::Approx(frechet_curve_distance(v, u)).epsilon(1e-12));
    CHECK(dp >= 0.0);
    // endpoint lower bound
    const double lb = std::max(std::abs(u[0] - v[0]), std::abs(u[n - 1] - v[n - 1]));
    CHECK(dp >= lb - 1e-12);
  }

  CHECK_THROWS_AS(frechet_curve_distance(std::vector<double>{1.0}, zeros),
                  std::invalid_argument);
}

TEST_CASE("pca_top_k") {
  SUBCASE("rank-1 data recovers the direction") {
    Rng rng(7);
    Vec u{0.6, -0.8, 0.0};
    std::vector<Vec> feats;
    for (int i = 0; i < 50; ++i) {
      const double a = rng.uniform(-3, 3);
      feats.push_back(Vec{a * u[0], a * u[1], a * u[2]});
    }
    auto res = pca_top_k(feats, 1);
    double dot = 0.0;
    for (int i = 0; i < 3; ++i) dot += res.components[0][i] * u[i];
    CHECK(std::abs(std::abs(dot) - 1.0) < 1e-6);
  }

  SUBCASE("axis-aligned anisotropic cloud orders components by variance") {
    Rng rng(8);
    std::vector<Vec> feats;
    for (int i = 0; i < 4000; ++i) {
      Vec z = rng.normal_vec(3);
      feats.push_back(Vec{3.0 * z[0], 1.0 * z[1], 0.2 * z[2]});
    }
    auto res = pca_top_k(feats, 3);
    CHECK(std::abs(res.components[0][0]) > 0.99);
    CHECK(std::abs(res.components[1][1]) > 0.99);
    CHECK(std::abs(res.components[2][2]) > 0.99);
    CHECK(res.eigenvalues[0] > res.eigenvalues[1]);
    CHECK(res.eigenvalues[1] > res.eigenvalues[2]);
  }

  SUBCASE("eigenvalues match the dense oracle for dim <= 8") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 2 + static_cast<int>(rng.uniform_int(0, 6));
      const int n = 40 + static_cast<int>(rng.uniform_int(0, 60));
      std::vector<Vec> feats;
      for (int i = 0; i < n; ++i) feats.push_back(rng.normal_vec(d));
      auto res = pca_top_k(feats, d);

      // oracle covariance + dense eigensolve
      Vec mean(d, 0.0);
      for (const auto& f : feats) {
        for (int i = 0; i < d; ++i) mean[i] += f[i];
      }
      for (int i = 0; i < d; ++i) mean[i] /= n;
      std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
      for (const auto& f : feats) {
        for (int i = 0; i < d; ++i) {
          for (int j = 0; j < d; ++j) cov[i][j] += (f[i] - mean[i]) * (f[j] - mean[j]);
        }
      }
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) cov[i][j] /= (n - 1);
      }
      auto oracle = testutil::jacobi_oracle(cov);
      for (int k = 0; k < d; ++k) {
        CHECK(std::abs(res.eigenvalues[k] - oracle.values[k]) < 1e-8);
      }
    }
  }

  SUBCASE("projection residual equals the discarded eigenvalue mass") {
    Rng rng(10);
    const int d = 5, n = 200, k = 2;
    std::vector<Vec> feats;
    for (int i = 0; i < n; ++i) {
      Vec z = rng.normal_vec(d);
      for (int j = 0; j < d; ++j) z[j] *= (j + 1);
      feats.push_back(z);
    }
    auto full = pca_top_k(feats, d);
    auto res = pca_top_k(feats, k);
    Vec mean(d, 0.0);
    for (const auto& f : feats) {
      for (int i = 0; i < d; ++i) mean[i] += f[i];
    }
    for (int i = 0; i < d; ++i) mean[i] /= n;
    double resid = 0.0;
    for (int s = 0; s < n; ++s) {
      Vec rec = mean;
      for (int c = 0; c < k; ++c) {
        for (int i = 0; i < d; ++i) rec[i] += res.projections[s][c] * res.components[c][i];
      }
      for (int i = 0; i < d; ++i) {
        const double e = feats[s][i] - rec[i];
        resid += e * e;
      }
    }
    resid /= (n - 1);
    double discarded = 0.0;
    for (int c = k; c < d; ++c) discarded += full.eigenvalues[c];
    CHECK(std::abs(resid - discarded) < 1e-8 * std::max(1.0, discarded));
  }

  SUBCASE("errors") {
    std::vector<Vec> same(5, Vec{1.0, 2.0});
    CHECK_THROWS_AS(pca_top_k(same, 1), std::invalid_argument);
    std::vector<Vec> two{Vec{1.0, 2.0}, Vec{2.0, 1.0}};
    CHECK_THROWS_AS(pca_top_k(two, 3), std::invalid_argument);
  }
}

TEST_CASE("feature discrepancy curve") {
  NetDims d;
  d.d_x = 2;
  d.n_classes = 4;
  d.feature_dim = 2;
  d.oracle_dim = 8;
  d.vel_hidden = 8;
  d.vel_layers = 2;
  d.align_hidden = 8;
  d.align_layers = 3;
  d.proj_hidden = 8;
  d.frn_hidden = 8;
  d.frn_layers = 2;
  d.oracle_hidden = 8;
  auto bundle = make_bundle(3, d, 14, true, 7777);

  DatasetSpec spec;
  spec.kind = DatasetKind::GaussianRing;
  spec.n_samples = 128;
  spec.n_classes = 4;
  spec.seed = 5;
  auto data = make_gaussian_ring(spec);

  auto table = feature_discrepancy_curve(bundle, data, 20, 6, 3);
  REQUIRE(table.per_segment.size() == 3);
  for (const auto& seg : table.per_segment) {
    REQUIRE(seg.size() == 6);
    CHECK(seg[0].second == 0.0);  // start point: f_start vs itself
    for (const auto& [t, mse] : seg) CHECK(mse >= 0.0);
  }

  // zero-weight alignment network: identically zero features, zero MSE
  std::fill(bundle.align_net.flat.begin(), bundle.align_net.flat.end(), 0.0);
  auto zero_table = feature_discrepancy_curve(bundle, data, 10, 4, 3);
  for (const auto& seg : zero_table.per_segment) {
    for (const auto& [t, mse] : seg) CHECK(mse == 0.0);
  }
}
