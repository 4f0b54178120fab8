#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "cfl/encoder.hpp"

using namespace cfl;

namespace {

DeviceProfile fastest_profile() {
  DeviceProfile p;
  p.per_point_compute_time = 500.0 / 1536000.0;
  p.memory_access_rate = 2.0 / p.per_point_compute_time;
  p.packet_time = 17600.0 / 216000.0;
  p.erasure_prob = 0.1;
  p.local_points = 300;
  return p;
}

LocalDataset random_dataset(int points, int dim, RandomStream& rng) {
  LocalDataset data;
  data.features.resize(points, dim);
  data.labels.resize(points);
  for (int r = 0; r < points; ++r) {
    for (int j = 0; j < dim; ++j) data.features(r, j) = rng.normal();
    data.labels(r) = rng.normal();
  }
  return data;
}

std::vector<int> iota_set(int n) {
  std::vector<int> set(n);
  std::iota(set.begin(), set.end(), 0);
  return set;
}

}  // namespace

TEST_CASE("build_weights") {
  auto profile = fastest_profile();
  profile.local_points = 8;

  SUBCASE("systematic weights are sqrt of the miss probability") {
    // Pick t so the return probability is strictly inside (0, 1).
    const double t = expected_delay(profile, 5);
    const double p_return = return_probability(profile, 5, t);
    REQUIRE(p_return > 0.0);
    REQUIRE(p_return < 1.0);
    const std::vector<int> sys{0, 2, 3, 5, 7};
    const Eigen::VectorXd w = build_weights(profile, 5, t, sys);
    const double expected = std::sqrt(1.0 - p_return);
    for (int k : sys) CHECK(w[k] == doctest::Approx(expected));
    CHECK(w[1] == 1.0);
    CHECK(w[4] == 1.0);
    CHECK(w[6] == 1.0);
    // Same value on every systematic index.
    for (int k : sys) CHECK(w[k] == w[sys.front()]);
    for (int k = 0; k < 8; ++k) {
      CHECK(w[k] > 0.0);
      CHECK(w[k] <= 1.0);
    }
  }

  SUBCASE("fully punctured device keeps unit weights") {
    const Eigen::VectorXd w = build_weights(profile, 0, 1.0, {});
    CHECK(w.size() == 8);
    CHECK(w.minCoeff() == 1.0);
    CHECK(w.maxCoeff() == 1.0);
  }

  SUBCASE("device that never returns in time gets full parity weight") {
    // Deadline below the minimum achievable delay: P{T >= t*} = 1.
    const double t = 0.5 * (5 * profile.per_point_compute_time +
                            2 * profile.packet_time);
    const Eigen::VectorXd w = build_weights(profile, 5, t, iota_set(5));
    for (int k = 0; k < 5; ++k) CHECK(w[k] == 1.0);
  }

  SUBCASE("rejects inconsistent arguments") {
    CHECK_THROWS_AS(build_weights(profile, 0, 1.0, {1, 2}),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_weights(profile, 3, 1.0, {1, 2}),
                    std::invalid_argument);
  }
}

TEST_CASE("encode_with_generator deterministic cases") {
  RandomStream rng(5);
  LocalDataset data = random_dataset(6, 4, rng);

  SUBCASE("row of ones with unit weights gives column sums") {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, 6);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
    const EncodedShard shard = encode_with_generator(data, w, ones);
    for (int j = 0; j < 4; ++j) {
      CHECK(shard.parity_features(0, j) ==
            doctest::Approx(data.features.col(j).sum()));
    }
    CHECK(shard.parity_labels(0) == doctest::Approx(data.labels.sum()));
  }

  SUBCASE("scalar case") {
    LocalDataset one;
    one.features.resize(1, 3);
    one.features << 2.0, -1.0, 0.5;
    one.labels.resize(1);
    one.labels << 4.0;
    Eigen::MatrixXd g(1, 1);
    g << 1.5;
    Eigen::VectorXd w(1);
    w << 0.5;
    const EncodedShard shard = encode_with_generator(one, w, g);
    CHECK(shard.parity_features(0, 0) == doctest::Approx(1.5));
    CHECK(shard.parity_features(0, 1) == doctest::Approx(-0.75));
    CHECK(shard.parity_labels(0) == doctest::Approx(3.0));
  }
}

TEST_CASE("encode_local shapes and the empty-shard case") {
  RandomStream rng(9);
  LocalDataset data = random_dataset(10, 3, rng);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(10);

  auto [shard, priv] = encode_local(data, w, iota_set(10), 5,
                                    GeneratorFamily::kGaussian, rng, 3);
  CHECK(shard.device_id == 3);
  CHECK(shard.parity_features.rows() == 5);
  CHECK(shard.parity_features.cols() == 3);
  CHECK(shard.parity_labels.size() == 5);
  CHECK(priv.generator.rows() == 5);
  CHECK(priv.systematic_set.size() == 10);

  auto [empty, empty_priv] = encode_local(data, w, iota_set(10), 0,
                                          GeneratorFamily::kGaussian, rng);
  CHECK(empty.parity_features.rows() == 0);
  CHECK(empty.parity_labels.size() == 0);
}

TEST_CASE("bernoulli-half generator is centered to +-1") {
  RandomStream rng(13);
  const Eigen::MatrixXd g =
      draw_generator(50, 40, GeneratorFamily::kBernoulliHalf, rng);
  int plus = 0, minus = 0;
  for (int r = 0; r < g.rows(); ++r) {
    for (int k = 0; k < g.cols(); ++k) {
      if (g(r, k) == 1.0) ++plus;
      else if (g(r, k) == -1.0) ++minus;
    }
  }
  CHECK(plus + minus == 2000);
  CHECK(std::abs(plus - minus) < 200);  // ~4.5 sigma
}

TEST_CASE("accumulate_parity") {
  RandomStream rng(21);
  LocalDataset data = random_dataset(6, 4, rng);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  auto [shard, priv] = encode_local(data, w, iota_set(6), 3,
                                    GeneratorFamily::kGaussian, rng);

  SUBCASE("one shard is its own composite") {
    const CompositeParity composite = accumulate_parity({shard});
    CHECK(composite.contributor_count == 1);
    CHECK((composite.features - shard.parity_features).norm() == 0.0);
  }

  SUBCASE("opposite shards cancel") {
    EncodedShard negated = shard;
    negated.parity_features *= -1.0;
    negated.parity_labels *= -1.0;
    const CompositeParity composite = accumulate_parity({shard, negated});
    CHECK(composite.features.norm() == 0.0);
    CHECK(composite.labels.norm() == 0.0);
    CHECK(composite.contributor_count == 2);
  }

  SUBCASE("dimension mismatch is fatal") {
    auto [other, other_priv] = encode_local(data, w, iota_set(6), 4,
                                            GeneratorFamily::kGaussian, rng);
    CHECK_THROWS_AS(accumulate_parity({shard, other}), std::invalid_argument);
  }
}

TEST_CASE("composite parity equals the block-global product") {
  // n devices, stacked generator G = [G_1 ... G_n] and block-diagonal W
  // applied to the concatenated data must reproduce the composite exactly.
  RandomStream rng(33);
  const int n = 24, points = 12, dim = 7, c = 9;
  std::vector<LocalDataset> data;
  std::vector<Eigen::VectorXd> weights;
  std::vector<EncodedShard> shards;
  std::vector<EncoderPrivateState> privs;
  for (int i = 0; i < n; ++i) {
    data.push_back(random_dataset(points, dim, rng));
    Eigen::VectorXd w(points);
    for (int k = 0; k < points; ++k) w(k) = 0.2 + 0.8 * rng.uniform();
    weights.push_back(w);
    auto [shard, priv] = encode_local(data.back(), w, iota_set(points), c,
                                      GeneratorFamily::kGaussian, rng, i);
    shards.push_back(std::move(shard));
    privs.push_back(std::move(priv));
  }
  const CompositeParity composite = accumulate_parity(shards);

  Eigen::MatrixXd global_x(n * points, dim);
  Eigen::VectorXd global_y(n * points);
  Eigen::MatrixXd global_g(c, n * points);
  Eigen::VectorXd global_w(n * points);
  for (int i = 0; i < n; ++i) {
    global_x.middleRows(i * points, points) = data[i].features;
    global_y.segment(i * points, points) = data[i].labels;
    global_g.middleCols(i * points, points) = privs[i].generator;
    global_w.segment(i * points, points) = weights[i];
  }
  const Eigen::MatrixXd expected_x =
      global_g * global_w.asDiagonal() * global_x;
  const Eigen::VectorXd expected_y =
      global_g * global_w.cwiseProduct(global_y);
  CHECK((composite.features - expected_x).norm() /
            expected_x.norm() < 1e-10);
  CHECK((composite.labels - expected_y).norm() / expected_y.norm() < 1e-10);
}

TEST_CASE("generator gram matrix concentrates at the identity") {
  RandomStream rng(55);
  const int c = 2000, points = 50;
  const Eigen::MatrixXd g =
      draw_generator(c, points, GeneratorFamily::kGaussian, rng);
  const Eigen::MatrixXd gram = g.transpose() * g / c;
  double offdiag_abs_sum = 0.0;
  double diag_sum = 0.0;
  for (int a = 0; a < points; ++a) {
    diag_sum += gram(a, a);
    for (int b = 0; b < points; ++b) {
      if (a != b) offdiag_abs_sum += std::abs(gram(a, b));
    }
  }
  CHECK(offdiag_abs_sum / (points * (points - 1)) < 0.05);
  CHECK(std::abs(diag_sum / points - 1.0) < 0.05);
}

TEST_CASE("gram deviation decays like 1/sqrt(c)") {
  RandomStream rng(77);
  const int points = 30;
  const std::vector<int> cs{100, 400, 1600};
  std::vector<double> log_c, log_err;
  for (int c : cs) {
    double err = 0.0;
    const int reps = 3;
    for (int rep = 0; rep < reps; ++rep) {
      const Eigen::MatrixXd g =
          draw_generator(c, points, GeneratorFamily::kGaussian, rng);
      const Eigen::MatrixXd gram = g.transpose() * g / c;
      err += (gram - Eigen::MatrixXd::Identity(points, points)).norm();
    }
    log_c.push_back(std::log(static_cast<double>(c)));
    log_err.push_back(std::log(err / reps));
  }
  // Least-squares slope over the log-log points.
  const double n = static_cast<double>(cs.size());
  const double mx = std::accumulate(log_c.begin(), log_c.end(), 0.0) / n;
  const double my = std::accumulate(log_err.begin(), log_err.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < cs.size(); ++i) {
    sxy += (log_c[i] - mx) * (log_err[i] - my);
    sxx += (log_c[i] - mx) * (log_c[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope > -0.6);
  CHECK(slope < -0.4);
}

TEST_CASE("choose_systematic_set") {
  RandomStream rng(101);
  const auto set = choose_systematic_set(20, 8, rng);
  CHECK(set.size() == 8);
  CHECK(std::is_sorted(set.begin(), set.end()));
  CHECK(std::adjacent_find(set.begin(), set.end()) == set.end());
  CHECK(set.front() >= 0);
  CHECK(set.back() < 20);

  CHECK(choose_systematic_set(5, 0, rng).empty());
  CHECK(choose_systematic_set(5, 5, rng) == iota_set(5));
  CHECK_THROWS_AS(choose_systematic_set(5, 6, rng), std::invalid_argument);
}

TEST_CASE("shard serialization round trip and byte layout") {
  RandomStream rng(202);
  LocalDataset data = random_dataset(5, 3, rng);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(5);
  auto [shard, priv] =
      encode_local(data, w, iota_set(5), 4, GeneratorFamily::kGaussian, rng, 7);

  const auto bytes = serialize_shard(shard);
  // Header is exactly 20 bytes; payload is c*(d+1) doubles. Nothing else
  // leaves the device: the generator, weights and raw rows stay private.
  CHECK(bytes.size() == 20 + 8 * 4 * (3 + 1));

  const EncodedShard back = deserialize_shard(bytes);
  CHECK(back.device_id == 7);
  CHECK((back.parity_features - shard.parity_features).norm() == 0.0);
  CHECK((back.parity_labels - shard.parity_labels).norm() == 0.0);

  std::vector<std::uint8_t> garbage{1, 2, 3};
  CHECK_THROWS_AS(deserialize_shard(garbage), std::invalid_argument);
}
