#include "decspace/boundary.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace decspace;

namespace {

std::vector<Eigen::Index> all_indices(const LabeledDataset& d) {
  std::vector<Eigen::Index> v(static_cast<std::size_t>(d.size()));
  std::iota(v.begin(), v.end(), Eigen::Index{0});
  return v;
}

// Plain probe-by-probe walk used as an independent oracle.
MarginRecord naive_walk(const Net& net, const Eigen::VectorXd& x, int origin, const Eigen::VectorXd& d, int sign,
                        double step, double range) {
  const int steps = static_cast<int>(std::floor(range / step + 1e-9));
  for (int s = 1; s <= steps; ++s) {
    const int p = predict(net, Eigen::VectorXd(x + sign * (s * step) * d));
    if (p != origin) return {0, origin, 0, sign, s * step, p};
  }
  return {0, origin, 0, sign, range, kNoAdjacent};
}

}  // namespace

TEST_CASE("directions are orthonormal and seeded") {
  for (auto [dim, k] : {std::pair{2, 2}, std::pair{10, 4}, std::pair{784, 784}}) {
    const auto dirs = make_directions(dim, k, 42);
    REQUIRE(dirs.dim() == dim);
    REQUIRE(dirs.count() == k);
    const Eigen::MatrixXd gram = dirs.vectors.transpose() * dirs.vectors;
    CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-9);
  }
  CHECK(make_directions(10, 4, 1).vectors == make_directions(10, 4, 1).vectors);
  CHECK_FALSE(make_directions(10, 4, 1).vectors.isApprox(make_directions(10, 4, 2).vectors));
  CHECK_THROWS_AS(make_directions(3, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_directions(3, 0, 1), std::invalid_argument);
}

TEST_CASE("search config validation") {
  CHECK(SearchConfig{0.02, 0.5, SignMode::both}.max_steps() == 25);
  CHECK_THROWS_AS((SearchConfig{0.6, 0.5, SignMode::both}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((SearchConfig{0.0, 0.5, SignMode::both}.validate()), std::invalid_argument);
  CHECK(SearchConfig{0.02, 0.5, SignMode::both}.sign_list() == std::vector<int>{1, -1});
  CHECK(SearchConfig{0.02, 0.5, SignMode::negative}.sign_list() == std::vector<int>{-1});
  CHECK(sign_mode_from_string("positive") == SignMode::positive);
}

TEST_CASE("linear boundary arithmetic") {
  const Net net = testutil::sign_x1();
  const SearchConfig cfg{0.02, 0.5, SignMode::both};
  const Eigen::Vector2d x(-0.05, 0.0);

  const auto hit = search_one(net, x, 0, Eigen::Vector2d(1, 0), 1, cfg);
  CHECK(hit.margin == doctest::Approx(0.06).epsilon(1e-12));
  CHECK(hit.adjacent_class == 1);

  const auto along = search_one(net, x, 0, Eigen::Vector2d(0, 1), 1, cfg);
  CHECK(along.margin == 0.5);
  CHECK(along.adjacent_class == kNoAdjacent);
  CHECK_FALSE(along.has_adjacent());

  const auto away = search_one(net, x, 0, Eigen::Vector2d(1, 0), -1, cfg);
  CHECK(away.adjacent_class == kNoAdjacent);

  CHECK_THROWS_AS(search_one(net, x, 0, Eigen::Vector2d(1, 1), 1, cfg), std::invalid_argument);
}

TEST_CASE("a misclassified sample changes class at the first probe") {
  const auto r = search_one(testutil::sign_x1(), Eigen::Vector2d(0.3, 0.0), 0, Eigen::Vector2d(0, 1), 1,
                            SearchConfig{0.02, 0.5, SignMode::both});
  CHECK(r.margin == doctest::Approx(0.02));
  CHECK(r.adjacent_class == 1);
}

TEST_CASE("search_all emits one record per sample, direction and sign in canonical order") {
  const auto data = testutil::four_blobs(5, 0.2, 3);
  const Net net = testutil::trained_toy(data, 6, 20, 4);
  const auto dirs = make_directions(2, 2, 5);
  std::vector<Eigen::Index> idx{3, 0, 17};
  const auto recs = search_all(net, data, idx, dirs, SearchConfig{0.02, 0.5, SignMode::both}, 1);
  REQUIRE(recs.size() == 12);
  std::size_t k = 0;
  for (Eigen::Index s : idx)
    for (int d = 0; d < 2; ++d)
      for (int sign : {1, -1}) {
        CHECK(recs[k].sample_index == s);
        CHECK(recs[k].direction_index == d);
        CHECK(recs[k].sign == sign);
        CHECK(recs[k].origin_class == data.labels[static_cast<std::size_t>(s)]);
        ++k;
      }
  const std::vector<Eigen::Index> one{0};
  const auto pair = search_all(net, data, one, make_directions(2, 1, 5), SearchConfig{0.02, 0.5, SignMode::both}, 1);
  REQUIRE(pair.size() == 2);
  CHECK(pair[0].sign == -pair[1].sign);
  CHECK(search_all(net, data, idx, dirs, SearchConfig{0.02, 0.5, SignMode::positive}, 1).size() == 6);
  const std::vector<Eigen::Index> bad{99};
  CHECK_THROWS_AS(search_all(net, data, bad, dirs, SearchConfig{}, 1), std::out_of_range);
}

TEST_CASE("record invariants and agreement with a naive walk") {
  const auto data = testutil::four_blobs(25, 0.25, 8);
  const Net net = testutil::trained_toy(data, 8, 40, 9);
  const auto dirs = make_directions(2, 2, 10);
  const SearchConfig cfg{0.02, 0.5, SignMode::both};
  const auto recs = search_all(net, data, all_indices(data), dirs, cfg, 2);
  for (const auto& r : recs) {
    CHECK(r.margin > 0.0);
    CHECK(r.margin <= cfg.max_range);
    CHECK(std::abs(r.margin / cfg.step_size - std::round(r.margin / cfg.step_size)) < 1e-9);
    CHECK(r.adjacent_class != r.origin_class);
    if (!r.has_adjacent()) CHECK(r.margin == cfg.max_range);
    const Eigen::VectorXd x = data.sample(r.sample_index);
    const Eigen::VectorXd d = dirs.direction(r.direction_index);
    const auto naive = naive_walk(net, x, r.origin_class, d, r.sign, cfg.step_size, cfg.max_range);
    CHECK(naive.adjacent_class == r.adjacent_class);
    CHECK(std::abs(naive.margin - r.margin) < 1e-12);
    // Every probe before the margin keeps the origin class.
    const int steps = static_cast<int>(std::round(r.margin / cfg.step_size));
    for (int s = 1; s < steps; ++s)
      CHECK(predict(net, Eigen::VectorXd(x + r.sign * (s * cfg.step_size) * d)) == r.origin_class);
  }
}

TEST_CASE("coarse search lands within one step of a fine oracle") {
  // 252 samples x 2 directions x 2 signs = 1,008 (sample, direction) walks.
  const auto data = testutil::four_blobs(63, 0.3, 12);
  const Net net = testutil::trained_toy(data, 8, 40, 13);
  const auto dirs = make_directions(2, 2, 14);
  const SearchConfig coarse{0.02, 0.5, SignMode::both};
  const SearchConfig fine{1e-4, 0.5, SignMode::both};
  const auto a = search_all(net, data, all_indices(data), dirs, coarse, 1);
  const auto b = search_all(net, data, all_indices(data), dirs, fine, 1);
  REQUIRE(a.size() >= 1000);
  REQUIRE(a.size() == b.size());
  int found = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!b[i].has_adjacent()) {
      CHECK_FALSE(a[i].has_adjacent());
      continue;
    }
    ++found;
    CHECK(a[i].margin >= b[i].margin - 1e-9);
    CHECK(a[i].margin - b[i].margin <= coarse.step_size + 1e-9);
  }
  CHECK(found > 100);
}

TEST_CASE("parallel and serial searches are identical") {
  const auto data = testutil::four_blobs(30, 0.3, 15);
  const Net net = testutil::trained_toy(data, 8, 30, 16);
  const auto dirs = make_directions(2, 2, 17);
  const SearchConfig cfg{0.02, 0.5, SignMode::both};
  const auto serial = search_all(net, data, all_indices(data), dirs, cfg, 1);
  for (unsigned t : {2u, 3u, 8u}) CHECK(search_all(net, data, all_indices(data), dirs, cfg, t) == serial);
}

TEST_CASE("search_one and search_all agree on high-dimensional networks") {
  std::mt19937_64 rng(18);
  const LayerSpec specs[] = {{16, Activation::relu}, {8, Activation::sigmoid}, {5, Activation::softmax}};
  const Net net = Net::initialized(40, specs, 19);
  LabeledDataset data;
  data.samples = testutil::gaussian(40, 12, rng, 0.5);
  data.num_classes = 5;
  data.labels = predict_batch(net, data.samples);
  data.value_range = {-10, 10};
  const auto dirs = make_directions(40, 40, 20);
  const SearchConfig cfg{0.05, 3.0, SignMode::both};
  const auto recs = search_all(net, data, all_indices(data), dirs, cfg, 2);
  for (const auto& r : recs) {
    const auto one = search_one(net, data.sample(r.sample_index), r.origin_class, dirs.direction(r.direction_index),
                                r.sign, cfg, r.sample_index, r.direction_index);
    CHECK(one == r);
  }
}

TEST_CASE("misclassified samples are listed") {
  LabeledDataset data;
  data.samples = Eigen::MatrixXd(2, 3);
  data.samples << -1, 1, 2, 0, 0, 0;
  data.labels = {0, 0, 1};
  data.num_classes = 2;
  const std::vector<Eigen::Index> idx{0, 1, 2};
  CHECK(misclassified_samples(testutil::sign_x1(), data, idx) == std::vector<Eigen::Index>{1});
}
