#include "decspace/dataset.hpp"
#include "decspace/model_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

using namespace decspace;
namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> image_file(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     std::mt19937_64& rng) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x803);
  put_u32(b, count);
  put_u32(b, rows);
  put_u32(b, cols);
  std::uniform_int_distribution<int> px(0, 255);
  for (std::uint32_t i = 0; i < count * rows * cols; ++i) b.push_back(static_cast<std::uint8_t>(px(rng)));
  return b;
}

std::vector<std::uint8_t> label_file(std::uint32_t count, std::mt19937_64& rng) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x801);
  put_u32(b, count);
  std::uniform_int_distribution<int> lab(0, 9);
  for (std::uint32_t i = 0; i < count; ++i) b.push_back(static_cast<std::uint8_t>(lab(rng)));
  return b;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "decspace_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("IDX headers decode into scaled samples") {
  std::mt19937_64 rng(1);
  const auto images = image_file(2, 28, 28, rng);
  const auto labels = label_file(2, rng);
  const auto d = decode_idx(images, labels);
  CHECK(d.size() == 2);
  CHECK(d.dim() == 784);
  CHECK(d.image_rows == 28);
  CHECK(d.value_range.lo == 0.0);
  CHECK(d.value_range.hi == 1.0);
  CHECK(d.samples.maxCoeff() <= 1.0);
  CHECK(d.samples.minCoeff() >= 0.0);
  CHECK(d.samples(5, 1) == images[16 + 784 + 5] / 255.0);
}

TEST_CASE("IDX errors") {
  std::mt19937_64 rng(2);
  auto images = image_file(3, 2, 2, rng);
  const auto labels = label_file(2, rng);
  CHECK_THROWS_AS(decode_idx(images, labels), std::runtime_error);

  auto good_labels = label_file(3, rng);
  auto bad_magic = images;
  bad_magic[3] = 0x04;
  CHECK_THROWS_AS(decode_idx(bad_magic, good_labels), std::runtime_error);
  auto bad_label_magic = good_labels;
  bad_label_magic[2] = 0x09;
  CHECK_THROWS_AS(decode_idx(images, bad_label_magic), std::runtime_error);

  auto truncated = images;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_idx(truncated, good_labels), std::runtime_error);
  auto short_header = std::vector<std::uint8_t>(images.begin(), images.begin() + 10);
  CHECK_THROWS_AS(decode_idx(short_header, good_labels), std::runtime_error);

  try {
    load_idx(scratch("does-not-exist.idx"), scratch("nor-this.idx"));
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("does-not-exist.idx") != std::string::npos);
  }
}

TEST_CASE("IDX round trip is byte-identical, plain and gzipped") {
  std::mt19937_64 rng(3);
  const auto images = image_file(17, 5, 7, rng);
  const auto labels = label_file(17, rng);
  write_bytes(scratch("img.idx"), images);
  write_bytes(scratch("lab.idx"), labels);
  const auto d = load_idx(scratch("img.idx"), scratch("lab.idx"));
  CHECK(encode_idx_images(d) == images);
  CHECK(encode_idx_labels(d) == labels);

  write_idx(d, scratch("img2.idx"), scratch("lab2.idx"));
  CHECK(read_bytes(scratch("img2.idx")) == images);
  CHECK(read_bytes(scratch("lab2.idx")) == labels);

  gzFile gz = gzopen(scratch("img.idx.gz").c_str(), "wb");
  REQUIRE(gz != nullptr);
  gzwrite(gz, images.data(), static_cast<unsigned>(images.size()));
  gzclose(gz);
  const auto from_gz = load_idx(scratch("img.idx.gz"), scratch("lab.idx"));
  CHECK(from_gz.samples == d.samples);
  CHECK(from_gz.labels == d.labels);
}

TEST_CASE("synthetic datasets") {
  SUBCASE("zero noise pins every point to its center") {
    const auto d = testutil::two_blobs(10, 0.0, 4);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double expect = d.labels[static_cast<std::size_t>(i)] == 0 ? -1.0 : 1.0;
      CHECK(d.samples(0, i) == expect);
      CHECK(d.samples(1, i) == 0.0);
    }
  }
  SUBCASE("class counts") {
    SyntheticSpec spec;
    spec.num_classes = 3;
    spec.points_per_class = 50;
    const auto d = make_synthetic(spec);
    CHECK(d.size() == 150);
    for (int k = 0; k < 3; ++k) CHECK(std::count(d.labels.begin(), d.labels.end(), k) == 50);
  }
  SUBCASE("seeded and clipped") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::concentric_rings;
    spec.num_classes = 3;
    spec.noise_sigma = 2.0;
    spec.seed = 9;
    const auto a = make_synthetic(spec), b = make_synthetic(spec);
    CHECK(a.samples == b.samples);
    CHECK(a.samples.maxCoeff() <= spec.value_range.hi);
    CHECK(a.samples.minCoeff() >= spec.value_range.lo);
    spec.seed = 10;
    CHECK_FALSE(make_synthetic(spec).samples == a.samples);
  }
  SUBCASE("invalid specs") {
    SyntheticSpec spec;
    spec.points_per_class = 0;
    CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
    spec.points_per_class = 5;
    spec.noise_sigma = -1.0;
    CHECK_THROWS_AS(make_synthetic(spec), std::invalid_argument);
  }
}

TEST_CASE("subsample draws distinct, prefix-stable indices") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.points_per_class = 50;
  const auto d = make_synthetic(spec);
  const auto full = subsample(d, d.size(), 5);
  std::set<Eigen::Index> seen(full.indices.begin(), full.indices.end());
  CHECK(seen.size() == 100);

  for (Eigen::Index n = 1; n < d.size(); n += 7) {
    const auto a = subsample(d, n, 6);
    const auto b = subsample(d, n + 1, 6);
    CHECK(std::set<Eigen::Index>(a.indices.begin(), a.indices.end()).size() == static_cast<std::size_t>(n));
    CHECK(std::equal(a.indices.begin(), a.indices.end(), b.indices.begin()));
    for (Eigen::Index i = 0; i < n; ++i) CHECK(a.data.samples.col(i) == d.samples.col(a.indices[i]));
  }
  CHECK_THROWS_AS(subsample(d, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(subsample(d, 101, 1), std::invalid_argument);

  SyntheticSpec big;
  big.points_per_class = 30000;
  const auto mnist_sized = make_synthetic(big);
  const auto pick = subsample(mnist_sized, 1500, 7);
  CHECK(std::set<Eigen::Index>(pick.indices.begin(), pick.indices.end()).size() == 1500);
}

TEST_CASE("model file round trip preserves every parameter exactly") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 25; ++t) {
    const Net net = testutil::random_small_net(rng).net;
    const std::string text = serialize_model(net);
    const Net back = model_from_json(nlohmann::json::parse(text));
    CHECK(back == net);
    CHECK(serialize_model(back) == text);
  }
  const LayerSpec specs[] = {{4, Activation::relu}, {3, Activation::softmax}};
  const Net net = Net::initialized(6, specs, 12);
  save_model(net, scratch("model.json"));
  CHECK(load_model(scratch("model.json")) == net);
  const auto doc = nlohmann::json::parse(serialize_model(net));
  CHECK(doc.at("format_version") == 1);
  CHECK(doc.at("input_dim") == 6);
  CHECK(doc.at("num_classes") == 3);
  CHECK(doc.at("layers").size() == 2);
  CHECK(doc.at("layers")[0].at("activation") == "relu");
}

TEST_CASE("malformed model files are rejected") {
  const LayerSpec specs[] = {{3, Activation::softmax}};
  auto doc = model_to_json(Net::initialized(2, specs, 1));
  auto bad = doc;
  bad["format_version"] = 99;
  CHECK_THROWS(model_from_json(bad));
  bad = doc;
  bad["layers"][0]["weights"].erase(0);
  CHECK_THROWS(model_from_json(bad));
  bad = doc;
  bad["layers"][0]["activation"] = "swish";
  CHECK_THROWS(model_from_json(bad));
  CHECK_THROWS_AS(load_model(scratch("missing-model.json")), std::runtime_error);
}
