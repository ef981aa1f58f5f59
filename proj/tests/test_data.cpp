#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "advrank/data.hpp"
#include "advrank/zoo.hpp"
#include "oracles.hpp"

using namespace advrank;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<std::vector<float>> as_rows(const Dataset& ds) {
  std::vector<std::vector<float>> rows;
  for (const auto& t : ds.inputs) {
    std::vector<float> r(static_cast<std::size_t>(t.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) r[static_cast<std::size_t>(i)] = t.data[i];
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

TEST_CASE("blobs collapse to class centers as spread vanishes") {
  const Dataset ds = gen_blobs(60, 3, 2, 1e-9f, 9);
  for (int c = 0; c < 3; ++c) {
    const Tensor* first = nullptr;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != c) continue;
      if (!first) {
        first = &ds.inputs[i];
        continue;
      }
      for (Eigen::Index d = 0; d < first->size(); ++d)
        CHECK(std::fabs(ds.inputs[i].data[d] - first->data[d]) < 1e-6f);
    }
  }
}

TEST_CASE("blob generation is deterministic and balanced") {
  const Dataset a = gen_blobs(101, 4, 3, 0.1f, 77);
  const Dataset b = gen_blobs(101, 4, 3, 0.1f, 77);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == b.labels[i]);
    for (Eigen::Index d = 0; d < a.inputs[i].size(); ++d)
      CHECK(a.inputs[i].data[d] == b.inputs[i].data[d]);
  }

  std::vector<int> counts(4, 0);
  for (int y : a.labels) counts[static_cast<std::size_t>(y)]++;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  CHECK(*hi - *lo <= 1);

  for (const auto& x : a.inputs)
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      CHECK(x.data[d] >= 0.0f);
      CHECK(x.data[d] <= 1.0f);
    }
}

TEST_CASE("a 1-NN oracle scores >= 0.95 on a held-out half of tight blobs") {
  const Dataset ds = gen_blobs(400, 3, 2, 0.05f, 21);
  auto [train, test] = split_train_test(ds, 0.5, 5);
  const auto train_rows = as_rows(train);
  const auto test_rows = as_rows(test);

  std::size_t ok = 0;
  for (std::size_t i = 0; i < test_rows.size(); ++i)
    if (oracle::nn_predict(train_rows, train.labels, test_rows[i]) == test.labels[i]) ++ok;
  CHECK(static_cast<double>(ok) / static_cast<double>(test_rows.size()) >= 0.95);
}

TEST_CASE("gen_blobs rejects invalid parameters") {
  CHECK_THROWS_AS(gen_blobs(2, 3, 2, 0.1f, 0), ConfigError);
  CHECK_THROWS_AS(gen_blobs(10, 2, 0, 0.1f, 0), ConfigError);
  CHECK_THROWS_AS(gen_blobs(10, 2, 2, 0.0f, 0), ConfigError);
}

TEST_CASE("ring radii stay inside the construction bands") {
  const Dataset ds = gen_rings(300, 4);
  CHECK(ds.num_classes == 2);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double dx = static_cast<double>(ds.inputs[i].data[0]) - 0.5;
    const double dy = static_cast<double>(ds.inputs[i].data[1]) - 0.5;
    const double r = std::sqrt(dx * dx + dy * dy);
    if (ds.labels[i] == 0) {
      CHECK(r >= 0.20 - 1e-6);
      CHECK(r <= 0.30 + 1e-6);
    } else {
      CHECK(r >= 0.35 - 1e-6);
      CHECK(r <= 0.45 + 1e-6);
    }
  }

  const Dataset again = gen_rings(300, 4);
  for (std::size_t i = 0; i < ds.size(); ++i)
    CHECK(ds.inputs[i].data[0] == again.inputs[i].data[0]);
}

TEST_CASE("rings separate nonlinearly: linear fit <= 0.7, small MLP >= 0.9") {
  const Dataset ds = gen_rings(600, 13);

  oracle::Logistic linear;
  linear.fit(as_rows(ds), ds.labels, 2, 600, 1.0);
  CHECK(linear.accuracy(as_rows(ds), ds.labels) <= 0.7);

  Network mlp = build("mlp-wide", {2}, 2, 1);
  TrainConfig tc;
  tc.epochs = 60;
  tc.learning_rate = 0.3f;
  tc.seed = 3;
  train(mlp, ds, tc);
  CHECK(accuracy(mlp, ds) >= 0.9);
}

TEST_CASE("idx fixture parses to the exact expected tensors") {
  const std::string img_path = temp_path("advrank_fixture_images.idx");
  const std::string lab_path = temp_path("advrank_fixture_labels.idx");

  std::vector<std::vector<unsigned char>> images(2, std::vector<unsigned char>(16, 0));
  for (int i = 0; i < 16; ++i) images[0][static_cast<std::size_t>(i)] = static_cast<unsigned char>(i * 17);
  images[1][0] = 255;
  images[1][15] = 128;
  oracle::write_idx(img_path, lab_path, images, 4, 4, {1, 0});

  const Dataset ds = load_idx(img_path, lab_path, 0, 0);
  REQUIRE(ds.size() == 2);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels[0] == 1);
  CHECK(ds.labels[1] == 0);
  CHECK(ds.inputs[0].shape == std::vector<int>{1, 4, 4});
  for (int i = 0; i < 16; ++i)
    CHECK(ds.inputs[0].data[i] == doctest::Approx(i * 17 / 255.0).epsilon(1e-7));
  CHECK(ds.inputs[1].data[0] == 1.0f);   // pixel 255 -> 1.0
  CHECK(ds.inputs[1].data[15] == doctest::Approx(128.0 / 255.0));
  CHECK(ds.inputs[1].data[1] == 0.0f);   // pixel 0 -> 0.0

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("idx downsampling average-pools blocks") {
  const std::string img_path = temp_path("advrank_fixture_ds_images.idx");
  const std::string lab_path = temp_path("advrank_fixture_ds_labels.idx");

  // one 4x4 image, downsampled to 2x2: each output is the mean of a 2x2 block
  std::vector<std::vector<unsigned char>> images(1, std::vector<unsigned char>{
      0, 255, 10, 20,
      255, 0, 30, 40,
      50, 60, 200, 200,
      70, 80, 200, 200});
  oracle::write_idx(img_path, lab_path, images, 4, 4, {3});

  const Dataset ds = load_idx(img_path, lab_path, 0, 2);
  REQUIRE(ds.size() == 1);
  CHECK(ds.inputs[0].shape == std::vector<int>{1, 2, 2});
  CHECK(ds.inputs[0].data[0] == doctest::Approx((0 + 255 + 255 + 0) / (4 * 255.0)));
  CHECK(ds.inputs[0].data[1] == doctest::Approx((10 + 20 + 30 + 40) / (4 * 255.0)));
  CHECK(ds.inputs[0].data[2] == doctest::Approx((50 + 60 + 70 + 80) / (4 * 255.0)));
  CHECK(ds.inputs[0].data[3] == doctest::Approx(200.0 / 255.0));

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("idx limit keeps only the leading samples") {
  const std::string img_path = temp_path("advrank_limit_images.idx");
  const std::string lab_path = temp_path("advrank_limit_labels.idx");

  std::vector<std::vector<unsigned char>> images(5, std::vector<unsigned char>(16, 9));
  images[0][0] = 200;
  oracle::write_idx(img_path, lab_path, images, 4, 4, {0, 1, 0, 1, 0});

  const Dataset ds = load_idx(img_path, lab_path, 2, 0);
  REQUIRE(ds.size() == 2);
  CHECK(ds.inputs[0].data[0] == doctest::Approx(200.0 / 255.0));
  CHECK(ds.labels[1] == 1);

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("idx loader rejects corruption with distinct errors") {
  const std::string img_path = temp_path("advrank_bad_images.idx");
  const std::string lab_path = temp_path("advrank_bad_labels.idx");

  std::vector<std::vector<unsigned char>> images(2, std::vector<unsigned char>(16, 7));
  oracle::write_idx(img_path, lab_path, images, 4, 4, {0, 1});

  SUBCASE("bad image magic") {
    std::ofstream f(img_path, std::ios::binary | std::ios::in);
    f.seekp(0);
    const char zeros[4] = {0, 0, 0, 0};
    f.write(zeros, 4);
    f.close();
    CHECK_THROWS_AS(load_idx(img_path, lab_path, 0, 0), BadMagicError);
  }

  SUBCASE("truncated image payload") {
    std::filesystem::resize_file(img_path, 16 + 8);  // header plus half an image
    CHECK_THROWS_AS(load_idx(img_path, lab_path, 0, 0), TruncatedError);
  }

  SUBCASE("count mismatch") {
    const std::string lab2 = temp_path("advrank_bad_labels2.idx");
    oracle::write_idx(temp_path("advrank_scratch.idx"), lab2, images, 4, 4, {0, 1, 1});
    CHECK_THROWS_AS(load_idx(img_path, lab2, 0, 0), ParseError);
    std::remove(lab2.c_str());
  }

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("idx round trip reproduces the dataset after u8 quantization") {
  const Dataset src = gen_blobs(32, 2, 16, 0.2f, 3);
  const std::string img_path = temp_path("advrank_rt_images.idx");
  const std::string lab_path = temp_path("advrank_rt_labels.idx");

  std::vector<std::vector<unsigned char>> images;
  std::vector<unsigned char> labels;
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::vector<unsigned char> img(16);
    for (int d = 0; d < 16; ++d)
      img[static_cast<std::size_t>(d)] =
          static_cast<unsigned char>(std::lround(src.inputs[i].data[d] * 255.0f));
    images.push_back(std::move(img));
    labels.push_back(static_cast<unsigned char>(src.labels[i]));
  }
  oracle::write_idx(img_path, lab_path, images, 4, 4, labels);

  const Dataset loaded = load_idx(img_path, lab_path, 0, 0);
  REQUIRE(loaded.size() == src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    CHECK(loaded.labels[i] == src.labels[i]);
    for (int d = 0; d < 16; ++d) {
      const float quantized = static_cast<float>(images[i][static_cast<std::size_t>(d)]) / 255.0f;
      CHECK(loaded.inputs[i].data[d] == quantized);
    }
  }

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
}

TEST_CASE("filter_correct keeps everything under a perfect model") {
  const Dataset ds = gen_blobs(90, 3, 2, 0.03f, 15);
  Network net = build("mlp-wide", {2}, 3, 2);
  TrainConfig tc;
  tc.epochs = 40;
  tc.learning_rate = 0.3f;
  tc.seed = 8;
  train(net, ds, tc);
  REQUIRE(accuracy(net, ds) == 1.0);

  const EvalSet eval = filter_correct(ds, net);
  CHECK(eval.base.size() == ds.size());
  CHECK(eval.retained_fraction == 1.0);
  for (std::size_t i = 0; i < eval.base.size(); ++i)
    CHECK(eval.original_indices[i] == static_cast<int>(i));
}

TEST_CASE("a constant-logit model retains one class via the tie-break") {
  // zero weights everywhere -> argmax always 0 -> exactly the class-0 samples survive
  const Dataset ds = gen_blobs(120, 4, 3, 0.1f, 33);
  const Network net = build("mlp-narrow", {3}, 4, 1);
  Network zeroed = net;
  for (auto& l : zeroed.layers)
    for (auto& p : l.params) p.data.setZero();

  const EvalSet eval = filter_correct(ds, zeroed);
  CHECK(eval.base.size() == 30);  // balanced 120/4
  for (int y : eval.base.labels) CHECK(y == 0);
}

TEST_CASE("retained fraction equals independently computed accuracy") {
  const Dataset ds = gen_blobs(200, 3, 4, 0.25f, 99);
  Network net = build("mlp-narrow", {4}, 3, 5);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 6;
  train(net, ds, tc);

  const EvalSet eval = filter_correct(ds, net);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (argmax(forward(net, ds.inputs[i])) == ds.labels[i]) ++correct;
  CHECK(eval.base.size() == correct);
  CHECK(eval.retained_fraction ==
        doctest::Approx(static_cast<double>(correct) / static_cast<double>(ds.size())));
}

TEST_CASE("filter_correct is idempotent") {
  const Dataset ds = gen_blobs(150, 3, 3, 0.3f, 44);
  Network net = build("mlp-narrow", {3}, 3, 9);
  TrainConfig tc;
  tc.epochs = 4;
  tc.seed = 2;
  train(net, ds, tc);

  const EvalSet once = filter_correct(ds, net);
  const EvalSet twice = filter_correct(once.base, net);
  CHECK(twice.base.size() == once.base.size());
  for (std::size_t i = 0; i < once.base.size(); ++i) {
    CHECK(twice.base.labels[i] == once.base.labels[i]);
    for (Eigen::Index d = 0; d < once.base.inputs[i].size(); ++d)
      CHECK(twice.base.inputs[i].data[d] == once.base.inputs[i].data[d]);
  }
}

TEST_CASE("split_train_test is deterministic and partitions the data") {
  const Dataset ds = gen_blobs(100, 2, 2, 0.1f, 8);
  auto [tr1, te1] = split_train_test(ds, 0.25, 17);
  auto [tr2, te2] = split_train_test(ds, 0.25, 17);
  CHECK(te1.size() == 25);
  CHECK(tr1.size() == 75);
  CHECK(te1.size() == te2.size());
  for (std::size_t i = 0; i < te1.size(); ++i)
    CHECK(te1.inputs[i].data[0] == te2.inputs[i].data[0]);
  CHECK_THROWS_AS(split_train_test(ds, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(ds, 1.0, 1), ConfigError);
}
