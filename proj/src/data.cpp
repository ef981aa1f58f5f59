#include "advrank/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "advrank/rng.hpp"

namespace advrank {

namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803u;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801u;

float clip01(double v) {
  if (v < 0.0) return 0.0f;
  if (v > 1.0) return 1.0f;
  return static_cast<float>(v);
}

std::uint32_t read_be_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw TruncatedError(std::string("idx: truncated while reading ") + what);
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::val: return "val";
  }
  return "?";
}

Dataset gen_blobs(int n, int num_classes, int dim, float spread, std::uint64_t seed) {
  if (num_classes < 1 || n < num_classes) throw ConfigError("gen_blobs: need n >= num_classes >= 1");
  if (dim < 1) throw ConfigError("gen_blobs: dim must be positive");
  if (!(spread > 0.0f)) throw ConfigError("gen_blobs: spread must be > 0");

  Rng rng(seed);

  // Centers in [0.2, 0.8]^dim; resample while any pair is closer than 0.25,
  // giving up after a bounded number of attempts so high class counts in low
  // dimensions still terminate.
  std::vector<std::vector<double>> centers;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> center(static_cast<std::size_t>(dim));
    for (int attempt = 0; attempt < 200; ++attempt) {
      for (int d = 0; d < dim; ++d) center[static_cast<std::size_t>(d)] = rng.uniform(0.2, 0.8);
      bool ok = true;
      for (const auto& other : centers) {
        double d2 = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double diff = center[static_cast<std::size_t>(d)] - other[static_cast<std::size_t>(d)];
          d2 += diff * diff;
        }
        if (d2 < 0.25 * 0.25) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
    centers.push_back(center);
  }

  Dataset ds;
  ds.num_classes = num_classes;
  ds.split_tag = Split::train;
  ds.inputs.reserve(static_cast<std::size_t>(n));
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % num_classes;
    Tensor x(std::vector<int>{dim});
    for (int d = 0; d < dim; ++d)
      x.data[d] = clip01(rng.gaussian(centers[static_cast<std::size_t>(label)][static_cast<std::size_t>(d)],
                                      static_cast<double>(spread)));
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset gen_rings(int n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("gen_rings: need n >= 2");
  Rng rng(seed);
  constexpr double kRadius[2] = {0.25, 0.40};
  constexpr double kWidth = 0.05;

  Dataset ds;
  ds.num_classes = 2;
  ds.split_tag = Split::train;
  ds.inputs.reserve(static_cast<std::size_t>(n));
  ds.labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double r = rng.uniform(kRadius[label] - kWidth, kRadius[label] + kWidth);
    const double theta = rng.uniform(0.0, 6.283185307179586476925286766559);
    Tensor x(std::vector<int>{2});
    x.data[0] = clip01(0.5 + r * std::cos(theta));
    x.data[1] = clip01(0.5 + r * std::sin(theta));
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, int limit,
                 int downsample_to) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw ParseError("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw ParseError("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_be_u32(img, "image magic");
  if (img_magic != kIdxImagesMagic)
    throw BadMagicError("idx: bad image magic 0x" + std::to_string(img_magic));
  const std::uint32_t lab_magic = read_be_u32(lab, "label magic");
  if (lab_magic != kIdxLabelsMagic)
    throw BadMagicError("idx: bad label magic 0x" + std::to_string(lab_magic));

  const std::uint32_t n_images = read_be_u32(img, "image count");
  const std::uint32_t rows = read_be_u32(img, "rows");
  const std::uint32_t cols = read_be_u32(img, "cols");
  const std::uint32_t n_labels = read_be_u32(lab, "label count");
  if (n_images != n_labels)
    throw ParseError("idx: image count " + std::to_string(n_images) + " != label count " +
                     std::to_string(n_labels));
  if (rows == 0 || cols == 0) throw ParseError("idx: zero image dimensions");

  std::uint32_t keep = n_images;
  if (limit > 0 && static_cast<std::uint32_t>(limit) < keep)
    keep = static_cast<std::uint32_t>(limit);

  if (downsample_to < 0) throw ConfigError("idx: downsample_to must be >= 0");
  if (downsample_to > 0) {
    const std::uint32_t s = static_cast<std::uint32_t>(downsample_to);
    if (rows % s != 0 || cols % s != 0)
      throw ConfigError("idx: downsample_to must divide both image dimensions");
  }

  Dataset ds;
  ds.split_tag = Split::test;
  ds.inputs.reserve(keep);
  ds.labels.reserve(keep);

  std::vector<unsigned char> pixels(static_cast<std::size_t>(rows) * cols);
  int max_label = -1;
  for (std::uint32_t i = 0; i < keep; ++i) {
    img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!img) throw TruncatedError("idx: truncated image data at sample " + std::to_string(i));
    unsigned char y = 0;
    lab.read(reinterpret_cast<char*>(&y), 1);
    if (!lab) throw TruncatedError("idx: truncated label data at sample " + std::to_string(i));

    if (downsample_to == 0) {
      Tensor x(std::vector<int>{1, static_cast<int>(rows), static_cast<int>(cols)});
      for (std::size_t p = 0; p < pixels.size(); ++p)
        x.data[static_cast<Eigen::Index>(p)] = static_cast<float>(pixels[p]) / 255.0f;
      ds.inputs.push_back(std::move(x));
    } else {
      const int s = downsample_to;
      const int bh = static_cast<int>(rows) / s;
      const int bw = static_cast<int>(cols) / s;
      Tensor x(std::vector<int>{1, s, s});
      const double inv = 1.0 / (255.0 * bh * bw);
      for (int oi = 0; oi < s; ++oi)
        for (int oj = 0; oj < s; ++oj) {
          double acc = 0.0;
          for (int u = 0; u < bh; ++u)
            for (int v = 0; v < bw; ++v)
              acc += pixels[static_cast<std::size_t>((oi * bh + u) * static_cast<int>(cols) +
                                                     oj * bw + v)];
          x.data[oi * s + oj] = static_cast<float>(acc * inv);
        }
      ds.inputs.push_back(std::move(x));
    }
    ds.labels.push_back(static_cast<int>(y));
    max_label = std::max(max_label, static_cast<int>(y));
  }
  ds.num_classes = max_label + 1;
  return ds;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw ConfigError("split: test_fraction must be in (0,1)");
  const std::size_t n = ds.size();
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  Rng rng(seed);
  shuffle(idx.data(), n, rng);

  const std::size_t n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n)));
  Dataset train, test;
  train.num_classes = test.num_classes = ds.num_classes;
  train.split_tag = Split::train;
  test.split_tag = Split::test;
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = i < n_test ? test : train;
    dst.inputs.push_back(ds.inputs[static_cast<std::size_t>(idx[i])]);
    dst.labels.push_back(ds.labels[static_cast<std::size_t>(idx[i])]);
  }
  return {std::move(train), std::move(test)};
}

EvalSet filter_correct(const Dataset& ds, const Network& model) {
  if (model.num_classes != ds.num_classes)
    throw ShapeError("filter_correct: model classes != dataset classes");
  EvalSet out;
  out.base.num_classes = ds.num_classes;
  out.base.split_tag = ds.split_tag;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (argmax(forward(model, ds.inputs[i])) == ds.labels[i]) {
      out.base.inputs.push_back(ds.inputs[i]);
      out.base.labels.push_back(ds.labels[i]);
      out.original_indices.push_back(static_cast<int>(i));
    }
  }
  out.retained_fraction =
      ds.size() == 0 ? 0.0 : static_cast<double>(out.base.size()) / static_cast<double>(ds.size());
  return out;
}

double accuracy(const Network& model, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (argmax(forward(model, ds.inputs[i])) == ds.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace advrank
