// Test-side oracles, deliberately independent of the library's math paths:
// a naive double-precision network evaluator for finite-difference gradient
// checks, simple reference classifiers, rank statistics, and an IDX writer
// for fixtures.
#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "advrank/net.hpp"

namespace oracle {

// Double-precision copy of a network, evaluated with plain loops.
struct NaiveNet {
  struct NaiveLayer {
    advrank::LayerKind kind;
    std::vector<std::uint32_t> hyper;
    std::vector<std::vector<double>> params;
  };
  std::vector<NaiveLayer> layers;
  int num_classes = 0;
};

inline NaiveNet to_naive(const advrank::Network& net) {
  NaiveNet n;
  n.num_classes = net.num_classes;
  for (const auto& l : net.layers) {
    NaiveNet::NaiveLayer nl;
    nl.kind = l.kind;
    nl.hyper = l.hyper;
    for (const auto& p : l.params) {
      std::vector<double> v(static_cast<std::size_t>(p.size()));
      for (Eigen::Index i = 0; i < p.size(); ++i) v[static_cast<std::size_t>(i)] = p.data[i];
      nl.params.push_back(std::move(v));
    }
    n.layers.push_back(std::move(nl));
  }
  return n;
}

inline std::vector<double> naive_forward(const NaiveNet& net, std::vector<double> x) {
  for (const auto& l : net.layers) {
    switch (l.kind) {
      case advrank::LayerKind::dense: {
        const int din = static_cast<int>(l.hyper[0]);
        const int dout = static_cast<int>(l.hyper[1]);
        std::vector<double> y(static_cast<std::size_t>(dout));
        for (int o = 0; o < dout; ++o) {
          double acc = l.params[1][static_cast<std::size_t>(o)];
          for (int i = 0; i < din; ++i)
            acc += l.params[0][static_cast<std::size_t>(o * din + i)] *
                   x[static_cast<std::size_t>(i)];
          y[static_cast<std::size_t>(o)] = acc;
        }
        x = std::move(y);
        break;
      }
      case advrank::LayerKind::conv2d: {
        const int c = static_cast<int>(l.hyper[0]);
        const int h = static_cast<int>(l.hyper[1]);
        const int w = static_cast<int>(l.hyper[2]);
        const int oc = static_cast<int>(l.hyper[3]);
        const int k = static_cast<int>(l.hyper[4]);
        const int s = static_cast<int>(l.hyper[5]);
        const int oh = (h - k) / s + 1;
        const int ow = (w - k) / s + 1;
        std::vector<double> y(static_cast<std::size_t>(oc * oh * ow));
        for (int o = 0; o < oc; ++o)
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
              double acc = l.params[1][static_cast<std::size_t>(o)];
              for (int ci = 0; ci < c; ++ci)
                for (int u = 0; u < k; ++u)
                  for (int v = 0; v < k; ++v)
                    acc += l.params[0][static_cast<std::size_t>(((o * c + ci) * k + u) * k + v)] *
                           x[static_cast<std::size_t>((ci * h + i * s + u) * w + j * s + v)];
              y[static_cast<std::size_t>((o * oh + i) * ow + j)] = acc;
            }
        x = std::move(y);
        break;
      }
      case advrank::LayerKind::relu:
        for (auto& v : x) v = v > 0.0 ? v : 0.0;
        break;
      case advrank::LayerKind::flatten: break;
      case advrank::LayerKind::avgpool: {
        const int c = static_cast<int>(l.hyper[0]);
        const int h = static_cast<int>(l.hyper[1]);
        const int w = static_cast<int>(l.hyper[2]);
        const int win = static_cast<int>(l.hyper[3]);
        const int oh = h / win, ow = w / win;
        std::vector<double> y(static_cast<std::size_t>(c * oh * ow));
        for (int ci = 0; ci < c; ++ci)
          for (int i = 0; i < oh; ++i)
            for (int j = 0; j < ow; ++j) {
              double acc = 0.0;
              for (int u = 0; u < win; ++u)
                for (int v = 0; v < win; ++v)
                  acc += x[static_cast<std::size_t>((ci * h + i * win + u) * w + j * win + v)];
              y[static_cast<std::size_t>((ci * oh + i) * ow + j)] =
                  acc / (static_cast<double>(win) * win);
            }
        x = std::move(y);
        break;
      }
    }
  }
  return x;
}

inline double naive_loss(const NaiveNet& net, const std::vector<double>& x, int label) {
  const std::vector<double> z = naive_forward(net, x);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - zmax);
  return std::log(sum) + zmax - z[static_cast<std::size_t>(label)];
}

inline std::vector<double> fd_grad_input(const NaiveNet& net, const std::vector<double>& x,
                                         int label, double h) {
  std::vector<double> g(x.size());
  std::vector<double> xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double up = naive_loss(net, xp, label);
    xp[i] = x[i] - h;
    const double dn = naive_loss(net, xp, label);
    xp[i] = x[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double fd_grad_param(NaiveNet& net, const std::vector<double>& x, int label,
                            std::size_t layer, std::size_t param, std::size_t index, double h) {
  double& w = net.layers[layer].params[param][index];
  const double saved = w;
  w = saved + h;
  const double up = naive_loss(net, x, label);
  w = saved - h;
  const double dn = naive_loss(net, x, label);
  w = saved;
  return (up - dn) / (2.0 * h);
}

// Relative check with an absolute floor, per the gradient-check tolerance.
inline bool grad_close(double analytic, double numeric, double rel = 1e-3, double floor = 1e-6) {
  if (std::fabs(analytic) < floor) return std::fabs(analytic - numeric) <= floor;
  return std::fabs(analytic - numeric) <= rel * std::fabs(analytic);
}

// 1-nearest-neighbour prediction by squared L2 distance.
inline int nn_predict(const std::vector<std::vector<float>>& train_x,
                      const std::vector<int>& train_y, const std::vector<float>& x) {
  int best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < train_x.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double diff = static_cast<double>(train_x[i][j]) - static_cast<double>(x[j]);
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = train_y[i];
    }
  }
  return best;
}

// Multinomial logistic regression fitted with plain gradient descent in
// double; an independent linear baseline.
struct Logistic {
  std::vector<double> W;  // [classes][dim] row-major
  std::vector<double> b;
  int classes = 0, dim = 0;

  void fit(const std::vector<std::vector<float>>& xs, const std::vector<int>& ys, int n_classes,
           int iters = 400, double lr = 0.5) {
    classes = n_classes;
    dim = static_cast<int>(xs[0].size());
    W.assign(static_cast<std::size_t>(classes * dim), 0.0);
    b.assign(static_cast<std::size_t>(classes), 0.0);
    std::vector<double> p(static_cast<std::size_t>(classes));
    std::vector<double> gW(W.size()), gb(b.size());
    for (int it = 0; it < iters; ++it) {
      std::fill(gW.begin(), gW.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t n = 0; n < xs.size(); ++n) {
        probs(xs[n], p);
        for (int c = 0; c < classes; ++c) {
          const double err = p[static_cast<std::size_t>(c)] - (c == ys[n] ? 1.0 : 0.0);
          gb[static_cast<std::size_t>(c)] += err;
          for (int d = 0; d < dim; ++d)
            gW[static_cast<std::size_t>(c * dim + d)] += err * xs[n][static_cast<std::size_t>(d)];
        }
      }
      const double scale = lr / static_cast<double>(xs.size());
      for (std::size_t i = 0; i < W.size(); ++i) W[i] -= scale * gW[i];
      for (std::size_t i = 0; i < b.size(); ++i) b[i] -= scale * gb[i];
    }
  }

  void probs(const std::vector<float>& x, std::vector<double>& out) const {
    double zmax = -1e300;
    for (int c = 0; c < classes; ++c) {
      double z = b[static_cast<std::size_t>(c)];
      for (int d = 0; d < dim; ++d)
        z += W[static_cast<std::size_t>(c * dim + d)] * x[static_cast<std::size_t>(d)];
      out[static_cast<std::size_t>(c)] = z;
      zmax = std::max(zmax, z);
    }
    double sum = 0.0;
    for (auto& v : out) sum += (v = std::exp(v - zmax));
    for (auto& v : out) v /= sum;
  }

  int predict(const std::vector<float>& x) const {
    std::vector<double> p(static_cast<std::size_t>(classes));
    probs(x, p);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  double accuracy(const std::vector<std::vector<float>>& xs, const std::vector<int>& ys) const {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (predict(xs[i]) == ys[i]) ++ok;
    return static_cast<double>(ok) / static_cast<double>(xs.size());
  }
};

inline std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::vector<double> ra = midranks(a), rb = midranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

inline void write_be_u32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>(v & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// IDX fixture writer (images + labels files).
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      const std::vector<std::vector<unsigned char>>& images, int rows, int cols,
                      const std::vector<unsigned char>& labels) {
  std::ofstream img(images_path, std::ios::binary | std::ios::trunc);
  write_be_u32(img, 0x00000803u);
  write_be_u32(img, static_cast<std::uint32_t>(images.size()));
  write_be_u32(img, static_cast<std::uint32_t>(rows));
  write_be_u32(img, static_cast<std::uint32_t>(cols));
  for (const auto& image : images)
    img.write(reinterpret_cast<const char*>(image.data()),
              static_cast<std::streamsize>(image.size()));
  std::ofstream lab(labels_path, std::ios::binary | std::ios::trunc);
  write_be_u32(lab, 0x00000801u);
  write_be_u32(lab, static_cast<std::uint32_t>(labels.size()));
  lab.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
}

}  // namespace oracle
