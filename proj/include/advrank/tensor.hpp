#pragma once
#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "advrank/errors.hpp"

namespace advrank {

inline std::int64_t numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

// Dense n-d array, row-major flat storage. Carrier for inputs, activations,
// gradients and perturbations.
template <typename Scalar>
struct TensorT {
  std::vector<int> shape;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> s, Scalar fill = Scalar(0)) : shape(std::move(s)) {
    for (int d : shape)
      if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + shape_str(shape));
    data.setConstant(numel(shape), fill);
  }
  TensorT(std::vector<int> s, std::initializer_list<Scalar> values) : shape(std::move(s)) {
    if (static_cast<std::int64_t>(values.size()) != numel(shape))
      throw ShapeError("value count does not match shape " + shape_str(shape));
    data.resize(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (Scalar v : values) data[i++] = v;
  }

  Eigen::Index size() const { return data.size(); }

  bool same_shape(const TensorT& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (Eigen::Index i = 0; i < data.size(); ++i)
      if (!std::isfinite(static_cast<double>(data[i]))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

template <typename Scalar>
void check_same_shape(const TensorT<Scalar>& a, const TensorT<Scalar>& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
}

// Index of the largest element; ties go to the lowest index. This is the one
// tie-break rule used for every argmax in the project.
template <typename Scalar>
int argmax(const TensorT<Scalar>& t) {
  if (t.size() == 0) throw DomainError("argmax of empty tensor");
  int best = 0;
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (t.data[i] > t.data[best]) best = static_cast<int>(i);
  return best;
}

// Numerically stable softmax of a 1-d tensor. Max subtraction keeps inputs of
// magnitude up to ~1e4 from overflowing; the normalizing sum accumulates in
// double while storage stays in Scalar.
template <typename Scalar>
TensorT<Scalar> softmax(const TensorT<Scalar>& logits) {
  if (logits.size() == 0) throw DomainError("softmax of empty logits");
  if (logits.shape.size() != 1) throw ShapeError("softmax expects a 1-d tensor");
  if (!logits.all_finite()) throw DomainError("softmax of non-finite logits");

  const double zmax = static_cast<double>(logits.data.maxCoeff());
  std::vector<double> e(static_cast<std::size_t>(logits.size()));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    e[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(logits.data[i]) - zmax);
    sum += e[static_cast<std::size_t>(i)];
  }
  TensorT<Scalar> out(logits.shape);
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    out.data[i] = static_cast<Scalar>(e[static_cast<std::size_t>(i)] / sum);
  return out;
}

// Cross-entropy -log softmax(logits)[label], computed via log-sum-exp in
// double so tiny losses (confident correct predictions) keep precision.
template <typename Scalar>
double cross_entropy(const TensorT<Scalar>& logits, int label) {
  if (logits.size() == 0) throw DomainError("cross_entropy of empty logits");
  if (label < 0 || label >= static_cast<int>(logits.size()))
    throw DomainError("cross_entropy label " + std::to_string(label) + " out of range");
  const double zmax = static_cast<double>(logits.data.maxCoeff());
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i)
    sum += std::exp(static_cast<double>(logits.data[i]) - zmax);
  return std::log(sum) + zmax - static_cast<double>(logits.data[label]);
}

// sign with sign(0) = 0; used by every gradient-sign update so flat loss
// regions receive no perturbation.
inline float sign0(float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); }

}  // namespace advrank
