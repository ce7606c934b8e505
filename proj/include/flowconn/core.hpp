#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowconn {

/// Ambient dimensions are small by construction (spheres up to S^7, surfaces
/// in R^3).  Capping the Eigen types at 8 keeps every vector and matrix on
/// the stack, which matters in the path-simulation inner loops.
inline constexpr int kMaxAmbientDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxAmbientDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor,
                          kMaxAmbientDim, kMaxAmbientDim>;

/// A point of the ambient Euclidean space, length = ambient dimension.
using AmbientPoint = Vec;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point handed to an on-manifold operation lies farther from the manifold
/// than the model's membership tolerance.
class PointOffManifoldError : public Error {
 public:
  using Error::Error;
};

/// Retraction was asked to recover a point outside its capture radius (or at
/// a point where the retraction is undefined, e.g. the center of a sphere).
class CaptureRadiusError : public Error {
 public:
  using Error::Error;
};

/// Bad user-facing configuration: unknown keys, malformed values, violated
/// preconditions on sizes and step counts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dense rank-3 tensor with all three indices running over the ambient
/// dimension.  Index conventions used throughout:
///   projection derivative  d(a,b,l) = dP^{ab}/dx_l
///   shape tensor           s(i,j,l) = S^i_{jl}
///   connection             g(i,j,k) = Gamma^i_{jk}
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), v_(static_cast<size_t>(n) * n * n, 0.0) {}

  int dim() const { return n_; }

  double& operator()(int i, int j, int k) {
    return v_[(static_cast<size_t>(i) * n_ + j) * n_ + k];
  }
  double operator()(int i, int j, int k) const {
    return v_[(static_cast<size_t>(i) * n_ + j) * n_ + k];
  }

  const std::vector<double>& data() const { return v_; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

/// Christoffel symbols Gamma^i_{jk} at a point; antisymmetric in (i, j) by
/// construction (Gamma = S - S*).
using ChristoffelTensor = Tensor3;

}  // namespace flowconn
