#pragma once

#include <Eigen/Core>
#include <array>
#include <stdexcept>
#include <string>

namespace tcf {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;

template <int N>
using Mat = Eigen::Matrix<double, N, N>;

/// Per-point outcome of the curvature pipeline.
enum class Status : unsigned char {
  Ok = 0,
  Degenerate = 1,        // eigenvalue magnitudes coincide, no unique tangent
  MaskedLowIntensity = 2,
  NonFinite = 3,
};

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidScale : Error { using Error::Error; };
struct InvalidK : Error { using Error::Error; };
struct SingularPoint : Error { using Error::Error; };
struct InvalidHessian : Error { using Error::Error; };
struct DegenerateFrame : Error { using Error::Error; };
struct IllConditionedSystem : Error { using Error::Error; };
struct InvalidGrid : Error { using Error::Error; };
struct InvalidShape : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct EmptyField : Error { using Error::Error; };
struct EmptyRender : Error { using Error::Error; };
struct OracleUnstable : Error { using Error::Error; };

}  // namespace tcf
