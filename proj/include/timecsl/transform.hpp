#ifndef TIMECSL_TRANSFORM_HPP
#define TIMECSL_TRANSFORM_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "timecsl/core.hpp"

namespace timecsl {

/// Best window score and the smallest window offset attaining it.
template <typename Scalar>
struct FeatureValue {
  Scalar value{};
  Index window_start = 0;
};

namespace detail {

template <typename Scalar>
using ConstVecMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

template <typename Scalar>
using PlainMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

// Column-major storage lets a D x L window starting at step j be read as the
// contiguous run [j*D, (j+L)*D). Plain column-major matrices pass through
// without a copy; everything else is evaluated once.
template <typename Derived>
decltype(auto) as_column_major(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if constexpr (std::is_base_of_v<Eigen::PlainObjectBase<Derived>, Derived> && !Derived::IsRowMajor) {
    return static_cast<const Derived&>(m.derived());
  } else {
    return PlainMatrix<Scalar>(m);
  }
}

template <typename Scalar>
bool all_equal(const Scalar* p, Index n) {
  for (Index i = 1; i < n; ++i)
    if (p[i] != p[0]) return false;
  return true;
}

inline void check_window(Index x_channels, Index x_length, Index s_channels, Index s_length) {
  if (x_channels != s_channels)
    throw ContractError("channel mismatch: series has " + std::to_string(x_channels) + ", shapelet has " +
                        std::to_string(s_channels));
  if (x_length < s_length)
    throw LengthError("series length " + std::to_string(x_length) + " is shorter than shapelet length " +
                      std::to_string(s_length));
}

template <typename Scalar>
Scalar euclidean_window(const Scalar* w, const Scalar* s, Index n) {
  return std::sqrt((ConstVecMap<Scalar>(w, n) - ConstVecMap<Scalar>(s, n)).squaredNorm() / Scalar(n));
}

template <typename Scalar>
Scalar cosine_window(const Scalar* w, const Scalar* s, Index n) {
  const ConstVecMap<Scalar> wv(w, n), sv(s, n);
  const Scalar wn = wv.norm(), sn = sv.norm();
  if (wn == Scalar(0) || sn == Scalar(0)) return Scalar(0);
  return wv.dot(sv) / (wn * sn);
}

template <typename Scalar>
Scalar pearson_window(const Scalar* w, const Scalar* s, Index n) {
  if (all_equal(w, n) || all_equal(s, n)) return Scalar(0);
  const ConstVecMap<Scalar> wv(w, n), sv(s, n);
  const auto wc = (wv.array() - wv.mean()).matrix();
  const auto sc = (sv.array() - sv.mean()).matrix();
  return wc.dot(sc) / (wc.norm() * sc.norm());
}

template <typename Scalar>
FeatureValue<Scalar> euclidean_min_raw(const Scalar* x, Index channels, Index length, const Scalar* s,
                                       Index s_length) {
  const Index n = channels * s_length;
  const ConstVecMap<Scalar> sv(s, n);
  Scalar best = std::numeric_limits<Scalar>::infinity();
  Index best_j = 0;
  for (Index j = 0; j + s_length <= length; ++j) {
    const Scalar d = (ConstVecMap<Scalar>(x + j * channels, n) - sv).squaredNorm();
    if (d < best) {
      best = d;
      best_j = j;
    }
  }
  return {std::sqrt(best / Scalar(n)), best_j};
}

template <typename Scalar>
FeatureValue<Scalar> cosine_max_raw(const Scalar* x, Index channels, Index length, const Scalar* s, Index s_length) {
  const Index n = channels * s_length;
  const ConstVecMap<Scalar> sv(s, n);
  const Scalar sn = sv.norm();
  if (sn == Scalar(0)) return {Scalar(0), 0};
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  Index best_j = 0;
  for (Index j = 0; j + s_length <= length; ++j) {
    const ConstVecMap<Scalar> wv(x + j * channels, n);
    const Scalar wn = wv.norm();
    const Scalar c = wn == Scalar(0) ? Scalar(0) : wv.dot(sv) / (wn * sn);
    if (c > best) {
      best = c;
      best_j = j;
    }
  }
  return {best, best_j};
}

template <typename Scalar>
FeatureValue<Scalar> xcorr_max_raw(const Scalar* x, Index channels, Index length, const Scalar* s, Index s_length) {
  const Index n = channels * s_length;
  if (n < 2) throw ContractError("cross-correlation needs at least two values per shapelet");
  if (all_equal(s, n)) return {Scalar(0), 0};
  const ConstVecMap<Scalar> sv(s, n);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sc = sv.array() - sv.mean();
  const Scalar sn = sc.norm();
  Scalar best = -std::numeric_limits<Scalar>::infinity();
  Index best_j = 0;
  for (Index j = 0; j + s_length <= length; ++j) {
    const Scalar* w = x + j * channels;
    Scalar r(0);
    if (!all_equal(w, n)) {
      const ConstVecMap<Scalar> wv(w, n);
      const auto wc = (wv.array() - wv.mean()).matrix();
      r = wc.dot(sc) / (wc.norm() * sn);
    }
    if (r > best) {
      best = r;
      best_j = j;
    }
  }
  return {best, best_j};
}

template <typename Scalar>
FeatureValue<Scalar> feature_raw(Metric metric, const Scalar* x, Index channels, Index length, const Scalar* s,
                                 Index s_length) {
  switch (metric) {
    case Metric::EuclideanMin: return euclidean_min_raw(x, channels, length, s, s_length);
    case Metric::CosineMax: return cosine_max_raw(x, channels, length, s, s_length);
    case Metric::XcorrMax: return xcorr_max_raw(x, channels, length, s, s_length);
  }
  throw ContractError("unknown metric");
}

}  // namespace detail

/// min_j sqrt(||window_j - s||^2 / (D*L)); x is D x T, s is D x L.
template <typename DerivedX, typename DerivedS>
FeatureValue<typename DerivedX::Scalar> feature_euclidean_min(const Eigen::MatrixBase<DerivedX>& x,
                                                              const Eigen::MatrixBase<DerivedS>& s) {
  detail::check_window(x.rows(), x.cols(), s.rows(), s.cols());
  decltype(auto) xe = detail::as_column_major(x);
  decltype(auto) se = detail::as_column_major(s);
  return detail::euclidean_min_raw(xe.data(), xe.rows(), xe.cols(), se.data(), se.cols());
}

/// max_j cos(window_j, s); cos is 0 when either side has zero norm.
template <typename DerivedX, typename DerivedS>
FeatureValue<typename DerivedX::Scalar> feature_cosine_max(const Eigen::MatrixBase<DerivedX>& x,
                                                           const Eigen::MatrixBase<DerivedS>& s) {
  detail::check_window(x.rows(), x.cols(), s.rows(), s.cols());
  decltype(auto) xe = detail::as_column_major(x);
  decltype(auto) se = detail::as_column_major(s);
  return detail::cosine_max_raw(xe.data(), xe.rows(), xe.cols(), se.data(), se.cols());
}

/// max_j Pearson(window_j, s); correlation is 0 when either side is constant.
template <typename DerivedX, typename DerivedS>
FeatureValue<typename DerivedX::Scalar> feature_xcorr_max(const Eigen::MatrixBase<DerivedX>& x,
                                                          const Eigen::MatrixBase<DerivedS>& s) {
  detail::check_window(x.rows(), x.cols(), s.rows(), s.cols());
  decltype(auto) xe = detail::as_column_major(x);
  decltype(auto) se = detail::as_column_major(s);
  return detail::xcorr_max_raw(xe.data(), xe.rows(), xe.cols(), se.data(), se.cols());
}

template <typename DerivedX, typename DerivedS>
FeatureValue<typename DerivedX::Scalar> feature(Metric metric, const Eigen::MatrixBase<DerivedX>& x,
                                                const Eigen::MatrixBase<DerivedS>& s) {
  switch (metric) {
    case Metric::EuclideanMin: return feature_euclidean_min(x, s);
    case Metric::CosineMax: return feature_cosine_max(x, s);
    case Metric::XcorrMax: return feature_xcorr_max(x, s);
  }
  throw ContractError("unknown metric");
}

inline FeatureValue<double> feature_euclidean_min(const TimeSeries& x, const Shapelet& s) {
  return feature_euclidean_min(x.values(), s.values);
}
inline FeatureValue<double> feature_cosine_max(const TimeSeries& x, const Shapelet& s) {
  return feature_cosine_max(x.values(), s.values);
}
inline FeatureValue<double> feature_xcorr_max(const TimeSeries& x, const Shapelet& s) {
  return feature_xcorr_max(x.values(), s.values);
}

/// Feature vector plus the winning window of every coordinate; the window
/// indices are what backpropagation routes gradients through.
struct Encoding {
  Eigen::VectorXd z;
  std::vector<Index> windows;
};

Encoding encode(const ShapeletTransformer& f, const Eigen::MatrixXd& x);

Representation transform(const TimeSeries& x, const ShapeletTransformer& f);

/// N x repr_dim, row i = transform(ds[i]).
Eigen::MatrixXd transform_dataset(const Dataset& ds, const ShapeletTransformer& f);

MatchResult match(const TimeSeries& x, const Shapelet& s, Metric metric);
MatchResult match(const TimeSeries& x, const ShapeletTransformer& f, Index shapelet_id);

/// Columns `ids` of `reprs`, in the order given. Throws ContractError on ids
/// outside [0, cols).
Eigen::MatrixXd select_columns(const Eigen::MatrixXd& reprs, const std::vector<Index>& ids);

}  // namespace timecsl

#endif  // TIMECSL_TRANSFORM_HPP
