#include "qrs/stiefel.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace qrs {

Mat stiefel_project(const Mat& v, const Mat& g) {
  Mat vg = v.adjoint() * g;
  Mat herm = (vg + vg.adjoint()) / 2.0;
  return g - v * herm;
}

Mat stiefel_retract(const Mat& v, const Mat& delta) {
  Mat a = v + delta;
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
  Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  // Fix phases so the implied R has a real positive diagonal.  For tangent
  // delta, V + delta always has full column rank, so R_ii never vanishes.
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    cxd d = r(c, c);
    double m = std::abs(d);
    cxd phase = m > 1e-300 ? d / m : cxd(1.0, 0.0);
    q.col(c) *= phase;
  }
  return q;
}

DescentResult stiefel_descent(Mat v0, const StiefelObjective& objective,
                              const DescentOptions& options) {
  DescentResult res;
  res.v = std::move(v0);
  Mat euclid;
  res.value = objective(res.v, &euclid);
  double step = options.initial_step;
  for (int it = 0; it < options.max_iterations; ++it) {
    Mat rgrad = stiefel_project(res.v, euclid);
    res.grad_norm = rgrad.norm();
    res.iterations = it;
    if (res.grad_norm < options.grad_tol) return res;

    const double slope = -res.grad_norm * res.grad_norm;  // df along -rgrad
    bool accepted = false;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      Mat cand = stiefel_retract(res.v, -step * rgrad);
      double cand_val = objective(cand, nullptr);
      if (cand_val <= res.value + options.armijo_slope * step * slope) {
        res.v = std::move(cand);
        res.value = objective(res.v, &euclid);
        accepted = true;
        break;
      }
      step *= options.backtrack;
    }
    if (!accepted) {
      res.iterations = it + 1;
      return res;  // no productive step at the smallest trial size
    }
    step = std::min(2.0 * step, options.initial_step);
  }
  Mat rgrad = stiefel_project(res.v, euclid);
  res.grad_norm = rgrad.norm();
  res.iterations = options.max_iterations;
  return res;
}

double gradient_check(const Mat& v, const StiefelObjective& objective, Rng& rng,
                      int directions, double fd_step) {
  Mat euclid;
  objective(v, &euclid);
  double worst = 0.0;
  for (int d = 0; d < directions; ++d) {
    Mat ambient(v.rows(), v.cols());
    for (Eigen::Index i = 0; i < ambient.rows(); ++i)
      for (Eigen::Index j = 0; j < ambient.cols(); ++j)
        ambient(i, j) = rng.complex_gaussian();
    Mat dir = stiefel_project(v, ambient);
    double n = dir.norm();
    if (n < 1e-12) continue;
    dir /= n;
    const double analytic = (euclid.adjoint() * dir).trace().real();
    const double fplus = objective(v + fd_step * dir, nullptr);
    const double fminus = objective(v - fd_step * dir, nullptr);
    const double fd = (fplus - fminus) / (2.0 * fd_step);
    const double err = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace qrs
