#pragma once

#include <functional>

#include "qrs/common.hpp"
#include "qrs/rng.hpp"

namespace qrs {

// Objective on the complex Stiefel manifold St(d, k) = { V : V^dag V = I_k },
// V stored as a d x k matrix with d >= k.  The callback returns f(V) and, when
// grad is non-null, writes the Euclidean gradient G with the convention
// df(Delta) = Re tr(G^dag Delta).
using StiefelObjective = std::function<double(const Mat& v, Mat* grad)>;

// Tangent-space projection at V: G - V herm(V^dag G).
Mat stiefel_project(const Mat& v, const Mat& g);

// QR retraction of V + delta back onto the manifold, with the R-diagonal made
// real positive so the retraction is deterministic and smooth at delta = 0.
Mat stiefel_retract(const Mat& v, const Mat& delta);

struct DescentOptions {
  int max_iterations = 150;
  double grad_tol = 1e-8;        // stop when Riemannian gradient norm falls below
  double initial_step = 1.0;
  double armijo_slope = 1e-4;    // sufficient-decrease coefficient
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct DescentResult {
  Mat v;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

// Riemannian gradient descent with Armijo backtracking.  The step size is
// adaptive: each iteration starts from twice the previously accepted step
// (capped at initial_step).
DescentResult stiefel_descent(Mat v0, const StiefelObjective& objective,
                              const DescentOptions& options);

// Compares the analytic gradient of `objective` at the Stiefel point v
// against central finite differences (step fd_step) along `directions`
// random tangent directions.  Returns the maximum relative error, where the
// error of each direction is |analytic - fd| / max(1, |fd|).
double gradient_check(const Mat& v, const StiefelObjective& objective, Rng& rng,
                      int directions = 20, double fd_step = 1e-5);

}  // namespace qrs
