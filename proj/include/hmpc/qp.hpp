#pragma once

#include <Eigen/Dense>

namespace hmpc {

// minimize 1/2 z'Hz + f'z  subject to  A z <= b,  E z = e.
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd f;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
};

struct QpSettings {
  double tol = 1e-9;
  int max_iter = 200;
};

enum class QpStatus { solved, infeasible, max_iter, nan };

struct QpResult {
  Eigen::VectorXd z;
  Eigen::VectorXd lam;  // inequality multipliers
  Eigen::VectorXd nu;   // equality multipliers
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double mu = 0.0;
};

// Dense primal-dual interior point (Mehrotra predictor-corrector).
QpResult solve_qp(const QpProblem& qp, const QpSettings& s = {});

const char* to_string(QpStatus s);

}  // namespace hmpc
