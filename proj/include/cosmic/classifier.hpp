#pragma once

#include "cosmic/types.hpp"

#include <vector>

namespace cosmic {

struct LogRegOptions {
  double weight_decay = 1.0;  // coefficient on ||phi||^2 / 2, bias included
  int max_iter = 1000;
  double tol = 1e-6;  // gradient-norm stopping threshold
};

/// Per-task multinomial logistic regression on frozen embeddings.
struct TaskClassifier {
  MatXd weight;  // dim x n_classes
  VecXd bias;    // n_classes
  double weight_decay = 1.0;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  std::vector<double> history;  // objective after every accepted step, starting at the initial point

  int n_classes() const { return static_cast<int>(bias.size()); }
};

/// Mean cross-entropy plus weight_decay * ||phi||^2 / 2 at (weight, bias);
/// fills the gradients when the pointers are non-null.
double logreg_objective(const MatXd& x, const std::vector<int>& labels, const MatXd& weight, const VecXd& bias,
                        double weight_decay, MatXd* grad_weight = nullptr, VecXd* grad_bias = nullptr);

/// Full-batch gradient descent from zero with Armijo backtracking. Stops when
/// the gradient norm drops below tol; otherwise returns the last iterate
/// with converged = false.
TaskClassifier fit_task_classifier(const MatXd& x, const std::vector<int>& labels, int n_classes,
                                   const LogRegOptions& opt = {});

MatXd predict_proba(const TaskClassifier& clf, const MatXd& x);

/// Row-wise argmax of the class probabilities, ties to the lowest index.
std::vector<int> predict_labels(const TaskClassifier& clf, const MatXd& x);

/// Argmax with ties broken toward the lowest index.
int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row);

}  // namespace cosmic
