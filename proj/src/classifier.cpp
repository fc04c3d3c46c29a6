#include "cosmic/classifier.hpp"

#include <cmath>

namespace cosmic {

namespace {

MatXd logits_of(const MatXd& x, const MatXd& weight, const VecXd& bias) {
  MatXd z = x * weight;
  z.rowwise() += bias.transpose();
  return z;
}

}  // namespace

double logreg_objective(const MatXd& x, const std::vector<int>& labels, const MatXd& weight, const VecXd& bias,
                        double weight_decay, MatXd* grad_weight, VecXd* grad_bias) {
  const MatXd z = logits_of(x, weight, bias);
  const auto rows = static_cast<double>(x.rows());
  double loss = 0.0;
  MatXd g(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    const double m = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
    const double s = e.sum();
    loss += (std::log(s) + m - z(i, y)) / rows;
    g.row(i) = e / s;
    g(i, y) -= 1.0;
  }
  loss += 0.5 * weight_decay * (weight.squaredNorm() + bias.squaredNorm());
  if (grad_weight) *grad_weight = x.transpose() * g / rows + weight_decay * weight;
  if (grad_bias) *grad_bias = g.colwise().sum().transpose() / rows + weight_decay * bias;
  return loss;
}

TaskClassifier fit_task_classifier(const MatXd& x, const std::vector<int>& labels, int n_classes,
                                   const LogRegOptions& opt) {
  if (n_classes < 1) throw Error("fit_task_classifier: need at least one class");
  if (static_cast<Eigen::Index>(labels.size()) != x.rows() || x.rows() == 0)
    throw Error("fit_task_classifier: label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= n_classes) throw Error("fit_task_classifier: label out of range");
  if (opt.weight_decay < 0.0) throw Error("fit_task_classifier: negative weight decay");

  TaskClassifier clf;
  clf.weight_decay = opt.weight_decay;
  clf.weight = MatXd::Zero(x.cols(), n_classes);
  clf.bias = VecXd::Zero(n_classes);
  MatXd gw;
  VecXd gb;
  double f = logreg_objective(x, labels, clf.weight, clf.bias, opt.weight_decay, &gw, &gb);
  clf.history.push_back(f);
  double step = 1.0;
  constexpr double kArmijo = 1e-4;
  for (clf.iterations = 0; clf.iterations < opt.max_iter; ++clf.iterations) {
    const double gnorm2 = gw.squaredNorm() + gb.squaredNorm();
    if (std::sqrt(gnorm2) < opt.tol) {
      clf.converged = true;
      break;
    }
    bool accepted = false;
    MatXd w_new;
    VecXd b_new;
    double f_new = f;
    for (int halvings = 0; halvings < 60; ++halvings) {
      w_new = clf.weight - step * gw;
      b_new = clf.bias - step * gb;
      f_new = logreg_objective(x, labels, w_new, b_new, opt.weight_decay);
      if (f_new <= f - kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: already at numerical precision
    clf.weight = std::move(w_new);
    clf.bias = std::move(b_new);
    f = logreg_objective(x, labels, clf.weight, clf.bias, opt.weight_decay, &gw, &gb);
    clf.history.push_back(f);
    step *= 2.0;
  }
  if (!clf.converged && std::sqrt(gw.squaredNorm() + gb.squaredNorm()) < opt.tol) clf.converged = true;
  clf.objective = f;
  return clf;
}

MatXd predict_proba(const TaskClassifier& clf, const MatXd& x) {
  MatXd z = logits_of(x, clf.weight, clf.bias);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

int argmax_lowest(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j)
    if (row(j) > row(best)) best = static_cast<int>(j);
  return best;
}

std::vector<int> predict_labels(const TaskClassifier& clf, const MatXd& x) {
  const MatXd p = predict_proba(clf, x);
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back(argmax_lowest(p.row(i)));
  return out;
}

}  // namespace cosmic
