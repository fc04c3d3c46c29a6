#pragma once

#include "cosmic/encoder.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cosmic {

/// Which anchor self-similarities are removed from the positive MI term.
enum class SelfExclusion {
  SameView,       // every f_t(v) . f_t(v), t = 1..V
  FirstViewOnly,  // only f_1(v) . f_1(v)
};

/// Views of the support nodes grouped by class, optionally followed by the
/// mixed classes built from them. Node (class i, shot j) sits at i*K + j.
template <typename Scalar>
struct ClassBank {
  int n_way = 0;
  int k_shot = 0;
  std::vector<ViewPair<Scalar>> original;
  std::vector<ViewPair<Scalar>> mixed;  // empty when mix-up is off
  double tau = 0.5;
  SelfExclusion self_exclusion = SelfExclusion::SameView;

  bool has_mixed() const { return !mixed.empty(); }

  const ViewPair<Scalar>& at(bool mixed_pool, int i, int j) const {
    return (mixed_pool ? mixed : original)[static_cast<std::size_t>(i * k_shot + j)];
  }

  void validate() const {
    if (n_way < 2) throw Error("class bank: need at least two classes");
    if (k_shot < 1) throw Error("class bank: need at least one shot");
    if (!(tau > 0.0)) throw Error("class bank: temperature must be positive");
    const auto nk = static_cast<std::size_t>(n_way * k_shot);
    if (original.size() != nk) throw Error("class bank: original pool has wrong size");
    if (!mixed.empty() && mixed.size() != nk) throw Error("class bank: mixed pool has wrong size");
  }
};

inline constexpr int kNumViews = 2;

template <typename Scalar>
const Vec<Scalar>& view_of(const ViewPair<Scalar>& v, int t) {
  return t == 0 ? v.central : v.pooled;
}

/// MI(anchor, C_k): the sum of exp(f_t(anchor) . f_r(v_k^l) / tau) over views
/// t, r and shots l, minus the anchor's excluded self-similarities when the
/// target is the anchor's own class in its own pool. Evaluated literally
/// (no max shift), so only suitable for moderate dot products.
template <typename Scalar>
double mi_term(const ClassBank<Scalar>& bank, int i, int j, int k, bool target_mixed, bool anchor_mixed = false) {
  const auto& anchor = bank.at(anchor_mixed, i, j);
  double mi = 0.0;
  for (int t = 0; t < kNumViews; ++t)
    for (int l = 0; l < bank.k_shot; ++l)
      for (int r = 0; r < kNumViews; ++r)
        mi += std::exp(static_cast<double>(view_of(anchor, t).dot(view_of(bank.at(target_mixed, k, l), r))) / bank.tau);
  if (i == k && anchor_mixed == target_mixed) {
    const int views = bank.self_exclusion == SelfExclusion::SameView ? kNumViews : 1;
    for (int t = 0; t < views; ++t)
      mi -= std::exp(static_cast<double>(view_of(anchor, t).squaredNorm()) / bank.tau);
  }
  return mi;
}

template <typename Scalar>
struct ContrastiveResult {
  double loss = 0.0;
  std::vector<ViewPair<Scalar>> grad_original;
  std::vector<ViewPair<Scalar>> grad_mixed;
};

namespace detail {

// Flattened view matrix: row 2*node + t, node = pool*NK + i*K + j.
template <typename Scalar>
Mat<double> stack_views(const ClassBank<Scalar>& bank) {
  const int nodes = static_cast<int>(bank.original.size() + bank.mixed.size());
  const auto dim = bank.original.front().central.size();
  Mat<double> f(2 * nodes, dim);
  int row = 0;
  for (const auto* pool : {&bank.original, &bank.mixed})
    for (const auto& vp : *pool) {
      f.row(row++) = vp.central.template cast<double>().transpose();
      f.row(row++) = vp.pooled.template cast<double>().transpose();
    }
  return f;
}

/// Log-ratio loss of one anchor on the scaled Gram matrix; adds
/// weight * dloss/dS into `coeff` when non-null.
template <typename Scalar>
double anchor_loss(const ClassBank<Scalar>& bank, const Mat<double>& gram, int anchor_pool, int i, int j,
                   double weight, Mat<double>* coeff) {
  const int nk = bank.n_way * bank.k_shot;
  const int pools = bank.has_mixed() ? 2 : 1;
  const int a = anchor_pool * nk + i * bank.k_shot + j;
  const int excluded_views = bank.self_exclusion == SelfExclusion::SameView ? kNumViews : 1;

  struct Term {
    int u, w;
    bool positive;
  };
  std::vector<Term> terms;
  terms.reserve(static_cast<std::size_t>(pools * nk * kNumViews * kNumViews));
  for (int q = 0; q < pools; ++q)
    for (int k = 0; k < bank.n_way; ++k) {
      const bool positive = q == anchor_pool && k == i;
      for (int l = 0; l < bank.k_shot; ++l) {
        const int b = q * nk + k * bank.k_shot + l;
        for (int t = 0; t < kNumViews; ++t)
          for (int r = 0; r < kNumViews; ++r) {
            if (b == a && t == r && t < excluded_views) continue;
            terms.push_back({2 * a + t, 2 * b + r, positive});
          }
      }
    }

  // Separate shifts keep both sums representable when one side dominates.
  double m_num = -std::numeric_limits<double>::infinity(), m_den = m_num;
  for (const auto& term : terms) (term.positive ? m_num : m_den) = std::max(term.positive ? m_num : m_den, gram(term.u, term.w));
  auto shifted = [&](const Term& term) { return std::exp(gram(term.u, term.w) - (term.positive ? m_num : m_den)); };
  double num = 0.0, den = 0.0;
  for (const auto& term : terms) (term.positive ? num : den) += shifted(term);
  if (!(num > 0.0) || !(den > 0.0) || !std::isfinite(m_num) || !std::isfinite(m_den))
    throw NonFiniteError("contrastive: degenerate MI ratio");

  if (coeff) {
    for (const auto& term : terms) {
      const double e = shifted(term);
      (*coeff)(term.u, term.w) += weight * (term.positive ? -e / num : e / den);
    }
  }
  return (m_den + std::log(den)) - (m_num + std::log(num));
}

}  // namespace detail

/// -log( MI(v, C_i) / (sum of MI over the negative classes) ) for one anchor.
/// Negatives are the other original classes plus every mixed class for an
/// original anchor; every original class plus the other mixed classes for a
/// mixed anchor. Computed with a max shift, so it is stable at small tau.
template <typename Scalar>
double node_loss(const ClassBank<Scalar>& bank, int i, int j, bool anchor_mixed = false) {
  bank.validate();
  if (anchor_mixed && !bank.has_mixed()) throw Error("node_loss: mixed anchor without mixed pool");
  const Mat<double> f = detail::stack_views(bank);
  const Mat<double> gram = (f * f.transpose()) / bank.tau;
  return detail::anchor_loss(bank, gram, anchor_mixed ? 1 : 0, i, j, 1.0, nullptr);
}

/// Episode contrastive loss: the mean node loss over original anchors, plus
/// the mean over mixed anchors when the bank has a mixed pool, together with
/// the gradient w.r.t. every view vector.
template <typename Scalar>
ContrastiveResult<Scalar> l_mc(const ClassBank<Scalar>& bank) {
  bank.validate();
  const int nk = bank.n_way * bank.k_shot;
  const int pools = bank.has_mixed() ? 2 : 1;
  const Mat<double> f = detail::stack_views(bank);
  const Mat<double> gram = (f * f.transpose()) / bank.tau;
  Mat<double> coeff = Mat<double>::Zero(gram.rows(), gram.cols());

  ContrastiveResult<Scalar> out;
  const double weight = 1.0 / nk;
  for (int p = 0; p < pools; ++p)
    for (int i = 0; i < bank.n_way; ++i)
      for (int j = 0; j < bank.k_shot; ++j)
        out.loss += weight * detail::anchor_loss(bank, gram, p, i, j, weight, &coeff);

  const Mat<double> grad = ((coeff + coeff.transpose()) * f) / bank.tau;
  auto unpack = [&](int node) {
    ViewPair<Scalar> g;
    g.central = grad.row(2 * node).transpose().template cast<Scalar>();
    g.pooled = grad.row(2 * node + 1).transpose().template cast<Scalar>();
    return g;
  };
  for (int n = 0; n < nk; ++n) out.grad_original.push_back(unpack(n));
  if (bank.has_mixed())
    for (int n = 0; n < nk; ++n) out.grad_mixed.push_back(unpack(nk + n));
  return out;
}

}  // namespace cosmic
