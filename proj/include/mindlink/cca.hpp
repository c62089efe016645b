#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "mindlink/common.hpp"

namespace mindlink {

/// Relative singular-value cutoff below which a direction is treated as
/// numerically absent.
inline constexpr double kRankTolerance = 1e-10;

/// Orthonormal basis (samples x rank) for the row space of `rows`
/// (vars x samples) after centering each row. Rank is revealed by
/// column-pivoted QR with the relative cutoff above.
inline Eigen::MatrixXd centered_row_basis(const Eigen::Ref<const Eigen::MatrixXd>& rows) {
  Eigen::MatrixXd centered = rows.transpose();  // samples x vars
  centered.rowwise() -= centered.colwise().mean();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(centered);
  const auto& r = qr.matrixR();
  const double lead = centered.cols() > 0 ? std::abs(r(0, 0)) : 0.0;
  if (!(lead > 0.0)) return Eigen::MatrixXd(centered.rows(), 0);
  Eigen::Index rank = 0;
  const Eigen::Index diag = std::min(centered.rows(), centered.cols());
  while (rank < diag && std::abs(r(rank, rank)) > kRankTolerance * lead) ++rank;
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(centered.rows(), rank);
  return q;
}

/// Largest canonical correlation given the two orthonormal bases.
inline double canonical_correlation(const Eigen::MatrixXd& qx, const Eigen::MatrixXd& qy) {
  if (qx.cols() == 0 || qy.cols() == 0) throw DegenerateInput("cca: input has no variance");
  const Eigen::MatrixXd cross = qx.transpose() * qy;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
  return std::clamp(svd.singularValues()(0), 0.0, 1.0);
}

/// Largest canonical correlation between the row sets of `x` (p x n) and
/// `y` (q x n): max over w, v of corr(w'x, v'y).
inline double cca_max_corr(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (x.cols() != y.cols()) throw InvalidArgument("cca: sample counts differ");
  if (x.rows() == 0 || y.rows() == 0) throw InvalidArgument("cca: empty variable set");
  if (x.cols() < std::max(x.rows(), y.rows()) + 2)
    throw InvalidArgument("cca: need at least max(p, q) + 2 samples");
  const auto qx = centered_row_basis(x);
  if (qx.cols() == 0) throw DegenerateInput("cca: first set has no variance");
  const auto qy = centered_row_basis(y);
  if (qy.cols() == 0) throw DegenerateInput("cca: second set has no variance");
  return canonical_correlation(qx, qy);
}

}  // namespace mindlink
