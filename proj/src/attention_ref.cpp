#include "transprompt/attention_ref.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "transprompt/errors.hpp"

namespace transprompt {

void AttentionConfig::validate() const {
  if (!(scale_s > 0.0)) throw_contract("attention scale s must be positive");
  if (!(convergence_tol > 0.0)) throw_contract("convergence tolerance must be positive");
  if (layers_L < 1) throw_contract("layer count must be >= 1");
  if (max_layers < 1) throw_contract("max_layers must be >= 1");
}

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw Error(ErrorKind::Numeric, fmt::format("non-finite {}", what));
}

Eigen::RowVectorXd unit_row(const FeatureVector& f, const char* who, std::size_t index) {
  const double n = f.norm();
  if (n == 0.0) {
    throw Error(ErrorKind::Degenerate,
                fmt::format("{} {} has zero norm and cannot be unit-normalised", who, index));
  }
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(f.dim()));
  for (std::size_t j = 0; j < f.dim(); ++j) row(static_cast<Eigen::Index>(j)) = f[j] / n;
  return row;
}

}  // namespace

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double w = std::exp(logits(r, c) - mx);
      out(r, c) = w;
      sum += w;
    }
    out.row(r) /= sum;
  }
  return out;
}

Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V, double s) {
  if (!(s > 0.0)) throw_contract(fmt::format("attention scale must be positive, got {}", s));
  if (Q.cols() != K.cols()) {
    throw_contract(fmt::format("query width {} differs from key width {}", Q.cols(), K.cols()));
  }
  if (K.rows() != V.rows()) {
    throw_contract(fmt::format("{} keys but {} values", K.rows(), V.rows()));
  }
  if (K.rows() == 0) throw_contract("attention needs at least one key");
  const Matrix logits = (Q * K.transpose()) / s;
  require_finite(logits, "attention logits");
  const Matrix out = row_softmax(logits) * V;
  require_finite(out, "attention output");
  return out;
}

std::vector<double> nn_attention_classify(const ReferenceSet& ref, const FeatureVector& f_test,
                                          double s) {
  if (f_test.dim() != ref.dim()) throw_contract("test feature dimension differs from references");
  const auto m = static_cast<Eigen::Index>(ref.size());
  const auto C = static_cast<Eigen::Index>(ref.class_count());
  Matrix K(m, static_cast<Eigen::Index>(ref.dim()));
  Matrix V = Matrix::Zero(m, C);
  for (Eigen::Index i = 0; i < m; ++i) {
    K.row(i) = unit_row(ref.feature(static_cast<std::size_t>(i)), "reference", i);
    V(i, static_cast<Eigen::Index>(ref.label(static_cast<std::size_t>(i)).index)) = 1.0;
  }
  const Matrix Q = unit_row(f_test, "test sample", 0);
  const Matrix out = attention(Q, K, V, s);
  return {out.data(), out.data() + out.size()};
}

FeatureLabelMatrix::FeatureLabelMatrix(const ReferenceSet& ref, const FeatureVector& f_test)
    : feature_dim_(ref.dim()), class_count_(ref.class_count()) {
  if (f_test.dim() != ref.dim()) throw_contract("test feature dimension differs from references");
  const auto m = static_cast<Eigen::Index>(ref.size());
  const auto d = static_cast<Eigen::Index>(feature_dim_);
  rows_ = Matrix::Zero(m + 1, d + static_cast<Eigen::Index>(class_count_));
  for (Eigen::Index i = 0; i < m; ++i) {
    rows_.row(i).head(d) = unit_row(ref.feature(static_cast<std::size_t>(i)), "reference", i);
    rows_(i, d + static_cast<Eigen::Index>(ref.label(static_cast<std::size_t>(i)).index)) = 1.0;
  }
  rows_.row(m).head(d) = unit_row(f_test, "test sample", 0);
}

std::vector<double> self_attention_classify(const FeatureLabelMatrix& M, double s,
                                            Setup2Mode mode) {
  const Matrix& X = M.rows();
  const auto d = static_cast<Eigen::Index>(M.feature_dim());
  const auto C = static_cast<Eigen::Index>(M.class_count());
  const Eigen::Index test = X.rows() - 1;

  Matrix out;
  if (mode == Setup2Mode::Literal) {
    out = attention(X, X, X, s);
  } else {
    if (!(s > 0.0)) throw_contract("attention scale must be positive");
    const Matrix F = X.leftCols(d);
    Matrix logits = (F * F.transpose()) / s;
    require_finite(logits, "attention logits");
    logits(test, test) = -std::numeric_limits<double>::infinity();
    out = row_softmax(logits) * X;
    require_finite(out, "attention output");
  }
  const Eigen::RowVectorXd labels = out.row(test).tail(C);
  return {labels.data(), labels.data() + labels.size()};
}

IterationResult iterate_self_attention(const Matrix& M, const AttentionConfig& cfg) {
  cfg.validate();
  IterationResult result;
  result.layers.push_back(M);
  for (std::size_t layer = 1; layer <= cfg.max_layers; ++layer) {
    const Matrix& prev = result.layers.back();
    Matrix next;
    try {
      next = attention(prev, prev, prev, cfg.scale_s);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      throw Error(ErrorKind::Numeric, fmt::format("layer {}: {}", layer, e.what()));
    }
    const double step = (next - prev).cwiseAbs().maxCoeff();
    result.layers.push_back(std::move(next));
    result.step_norms.push_back(step);
    if (step < cfg.convergence_tol) {
      result.converged_at = layer;
      break;
    }
  }
  return result;
}

IterationResult iterate_self_attention(const FeatureLabelMatrix& M, const AttentionConfig& cfg) {
  return iterate_self_attention(M.rows(), cfg);
}

Matrix stacked_self_attention(const Matrix& M, const AttentionConfig& cfg) {
  cfg.validate();
  Matrix X = M;
  for (std::size_t layer = 0; layer < cfg.layers_L; ++layer) X = attention(X, X, X, cfg.scale_s);
  return X;
}

}  // namespace transprompt
