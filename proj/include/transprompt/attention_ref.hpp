#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "transprompt/core_model.hpp"

// Reference model of transductive inference by scaled dot-product attention:
//
//   Attention(Q, K, V) = softmax(Q K^T / s) V
//
// With unit-length keys/queries and one-hot values, a single attention call is
// a soft cosine nearest-neighbour vote that hardens into 1-NN as s -> 0. The
// self-attention variant runs over [feature | label] rows with the test row's
// label block zeroed; stacking it repeatedly behaves like iterative clustering.

namespace transprompt {

using Matrix = Eigen::MatrixXd;

struct AttentionConfig {
  double scale_s = 1e-6;
  std::size_t layers_L = 1;
  double convergence_tol = 1e-8;
  std::size_t max_layers = 256;

  void validate() const;
};

/// Row-wise softmax with max subtraction.
Matrix row_softmax(const Matrix& logits);

/// softmax(Q K^T / s) V. Throws ErrorKind::Contract on shape mismatch or s <= 0
/// and ErrorKind::Numeric on a non-finite intermediate.
Matrix attention(const Matrix& Q, const Matrix& K, const Matrix& V, double s);

/// Keys are the unit-normalised reference features, values their one-hot
/// labels, the query the unit-normalised test feature. Returns a distribution
/// over the reference set's classes.
std::vector<double> nn_attention_classify(const ReferenceSet& ref, const FeatureVector& f_test,
                                          double s);

/// (m+1) x (d+C) rows: [unit feature | one-hot label] for each reference, then
/// [unit test feature | zeros].
class FeatureLabelMatrix {
public:
  FeatureLabelMatrix(const ReferenceSet& ref, const FeatureVector& f_test);

  const Matrix& rows() const noexcept { return rows_; }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t known_count() const noexcept { return static_cast<std::size_t>(rows_.rows()) - 1; }

private:
  Matrix rows_;
  std::size_t feature_dim_;
  std::size_t class_count_;
};

enum class Setup2Mode {
  /// attention(M, M, M, s) exactly as concatenated. The test row also attends
  /// to itself, so its label block is the 1-NN-style vote scaled by the mass
  /// not spent on the self match.
  Literal,
  /// Similarities use the feature blocks only and the test row does not attend
  /// to itself; the test row's label block then equals nn_attention_classify.
  Strict,
};

/// Label block of the test row after one self-attention layer.
std::vector<double> self_attention_classify(const FeatureLabelMatrix& M, double s,
                                            Setup2Mode mode = Setup2Mode::Literal);

struct IterationResult {
  /// layers[0] is the input; layers[l] the output of l stacked self-attentions.
  std::vector<Matrix> layers;
  /// |layers[l] - layers[l-1]|_inf for l = 1..n.
  std::vector<double> step_norms;
  /// First l with step_norms[l-1] < tol.
  std::optional<std::size_t> converged_at;
};

/// M_{l+1} = attention(M_l, M_l, M_l, s) until the sup-norm step falls below
/// cfg.convergence_tol or cfg.max_layers layers have run.
IterationResult iterate_self_attention(const Matrix& M, const AttentionConfig& cfg);
IterationResult iterate_self_attention(const FeatureLabelMatrix& M, const AttentionConfig& cfg);

/// Exactly cfg.layers_L stacked self-attentions, no early stop.
Matrix stacked_self_attention(const Matrix& M, const AttentionConfig& cfg);

}  // namespace transprompt
