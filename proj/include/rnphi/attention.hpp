#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "bundle_io.hpp"
#include "error.hpp"

namespace rnphi {

struct MaskConfig {
  double m_interested = 1.0;
  double m_context = 0.6;
  double m_nonrelevant = 0.2;

  void validate() const {
    if (!(0.0 < m_nonrelevant && m_nonrelevant < m_context && m_context <= m_interested))
      throw ValidationError("mask values must satisfy 0 < nonrelevant < context <= interested");
  }
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ValidationError(std::string(what) + " has non-finite entries");
}

}  // namespace detail

/// Scaled dot products: S(i, j) = <response_i, stimulus_j> / sqrt(D).
inline Eigen::MatrixXd attention_scores(const TokenMatrix& response, const TokenMatrix& stimulus) {
  if (response.cols() != stimulus.cols())
    throw ShapeError("response and stimulus dimensions differ (" + std::to_string(response.cols()) + " vs " +
                     std::to_string(stimulus.cols()) + ")");
  if (response.cols() < 1) throw ShapeError("embedding dimension must be positive");
  detail::require_finite(response, "response");
  detail::require_finite(stimulus, "stimulus");
  return (response * stimulus.transpose()) / std::sqrt(static_cast<double>(response.cols()));
}

/// Per-column multipliers: interested spans take precedence over contexts.
inline Eigen::VectorXd span_mask(Eigen::Index columns, const std::vector<Span>& interested,
                                 const std::vector<Span>& context, const MaskConfig& cfg) {
  auto check = [&](const Span& s) {
    if (s.p < 0 || s.q < s.p || s.q >= columns)
      throw ValidationError("span [" + std::to_string(s.p) + "," + std::to_string(s.q) + "] outside " +
                            std::to_string(columns) + " stimulus tokens");
  };
  Eigen::VectorXd m = Eigen::VectorXd::Constant(columns, cfg.m_nonrelevant);
  for (const Span& s : context) {
    check(s);
    m.segment(s.p, s.q - s.p + 1).setConstant(cfg.m_context);
  }
  for (const Span& s : interested) {
    check(s);
    m.segment(s.p, s.q - s.p + 1).setConstant(cfg.m_interested);
  }
  return m;
}

/// Multiplies each stimulus column of S by its span mask value.
inline Eigen::MatrixXd apply_span_masks(const Eigen::MatrixXd& S, const std::vector<Span>& interested,
                                        const std::vector<Span>& context, const MaskConfig& cfg) {
  const Eigen::VectorXd m = span_mask(S.cols(), interested, context, cfg);
  Eigen::MatrixXd out = S;
  for (Eigen::Index j = 0; j < S.cols(); ++j)
    if (m(j) != 1.0) out.col(j) *= m(j);
  return out;
}

/// Row-wise softmax with max subtraction.
inline Eigen::MatrixXd attention_weights(const Eigen::MatrixXd& S) {
  if (S.cols() == 0) throw ShapeError("empty stimulus");
  detail::require_finite(S, "scores");
  Eigen::MatrixXd W(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    const double mx = S.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < S.cols(); ++j) z += W(i, j) = std::exp(S(i, j) - mx);
    W.row(i) /= z;
  }
  return W;
}

/// Each output row is the W-weighted combination of stimulus rows.
inline TokenMatrix attended_response(const Eigen::MatrixXd& W, const TokenMatrix& stimulus) {
  if (W.cols() != stimulus.rows())
    throw ShapeError("weight columns (" + std::to_string(W.cols()) + ") differ from stimulus tokens (" +
                     std::to_string(stimulus.rows()) + ")");
  return W * stimulus;
}

/// Attended response representation (no span masking).
inline TokenMatrix arr(const TokenMatrix& response, const TokenMatrix& stimulus) {
  return attended_response(attention_weights(attention_scores(response, stimulus)), stimulus);
}

/// Contextually attended response representation under span masks.
inline TokenMatrix carr(const TokenMatrix& response, const TokenMatrix& stimulus, const std::vector<Span>& interested,
                        const std::vector<Span>& context, const MaskConfig& cfg) {
  cfg.validate();
  const auto S = apply_span_masks(attention_scores(response, stimulus), interested, context, cfg);
  return attended_response(attention_weights(S), stimulus);
}

}  // namespace rnphi
