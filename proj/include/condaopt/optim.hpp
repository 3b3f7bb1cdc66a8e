#pragma once
// The five update rules — SGD-momentum, Adam, AdamW, Muon (Newton-Schulz
// and exact SVD-reformulated variants), and column-normalized Adam
// ("conda") — as stateful per-parameter steppers sharing one interface.
//
// Conda in one paragraph: keep Adam's two moment buffers, but express
// both the momentum and the second moment in the coordinates of the
// momentum's own singular basis, refreshed lazily every update_freq
// steps. The second moment then normalizes per singular direction
// rather than per raw coordinate, which concentrates the update's
// spectrum the way Muon's orthogonalization does while keeping Adam's
// cheap element-wise machinery between refreshes.
//
// All steppers are pure with respect to the weights (new weights are
// returned, the input is untouched) and mutate only their ParamSlot.
// The reported update_matrix is the applied direction before the
// learning-rate sign, i.e. W_new = W - lr * update_matrix followed, for
// the decoupled-decay rules, by W -= lr * weight_decay * W.

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "matrix.hpp"
#include "newton_schulz.hpp"
#include "svd.hpp"

namespace condaopt {

enum class OptimizerKind { sgdm, adam, adamw, muon_ns, muon_svd, conda };

inline const char* optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgdm: return "sgdm";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::muon_ns: return "muon_ns";
    case OptimizerKind::muon_svd: return "muon_svd";
    case OptimizerKind::conda: return "conda";
  }
  throw std::logic_error("unreachable optimizer kind");
}

struct OptimizerConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double mu = 0.95;             // momentum of the accumulate-style rules
  double eps = 1e-8;
  double weight_decay = 0.0;    // decoupled; applied by adamw and conda only
  std::size_t update_freq = 2000;  // conda basis refresh period
  double scale = 1.0;           // multiplies the muon_ns / conda direction
  std::size_t ns_steps = 5;
  NewtonSchulzCoeffs ns_coeffs = kNewtonSchulzPolar;
  bool bias_correction = true;
  bool projection_ablation = false;  // conda: second moment from raw G^2

  void validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("optimizer config: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0))
      throw std::invalid_argument("optimizer config: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("optimizer config: beta2 must be in [0, 1)");
    if (!(mu >= 0.0 && mu < 1.0))
      throw std::invalid_argument("optimizer config: mu must be in [0, 1)");
    if (!(eps > 0.0)) throw std::invalid_argument("optimizer config: eps must be positive");
    if (!(weight_decay >= 0.0))
      throw std::invalid_argument("optimizer config: weight_decay must be nonnegative");
    if (update_freq < 1)
      throw std::invalid_argument("optimizer config: update_freq must be at least 1");
    if (!(scale > 0.0)) throw std::invalid_argument("optimizer config: scale must be positive");
    if (ns_steps < 1) throw std::invalid_argument("optimizer config: ns_steps must be at least 1");
  }
};

enum class ProjectionSide { left, right, none };

// Per-parameter optimizer state: step counter, moment buffers, and (for
// conda) the cached projection basis. Built through make() so each rule
// allocates exactly the state it uses.
class ParamSlot {
 public:
  static ParamSlot make(OptimizerKind kind, std::size_t rows, std::size_t cols,
                        const OptimizerConfig& cfg, bool is_matrix_param = true) {
    cfg.validate();
    const bool needs_matrix =
        kind == OptimizerKind::muon_ns || kind == OptimizerKind::muon_svd ||
        kind == OptimizerKind::conda;
    if (needs_matrix && !is_matrix_param) {
      throw std::invalid_argument(std::string("optimizer '") + optimizer_kind_name(kind) +
                                  "' requires a matrix parameter; route vectors to adamw");
    }
    ParamSlot slot(kind, rows, cols);
    if (kind == OptimizerKind::adam || kind == OptimizerKind::adamw ||
        kind == OptimizerKind::conda) {
      // Conda's projected gradient has the raw gradient's shape (the
      // basis is square), so the second moment is rows x cols for all
      // three adaptive rules.
      slot.second_moment_.emplace(rows, cols, 0.0);
    }
    if (kind == OptimizerKind::conda) {
      slot.side_ = (rows <= cols) ? ProjectionSide::left : ProjectionSide::right;
    }
    return slot;
  }

  std::size_t step_count() const { return step_count_; }
  OptimizerKind kind() const { return kind_; }
  ProjectionSide projection_side() const { return side_; }
  const Matrix2D& first_moment() const { return first_moment_; }
  const Matrix2D& second_moment() const { return second_moment_.value(); }
  bool has_basis() const { return cached_basis_.has_value(); }
  const Matrix2D& cached_basis() const { return cached_basis_.value(); }

  // Test hook: freeze the projection basis instead of refreshing it
  // from the momentum's SVD. With the identity pinned, conda reduces to
  // adam exactly. The pinned matrix must be the square basis for the
  // slot's side (left: rows x rows, right: cols x cols) and orthogonal.
  void pin_basis(Matrix2D basis) {
    if (kind_ != OptimizerKind::conda) {
      throw std::logic_error("pin_basis is only meaningful for conda slots");
    }
    const std::size_t want = (side_ == ProjectionSide::left) ? rows_ : cols_;
    if (basis.rows() != want || basis.cols() != want) {
      throw std::invalid_argument("shape mismatch: pinned basis must be square on the projection side");
    }
    const Matrix2D gram = multiply_transpose_a(basis, basis);
    if (max_abs_diff(gram, Matrix2D::identity(want)) > 1e-8) {
      throw std::invalid_argument("pinned basis is not orthonormal");
    }
    cached_basis_ = std::move(basis);
    basis_pinned_ = true;
  }

 private:
  ParamSlot(OptimizerKind kind, std::size_t rows, std::size_t cols)
      : kind_(kind), rows_(rows), cols_(cols), first_moment_(rows, cols, 0.0) {}

  OptimizerKind kind_;
  std::size_t rows_, cols_;
  std::size_t step_count_ = 0;
  Matrix2D first_moment_;
  std::optional<Matrix2D> second_moment_;
  std::optional<Matrix2D> cached_basis_;
  ProjectionSide side_ = ProjectionSide::none;
  bool basis_pinned_ = false;

  friend struct StepAccess;
};

struct StepReport {
  Matrix2D update_matrix;  // applied direction, before the -lr sign
  bool basis_refreshed = false;
};

using StepResult = std::pair<Matrix2D, StepReport>;

namespace detail {

// Mutable view of a slot for the step functions, so the slot's public
// surface stays read-only.
struct SlotFields {
  std::size_t& step_count;
  Matrix2D& first_moment;
  std::optional<Matrix2D>& second_moment;
  std::optional<Matrix2D>& cached_basis;
  bool basis_pinned;
};

}  // namespace detail

struct StepAccess {
  static detail::SlotFields fields(ParamSlot& slot) {
    return {slot.step_count_, slot.first_moment_, slot.second_moment_, slot.cached_basis_,
            slot.basis_pinned_};
  }
  static std::size_t rows(const ParamSlot& slot) { return slot.rows_; }
  static std::size_t cols(const ParamSlot& slot) { return slot.cols_; }
};

namespace detail {

inline void check_step_inputs(const Matrix2D& w, const Matrix2D& g, const ParamSlot& slot,
                              OptimizerKind expected) {
  if (slot.kind() != expected) {
    throw std::logic_error(std::string("slot built for '") + optimizer_kind_name(slot.kind()) +
                           "' stepped as '" + optimizer_kind_name(expected) + "'");
  }
  if (!same_shape(w, g) || w.rows() != StepAccess::rows(slot) ||
      w.cols() != StepAccess::cols(slot)) {
    throw std::invalid_argument("shape mismatch: weights, gradient, and slot state disagree");
  }
  if (!is_finite(g)) throw std::invalid_argument("non-finite gradient");
}

// M = beta * M + (1 - beta) * G
inline void ema_update(Matrix2D& m, const Matrix2D& g, double beta) {
  m.scale(beta);
  m.add_scaled(g, 1.0 - beta);
}

// N = beta * N + (1 - beta) * G^2, element-wise; never goes negative.
inline void ema_square_update(Matrix2D& n, const Matrix2D& g, double beta) {
  double* pn = n.data();
  const double* pg = g.data();
  for (std::size_t i = 0; i < n.size(); ++i) {
    pn[i] = beta * pn[i] + (1.0 - beta) * pg[i] * pg[i];
  }
}

// Bias-corrected adaptive quotient: Mhat / (sqrt(Nhat) + eps), with
// Mhat = M / bc1 and Nhat = N / bc2.
inline Matrix2D adaptive_quotient(const Matrix2D& m, const Matrix2D& n, double bc1, double bc2,
                                  double eps) {
  Matrix2D out(m.rows(), m.cols(), 0.0);
  const double* pm = m.data();
  const double* pn = n.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    po[i] = (pm[i] / bc1) / (std::sqrt(pn[i] / bc2) + eps);
  }
  return out;
}

// Decoupled decay on the already-updated weights: W -= lr * wd * W.
inline void apply_decoupled_decay(Matrix2D& w, const OptimizerConfig& cfg) {
  if (cfg.weight_decay == 0.0) return;
  const double shrink = cfg.lr * cfg.weight_decay;
  double* p = w.data();
  for (std::size_t i = 0; i < w.size(); ++i) p[i] -= shrink * p[i];
}

}  // namespace detail

// --- SGD with momentum -----------------------------------------------

inline StepResult sgdm_step(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                            const OptimizerConfig& cfg) {
  detail::check_step_inputs(w, g, slot, OptimizerKind::sgdm);
  auto s = StepAccess::fields(slot);
  ++s.step_count;
  s.first_moment.scale(cfg.mu);
  s.first_moment.add_scaled(g, 1.0);  // M = mu * M + G
  Matrix2D next = w;
  next.add_scaled(s.first_moment, -cfg.lr);
  return {std::move(next), StepReport{s.first_moment, false}};
}

// --- Adam / AdamW ----------------------------------------------------

inline StepResult adam_step_impl(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                                 const OptimizerConfig& cfg, OptimizerKind expected) {
  detail::check_step_inputs(w, g, slot, expected);
  auto s = StepAccess::fields(slot);
  ++s.step_count;
  detail::ema_update(s.first_moment, g, cfg.beta1);
  detail::ema_square_update(*s.second_moment, g, cfg.beta2);
  const double t = static_cast<double>(s.step_count);
  const double bc1 = cfg.bias_correction ? 1.0 - std::pow(cfg.beta1, t) : 1.0;
  const double bc2 = cfg.bias_correction ? 1.0 - std::pow(cfg.beta2, t) : 1.0;
  Matrix2D direction =
      detail::adaptive_quotient(s.first_moment, *s.second_moment, bc1, bc2, cfg.eps);
  Matrix2D next = w;
  next.add_scaled(direction, -cfg.lr);
  return {std::move(next), StepReport{std::move(direction), false}};
}

inline StepResult adam_step(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                            const OptimizerConfig& cfg) {
  return adam_step_impl(w, g, slot, cfg, OptimizerKind::adam);
}

// Adam followed by decoupled weight decay on the updated weights.
inline StepResult adamw_step(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                             const OptimizerConfig& cfg) {
  StepResult result = adam_step_impl(w, g, slot, cfg, OptimizerKind::adamw);
  detail::apply_decoupled_decay(result.first, cfg);
  return result;
}

// --- Muon, Newton-Schulz form ----------------------------------------

inline StepResult muon_step_ns(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                               const OptimizerConfig& cfg) {
  detail::check_step_inputs(w, g, slot, OptimizerKind::muon_ns);
  auto s = StepAccess::fields(slot);
  ++s.step_count;
  s.first_moment.scale(cfg.mu);
  s.first_moment.add_scaled(g, 1.0);  // M = mu * M + G (accumulate, not EMA)
  Matrix2D direction = newton_schulz5(s.first_moment, cfg.ns_steps, cfg.ns_coeffs);
  direction.scale(cfg.scale);
  Matrix2D next = w;
  next.add_scaled(direction, -cfg.lr);
  return {std::move(next), StepReport{std::move(direction), false}};
}

// --- Muon, exact SVD reformulation -----------------------------------

namespace detail {

inline void require_full_rank(const std::vector<double>& sigma) {
  const double sigma_max = sigma.front();
  for (double s : sigma) {
    if (!(s > 1e-12 * sigma_max) || sigma_max == 0.0) {
      throw std::domain_error("rank-deficient momentum");
    }
  }
}

}  // namespace detail

// Left form: M' = U^T M, then divide row i by sigma_i, then U * (...).
// The three stages must run in exactly this order; fusing them changes
// the rounding and the equivalence being verified.
inline Matrix2D muon_svd_direction_left(const Matrix2D& m) {
  const SvdFactors f = thin_svd(m);
  detail::require_full_rank(f.sigma);
  Matrix2D projected = multiply_transpose_a(f.u, m);  // k x n
  for (std::size_t i = 0; i < projected.rows(); ++i) {
    double* row = projected.row_ptr(i);
    for (std::size_t j = 0; j < projected.cols(); ++j) row[j] /= f.sigma[i];
  }
  return multiply(f.u, projected);
}

// Right form: M' = M V, then divide column j by sigma_j, then (...) V^T.
inline Matrix2D muon_svd_direction_right(const Matrix2D& m) {
  const SvdFactors f = thin_svd(m);
  detail::require_full_rank(f.sigma);
  Matrix2D projected = multiply_transpose_b(m, f.vt);  // m x k
  for (std::size_t i = 0; i < projected.rows(); ++i) {
    double* row = projected.row_ptr(i);
    for (std::size_t j = 0; j < projected.cols(); ++j) row[j] /= f.sigma[j];
  }
  return multiply(projected, f.vt);
}

inline Matrix2D muon_svd_direction(const Matrix2D& m) {
  return (m.rows() <= m.cols()) ? muon_svd_direction_left(m) : muon_svd_direction_right(m);
}

// Exact-equivalence variant of Muon: orthogonalizes the momentum
// through its SVD instead of Newton-Schulz. A verification tool rather
// than a production path, so rank-deficient momentum is a hard error
// and the direction carries no scale factor.
inline StepResult muon_step_svd(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                                const OptimizerConfig& cfg) {
  detail::check_step_inputs(w, g, slot, OptimizerKind::muon_svd);
  auto s = StepAccess::fields(slot);
  ++s.step_count;
  s.first_moment.scale(cfg.mu);
  s.first_moment.add_scaled(g, 1.0);
  Matrix2D direction = muon_svd_direction(s.first_moment);
  Matrix2D next = w;
  next.add_scaled(direction, -cfg.lr);
  return {std::move(next), StepReport{std::move(direction), false}};
}

// --- Conda -----------------------------------------------------------

inline StepResult conda_step(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                             const OptimizerConfig& cfg) {
  detail::check_step_inputs(w, g, slot, OptimizerKind::conda);
  auto s = StepAccess::fields(slot);
  ++s.step_count;
  detail::ema_update(s.first_moment, g, cfg.beta1);

  // Lazy basis refresh: on the first step and every update_freq steps
  // thereafter, rebuild the square orthogonal basis from the momentum's
  // thin SVD. A pinned basis (test hook) is never refreshed.
  const bool left = slot.projection_side() == ProjectionSide::left;
  bool refreshed = false;
  if (!s.basis_pinned && (s.step_count - 1) % cfg.update_freq == 0) {
    SvdFactors f = thin_svd(s.first_moment);
    s.cached_basis = left ? std::move(f.u) : std::move(f.vt);
    refreshed = true;
  }
  const Matrix2D& basis = *s.cached_basis;  // left: m x m (U), right: n x n (V^T)

  // Both moments expressed in the basis coordinates. The basis is
  // square, so the projected buffers keep the raw m x n shape and the
  // second moment survives refreshes unchanged (deliberately: carrying
  // the old accumulator across a basis change matches the lazy-refresh
  // contract, which trades exactness for T-fold fewer SVDs).
  Matrix2D proj_m = left ? multiply_transpose_a(basis, s.first_moment)
                         : multiply_transpose_b(s.first_moment, basis);
  if (cfg.projection_ablation) {
    detail::ema_square_update(*s.second_moment, g, cfg.beta2);
  } else {
    const Matrix2D proj_g =
        left ? multiply_transpose_a(basis, g) : multiply_transpose_b(g, basis);
    detail::ema_square_update(*s.second_moment, proj_g, cfg.beta2);
  }

  const double t = static_cast<double>(s.step_count);
  const double bc1 = cfg.bias_correction ? 1.0 - std::pow(cfg.beta1, t) : 1.0;
  const double bc2 = cfg.bias_correction ? 1.0 - std::pow(cfg.beta2, t) : 1.0;

  Matrix2D direction(w.rows(), w.cols(), 0.0);
  if (cfg.projection_ablation) {
    // Ablated normalization: divide the back-projected momentum by the
    // raw-gradient second moment, element-wise in weight coordinates.
    proj_m.scale(1.0 / bc1);
    const Matrix2D back = left ? multiply(basis, proj_m) : multiply(proj_m, basis);
    const double* pb = back.data();
    const double* pn = s.second_moment->data();
    double* po = direction.data();
    for (std::size_t i = 0; i < back.size(); ++i) {
      po[i] = pb[i] / (std::sqrt(pn[i] / bc2) + cfg.eps);
    }
  } else {
    const Matrix2D quotient =
        detail::adaptive_quotient(proj_m, *s.second_moment, bc1, bc2, cfg.eps);
    direction = left ? multiply(basis, quotient) : multiply(quotient, basis);
  }
  direction.scale(cfg.scale);

  Matrix2D next = w;
  next.add_scaled(direction, -cfg.lr);
  detail::apply_decoupled_decay(next, cfg);
  return {std::move(next), StepReport{std::move(direction), refreshed}};
}

// --- Kind-based dispatch (harness entry point) ------------------------

inline StepResult step_param(const Matrix2D& w, const Matrix2D& g, ParamSlot& slot,
                             const OptimizerConfig& cfg) {
  switch (slot.kind()) {
    case OptimizerKind::sgdm: return sgdm_step(w, g, slot, cfg);
    case OptimizerKind::adam: return adam_step(w, g, slot, cfg);
    case OptimizerKind::adamw: return adamw_step(w, g, slot, cfg);
    case OptimizerKind::muon_ns: return muon_step_ns(w, g, slot, cfg);
    case OptimizerKind::muon_svd: return muon_step_svd(w, g, slot, cfg);
    case OptimizerKind::conda: return conda_step(w, g, slot, cfg);
  }
  throw std::logic_error("unreachable optimizer kind");
}

// --- Column-wise oracle forms ----------------------------------------
//
// Deliberately slow re-derivations of the muon and conda directions as
// explicit sums over rank-one projectors U_(i) = u_i u_i^T: each output
// column j is sum_i w_ij * U_(i) * M[:, j], with weight 1/sigma_i for
// muon and 1/sqrt(N_ij) for conda. Used only as test oracles for the
// fast matrix-form paths.

inline Matrix2D muon_columnwise_direction(const Matrix2D& m) {
  if (m.rows() > m.cols()) {
    throw std::invalid_argument("shape mismatch: column-wise oracle needs rows <= cols");
  }
  const SvdFactors f = thin_svd(m);
  detail::require_full_rank(f.sigma);
  const std::size_t rows = m.rows(), cols = m.cols(), k = f.sigma.size();
  Matrix2D out(rows, cols, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    // Explicit rank-one projector u_i u_i^T.
    Matrix2D proj(rows, rows, 0.0);
    for (std::size_t a = 0; a < rows; ++a)
      for (std::size_t b = 0; b < rows; ++b) proj(a, b) = f.u(a, i) * f.u(b, i);
    for (std::size_t j = 0; j < cols; ++j) {
      for (std::size_t a = 0; a < rows; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < rows; ++b) acc += proj(a, b) * m(b, j);
        out(a, j) += acc / f.sigma[i];
      }
    }
  }
  return out;
}

inline Matrix2D conda_columnwise_direction(const Matrix2D& m_t, const Matrix2D& n_t,
                                           const Matrix2D& u) {
  const std::size_t rows = m_t.rows(), cols = m_t.cols(), k = u.cols();
  if (u.rows() != rows || n_t.rows() != k || n_t.cols() != cols) {
    throw std::invalid_argument("shape mismatch: column-wise oracle operands disagree");
  }
  const double* pn = n_t.data();
  for (std::size_t i = 0; i < n_t.size(); ++i) {
    if (!(pn[i] > 0.0)) throw std::domain_error("nonpositive second-moment entry");
  }
  Matrix2D out(rows, cols, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    Matrix2D proj(rows, rows, 0.0);
    for (std::size_t a = 0; a < rows; ++a)
      for (std::size_t b = 0; b < rows; ++b) proj(a, b) = u(a, i) * u(b, i);
    for (std::size_t j = 0; j < cols; ++j) {
      const double weight = 1.0 / std::sqrt(n_t(i, j));
      for (std::size_t a = 0; a < rows; ++a) {
        double acc = 0.0;
        for (std::size_t b = 0; b < rows; ++b) acc += proj(a, b) * m_t(b, j);
        out(a, j) += weight * acc;
      }
    }
  }
  return out;
}

}  // namespace condaopt
