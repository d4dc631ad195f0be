#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "relaynet/cone.hpp"
#include "relaynet/core.hpp"

namespace relaynet {

enum class ConeStatus {
  optimal,
  primal_infeasible,
  dual_infeasible,
  max_iterations,
  numerical_failure,
};

struct ConeSettings {
  double abs_gap_tol = 1e-7;
  double rel_gap_tol = 1e-7;
  double feas_tol = 1e-7;
  int max_iterations = 200;
};

struct ConeSolution {
  ConeStatus status = ConeStatus::numerical_failure;
  bool reduced_accuracy = false;  // converged only to the relaxed fallback tolerances
  Eigen::VectorXd x;              // primal variables
  Eigen::VectorXd s;              // cone slacks
  Eigen::VectorXd z;              // cone duals
  double primal_obj = 0.0;
  double gap = 0.0;
  int iterations = 0;
};

namespace detail {

/// Homogeneous self-dual embedding primal-dual interior-point method with
/// Nesterov-Todd scalings and Mehrotra predictor-corrector steps, after the
/// standard conelp algorithm. The KKT system is solved densely via the
/// regularized normal equations (delta*I + G' W^-2 G), with iterative
/// refinement on the full two-block system.
class HsdeSolver {
 public:
  HsdeSolver(const ConeProgram& prog, const ConeSettings& settings)
      : c_(prog.c), G_(prog.G), h_(prog.h), st_(settings) {
    nx_ = prog.num_vars();
    m_ = prog.num_rows();
    ml_ = prog.lin_dim;
    soc_ = prog.soc_dims;
    soc_start_.resize(soc_.size());
    int at = ml_;
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      soc_start_[j] = at;
      at += soc_[j];
    }
    lp_v_ = Eigen::VectorXd::Ones(ml_);
    lp_w_ = Eigen::VectorXd::Ones(ml_);
    socs_.resize(soc_.size());
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      socs_[j].q = Eigen::VectorXd::Zero(soc_[j] - 1);
    }
    resx0_ = std::max(1.0, c_.norm());
    resz0_ = std::max(1.0, h_.norm());
  }

  ConeSolution run() {
    ConeSolution result;
    if (nx_ == 0 || m_ == 0) throw invalid_input("cone program must have variables and rows");

    // Initial point from two least-squares solves with identity scalings,
    // shifted into the cone interior.
    delta_ = kDeltaStat;
    if (!factorize()) {
      return finish(result, ConeStatus::numerical_failure);
    }
    Eigen::VectorXd dx1(nx_), dz1(m_), dx2(nx_), dz2(m_);
    solve_kkt(Eigen::VectorXd::Zero(nx_), h_, dx1, dz1);
    w_.x = dx1;
    bring_to_cone(-dz1, w_.s);
    solve_kkt(-c_, Eigen::VectorXd::Zero(m_), dx2, dz2);
    bring_to_cone(dz2, w_.z);
    w_.tau = 1.0;
    w_.kap = 1.0;
    w_.lambda = Eigen::VectorXd::Zero(m_);

    Eigen::VectorXd ds_by_W(m_), W_dz(m_), ds_tilde(m_), ds_tmp(m_), ds_unsc(m_);
    double pres_prev = std::numeric_limits<double>::max();
    ConeStatus code = ConeStatus::max_iterations;
    bool code_set = false;

    for (w_.iter = 0; w_.iter <= st_.max_iterations; ++w_.iter) {
      compute_residuals();
      update_statistics();

      // Backtrack to the best iterate on a blow-up of the primal residual or
      // a negative gap, then settle for reduced accuracy if we have it.
      if (w_.iter > 0 && (w_.pres > kSafeguard * pres_prev || w_.gap < 0.0)) {
        if (have_best_) w_ = best_;
        code = exit_code_or(check_exit(true), ConeStatus::numerical_failure);
        code_set = true;
        break;
      }
      pres_prev = w_.pres;

      const Exit full = check_exit(false);
      if (full != Exit::none) {
        code = exit_code_or(full, ConeStatus::numerical_failure);
        code_set = true;
        break;
      }

      // Stalled line search from the previous iteration.
      if (w_.iter > 0 && w_.step == kStepMin * kGammaStep) {
        if (have_best_) w_ = best_;
        const Exit reduced = check_exit(true);
        code = reduced == Exit::none ? ConeStatus::numerical_failure
                                     : exit_code_or(reduced, ConeStatus::numerical_failure);
        if (reduced != Exit::none) result.reduced_accuracy = true;
        code_set = true;
        break;
      }
      if (w_.iter == st_.max_iterations) {
        if (have_best_ && !is_better(w_, best_)) w_ = best_;
        const Exit reduced = check_exit(true);
        if (reduced != Exit::none) {
          code = exit_code_or(reduced, ConeStatus::max_iterations);
          result.reduced_accuracy = true;
        } else {
          code = ConeStatus::max_iterations;
        }
        code_set = true;
        break;
      }
      if (std::isnan(w_.pcost)) {
        if (w_.iter > 0 && have_best_ && !is_better(w_, best_)) {
          w_ = best_;
          const Exit reduced = check_exit(true);
          if (reduced != Exit::none) {
            code = exit_code_or(reduced, ConeStatus::numerical_failure);
            result.reduced_accuracy = true;
            code_set = true;
            break;
          }
        }
        code = ConeStatus::numerical_failure;
        code_set = true;
        break;
      }

      if (w_.iter == 0 || is_better(w_, best_)) {
        best_ = w_;
        have_best_ = true;
      }

      if (!update_scalings() || !factorize()) {
        if (have_best_) w_ = best_;
        code = exit_code_or(check_exit(true), ConeStatus::numerical_failure);
        code_set = true;
        break;
      }

      // Solve for the constant part [-c; h]; reused by both directions.
      solve_kkt(-c_, h_, dx1, dz1);
      const double dtau_denom = w_.kap / w_.tau - c_.dot(dx1) - h_.dot(dz1);

      // Affine (predictor) direction.
      solve_kkt(rx_, w_.s - rz_, dx2, dz2);
      const double dtau_aff = (rt_ - w_.kap + c_.dot(dx2) + h_.dot(dz2)) / dtau_denom;
      dz2 += dtau_aff * dz1;
      apply_W(dz2, W_dz);
      ds_by_W = -W_dz - w_.lambda;  // W^-1 ds_aff
      const double dkap_aff = -w_.kap - w_.kap / w_.tau * dtau_aff;
      const double step_aff =
          line_search(ds_by_W, W_dz, w_.tau, dtau_aff, w_.kap, dkap_aff);
      const double sigma =
          std::clamp((1.0 - step_aff) * (1.0 - step_aff) * (1.0 - step_aff), kSigmaMin, kSigmaMax);

      // Combined (corrector) direction. In scaled space:
      //   ds~ = lambda o lambda + (W^-1 ds_aff) o (W dz_aff) - sigma*mu*e
      conic_product(w_.lambda, w_.lambda, ds_tilde);
      conic_product(ds_by_W, W_dz, ds_tmp);
      ds_tilde += ds_tmp;
      add_to_cone_identity(ds_tilde, -sigma * w_.mu);
      conic_division(w_.lambda, ds_tilde, ds_by_W);  // ds_by_W = lambda \ ds~
      apply_W(ds_by_W, ds_tmp);                      // W (lambda \ ds~)
      solve_kkt((1.0 - sigma) * rx_, -(1.0 - sigma) * rz_ + ds_tmp, dx2, dz2);

      const double bkap = w_.kap * w_.tau + dkap_aff * dtau_aff - sigma * w_.mu;
      const double dtau =
          ((1.0 - sigma) * rt_ - bkap / w_.tau + c_.dot(dx2) + h_.dot(dz2)) / dtau_denom;
      dx2 += dtau * dx1;
      dz2 += dtau * dz1;
      apply_W(dz2, W_dz);
      ds_by_W = -(ds_by_W + W_dz);  // W^-1 ds = -(lambda \ ds~ + W dz)
      const double dkap = -(bkap + w_.kap * dtau) / w_.tau;

      w_.step = kGammaStep * line_search(ds_by_W, W_dz, w_.tau, dtau, w_.kap, dkap);
      apply_W(ds_by_W, ds_unsc);  // ds = W (W^-1 ds)

      w_.x += w_.step * dx2;
      w_.z += w_.step * dz2;
      w_.s += w_.step * ds_unsc;
      w_.kap += w_.step * dkap;
      w_.tau += w_.step * dtau;
    }

    if (!code_set) code = ConeStatus::max_iterations;
    return finish(result, code);
  }

 private:
  static constexpr double kGammaStep = 0.99;
  static constexpr double kStepMin = 1e-6;
  static constexpr double kStepMax = 0.999;
  static constexpr double kSigmaMin = 1e-4;
  static constexpr double kSigmaMax = 1.0;
  static constexpr double kDeltaStat = 7e-8;
  static constexpr double kLinSysAcc = 1e-14;
  static constexpr double kIrErrFact = 6.0;
  static constexpr double kSafeguard = 500.0;
  static constexpr int kNitRef = 4;
  static constexpr double kFeasTolInacc = 1e-4;
  static constexpr double kAbsTolInacc = 5e-5;
  static constexpr double kRelTolInacc = 5e-5;

  struct Scaling {
    double eta = 1.0;
    double eta_sq = 1.0;
    double a = 1.0;
    Eigen::VectorXd q;
  };

  struct Iterate {
    Eigen::VectorXd x, z, s, lambda;
    double tau = 1.0, kap = 1.0;
    double gap = 0.0, mu = 0.0, pcost = 0.0, dcost = 0.0;
    double kapovert = 0.0, pres = 0.0, dres = 0.0;
    std::optional<double> relgap, pinfres, dinfres;
    double cx = 0.0, hz = 0.0;
    int iter = 0;
    double step = 0.0;
  };

  enum class Exit { none, optimal, primal_infeasible, dual_infeasible };

  static ConeStatus exit_code_or(Exit e, ConeStatus fallback) {
    switch (e) {
      case Exit::optimal: return ConeStatus::optimal;
      case Exit::primal_infeasible: return ConeStatus::primal_infeasible;
      case Exit::dual_infeasible: return ConeStatus::dual_infeasible;
      default: return fallback;
    }
  }

  ConeSolution finish(ConeSolution& result, ConeStatus code) {
    result.status = code;
    result.iterations = w_.iter;
    const double tau = w_.tau != 0.0 ? w_.tau : 1.0;
    result.x = w_.x / tau;
    result.s = w_.s / tau;
    result.z = w_.z / tau;
    result.primal_obj = w_.x.size() > 0 ? c_.dot(result.x) : 0.0;
    result.gap = w_.gap;
    return result;
  }

  // ----- cone algebra over full m-vectors -----

  void apply_W(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
    out.head(ml_) = lp_w_.cwiseProduct(u.head(ml_));
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const Scaling& sc = socs_[j];
      const int at = soc_start_[j], d = soc_[j];
      const double zeta = sc.q.dot(u.segment(at + 1, d - 1));
      const double factor = u(at) + zeta / (1.0 + sc.a);
      out(at) = sc.eta * (sc.a * u(at) + zeta);
      out.segment(at + 1, d - 1) = sc.eta * (u.segment(at + 1, d - 1) + factor * sc.q);
    }
  }

  void apply_Wsq_add(const Eigen::VectorXd& u, Eigen::VectorXd& out) const {
    out.head(ml_) += lp_v_.cwiseProduct(u.head(ml_));
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const Scaling& sc = socs_[j];
      const int at = soc_start_[j], d = soc_[j];
      // W^2 u = eta^2 (2 wbar (wbar' u) - J u) with wbar = (a, q).
      const double wu = sc.a * u(at) + sc.q.dot(u.segment(at + 1, d - 1));
      out(at) += sc.eta_sq * (2.0 * sc.a * wu - u(at));
      out.segment(at + 1, d - 1) +=
          sc.eta_sq * (2.0 * wu * sc.q + u.segment(at + 1, d - 1));
    }
  }

  Eigen::VectorXd apply_Winvsq(const Eigen::VectorXd& u) const {
    Eigen::VectorXd out(m_);
    out.head(ml_) = u.head(ml_).cwiseQuotient(lp_v_);
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const Scaling& sc = socs_[j];
      const int at = soc_start_[j], d = soc_[j];
      // W^-2 u = eta^-2 (2 wtil (wtil' u) - J u) with wtil = J wbar = (a, -q).
      const double wu = sc.a * u(at) - sc.q.dot(u.segment(at + 1, d - 1));
      out(at) = (2.0 * sc.a * wu - u(at)) / sc.eta_sq;
      out.segment(at + 1, d - 1) =
          (-2.0 * wu * sc.q + u.segment(at + 1, d - 1)) / sc.eta_sq;
    }
    return out;
  }

  void add_to_cone_identity(Eigen::VectorXd& u, double value) const {
    u.head(ml_).array() += value;
    for (std::size_t j = 0; j < soc_.size(); ++j) u(soc_start_[j]) += value;
  }

  /// out = r shifted into the cone interior: r + (1 + worst_violation) * e.
  void bring_to_cone(const Eigen::VectorXd& r, Eigen::VectorXd& out) const {
    double alpha = -kGammaStep;
    for (int i = 0; i < ml_; ++i) {
      if (r(i) <= 0.0 && -r(i) > alpha) alpha = -r(i);
    }
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const int at = soc_start_[j], d = soc_[j];
      const double cres = r(at) - r.segment(at + 1, d - 1).norm();
      if (cres <= 0.0 && -cres > alpha) alpha = -cres;
    }
    out = r;
    add_to_cone_identity(out, 1.0 + alpha);
  }

  void conic_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                     Eigen::VectorXd& out) const {
    out.head(ml_) = u.head(ml_).cwiseProduct(v.head(ml_));
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const int at = soc_start_[j], d = soc_[j];
      const double u0 = u(at);
      const double v0 = v(at);
      out(at) = u.segment(at, d).dot(v.segment(at, d));
      out.segment(at + 1, d - 1) =
          u0 * v.segment(at + 1, d - 1) + v0 * u.segment(at + 1, d - 1);
    }
  }

  void conic_division(const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                      Eigen::VectorXd& out) const {
    out.head(ml_) = w.head(ml_).cwiseQuotient(u.head(ml_));
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const int at = soc_start_[j], d = soc_[j];
      const double u0 = u(at);
      const double w0 = w(at);
      const double rho = u0 * u0 - u.segment(at + 1, d - 1).squaredNorm();
      const double zeta = u.segment(at + 1, d - 1).dot(w.segment(at + 1, d - 1));
      const double factor = (zeta / u0 - w0) / rho;
      out(at) = (u0 * w0 - zeta) / rho;
      out.segment(at + 1, d - 1) =
          factor * u.segment(at + 1, d - 1) + w.segment(at + 1, d - 1) / u0;
    }
  }

  // ----- scalings and the KKT system -----

  bool update_scalings() {
    lp_v_ = w_.s.head(ml_).cwiseQuotient(w_.z.head(ml_));
    if (!lp_v_.allFinite() || (ml_ > 0 && lp_v_.minCoeff() <= 0.0)) return false;
    lp_w_ = lp_v_.cwiseSqrt();

    for (std::size_t j = 0; j < soc_.size(); ++j) {
      Scaling& sc = socs_[j];
      const int at = soc_start_[j], d = soc_[j];
      const double sres =
          w_.s(at) * w_.s(at) - w_.s.segment(at + 1, d - 1).squaredNorm();
      const double zres =
          w_.z(at) * w_.z(at) - w_.z.segment(at + 1, d - 1).squaredNorm();
      if (sres <= 0.0 || zres <= 0.0) return false;
      const double snorm = std::sqrt(sres);
      const double znorm = std::sqrt(zres);

      const Eigen::VectorXd skbar = w_.s.segment(at, d) / snorm;
      const Eigen::VectorXd zkbar = w_.z.segment(at, d) / znorm;
      sc.eta_sq = snorm / znorm;
      sc.eta = std::sqrt(sc.eta_sq);

      double gamma = 1.0 + skbar.dot(zkbar);
      gamma = std::sqrt(0.5 * gamma);
      sc.a = (0.5 / gamma) * (skbar(0) + zkbar(0));
      sc.q = (0.5 / gamma) * (skbar.tail(d - 1) - zkbar.tail(d - 1));
    }

    apply_W(w_.z, w_.lambda);
    return w_.lambda.allFinite();
  }

  bool factorize() {
    // WinvsqG = W^-2 G, column block by cone block.
    WinvsqG_ = G_;
    if (ml_ > 0) {
      WinvsqG_.topRows(ml_).array().colwise() /= lp_v_.array();
    }
    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const Scaling& sc = socs_[j];
      const int at = soc_start_[j], d = soc_[j];
      const Eigen::RowVectorXd wu =
          sc.a * G_.row(at) - sc.q.transpose() * G_.middleRows(at + 1, d - 1);
      WinvsqG_.row(at) = (2.0 * sc.a * wu - G_.row(at)) / sc.eta_sq;
      WinvsqG_.middleRows(at + 1, d - 1) =
          (-2.0 * sc.q * wu + G_.middleRows(at + 1, d - 1)) / sc.eta_sq;
    }

    const Eigen::MatrixXd M0 = G_.transpose() * WinvsqG_;
    if (!M0.allFinite()) return false;
    for (int bump = 0; bump <= 3; ++bump) {
      Eigen::MatrixXd M = M0;
      M.diagonal().array() += delta_;
      ldlt_.compute(M);
      if (ldlt_.info() == Eigen::Success) return true;
      delta_ *= 100.0;  // retry with heavier static regularization
    }
    return false;
  }

  /// Solves [delta*I, G'; G, -W^2] [dx; dz] = [bx; bz] via the normal
  /// equations, with iterative refinement on the two-block residuals.
  int solve_kkt(const Eigen::VectorXd& bx, const Eigen::VectorXd& bz, Eigen::VectorXd& dx,
                Eigen::VectorXd& dz) const {
    dx = ldlt_.solve(bx + WinvsqG_.transpose() * bz);
    dz = WinvsqG_ * dx - apply_Winvsq(bz);

    const double threshold =
        (1.0 + std::max(bx.lpNorm<Eigen::Infinity>(), bz.lpNorm<Eigen::Infinity>())) * kLinSysAcc;
    double err_prev = std::numeric_limits<double>::max();
    Eigen::VectorXd cx, cz;
    int k_ref = 0;
    for (; k_ref <= kNitRef; ++k_ref) {
      Eigen::VectorXd ex = bx - delta_ * dx - G_.transpose() * dz;
      Eigen::VectorXd ez = bz - G_ * dx;
      apply_Wsq_add(dz, ez);
      const double err = std::max(ex.lpNorm<Eigen::Infinity>(), ez.lpNorm<Eigen::Infinity>());

      if (k_ref > 0 && err > err_prev) {
        dx -= cx;
        dz -= cz;
        --k_ref;
        break;
      }
      if (k_ref == kNitRef || err < threshold || (k_ref > 0 && err_prev < kIrErrFact * err)) {
        break;
      }
      err_prev = err;

      cx = ldlt_.solve(ex + WinvsqG_.transpose() * ez);
      cz = WinvsqG_ * cx - apply_Winvsq(ez);
      dx += cx;
      dz += cz;
    }
    return k_ref;
  }

  // ----- residuals, statistics, termination -----

  void compute_residuals() {
    rx_ = -G_.transpose() * w_.z;
    hresx_ = rx_.norm();
    rx_ -= w_.tau * c_;

    rz_ = w_.s + G_ * w_.x;
    hresz_ = rz_.norm();
    rz_ -= w_.tau * h_;

    w_.cx = c_.dot(w_.x);
    w_.hz = h_.dot(w_.z);
    rt_ = w_.kap + w_.cx + w_.hz;

    nx_norm_ = w_.x.norm();
    nz_norm_ = w_.z.norm();
    ns_norm_ = w_.s.norm();
  }

  void update_statistics() {
    w_.gap = w_.s.dot(w_.z);
    w_.mu = (w_.gap + w_.kap * w_.tau) / (ml_ + static_cast<int>(soc_.size()) + 1);
    w_.kapovert = w_.kap / w_.tau;
    w_.pcost = w_.cx / w_.tau;
    w_.dcost = -w_.hz / w_.tau;

    if (w_.pcost < 0.0) {
      w_.relgap = w_.gap / -w_.pcost;
    } else if (w_.dcost > 0.0) {
      w_.relgap = w_.gap / w_.dcost;
    } else {
      w_.relgap.reset();
    }

    w_.pres = rz_.norm() / std::max(resz0_ + nx_norm_ + ns_norm_, 1.0) / w_.tau;
    w_.dres = rx_.norm() / std::max(resx0_ + nz_norm_, 1.0) / w_.tau;

    w_.pinfres.reset();
    w_.dinfres.reset();
    if (w_.hz / std::max(nz_norm_, 1.0) < -st_.rel_gap_tol) {
      w_.pinfres = hresx_ / std::max(nz_norm_, 1.0);
    }
    if (w_.cx / std::max(nx_norm_, 1.0) < -st_.rel_gap_tol) {
      w_.dinfres = hresz_ / std::max(nx_norm_ + ns_norm_, 1.0);
    }
  }

  Exit check_exit(bool reduced) const {
    const double feastol = reduced ? kFeasTolInacc : st_.feas_tol;
    const double abstol = reduced ? kAbsTolInacc : st_.abs_gap_tol;
    const double reltol = reduced ? kRelTolInacc : st_.rel_gap_tol;

    if ((-w_.cx > 0.0 || -w_.hz >= -abstol) && w_.pres < feastol && w_.dres < feastol &&
        (w_.gap < abstol || (w_.relgap.has_value() && *w_.relgap < reltol))) {
      return Exit::optimal;
    }
    if (w_.dinfres.has_value() && *w_.dinfres < feastol && w_.tau < w_.kap) {
      return Exit::dual_infeasible;
    }
    if (w_.pinfres.has_value() && *w_.pinfres < feastol &&
        (w_.tau < w_.kap || (w_.tau < feastol && w_.kap < feastol))) {
      return Exit::primal_infeasible;
    }
    return Exit::none;
  }

  bool is_better(const Iterate& a, const Iterate& b) const {
    if (a.pinfres.has_value() && a.kapovert > 1.0) {
      if (b.pinfres.has_value()) {
        return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && *a.pinfres > 0.0 &&
               *a.pinfres < b.pres && a.mu > 0.0 && a.mu < b.mu;
      }
      return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.mu > 0.0 && a.mu < b.mu;
    }
    return a.gap > 0.0 && b.gap > 0.0 && a.gap < b.gap && a.pres > 0.0 && a.pres < b.pres &&
           a.dres > 0.0 && a.dres < b.dres && a.kapovert > 0.0 && a.kapovert < b.kapovert &&
           a.mu > 0.0 && a.mu < b.mu;
  }

  /// Largest step in [kStepMin, kStepMax] keeping (lambda + alpha*ds,
  /// lambda + alpha*dz, tau + alpha*dtau, kap + alpha*dkap) in the cone.
  /// ds and dz are given in scaled space (W^-1 ds and W dz).
  double line_search(const Eigen::VectorXd& ds, const Eigen::VectorXd& dz, double tau,
                     double dtau, double kap, double dkap) const {
    double alpha = 10.0;
    if (ml_ > 0) {
      const double rho_min = ds.head(ml_).cwiseQuotient(w_.lambda.head(ml_)).minCoeff();
      const double sig_min = dz.head(ml_).cwiseQuotient(w_.lambda.head(ml_)).minCoeff();
      constexpr double eps = 1e-13;
      if (-sig_min > -rho_min) {
        alpha = sig_min < 0.0 ? 1.0 / -sig_min : 1.0 / eps;
      } else {
        alpha = rho_min < 0.0 ? 1.0 / -rho_min : 1.0 / eps;
      }
    }

    const double tau_limit = -tau / dtau;
    const double kap_limit = -kap / dkap;
    if (tau_limit > 0.0 && tau_limit < alpha) alpha = tau_limit;
    if (kap_limit > 0.0 && kap_limit < alpha) alpha = kap_limit;

    for (std::size_t j = 0; j < soc_.size(); ++j) {
      const int at = soc_start_[j], d = soc_[j];
      const double lk0 = w_.lambda(at);
      const auto lk1 = w_.lambda.segment(at + 1, d - 1);
      const double lknorm2 = lk0 * lk0 - lk1.squaredNorm();
      if (lknorm2 <= 0.0) continue;
      const double lknorm = std::sqrt(lknorm2);
      const double lkbar0 = lk0 / lknorm;
      const Eigen::VectorXd lkbar1 = lk1 / lknorm;

      auto block_limit = [&](const Eigen::VectorXd& dir) {
        const double lkbar_dot = lkbar0 * dir(at) - lkbar1.dot(dir.segment(at + 1, d - 1));
        const double rho0 = lkbar_dot / lknorm;
        const double factor = (lkbar_dot + dir(at)) / (lkbar0 + 1.0);
        const double rho1norm =
            (dir.segment(at + 1, d - 1) - factor * lkbar1).norm() / lknorm;
        return rho1norm - rho0;
      };
      const double conic_step = std::max({0.0, block_limit(ds), block_limit(dz)});
      if (conic_step != 0.0) alpha = std::min(alpha, 1.0 / conic_step);
    }

    return std::clamp(alpha, kStepMin, kStepMax);
  }

  // problem data
  Eigen::VectorXd c_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd h_;
  ConeSettings st_;
  int nx_ = 0, ml_ = 0, m_ = 0;
  std::vector<int> soc_;
  std::vector<int> soc_start_;

  // scalings
  Eigen::VectorXd lp_v_, lp_w_;
  std::vector<Scaling> socs_;
  double delta_ = kDeltaStat;

  // KKT
  Eigen::MatrixXd WinvsqG_;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;

  // iterates and residuals
  Iterate w_, best_;
  bool have_best_ = false;
  Eigen::VectorXd rx_, rz_;
  double rt_ = 0.0, hresx_ = 0.0, hresz_ = 0.0;
  double nx_norm_ = 0.0, nz_norm_ = 0.0, ns_norm_ = 0.0;
  double resx0_ = 1.0, resz0_ = 1.0;
};

}  // namespace detail

inline ConeSolution solve_cone_program(const ConeProgram& prog, const ConeSettings& settings = {}) {
  validate(prog);
  detail::HsdeSolver solver(prog, settings);
  return solver.run();
}

}  // namespace relaynet
