#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "freqchoice/data.hpp"
#include "freqchoice/linalg.hpp"
#include "freqchoice/model.hpp"
#include "freqchoice/numeric.hpp"
#include "freqchoice/philox.hpp"
#include "freqchoice/types.hpp"

namespace freqchoice {

struct FitStats {
  double aic = 0.0;
  double bic = 0.0;
  double rho_squared = 0.0;
};

// Penalized-likelihood criteria and the likelihood-ratio index
// 1 - LL/LL_null. BIC uses the standard -2 LL + k ln n form.
inline FitStats fit_statistics(double ll_convergence, double ll_null,
                               std::size_t k, std::size_t n) {
  numeric::require_finite(ll_convergence, "ll_convergence");
  numeric::require_finite(ll_null, "ll_null");
  if (n < 1) throw DataError("fit statistics require n >= 1");
  if (ll_null == 0.0) {
    throw NumericError("rho-squared is undefined when the null log-likelihood is zero");
  }
  FitStats s;
  s.aic = 2.0 * static_cast<double>(k) - 2.0 * ll_convergence;
  s.bic = -2.0 * ll_convergence +
          static_cast<double>(k) * std::log(static_cast<double>(n));
  s.rho_squared = 1.0 - ll_convergence / ll_null;
  return s;
}

struct EstimateOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // scaled by max(1, |LL|)
  double step_tolerance = 1e-10;
  int starts = 1;          // extra starts perturb the init deterministically
  std::uint64_t seed = 0;  // stream for the multi-start perturbations
  int threads = 0;         // 0: FREQCHOICE_THREADS if set, else 1
  bool compute_se = true;
  std::optional<double> null_ll;  // externally supplied baseline, skips fit_null
};

struct FitResult {
  ModelSpec spec;
  ParamSet params;                   // constrained view of the optimum
  std::vector<double> unconstrained;
  std::vector<std::string> labels;   // aligned to unconstrained
  double ll_convergence = 0.0;
  double ll_null = 0.0;
  std::vector<double> se;       // aligned to unconstrained; NaN when unavailable
  std::vector<double> t_stats;  // unconstrained estimate / se
  bool se_available = false;
  std::string se_note;
  std::size_t k = 0;
  std::size_t n = 0;
  FitStats stats;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  int best_start = 0;
  bool used_fd_gradient = false;
  std::vector<std::string> warnings;
  // Natural-scale report with delta-method standard errors.
  std::vector<std::string> constrained_labels;
  std::vector<double> constrained_values;
  std::vector<double> constrained_se;
};

namespace detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FREQCHOICE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

// Log-likelihood of a prepared model as a callable over the unconstrained
// vector. Per-observation terms land in fixed slots and chunk partials
// combine in index order, so the result is bit-identical for any worker
// count. Numeric failures (zero probabilities, overflowed intermediates)
// surface as a -inf/NaN return, never as an exception.
class Objective {
 public:
  Objective(const PreparedModel& model, int threads)
      : model_(&model),
        threads_(std::max(1, threads)),
        n_(model.n()),
        nchunks_((model.n() + numeric::reduction_chunk - 1) /
                 numeric::reduction_chunk),
        terms_(model.n()),
        chunk_grads_(nchunks_) {}

  std::size_t dim() const { return model_->layout().size(); }
  void use_fd_gradient(bool v) { use_fd_ = v; }
  bool fd_gradient() const { return use_fd_; }

  double operator()(std::span<const double> x, double* grad) {
    if (grad && use_fd_) {
      const double f = raw(x, nullptr);
      if (!std::isfinite(f)) return f;
      std::vector<double> xp(x.begin(), x.end());
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
        xp[j] = x[j] + h;
        const double fp = raw(xp, nullptr);
        xp[j] = x[j] - h;
        const double fm = raw(xp, nullptr);
        xp[j] = x[j];
        grad[j] = (fp - fm) / (2.0 * h);
      }
      return f;
    }
    return raw(x, grad);
  }

  double raw(std::span<const double> x, double* grad) {
    const auto ws = model_->prepare(x);
    const std::size_t k = dim();
    std::atomic<bool> numeric_failure{false};
    std::exception_ptr eptr = nullptr;
    std::mutex eptr_mutex;
    auto run_worker = [&](std::size_t worker) {
      PreparedModel::Scratch scratch;
      try {
        for (std::size_t c = worker; c < nchunks_;
             c += static_cast<std::size_t>(threads_)) {
          double* g = nullptr;
          if (grad) {
            chunk_grads_[c].assign(k, 0.0);
            g = chunk_grads_[c].data();
          }
          const std::size_t lo = c * numeric::reduction_chunk;
          const std::size_t hi =
              std::min(n_, lo + numeric::reduction_chunk);
          for (std::size_t i = lo; i < hi; ++i) {
            terms_[i] = model_->log_prob(i, ws, scratch, g);
          }
          if (numeric_failure.load(std::memory_order_relaxed)) return;
        }
      } catch (const NumericError&) {
        numeric_failure.store(true, std::memory_order_relaxed);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(eptr_mutex);
        if (!eptr) eptr = std::current_exception();
      }
    };
    if (threads_ == 1 || nchunks_ <= 1) {
      run_worker(0);
    } else {
      std::vector<std::thread> pool;
      const int t_count =
          std::min<std::size_t>(static_cast<std::size_t>(threads_), nchunks_);
      pool.reserve(t_count);
      for (int w = 0; w < t_count; ++w) {
        pool.emplace_back(run_worker, static_cast<std::size_t>(w));
      }
      for (auto& t : pool) t.join();
    }
    if (eptr) std::rethrow_exception(eptr);
    if (numeric_failure.load()) return numeric::neg_inf;
    const double ll = numeric::chunked_sum(terms_);
    if (grad && std::isfinite(ll)) {
      std::fill(grad, grad + k, 0.0);
      for (std::size_t c = 0; c < nchunks_; ++c) {
        for (std::size_t j = 0; j < k; ++j) grad[j] += chunk_grads_[c][j];
      }
    }
    return ll;
  }

 private:
  const PreparedModel* model_;
  int threads_;
  std::size_t n_;
  std::size_t nchunks_;
  bool use_fd_ = false;
  std::vector<double> terms_;
  std::vector<std::vector<double>> chunk_grads_;
};

struct CoreResult {
  std::vector<double> x;
  double ll = numeric::neg_inf;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool divergence = false;
  bool line_search_failed = false;
};

inline double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// BFGS ascent on the log-likelihood with backtracking line search. The
// inverse-Hessian approximation lives in the minimization convention, so
// curvature pairs use the negated gradient difference.
inline CoreResult maximize(Objective& obj, std::vector<double> x,
                           const EstimateOptions& opt) {
  const std::size_t k = x.size();
  CoreResult res;
  std::vector<double> g(k), gnew(k), d(k), xnew(k), s(k), yf(k), t(k);
  std::vector<double> h(k * k, 0.0);
  auto reset_h = [&] {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) h[i * k + i] = 1.0;
  };
  reset_h();
  double f = obj(x, g.data());
  if (!std::isfinite(f)) {
    res.x = std::move(x);
    return res;  // caller treats non-finite ll as a failed start
  }
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    res.gradient_norm = inf_norm(g);
    if (res.gradient_norm <
        opt.gradient_tolerance * std::max(1.0, std::abs(f))) {
      res.converged = true;
      break;
    }
    // Ascent direction H g; fall back to the raw gradient if the
    // approximation has lost positive definiteness.
    bool steepest = false;
    for (std::size_t i = 0; i < k; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += h[i * k + j] * g[j];
      d[i] = acc;
    }
    double dg = 0.0;
    for (std::size_t i = 0; i < k; ++i) dg += d[i] * g[i];
    if (!(dg > 0.0)) {
      reset_h();
      d = g;
      dg = 0.0;
      for (std::size_t i = 0; i < k; ++i) dg += g[i] * g[i];
      steepest = true;
      if (dg == 0.0) {
        res.converged = true;
        break;
      }
    }
    double alpha = 1.0;
    double fnew = numeric::neg_inf;
    bool accepted = false;
    for (int retry = 0; retry < 2 && !accepted; ++retry) {
      alpha = 1.0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        for (std::size_t i = 0; i < k; ++i) xnew[i] = x[i] + alpha * d[i];
        fnew = obj(xnew, nullptr);
        if (std::isfinite(fnew) && fnew >= f + kArmijo * alpha * dg) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted && !steepest) {
        // One more attempt along the gradient itself.
        reset_h();
        d = g;
        dg = 0.0;
        for (std::size_t i = 0; i < k; ++i) dg += g[i] * g[i];
        steepest = true;
      } else {
        break;
      }
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    for (std::size_t i = 0; i < k; ++i) s[i] = alpha * d[i];
    fnew = obj(xnew, gnew.data());
    ++res.iterations;
    if (!std::isfinite(fnew)) {  // should not happen; bail out defensively
      res.line_search_failed = true;
      break;
    }
    if (fnew > f && inf_norm(xnew) > 50.0) res.divergence = true;
    // Curvature pair in minimization convention: y_F = g_old - g_new.
    for (std::size_t i = 0; i < k; ++i) yf[i] = g[i] - gnew[i];
    double sy = 0.0;
    for (std::size_t i = 0; i < k; ++i) sy += s[i] * yf[i];
    const double s_norm = inf_norm(s);
    const double y_norm = inf_norm(yf);
    if (sy > 1e-12 * std::max(1e-300, s_norm * y_norm) * k) {
      for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += h[i * k + j] * yf[j];
        t[i] = acc;
      }
      double yty = 0.0;
      for (std::size_t i = 0; i < k; ++i) yty += yf[i] * t[i];
      const double rho = 1.0 / sy;
      const double c2 = (1.0 + yty * rho) * rho;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          h[i * k + j] += c2 * s[i] * s[j] - rho * (s[i] * t[j] + t[i] * s[j]);
        }
      }
    }
    x.swap(xnew);
    g.swap(gnew);
    f = fnew;
    if (s_norm < opt.step_tolerance) {
      res.converged = true;
      res.gradient_norm = inf_norm(g);
      break;
    }
  }
  res.gradient_norm = inf_norm(g);
  res.x = std::move(x);
  res.ll = f;
  return res;
}

}  // namespace detail

// Total log-likelihood of a dataset under constrained parameters. A zero
// category probability makes the value -inf, reported as an error here.
inline double log_likelihood(const Dataset& data, const ModelSpec& spec,
                             const ParamSet& params, int threads = 0) {
  const ModelSpec v = validate_spec(spec);
  const ParamLayout layout = ParamLayout::for_spec(v);
  const std::vector<double> x = pack_parameters(params, layout);
  PreparedModel model(v, data);
  detail::Objective obj(model, detail::resolve_threads(threads));
  const double ll = obj.raw(x, nullptr);
  if (!std::isfinite(ll)) {
    throw NumericError(
        "log-likelihood is not finite: an observation has probability 0 "
        "under these parameters");
  }
  return ll;
}

struct StandardErrorReport {
  bool available = false;
  std::string note;
  std::vector<double> se;       // NaN-filled when unavailable
  std::vector<double> t_stats;  // NaN-filled when unavailable
  std::vector<double> covariance;  // k*k row-major; empty when unavailable
};

namespace detail {

// Observed-information standard errors via a central finite-difference
// Hessian (per-coordinate step 1e-4 * max(1, |x_j|)). When the analytic
// gradient is trusted the Hessian differences it; otherwise second
// differences of the log-likelihood itself are used.
inline StandardErrorReport standard_errors_impl(Objective& obj,
                                                std::span<const double> x) {
  const std::size_t k = x.size();
  StandardErrorReport rep;
  rep.se.assign(k, std::numeric_limits<double>::quiet_NaN());
  rep.t_stats.assign(k, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> hessian(k * k, 0.0);
  std::vector<double> xp(x.begin(), x.end());
  auto step = [&](std::size_t j) {
    return 1e-4 * std::max(1.0, std::abs(x[j]));
  };
  if (!obj.fd_gradient()) {
    std::vector<double> gp(k), gm(k);
    for (std::size_t j = 0; j < k; ++j) {
      const double h = step(j);
      xp[j] = x[j] + h;
      const double fp = obj(xp, gp.data());
      xp[j] = x[j] - h;
      const double fm = obj(xp, gm.data());
      xp[j] = x[j];
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.note = "log-likelihood not finite at a Hessian evaluation point";
        return rep;
      }
      for (std::size_t i = 0; i < k; ++i) {
        hessian[i * k + j] = (gp[i] - gm[i]) / (2.0 * h);
      }
    }
    // Symmetrize: the two off-diagonal estimates differ only by
    // finite-difference noise.
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = i + 1; j < k; ++j) {
        const double m = 0.5 * (hessian[i * k + j] + hessian[j * k + i]);
        hessian[i * k + j] = m;
        hessian[j * k + i] = m;
      }
    }
  } else {
    const double f0 = obj(x, nullptr);
    if (!std::isfinite(f0)) {
      rep.note = "log-likelihood not finite at the expansion point";
      return rep;
    }
    for (std::size_t i = 0; i < k; ++i) {
      const double hi = step(i);
      xp[i] = x[i] + hi;
      const double fp = obj(xp, nullptr);
      xp[i] = x[i] - hi;
      const double fm = obj(xp, nullptr);
      xp[i] = x[i];
      hessian[i * k + i] = (fp - 2.0 * f0 + fm) / (hi * hi);
      for (std::size_t j = i + 1; j < k; ++j) {
        const double hj = step(j);
        xp[i] = x[i] + hi;
        xp[j] = x[j] + hj;
        const double fpp = obj(xp, nullptr);
        xp[j] = x[j] - hj;
        const double fpm = obj(xp, nullptr);
        xp[i] = x[i] - hi;
        const double fmm = obj(xp, nullptr);
        xp[j] = x[j] + hj;
        const double fmp = obj(xp, nullptr);
        xp[i] = x[i];
        xp[j] = x[j];
        const double v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
        hessian[i * k + j] = v;
        hessian[j * k + i] = v;
      }
    }
  }
  // Observed information = negative Hessian of the log-likelihood.
  std::vector<double> info(k * k);
  for (std::size_t i = 0; i < k * k; ++i) info[i] = -hessian[i];
  auto cov = linalg::spd_inverse(info, k);
  if (!cov) {
    const auto eig = linalg::symmetric_eigenvalues(info, k);
    rep.note =
        "negative Hessian is not positive definite (smallest eigenvalue " +
        std::to_string(eig.empty() ? 0.0 : eig.front()) + ")";
    return rep;
  }
  rep.available = true;
  rep.covariance = std::move(*cov);
  for (std::size_t j = 0; j < k; ++j) {
    const double v = rep.covariance[j * k + j];
    rep.se[j] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    rep.t_stats[j] = x[j] / rep.se[j];
  }
  return rep;
}

inline bool gradient_self_check(Objective& obj, std::span<const double> x,
                                std::span<const double> analytic,
                                std::string* detail_out) {
  const double f0 = obj.raw(x, nullptr);
  std::vector<double> xp(x.begin(), x.end());
  std::vector<double> fd(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const double fp = obj.raw(xp, nullptr);
    xp[j] = x[j] - h;
    const double fm = obj.raw(xp, nullptr);
    xp[j] = x[j];
    fd[j] = (fp - fm) / (2.0 * h);
    if (!std::isfinite(fd[j])) return false;
  }
  // Relative to the gradient's overall scale; the additive floor covers
  // finite-difference cancellation noise, which grows with the objective's
  // magnitude (difference of two ~|LL| values over a 2e-7 step).
  const double scale =
      std::max({1.0, inf_norm(analytic), inf_norm(fd)});
  const double tol = 1e-5 * scale + 1e-7 * std::abs(f0);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (std::abs(fd[j] - analytic[j]) > tol) {
      if (detail_out) {
        *detail_out = "slot " + std::to_string(j) + ": analytic " +
                      std::to_string(analytic[j]) + " vs finite-difference " +
                      std::to_string(fd[j]);
      }
      return false;
    }
  }
  return true;
}

inline FitResult fit_impl(const Dataset& data, const ModelSpec& spec,
                          bool fix_sigma2, const std::optional<ParamSet>& init,
                          const EstimateOptions& opt, bool is_null_model) {
  const ParamLayout layout = ParamLayout::for_spec(spec, fix_sigma2);
  const std::size_t k = layout.size();
  const std::size_t n = data.n();
  if (n < k) {
    throw DataError("need at least as many observations (" +
                    std::to_string(n) + ") as free parameters (" +
                    std::to_string(k) + ")");
  }
  PreparedModel model(spec, data, fix_sigma2);
  Objective obj(model, resolve_threads(opt.threads));

  FitResult out;
  out.spec = spec;
  out.k = k;
  out.n = n;
  const ParamSet start_params =
      init ? *init : default_init(spec, layout, data);
  const std::vector<double> x0 = pack_parameters(start_params, layout);

  std::vector<double> g0(k);
  const double f0 = obj.raw(x0, g0.data());
  if (!std::isfinite(f0)) {
    throw NumericError("log-likelihood is not finite at the initial point");
  }
  if (k > 0) {
    std::string mismatch;
    if (!gradient_self_check(obj, x0, g0, &mismatch)) {
      obj.use_fd_gradient(true);
      out.used_fd_gradient = true;
      out.warnings.push_back(
          "analytic gradient failed its finite-difference self-check (" +
          mismatch + "); numerical gradients used instead");
    }
  }

  CoreResult best;
  bool have_best = false;
  bool divergence = false;
  const int starts = std::max(1, opt.starts);
  for (int s = 0; s < starts; ++s) {
    std::vector<double> xs = x0;
    if (s > 0) {
      // Later starts fan out further so a multimodal surface still gets
      // probes outside the default init's basin.
      const double spread = 0.25 * std::sqrt(static_cast<double>(s));
      for (std::size_t j = 0; j < k; ++j) {
        xs[j] += spread * philox::normal(opt.seed, static_cast<std::uint64_t>(s),
                                         static_cast<std::uint64_t>(j));
      }
      if (!std::isfinite(obj(xs, nullptr))) {
        out.warnings.push_back("start " + std::to_string(s) +
                               " skipped: log-likelihood not finite at its "
                               "perturbed initial point");
        continue;
      }
    }
    CoreResult r = maximize(obj, std::move(xs), opt);
    divergence = divergence || r.divergence;
    if (!have_best || r.ll > best.ll) {
      best = std::move(r);
      out.best_start = s;
      have_best = true;
    }
  }
  if (divergence) {
    out.warnings.push_back(
        "possible divergence/separation: a parameter exceeded magnitude 50 "
        "in unconstrained space while the log-likelihood kept improving");
  }
  if (best.line_search_failed) {
    out.warnings.push_back(
        "line search could not improve the objective further");
  }

  out.unconstrained = best.x;
  out.params = unpack_parameters(best.x, layout);
  out.labels = unconstrained_labels(spec, layout);
  out.ll_convergence = best.ll;
  out.converged = best.converged;
  out.iterations = best.iterations;
  out.gradient_norm = best.gradient_norm;

  if (opt.compute_se && out.converged && k > 0) {
    const StandardErrorReport se = standard_errors_impl(obj, best.x);
    out.se = se.se;
    out.t_stats = se.t_stats;
    out.se_available = se.available;
    out.se_note = se.note;
    const ConstrainedReport rep = constrained_report(best.x, spec, layout);
    out.constrained_labels = rep.labels;
    out.constrained_values = rep.values;
    out.constrained_se.assign(rep.values.size(),
                              std::numeric_limits<double>::quiet_NaN());
    if (se.available) {
      for (std::size_t i = 0; i < rep.jacobian.size(); ++i) {
        double var = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            var += rep.jacobian[i][a] * se.covariance[a * k + b] *
                   rep.jacobian[i][b];
          }
        }
        out.constrained_se[i] =
            var > 0.0 ? std::sqrt(var)
                      : std::numeric_limits<double>::quiet_NaN();
      }
    }
  } else {
    out.se.assign(k, std::numeric_limits<double>::quiet_NaN());
    out.t_stats.assign(k, std::numeric_limits<double>::quiet_NaN());
    out.se_available = false;
    out.se_note = out.converged ? "standard errors not requested"
                                : "fit did not converge";
    const ConstrainedReport rep = constrained_report(best.x, spec, layout);
    out.constrained_labels = rep.labels;
    out.constrained_values = rep.values;
    out.constrained_se.assign(rep.values.size(),
                              std::numeric_limits<double>::quiet_NaN());
  }

  if (opt.null_ll) {
    out.ll_null = *opt.null_ll;
  } else if (is_null_model) {
    out.ll_null = out.ll_convergence;
  } else {
    EstimateOptions null_opt = opt;
    null_opt.starts = 1;
    null_opt.compute_se = false;
    null_opt.null_ll.reset();
    const FitResult null_fit =
        fit_impl(data, null_spec(spec),
                 is_ordered_family(spec.family), std::nullopt, null_opt,
                 /*is_null_model=*/true);
    if (!null_fit.converged) {
      out.warnings.push_back(
          "null model did not converge; rho-squared uses its best value");
    }
    out.ll_null = null_fit.ll_convergence;
  }
  out.stats = fit_statistics(out.ll_convergence, out.ll_null, k, n);
  return out;
}

}  // namespace detail

// Quasi-Newton maximum likelihood: BFGS in unconstrained space with a
// backtracking line search, optional deterministic multi-start, and
// finite-difference observed-information standard errors.
inline FitResult fit(const Dataset& data, const ModelSpec& spec,
                     const std::optional<ParamSet>& init = std::nullopt,
                     const EstimateOptions& opt = {}) {
  return detail::fit_impl(data, validate_spec(spec), false, init, opt,
                          /*is_null_model=*/false);
}

// Constants/thresholds-only baseline of the same family; feeds rho-squared.
inline FitResult fit_null(const Dataset& data, const ModelSpec& spec,
                          const EstimateOptions& opt = {}) {
  const ModelSpec v = validate_spec(spec);
  EstimateOptions null_opt = opt;
  null_opt.null_ll.reset();
  return detail::fit_impl(data, null_spec(v),
                          is_ordered_family(v.family), std::nullopt, null_opt,
                          /*is_null_model=*/true);
}

// Standalone observed-information standard errors at a converged point.
inline StandardErrorReport standard_errors(const Dataset& data,
                                           const ModelSpec& spec,
                                           const ParamSet& params,
                                           int threads = 0) {
  const ModelSpec v = validate_spec(spec);
  const ParamLayout layout = ParamLayout::for_spec(v);
  const std::vector<double> x = pack_parameters(params, layout);
  PreparedModel model(v, data);
  detail::Objective obj(model, detail::resolve_threads(threads));
  std::vector<double> g(layout.size());
  const double f = obj.raw(x, g.data());
  if (!std::isfinite(f)) {
    throw NumericError("log-likelihood is not finite at the supplied point");
  }
  if (!detail::gradient_self_check(obj, x, g, nullptr)) {
    obj.use_fd_gradient(true);
  }
  return detail::standard_errors_impl(obj, x);
}

}  // namespace freqchoice
