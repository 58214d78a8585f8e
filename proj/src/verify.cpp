#include "krflab/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <numbers>
#include <thread>

#include "krflab/bergman.hpp"
#include "krflab/error.hpp"
#include "krflab/green.hpp"

namespace krf {
namespace {

using std::numbers::pi;

struct Sample {
  double t;
  MetricState state;
};

std::vector<Sample> samples_at(const FlowTrajectory& traj, const std::vector<double>& times) {
  std::vector<Sample> out;
  for (double t : times) {
    if (t > traj.t_end() + 1e-12) continue;
    if (const Snapshot* s = traj.snapshot_at(t)) {
      out.push_back({t, s->state});
    } else {
      out.push_back({t, traj.state_at(t)});
    }
  }
  return out;
}

// f_s = psi(s) - psi(0) at the nodes
Eigen::VectorXd potential_change(const FlowTrajectory& traj, const MetricState& st) {
  return traj.grid->to_nodal(st.f_modal() - traj.psi0);
}

double lp_norm(const MetricState& st, const Eigen::VectorXd& v, double p) {
  return std::pow(integrate(st, Eigen::VectorXd(v.cwiseAbs().array().pow(p).matrix())), 1.0 / p);
}

struct Context {
  const FlowTrajectory& traj;
  const VerifyOptions& opts;
  std::vector<Sample> dyadic;  // t = 2^-k
  std::vector<Sample> late;    // t in {1/2, 3/4, 1}
  double r_min0;
};

using CheckFn = std::function<void(const Context&, Check&)>;

struct CheckDef {
  const char* name;
  const char* anchor;
  CheckFn fn;
};

void scalar_lower_bound(const Context& c, Check& ck) {
  double lo = c.r_min0;
  for (const auto& s : c.traj.steps) lo = std::min(lo, s.r_min);
  ck.value = lo;
  ck.bound = std::min(0.0, c.r_min0);
  ck.has_bound = true;
  ck.values["r_min0"] = c.r_min0;
  ck.pass = lo >= ck.bound - c.opts.slack_abs;
}

void rmin_decay(const Context& c, Check& ck) {
  ck.has_bound = true;
  ck.bound = 0.0;
  if (!(c.r_min0 > 0.0)) {
    ck.applicable = false;
    ck.value = 0.0;
    ck.pass = true;
    return;
  }
  const double horizon = std::min(c.r_min0, c.traj.t_end());
  double margin = 0.0;
  for (const auto& s : c.traj.steps) {
    if (s.t <= horizon) margin = std::min(margin, s.r_min - (c.r_min0 - 0.25 * s.t));
  }
  ck.value = margin;
  ck.values["horizon"] = horizon;
  ck.pass = margin >= -c.opts.slack_abs;
}

void u_lower_bound(const Context& c, Check& ck) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : c.dyadic) lo = std::min(lo, s.state.u().minCoeff());
  for (const auto& s : c.late) lo = std::min(lo, s.state.u().minCoeff());
  ck.value = -lo;
  ck.values["min_u"] = lo;
  ck.pass = std::isfinite(lo);
}

void gradient_estimate(const Context& c, Check& ck) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& s : c.dyadic) lo = std::min(lo, s.state.u().minCoeff());
  const double b = 1.0 - lo;  // u + B >= 1
  double h = 0.0, k = 0.0;
  for (const auto& s : c.dyadic) {
    const ScalarField u(s.state.grid(), s.state.u());
    const Eigen::VectorXd g = gradient_field(s.state, u).values();
    const Eigen::VectorXd lap = laplacian(s.state, u).values();
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double base = u[i] + b;
      h = std::max(h, g(i) / base);
      k = std::max(k, -lap(i) / base);
    }
  }
  ck.value = h;
  ck.values["B"] = b;
  ck.values["K"] = k;
  ck.pass = std::isfinite(h) && std::isfinite(k);
}

void quadratic_growth(const Context& c, Check& ck) {
  double best = 0.0;
  for (const auto& s : c.dyadic) {
    const Eigen::VectorXd& u = s.state.u();
    Eigen::Index imin = 0;
    for (Eigen::Index i = 1; i < u.size(); ++i) {
      if (u(i) < u(imin)) imin = i;
    }
    const Eigen::VectorXd d = meridian_distances_from(s.state, s.state.grid()->nodes()[imin]);
    const Eigen::VectorXd g = gradient_field(s.state, ScalarField(s.state.grid(), u)).values();
    const Eigen::VectorXd& r = s.state.curvature();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double q = std::max({u(i), r(i), g(i)});
      best = std::max(best, q / (d(i) * d(i) + 1.0));
    }
  }
  ck.value = best;
  ck.pass = std::isfinite(best);
}

void h_upper_bound(const Context& c, Check& ck) {
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : c.dyadic) hi = std::max(hi, s.state.h().maxCoeff());
  ck.value = hi;
  ck.values["h0_max"] = c.traj.state_at(0.0).h().maxCoeff();
  ck.pass = std::isfinite(hi);
}

void potential_bounds(const Context& c, Check& ck) {
  double c_sqrt = 0.0, c_lower = 0.0, c_upper = 0.0;
  for (const auto& s : c.dyadic) {
    if (s.t <= 0.0) continue;
    const Eigen::VectorXd fs = potential_change(c.traj, s.state);
    c_sqrt = std::max(c_sqrt, fs.cwiseAbs().maxCoeff() / std::sqrt(s.t));
    c_lower = std::max(c_lower, -fs.minCoeff() / std::expm1(s.t));
    c_upper = std::max(c_upper, fs.maxCoeff() / std::exp(s.t));
  }
  ck.value = c_sqrt;
  ck.values["C_lower"] = c_lower;
  ck.values["C_upper"] = c_upper;
  ck.pass = std::isfinite(c_sqrt) && std::isfinite(c_lower) && std::isfinite(c_upper);
}

void cs_bound(const Context& c, Check& ck) {
  const auto series = c_s_series(c.traj);
  double resid = 0.0;
  for (const auto& s : series) resid = std::max(resid, s.residual);
  ck.value = fit_cs_constant(series);
  ck.values["max_residual"] = resid;
  ck.pass = std::isfinite(ck.value) && resid <= 1e-6;
}

void hermitian_equivalence(const Context& c, Check& ck) {
  double sup = 0.0;
  for (double s : {0.5, 1.0}) {
    if (s > c.traj.t_end() + 1e-12) continue;
    sup = std::max(sup, hermitian_log_ratio(c.traj, s).sup_abs());
  }
  ck.value = sup;
  ck.values["equivalence_constant"] = std::exp(sup);
  ck.pass = std::isfinite(sup);
}

void h_lp_bounds(const Context& c, Check& ck) {
  double worst = 0.0;
  for (double p : {1.0, 2.0, 4.0, 8.0}) {
    double m = 0.0;
    for (const auto& s : c.dyadic) m = std::max(m, lp_norm(s.state, s.state.h(), p));
    ck.values["p" + std::to_string(static_cast<int>(p))] = m;
    worst = std::max(worst, m);
  }
  ck.value = ck.values["p8"];
  ck.pass = std::isfinite(worst);
}

void abs_curvature_integral(const Context& c, Check& ck) {
  const double c0 = std::max(0.0, -c.r_min0);
  double hi = 0.0;
  for (const auto& s : c.dyadic) hi = std::max(hi, integrate(s.state, Eigen::VectorXd(s.state.curvature().cwiseAbs())));
  ck.value = hi;
  ck.bound = kVolume + 2.0 * c0 * kVolume;
  ck.has_bound = true;
  ck.pass = hi <= ck.bound + c.opts.conservation_tol;
}

void gradient_spacetime(const Context& c, Check& ck) {
  // trapezoid over the accepted knots in [0, 1]
  double total = 0.0;
  double t_prev = 0.0, q_prev = 0.0;
  bool first = true;
  for (double t : c.traj.knot_t) {
    if (t > 1.0 + 1e-12) break;
    const MetricState st = c.traj.state_at(t);
    const ScalarField u(st.grid(), st.u());
    const double q = integrate(st, gradient_field(st, u).values());
    if (!first) total += 0.5 * (t - t_prev) * (q + q_prev);
    first = false;
    t_prev = t;
    q_prev = q;
  }
  const GreenChain chain = green_mean_chain(c.traj.state_at(0.0));
  ck.value = total;
  ck.values["mean_u"] = chain.lhs;
  ck.values["green_bound"] = chain.rhs;
  ck.values["identity_residual"] = chain.identity_residual;
  ck.pass = std::isfinite(total) && chain.holds && std::abs(chain.identity_residual) <= 1e-6;
}

void ricci_l4(const Context& c, Check& ck) {
  double hi = 0.0;
  for (const auto& s : c.late) {
    hi = std::max(hi, integrate(s.state, Eigen::VectorXd(s.state.curvature().array().pow(4.0).matrix())));
  }
  ck.value = hi;
  ck.pass = std::isfinite(hi);
}

void diameter(const Context& c, Check& ck) {
  double hi = 0.0;
  for (const auto& s : c.late) hi = std::max(hi, diameter_proxy(s.state));
  ck.value = hi;
  ck.pass = std::isfinite(hi);
}

void blowup_shape(const Context& c, Check& ck) {
  const double e = (c.opts.n0 + 2.0) / 2.0;
  double cr = 0.0, cg = 0.0;
  for (const auto& s : c.dyadic) {
    if (s.t <= 0.0) continue;
    const double w = std::pow(s.t, e);
    cr = std::max(cr, s.state.curvature().cwiseAbs().maxCoeff() * w);
    const ScalarField u(s.state.grid(), s.state.u());
    cg = std::max(cg, gradient_field(s.state, u).max() * w);
  }
  ck.value = cr;
  ck.values["C_grad_u"] = cg;
  ck.values["exponent"] = e;
  ck.pass = std::isfinite(cr) && std::isfinite(cg);
}

void volume(const Context& c, Check& ck) {
  double worst = 0.0;
  for (const auto& s : c.traj.steps) worst = std::max(worst, s.vol_error);
  ck.value = worst;
  ck.bound = c.opts.conservation_tol;
  ck.has_bound = true;
  ck.pass = worst <= ck.bound;
}

void gauss_bonnet(const Context& c, Check& ck) {
  double worst = 0.0;
  for (const auto& s : c.traj.steps) worst = std::max(worst, s.gb_error);
  ck.value = worst;
  ck.bound = c.opts.conservation_tol;
  ck.has_bound = true;
  ck.pass = worst <= ck.bound;
}

const std::vector<CheckDef>& registry() {
  static const std::vector<CheckDef> defs{
      {"a_scalar_lower_bound", "R(x,t) >= min(R_min(0), 0)", scalar_lower_bound},
      {"b_rmin_decay", "R_min(s) >= R0 - s/4 for s <= R0", rmin_decay},
      {"c_u_lower_bound", "u uniformly bounded below", u_lower_bound},
      {"d_gradient_estimate", "|grad u|^2 <= H (u + B), -Delta u <= K (u + B)", gradient_estimate},
      {"e_quadratic_growth", "u, R, |grad u|^2 <= C (d(x, x_min)^2 + 1)", quadratic_growth},
      {"f_h_upper_bound", "h <= C", h_upper_bound},
      {"g_potential_bounds", "|f_s| <= C sqrt(s), C (1 - e^s) <= f_s <= C e^s", potential_bounds},
      {"h_cs_bound", "|c_s| <= C (e^s - 1)", cs_bound},
      {"i_hermitian_equivalence", "H_omega and H_omega_s are equivalent", hermitian_equivalence},
      {"j_h_lp_bounds", "||h_s||_{L^p} <= C_p, p = 1, 2, 4, 8", h_lp_bounds},
      {"k_abs_curvature_integral", "int |R| dmu <= V + 2 C0 V", abs_curvature_integral},
      {"l_gradient_spacetime", "int_0^1 int |grad u|^2 dmu dt, Green mean bound", gradient_spacetime},
      {"m_ricci_l4", "int |Ric|^4 dmu <= C on [1/2, 1]", ricci_l4},
      {"n_diameter", "diam <= D on [1/2, 1]", diameter},
      {"o_blowup_shape", "sup |R|, sup |grad u|^2 <= C t^{-(n0+2)/2}", blowup_shape},
      {"p_volume", "|Vol - 4 pi| at every accepted step", volume},
      {"q_gauss_bonnet", "|int R dmu - 4 pi| at every accepted step", gauss_bonnet},
  };
  return defs;
}

double relative_change(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-12});
  return std::abs(a - b) / scale;
}

}  // namespace

bool VerificationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* VerificationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::vector<std::string> check_names() {
  std::vector<std::string> out;
  for (const auto& d : registry()) out.emplace_back(d.name);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> verification_times() {
  auto t = dyadic_times();
  t.push_back(0.75);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

VerificationReport run_checks(const FlowTrajectory& traj, const VerifyOptions& opts) {
  VerificationReport rep;
  rep.meta.modes = traj.grid ? traj.grid->modes() : 0;
  rep.meta.t_end = traj.t_end();
  const auto known = check_names();
  for (const auto& name : opts.enabled) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw Error(ErrorCode::ConfigError, "unknown check " + name);
    }
  }

  std::vector<double> dy{0.0};
  for (double t : dyadic_times()) dy.push_back(t);
  const bool covers = traj.t_end() >= 1.0 - 1e-12;
  std::optional<Context> ctx;
  std::string setup_error;
  if (!covers) {
    setup_error = "trajectory does not cover [0, 1]";
  } else {
    try {
      ctx.emplace(Context{traj, opts, samples_at(traj, dy), samples_at(traj, {0.5, 0.75, 1.0}),
                          traj.state_at(0.0).curvature().minCoeff()});
    } catch (const Error& e) {
      setup_error = e.what();
    }
  }

  for (const auto& def : registry()) {
    if (!opts.enabled.empty() && !opts.enabled.contains(def.name)) continue;
    Check ck;
    ck.name = def.name;
    ck.anchor = def.anchor;
    if (!ctx) {
      ck.error = setup_error;
    } else {
      try {
        def.fn(*ctx, ck);
      } catch (const Error& e) {
        ck.pass = false;
        ck.error = e.what();
      }
      bool finite = std::isfinite(ck.value);
      for (const auto& [k, v] : ck.values) finite = finite && std::isfinite(v);
      if (!finite && ck.error.empty()) {
        ck.pass = false;
        ck.error = "non-finite value";
      }
    }
    rep.checks.push_back(std::move(ck));
  }
  std::sort(rep.checks.begin(), rep.checks.end(), [](const Check& a, const Check& b) { return a.name < b.name; });
  return rep;
}

Eigen::VectorXd refine_modal(const Eigen::VectorXd& modal, int modes) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(modes);
  const Eigen::Index n = std::min<Eigen::Index>(modal.size(), modes);
  out.head(n) = modal.head(n);
  return out;
}

VerificationReport run_checks_refined(const MetricState& initial, const StepController& ctrl,
                                      const VerifyOptions& opts) {
  return run_checks_refined(run(initial, 1.0, ctrl, verification_times()), ctrl, opts);
}

VerificationReport run_checks_refined(const FlowTrajectory& base, const StepController& ctrl,
                                      const VerifyOptions& opts) {
  const auto times = verification_times();
  const MetricState initial = base.state_at(0.0);
  VerificationReport rep = run_checks(base, opts);
  rep.meta.dt_init = ctrl.dt_init;
  rep.meta.dt_max = ctrl.dt_max;
  rep.meta.tol = ctrl.tol;

  const int fine_modes = 2 * initial.grid()->modes();
  StepController fine = ctrl;
  fine.dt_init *= 0.5;
  fine.dt_max *= 0.5;
  fine.dt_min = std::min(fine.dt_min, fine.dt_init);
  try {
    const MetricState fine_init =
        MetricState::from_modal(Grid::make(fine_modes), refine_modal(initial.f_modal(), fine_modes), initial.tolerances());
    const FlowTrajectory ft = run(fine_init, 1.0, fine, times);
    const VerificationReport fr = run_checks(ft, opts);
    for (auto& ck : rep.checks) {
      const Check* other = fr.find(ck.name);
      if (!other || !ck.applicable) continue;
      ck.refined = true;
      ck.stability = relative_change(ck.value, other->value);
      // conservation errors and signed margins are compared against their bounds, not each other
      if (ck.has_bound && (ck.name == "p_volume" || ck.name == "q_gauss_bonnet" || ck.name == "b_rmin_decay" ||
                           ck.name == "a_scalar_lower_bound")) {
        ck.stable = other->pass == ck.pass;
      } else {
        ck.stable = ck.stability <= opts.stability_tol;
      }
    }
  } catch (const Error& e) {
    for (auto& ck : rep.checks) {
      ck.refined = false;
      ck.stable = false;
      if (ck.error.empty()) ck.error = std::string("refined run failed: ") + e.what();
    }
  }
  return rep;
}

BlowupFit fit_blowup(const std::vector<double>& t, const std::vector<double>& q) {
  if (t.size() != q.size()) throw Error(ErrorCode::RangeError, "sample length mismatch");
  if (t.size() < 4) throw Error(ErrorCode::InsufficientSamples, "need at least 4 dyadic samples");
  BlowupFit fit;
  fit.samples = static_cast<int>(t.size());
  const double qmax = *std::max_element(q.begin(), q.end());
  if (!(qmax > 1e-12)) {
    fit.alpha = 0.0;
    fit.c = std::max(qmax, 0.0);
    return fit;
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double x = -std::log(t[i]);
    const double y = std::log(std::max(q[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  fit.alpha = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) fit.c = std::max(fit.c, q[i] * std::pow(t[i], fit.alpha));
  return fit;
}

std::vector<MemberBlowup> blowup_exponent(const std::vector<const FlowTrajectory*>& trajs) {
  std::vector<MemberBlowup> out;
  for (const FlowTrajectory* traj : trajs) {
    std::vector<double> t, qr, qg;
    for (const auto& s : traj->snapshots) {
      if (!(s.t > 0.0)) continue;
      int e = 0;
      if (std::frexp(s.t, &e) != 0.5) continue;
      t.push_back(s.t);
      qr.push_back(s.state.curvature().cwiseAbs().maxCoeff());
      qg.push_back(s.diag.sup_grad_u_sq);
    }
    out.push_back({fit_blowup(t, qr), fit_blowup(t, qg)});
  }
  return out;
}

void EnsembleSpec::validate() const {
  if (count < 1) throw Error(ErrorCode::ConfigError, "ensemble.count must be at least 1");
  if (!(r0 > 0.0 && r0 < 1.0)) throw Error(ErrorCode::ConfigError, "ensemble.R0 must lie in (0, 1)");
  if (!(roughness >= 0.0 && roughness <= 1.0)) throw Error(ErrorCode::ConfigError, "ensemble.roughness must lie in [0, 1]");
  if (!(horizon > 0.0)) throw Error(ErrorCode::ConfigError, "flow horizon must be positive");
  if (modes < 8) throw Error(ErrorCode::ConfigError, "grid.modes must be at least 8");
  for (int l : levels) {
    if (l < 1) throw Error(ErrorCode::ConfigError, "Bergman levels must be positive");
  }
  ctrl.validate();
}

CurvatureProfile sample_profile(std::mt19937_64& rng, double r0, double roughness) {
  const int kmax = 4 + static_cast<int>(std::lround(12.0 * roughness));
  const double decay = 2.0 - 1.5 * roughness;
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> depth(0.3, 1.0);
  std::vector<double> g(kmax + 1, 0.0);
  for (int k = 2; k <= kmax; ++k) g[k] = nd(rng) / std::pow(k - 1.0, decay);
  const double target = depth(rng);
  // the P0 and P1 coefficients carry the closure conditions, so only the shape is rescaled
  double lo = 0.0;
  constexpr int dense = 2001;
  for (int i = 0; i < dense; ++i) {
    const double tau = -1.0 + 2.0 * i / (dense - 1.0);
    double v = 0.0, p0 = 1.0, p1 = tau;
    for (int k = 2; k <= kmax; ++k) {
      const double p2 = ((2.0 * k - 1.0) * tau * p1 - (k - 1.0) * p0) / k;
      v += g[k] * p2;
      p0 = p1;
      p1 = p2;
    }
    lo = std::min(lo, v);
  }
  const double scale = lo < 0.0 ? target * 0.98 * (1.0 - r0) / -lo : 1.0;
  std::vector<double> coeffs(kmax + 1, 0.0);
  coeffs[0] = 1.0;
  for (int k = 2; k <= kmax; ++k) coeffs[k] = scale * g[k];
  return CurvatureProfile::from_coefficients(std::move(coeffs), r0);
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<EnsembleMember> run_ensemble(const EnsembleSpec& spec) {
  spec.validate();
  std::vector<EnsembleMember> members(spec.count);
  const GridPtr grid = Grid::make(spec.modes);
  auto times = verification_times();
  std::erase_if(times, [&](double t) { return t > spec.horizon; });
  parallel_for(spec.count, spec.threads, [&](int i) {
    EnsembleMember& m = members[i];
    m.index = i;
    try {
      std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                        static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      MetricState init = round_state(grid);
      if (!spec.round_members) {
        const CurvatureProfile prof = sample_profile(rng, spec.r0, spec.roughness);
        m.profile = prof.coefficients();
        init = state_from_curvature_profile(prof, grid);
      }
      m.traj = run(init, spec.horizon, spec.ctrl, times);
      m.min_curvature = init.curvature().minCoeff();
      for (const auto& s : m.traj.steps) m.min_curvature = std::min(m.min_curvature, s.r_min);
    } catch (const Error& e) {
      m.error = e.what();
    }
  });
  return members;
}

EnsembleTable ensemble_scan(const EnsembleSpec& spec) { return ensemble_scan(spec, run_ensemble(spec)); }

EnsembleTable ensemble_scan(const EnsembleSpec& spec, const std::vector<EnsembleMember>& members) {
  EnsembleTable table;
  std::vector<std::vector<EnsembleRow>> rows(members.size());
  std::vector<std::string> errors(members.size());
  parallel_for(static_cast<int>(members.size()), spec.threads, [&](int i) {
    const EnsembleMember& m = members[i];
    if (!m.error.empty()) {
      errors[i] = m.error;
      return;
    }
    try {
      const MetricState s0 = m.traj.state_at(0.0);
      const double half = std::min(0.5, m.traj.t_end());
      const double end = m.traj.t_end();
      const MetricState sh = m.traj.state_at(half);
      const MetricState s1 = m.traj.state_at(end);
      double herm = 0.0;
      for (double s : {half, end}) herm = std::max(herm, hermitian_log_ratio(m.traj, s).sup_abs());
      for (int l : spec.levels) {
        EnsembleRow row;
        row.member = m.index;
        row.level = l;
        BergmanOptions bo;
        bo.max_level = std::max(bo.max_level, l);
        row.inf_rho0 = bergman_kernel(s0, l, HermitianChoice::Potential, bo).rho.min();
        row.inf_rho_half = bergman_kernel(sh, l, HermitianChoice::Potential, bo).rho.min();
        row.inf_rho1 = bergman_kernel(s1, l, HermitianChoice::Potential, bo).rho.min();
        const auto [lo_h, hi_h] = kernel_ratio(sh, s0, l, bo);
        const auto [lo_1, hi_1] = kernel_ratio(s1, s0, l, bo);
        row.ratio_min = std::min(lo_h, lo_1);
        row.ratio_max = std::max(hi_h, hi_1);
        row.sup_log_hermitian = herm;
        rows[i].push_back(row);
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (!errors[i].empty()) {
      table.failures.emplace_back(static_cast<int>(i), errors[i]);
      continue;
    }
    for (auto& r : rows[i]) table.rows.push_back(r);
    // every sampled member starts with K >= r0 > 0
    if (members[i].min_curvature < -1e-6) table.curvature_sign_preserved = false;
  }
  for (int l : spec.levels) {
    EnsembleSummary s;
    s.level = l;
    s.min_inf_rho0 = std::numeric_limits<double>::infinity();
    s.min_inf_rho1 = std::numeric_limits<double>::infinity();
    for (const auto& r : table.rows) {
      if (r.level != l) continue;
      ++s.members;
      s.min_inf_rho0 = std::min(s.min_inf_rho0, r.inf_rho0);
      s.min_inf_rho1 = std::min(s.min_inf_rho1, r.inf_rho1);
    }
    if (s.members == 0) s.min_inf_rho0 = s.min_inf_rho1 = 0.0;
    table.summary.push_back(s);
  }
  return table;
}

}  // namespace krf
