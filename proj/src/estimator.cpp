#include "prelog/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "prelog/io.hpp"
#include "prelog/random.hpp"

namespace prelog {

PilotSet PilotSet::from_positions(const std::vector<int>& positions, const CVector& x) {
  PilotSet p;
  for (int pos : positions) {
    if (pos < 1 || pos > x.size()) {
      throw std::invalid_argument("pilot position " + std::to_string(pos) + " outside 1..N");
    }
    p.values[pos] = x(pos - 1);
  }
  return p;
}

double noisy_residual_bound(int n) {
  return std::sqrt(2.0 * n + 3.0 * std::sqrt(4.0 * n));
}

namespace {

struct Problem {
  const LinearFrontend& fe;
  const CVector& y;
  double sqrt_rho;
  std::vector<int> free_pos;  // 0-based symbol indices
  CVector x_fixed;            // pilots in place, zeros elsewhere
  int q;

  int unknowns() const { return q + static_cast<int>(free_pos.size()); }

  CVector symbols(const CVector& u) const {
    CVector x = x_fixed;
    for (std::size_t i = 0; i < free_pos.size(); ++i) {
      x(free_pos[i]) = u(q + static_cast<Eigen::Index>(i));
    }
    return x;
  }

  CVector residual(const CVector& u) const {
    return y - sqrt_rho * (fe.b(symbols(u)) * u.head(q));
  }

  // Complex Jacobian of the model sqrt(rho) B(x) s_hat (holomorphic in u).
  CMatrix jacobian(const CVector& u) const {
    const CVector x = symbols(u);
    const CVector gs = fe.gain * u.head(q);
    CMatrix j = CMatrix::Zero(fe.rows(), unknowns());
    j.leftCols(q) = sqrt_rho * fe.b(x);
    std::vector<int> column_of_symbol(x.size(), -1);
    for (std::size_t i = 0; i < free_pos.size(); ++i) {
      column_of_symbol[free_pos[i]] = q + static_cast<int>(i);
    }
    for (Eigen::Index r = 0; r < fe.rows(); ++r) {
      const int c = column_of_symbol[fe.symbol_of_row[r]];
      if (c >= 0) {
        j(r, c) = sqrt_rho * gs(r);
      }
    }
    return j;
  }
};

RMatrix realify(const CMatrix& j) {
  RMatrix out(2 * j.rows(), 2 * j.cols());
  out << j.real(), -j.imag(), j.imag(), j.real();
  return out;
}

RVector realify(const CVector& v) {
  RVector out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

CVector complexify(const RVector& v) {
  const Eigen::Index n = v.size() / 2;
  CVector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out(i) = cplx(v(i), v(n + i));
  }
  return out;
}

struct LmOutcome {
  CVector u;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

LmOutcome levenberg_marquardt(const Problem& prob, CVector u, const RecoveryOptions& opts) {
  LmOutcome out;
  CVector r = prob.residual(u);
  double f = r.squaredNorm();
  double lambda = opts.initial_damping;
  if (opts.keep_traces) {
    out.trace.push_back(f);
  }
  for (int it = 0; it < opts.max_iterations; ++it) {
    out.iterations = it + 1;
    const RMatrix jr = realify(prob.jacobian(u));
    const RVector rr = realify(r);
    const RVector g = jr.transpose() * rr;
    if (g.norm() < opts.grad_tol || f == 0.0) {
      break;
    }
    const RMatrix a = jr.transpose() * jr;
    RVector d = a.diagonal();
    const double floor = std::max(d.maxCoeff(), 1.0) * 1e-12;
    d = d.cwiseMax(floor);
    bool accepted = false;
    while (!accepted && lambda < 1e16) {
      RMatrix lhs = a;
      lhs.diagonal() += lambda * d;
      const RVector step = lhs.ldlt().solve(g);
      const CVector u_new = u + complexify(step);
      const CVector r_new = prob.residual(u_new);
      const double f_new = r_new.squaredNorm();
      if (std::isfinite(f_new) && f_new < f) {
        u = u_new;
        r = r_new;
        f = f_new;
        lambda = std::max(lambda * 0.3, 1e-15);
        accepted = true;
        if (opts.keep_traces) {
          out.trace.push_back(f);
        }
      } else {
        lambda *= 10.0;
        ++it;
        if (it >= opts.max_iterations) {
          break;
        }
      }
    }
    if (!accepted) {
      break;
    }
  }
  out.u = u;
  out.objective = f;
  return out;
}

}  // namespace

RecoveryResult recover_joint_oversampled(const BlockSpec& spec, const CVector& y_stacked,
                                         const PilotSet& pilots, double rho,
                                         const RecoveryOptions& opts) {
  const int n = spec.symbols();
  const int q = spec.q();
  if (q >= n) {
    throw SpecError("Q < N", "joint recovery needs Q < N");
  }
  if (y_stacked.size() != 2 * n) {
    throw std::invalid_argument("recover_joint_oversampled: y must have length 2N");
  }
  if (!pilots.contains(1)) {
    throw std::invalid_argument("recover_joint_oversampled: a pilot at position 1 is required");
  }
  if (std::abs(pilots.values.at(1)) < 1e-9) {
    throw std::invalid_argument("recover_joint_oversampled: degenerate pilot |x_1| < 1e-9");
  }
  if (!(rho > 0.0)) {
    throw std::invalid_argument("recover_joint_oversampled: rho must be positive");
  }
  const LinearFrontend fe = make_linear_frontend(spec, Frontend::Oversampled);
  Problem prob{fe, y_stacked, std::sqrt(rho), {}, CVector::Zero(n), q};
  for (const auto& [pos, val] : pilots.values) {
    if (pos < 1 || pos > n) {
      throw std::invalid_argument("pilot position " + std::to_string(pos) + " outside 1..N");
    }
    prob.x_fixed(pos - 1) = val;
  }
  for (int k = 0; k < n; ++k) {
    if (!pilots.contains(k + 1)) {
      prob.free_pos.push_back(k);
    }
  }

  auto pack = [&](const CVector& s_hat, const CVector& x) {
    CVector u(prob.unknowns());
    u.head(q) = s_hat;
    for (std::size_t i = 0; i < prob.free_pos.size(); ++i) {
      u(q + static_cast<Eigen::Index>(i)) = x(prob.free_pos[i]);
    }
    return u;
  };

  const double bound = opts.noisy ? noisy_residual_bound(n) : opts.tol_abs;
  RecoveryResult res;
  res.residual = std::numeric_limits<double>::infinity();
  const int total = static_cast<int>(opts.extra_starts.size()) + opts.n_starts;
  for (int s = 0; s < total; ++s) {
    CVector u0;
    if (s < static_cast<int>(opts.extra_starts.size())) {
      const auto& st = opts.extra_starts[s];
      if (st.s_hat.size() != q || st.x.size() != n) {
        throw std::invalid_argument("recover_joint_oversampled: start has wrong dimensions");
      }
      u0 = pack(st.s_hat, st.x);
    } else {
      Rng rng = make_rng(opts.seed, static_cast<std::uint64_t>(s));
      u0 = complex_normal_vector(rng, prob.unknowns());
    }
    LmOutcome lm = levenberg_marquardt(prob, u0, opts);
    StartOutcome so;
    so.s_hat = lm.u.head(q);
    so.x = prob.symbols(lm.u);
    so.residual = std::sqrt(lm.objective);
    so.iterations = lm.iterations;
    so.converged = so.residual <= bound;
    so.objective_trace = std::move(lm.trace);
    if (so.converged) {
      int cls = -1;
      for (std::size_t c = 0; c < res.class_representatives.size(); ++c) {
        if ((res.class_representatives[c] - lm.u).norm() < opts.cluster_tol) {
          cls = static_cast<int>(c);
          break;
        }
      }
      if (cls < 0) {
        cls = static_cast<int>(res.class_representatives.size());
        res.class_representatives.push_back(lm.u);
      }
      so.solution_class = cls;
    }
    if (so.residual < res.residual) {
      res.residual = so.residual;
      res.s_hat_est = so.s_hat;
      res.x_est = so.x;
      res.converged = so.converged;
      res.solution_class = so.solution_class;
    }
    res.starts.push_back(std::move(so));
  }
  res.n_starts_used = total;
  if (res.s_hat_est.size() > 0) {
    const CVector u = pack(res.s_hat_est, res.x_est);
    std::vector<long long> rounded;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      rounded.push_back(std::llround(u(i).real() * 1e6));
      rounded.push_back(std::llround(u(i).imag() * 1e6));
    }
    res.solution_digest = fnv1a_digest(rounded.data(), rounded.size() * sizeof(long long));
  }
  return res;
}

LinearRecovery recover_linear_symbol_rate(const BlockSpec& spec, const CVector& y,
                                          const PilotSet& pilots, double rho) {
  const int n = spec.symbols();
  const int q = spec.q();
  if (y.size() != n) {
    throw std::invalid_argument("recover_linear_symbol_rate: y must have length N");
  }
  if (pilots.size() < 1) {
    throw std::invalid_argument("recover_linear_symbol_rate: at least one pilot is required");
  }
  const CMatrix v = symbol_rate_basis(spec);
  CMatrix a(pilots.size(), q);
  CVector rhs(pilots.size());
  int row = 0;
  for (const auto& [pos, val] : pilots.values) {
    if (pos < 1 || pos > n) {
      throw std::invalid_argument("pilot position " + std::to_string(pos) + " outside 1..N");
    }
    a.row(row) = std::sqrt(rho) * val * v.row(pos - 1);
    rhs(row) = y(pos - 1);
    ++row;
  }
  Eigen::JacobiSVD<CMatrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  LinearRecovery out;
  out.unknowns = q;
  out.singular_values = svd.singularValues();
  const double smax = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
  svd.setThreshold(1e-10);
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) > 1e-10 * smax) {
      ++out.rank;
    }
  }
  out.s_est = svd.solve(rhs);
  out.null_space = svd.matrixV().rightCols(q - out.rank);
  out.residual = (a * out.s_est - rhs).norm();
  out.determined = out.rank == q;
  out.diagnosis = out.determined
                      ? "determined: rank " + std::to_string(out.rank) + " = Q"
                      : "rank deficient: rank " + std::to_string(out.rank) + " < Q = " +
                            std::to_string(q) + ", null space dimension " +
                            std::to_string(q - out.rank);
  return out;
}

MultiplicityReport multiplicity_probe(const BlockSpec& spec, const FadingCoeffs& truth,
                                      const CVector& x_truth, const PilotSet& pilots,
                                      int n_starts, std::uint64_t seed) {
  const BlockObservation obs = simulate_oversampled(spec, truth, x_truth, 1.0, nullptr);
  RecoveryOptions opts;
  opts.n_starts = n_starts;
  opts.seed = seed;
  opts.extra_starts.push_back({truth.s_hat, x_truth});
  const RecoveryResult res = recover_joint_oversampled(spec, obs.y, pilots, 1.0, opts);
  MultiplicityReport rep;
  rep.n_starts = res.n_starts_used;
  rep.classes = res.class_representatives;
  rep.distinct_solution_classes = static_cast<int>(res.class_representatives.size());
  for (const auto& s : res.starts) {
    rep.converged_starts += s.converged ? 1 : 0;
  }
  rep.truth_found = res.starts.front().converged &&
                    (res.starts.front().s_hat - truth.s_hat).norm() < opts.cluster_tol;
  return rep;
}

nlohmann::json to_json(const LinearRecovery& r) {
  return {{"s_est", complex_array(r.s_est)},
          {"rank", r.rank},
          {"unknowns", r.unknowns},
          {"determined", r.determined},
          {"residual", r.residual},
          {"diagnosis", r.diagnosis}};
}

nlohmann::json to_json(const MultiplicityReport& r) {
  return {{"distinct_solution_classes", r.distinct_solution_classes},
          {"converged_starts", r.converged_starts},
          {"n_starts", r.n_starts},
          {"truth_found", r.truth_found}};
}

}  // namespace prelog
