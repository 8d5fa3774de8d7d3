#include "prelog/identifiability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "prelog/io.hpp"
#include "prelog/parallel.hpp"

namespace prelog {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_sizes(const FrontendMatrices& fm, const CVector& s_hat, const CVector& x_rest) {
  const Eigen::Index n = fm.qo.rows();
  const Eigen::Index q = fm.p.size();
  if (q >= n) {
    throw SpecError("Q < N", "Jacobian needs Q = " + std::to_string(q) +
                                 " < N = " + std::to_string(n));
  }
  if (s_hat.size() != q) {
    throw std::invalid_argument("build_jacobian: s_hat must have length Q");
  }
  if (x_rest.size() != n - 1) {
    throw std::invalid_argument("build_jacobian: x_rest must have length N-1");
  }
}

double log_row_scale(const CMatrix& m) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    acc += std::log(m.row(i).norm());
  }
  return acc;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) {
    return 0;
  }
  long double r = 1.0L;
  for (int i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
  }
  return static_cast<std::uint64_t>(std::llround(r));
}

}  // namespace

CMatrix build_jacobian(const FrontendMatrices& fm, cplx x1, const CVector& s_hat,
                       const CVector& x_rest) {
  check_sizes(fm, s_hat, x_rest);
  const Eigen::Index n = fm.qo.rows();
  const Eigen::Index q = fm.p.size();
  CVector x(n);
  x << x1, x_rest;
  const CMatrix go = fm.qo * fm.p.asDiagonal();
  const CMatrix ge = fm.qe * fm.p.asDiagonal();
  const CVector go_s = go * s_hat;
  const CVector ge_s = ge * s_hat;

  const Eigen::Index dim = n + q - 1;
  CMatrix j = CMatrix::Zero(dim, dim);
  for (Eigen::Index k = 0; k < n; ++k) {
    j.row(k).head(q) = x(k) * go.row(k);
    if (k >= 1) {
      j(k, q + k - 1) = go_s(k);
    }
  }
  for (Eigen::Index k = 0; k + 1 < q; ++k) {
    j.row(n + k).head(q) = x(k) * ge.row(k);
    if (k >= 1) {
      j(n + k, q + k - 1) = ge_s(k);
    }
  }
  return j;
}

CMatrix build_jacobian(const BlockSpec& spec, cplx x1, const CVector& s_hat,
                       const CVector& x_rest) {
  if (spec.q() >= spec.symbols()) {
    throw SpecError("Q < N", "Jacobian needs Q < N");
  }
  return build_jacobian(build_frontend_matrices(spec), x1, s_hat, x_rest);
}

CVector forward_map_i(const FrontendMatrices& fm, const CVector& x, const CVector& s_hat) {
  const Eigen::Index n = fm.qo.rows();
  const Eigen::Index q = fm.p.size();
  const CVector full = fm.b(x) * s_hat;
  CVector out(n + q - 1);
  out << full.head(n), full.segment(n, q - 1);
  return out;
}

double log_abs_det(const CMatrix& m) {
  if (m.rows() == 0) {
    return 0.0;
  }
  const Eigen::PartialPivLU<CMatrix> lu(m);
  const CMatrix& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double a = std::abs(packed(i, i));
    if (a == 0.0 || !std::isfinite(a)) {
      return a == 0.0 ? kNegInf : std::numeric_limits<double>::quiet_NaN();
    }
    acc += std::log(a);
  }
  return acc;
}

JacobianReport jacobian_report(const CMatrix& jac, cplx x1, const CVector& s_hat,
                               const CVector& x_rest) {
  JacobianReport r;
  r.dimension = static_cast<int>(jac.rows());
  r.log_abs_det = log_abs_det(jac);
  r.abs_det = std::exp(r.log_abs_det);
  r.log_row_scale = log_row_scale(jac);
  r.singular = !(r.log_abs_det > std::log(kSingularThreshold) + r.log_row_scale);
  std::vector<double> buf{x1.real(), x1.imag()};
  for (const CVector* v : {&s_hat, &x_rest}) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      buf.push_back((*v)(i).real());
      buf.push_back((*v)(i).imag());
    }
  }
  r.inputs_digest = fnv1a_digest(buf.data(), buf.size() * sizeof(double));
  return r;
}

WitnessReport explicit_witness(const BlockSpec& spec, const CVector& x) {
  const int n = spec.symbols();
  const int q = spec.q();
  if (x.size() != n) {
    throw std::invalid_argument("explicit_witness: x must have length N");
  }
  if (q >= n) {
    throw SpecError("Q < N", "witness needs Q < N");
  }
  WitnessReport r;
  for (int k = 0; k < n; ++k) {
    if (x(k) == cplx(0.0)) {
      r.violations.push_back("x_" + std::to_string(k + 1) + " is zero");
    }
  }
  const FrontendMatrices fm = build_frontend_matrices(spec);
  const CMatrix go = fm.qo * fm.p.asDiagonal();
  const CMatrix ge = fm.qe * fm.p.asDiagonal();

  if (q == 1) {
    r.s_hat = CVector::Ones(1);
    r.null_ratio = 0.0;
  } else {
    const CMatrix sys = go.topRows(q - 1);
    Eigen::JacobiSVD<CMatrix> svd(sys, Eigen::ComputeFullV);
    r.s_hat = svd.matrixV().col(q - 1);
    // q - 1 rows: the q-th singular value is structurally 0.
    const CVector resid = sys * r.s_hat;
    r.null_ratio = resid.norm() / svd.singularValues()(0);
    if (!(r.null_ratio < 1e-10)) {
      r.violations.push_back("null-space residual ratio " + format_double(r.null_ratio));
    }
  }
  const CVector go_s = go * r.s_hat;
  const CVector ge_s = ge * r.s_hat;
  const double ref = fm.p.norm() * r.s_hat.norm();

  CMatrix a(q, q);
  if (q == 1) {
    a(0, 0) = x(0) * go(0, 0);
  } else {
    a.row(0) = x(0) * ge.row(0);
    for (int k = 0; k < q - 1; ++k) {
      a.row(k + 1) = x(k) * go.row(k);
    }
  }
  r.abs_det_a = std::exp(log_abs_det(a));
  if (!(log_abs_det(a) > std::log(kSingularThreshold) + log_row_scale(a))) {
    r.violations.push_back("det A below threshold");
  }

  double min_d = std::numeric_limits<double>::infinity();
  double d1 = 1.0;
  for (int k = 1; k + 1 < q; ++k) {
    d1 *= std::abs(ge_s(k));
    min_d = std::min(min_d, std::abs(ge_s(k)) / ref);
  }
  double d2 = 1.0;
  for (int k = std::max(q - 1, 1); k < n; ++k) {
    d2 *= std::abs(go_s(k));
    min_d = std::min(min_d, std::abs(go_s(k)) / ref);
  }
  r.abs_det_d1 = d1;
  r.abs_det_d2 = d2;
  r.min_d_entry = min_d;
  if (!(min_d > 1e-10)) {
    r.violations.push_back("D1/D2 diagonal entry below threshold: " + format_double(min_d));
  }

  const CMatrix j = build_jacobian(fm, x(0), r.s_hat, x.tail(n - 1));
  r.abs_det_j = std::exp(log_abs_det(j));
  const double factored = r.abs_det_a * r.abs_det_d1 * r.abs_det_d2;
  r.relative_mismatch = std::abs(r.abs_det_j - factored) / std::max(r.abs_det_j, factored);
  if (!(r.relative_mismatch < 1e-8)) {
    r.violations.push_back("|det J| != |A||D1||D2|, relative mismatch " +
                           format_double(r.relative_mismatch));
  }
  return r;
}

SparkReport spark_check(const CMatrix& columns, std::uint64_t max_exhaustive,
                        std::uint64_t samples, std::uint64_t seed) {
  const int q = static_cast<int>(columns.rows());
  const int k = static_cast<int>(columns.cols());
  SparkReport r;
  r.n_subsets_total = binomial(k, q);
  r.min_abs_det = std::numeric_limits<double>::infinity();
  if (q == 0 || q > k) {
    r.full_spark = false;
    return r;
  }
  const RVector norms = columns.colwise().norm();
  CMatrix sub(q, q);
  auto visit = [&](const std::vector<int>& idx) {
    double scale = 0.0;
    for (int c = 0; c < q; ++c) {
      sub.col(c) = columns.col(idx[c]);
      scale += std::log(norms(idx[c]));
    }
    const double scaled = std::exp(log_abs_det(sub) - scale);
    ++r.n_subsets_checked;
    if (!(scaled >= r.min_abs_det)) {
      r.min_abs_det = scaled;
      r.worst_subset = idx;
    }
  };

  std::vector<int> idx(q);
  if (r.n_subsets_total <= max_exhaustive) {
    r.exhaustive = true;
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
      visit(idx);
      int i = q - 1;
      while (i >= 0 && idx[i] == k - q + i) {
        --i;
      }
      if (i < 0) {
        break;
      }
      ++idx[i];
      for (int j = i + 1; j < q; ++j) {
        idx[j] = idx[j - 1] + 1;
      }
    }
  } else {
    r.exhaustive = false;
    Rng rng = make_rng(seed, 0x5a);
    std::vector<int> pool(k);
    for (std::uint64_t s = 0; s < samples; ++s) {
      std::iota(pool.begin(), pool.end(), 0);
      for (int i = 0; i < q; ++i) {
        std::uniform_int_distribution<int> pick(i, k - 1);
        std::swap(pool[i], pool[pick(rng)]);
      }
      std::copy(pool.begin(), pool.begin() + q, idx.begin());
      std::sort(idx.begin(), idx.end());
      visit(idx);
    }
  }
  r.full_spark = r.min_abs_det > kSingularThreshold;
  return r;
}

SparkReport full_spark_check(const BlockSpec& spec, std::uint64_t max_exhaustive,
                             std::uint64_t samples, std::uint64_t seed) {
  const CMatrix qo = build_qo(spec);
  const CMatrix qe = build_qe(spec);
  CMatrix cols(spec.q(), 2 * spec.symbols());
  cols << qo.transpose(), qe.transpose();
  return spark_check(cols, max_exhaustive, samples, seed);
}

namespace {

struct McPartial {
  std::uint64_t trials = 0;
  std::uint64_t singular = 0;
  double min_abs_det = std::numeric_limits<double>::infinity();
  double min_scaled = std::numeric_limits<double>::infinity();
  double sum_log = 0.0;
};

}  // namespace

JacobianMcReport jacobian_monte_carlo(const BlockSpec& spec, std::uint64_t trials,
                                      std::uint64_t seed, const JacobianMcOptions& opts) {
  if (trials < 1) {
    throw std::invalid_argument("jacobian_monte_carlo: trials must be >= 1");
  }
  const FrontendMatrices fm = build_frontend_matrices(spec);
  const int n = spec.symbols();
  const int q = spec.q();
  const std::uint64_t chunk = std::max<std::uint64_t>(opts.chunk, 1);
  const std::uint64_t n_chunks = (trials + chunk - 1) / chunk;
  const auto parts = run_chunks<McPartial>(n_chunks, opts.workers, [&](std::uint64_t c) {
    McPartial part;
    Rng rng = make_rng(seed, c);
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min(trials, begin + chunk);
    for (std::uint64_t t = begin; t < end; ++t) {
      cplx x1 = complex_normal(rng);
      const CVector s_hat = complex_normal_vector(rng, q);
      const CVector x_rest = complex_normal_vector(rng, n - 1);
      if (opts.force_x1_zero) {
        x1 = 0.0;
      }
      const CMatrix j = build_jacobian(fm, x1, s_hat, x_rest);
      const double ld = log_abs_det(j);
      const double scaled = ld - log_row_scale(j);
      ++part.trials;
      if (!(ld > std::log(kSingularThreshold) + log_row_scale(j))) {
        ++part.singular;
      }
      part.min_abs_det = std::min(part.min_abs_det, std::exp(ld));
      part.min_scaled = std::min(part.min_scaled, std::isnan(scaled) ? kNegInf : scaled);
      part.sum_log += ld;
    }
    return part;
  });
  JacobianMcReport r;
  r.min_abs_det = std::numeric_limits<double>::infinity();
  r.min_scaled_log_det = std::numeric_limits<double>::infinity();
  double sum_log = 0.0;
  for (const auto& p : parts) {
    r.trials += p.trials;
    r.singular += p.singular;
    r.min_abs_det = std::min(r.min_abs_det, p.min_abs_det);
    r.min_scaled_log_det = std::min(r.min_scaled_log_det, p.min_scaled);
    sum_log += p.sum_log;
  }
  r.singular_fraction = static_cast<double>(r.singular) / static_cast<double>(r.trials);
  r.mean_log_abs_det = sum_log / static_cast<double>(r.trials);
  return r;
}

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const JacobianReport& r) {
  return {{"dimension", r.dimension},
          {"abs_det", r.abs_det},
          {"log_abs_det", finite_or_null(r.log_abs_det)},
          {"log_row_scale", finite_or_null(r.log_row_scale)},
          {"singular", r.singular},
          {"inputs_digest", r.inputs_digest}};
}

nlohmann::json to_json(const WitnessReport& r) {
  return {{"s_hat", complex_array(r.s_hat)},
          {"abs_det_a", r.abs_det_a},
          {"abs_det_d1", r.abs_det_d1},
          {"abs_det_d2", r.abs_det_d2},
          {"abs_det_j", r.abs_det_j},
          {"relative_mismatch", r.relative_mismatch},
          {"null_ratio", r.null_ratio},
          {"min_d_entry", r.min_d_entry},
          {"violations", r.violations},
          {"ok", r.ok()}};
}

nlohmann::json to_json(const SparkReport& r) {
  return {{"n_subsets_checked", r.n_subsets_checked},
          {"n_subsets_total", r.n_subsets_total},
          {"exhaustive", r.exhaustive},
          {"min_abs_det", finite_or_null(r.min_abs_det)},
          {"worst_subset", r.worst_subset},
          {"full_spark", r.full_spark}};
}

nlohmann::json to_json(const JacobianMcReport& r) {
  return {{"trials", r.trials},
          {"singular", r.singular},
          {"singular_fraction", r.singular_fraction},
          {"min_abs_det", r.min_abs_det},
          {"min_scaled_log_det", finite_or_null(r.min_scaled_log_det)},
          {"mean_log_abs_det", finite_or_null(r.mean_log_abs_det)}};
}

}  // namespace prelog
