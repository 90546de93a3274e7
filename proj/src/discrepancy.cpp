#include "rcml/discrepancy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rcml {

void KernelConfig::validate() const {
  for (double s : sigmas) {
    if (!(s > 0.0)) throw std::invalid_argument("kernel bandwidths must be positive");
  }
  if (adaptive()) {
    if (median_scales.empty()) throw std::invalid_argument("adaptive kernel needs at least one scale");
    for (double s : median_scales) {
      if (!(s > 0.0)) throw std::invalid_argument("median scales must be positive");
    }
  }
}

KernelConfig KernelConfig::fixed(std::vector<double> sigmas) {
  if (sigmas.empty()) throw std::invalid_argument("fixed kernel needs at least one bandwidth");
  KernelConfig cfg;
  cfg.sigmas = std::move(sigmas);
  cfg.validate();
  return cfg;
}

KernelConfig KernelConfig::median_adaptive(std::vector<double> scales) {
  KernelConfig cfg;
  cfg.median_scales = std::move(scales);
  cfg.validate();
  return cfg;
}

double median_heuristic(const Matrix& p, const Matrix& q) {
  const Index n = p.rows() + q.rows();
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  auto row = [&](Index i) { return i < p.rows() ? p.row(i) : q.row(i - p.rows()); };
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) dist.push_back((row(i) - row(j)).norm());
  }
  if (dist.empty()) return 1.0;
  const std::size_t mid = (dist.size() - 1) / 2;  // lower median
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double kappa = dist[mid];
  return kappa > 1e-12 ? kappa : 1.0;
}

std::vector<double> resolve_sigmas(const Matrix& p, const Matrix& q, const KernelConfig& cfg) {
  cfg.validate();
  if (!cfg.adaptive()) return cfg.sigmas;
  const double kappa = median_heuristic(p, q);
  std::vector<double> sigmas;
  sigmas.reserve(cfg.median_scales.size());
  for (double s : cfg.median_scales) sigmas.push_back(s * kappa);
  return sigmas;
}

double rbf_kernel(const RowVector& a, const RowVector& b, const std::vector<double>& sigmas) {
  if (a.size() != b.size()) throw std::invalid_argument("rbf_kernel: dimension mismatch");
  if (sigmas.empty()) throw std::invalid_argument("rbf_kernel: no bandwidths");
  const double d2 = (a - b).squaredNorm();
  double sum = 0.0;
  for (double s : sigmas) sum += std::exp(-d2 / (2.0 * s * s));
  return sum / static_cast<double>(sigmas.size());
}

namespace {

// Sum of kernel values over all row pairs of A x B, in a fixed loop order so
// identical inputs yield bitwise-identical sums.
double pair_sum(const Matrix& a, const Matrix& b, const std::vector<double>& sigmas) {
  double sum = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index t = 0; t < b.rows(); ++t) {
      const double d2 = (a.row(i) - b.row(t)).squaredNorm();
      double k = 0.0;
      for (double s : sigmas) k += std::exp(-d2 / (2.0 * s * s));
      sum += k / static_cast<double>(sigmas.size());
    }
  }
  return sum;
}

// mean over sigmas of exp(-d2 / (2 s^2)) / s^2; the weight in d k / d a.
double kernel_weight(double d2, const std::vector<double>& sigmas) {
  double w = 0.0;
  for (double s : sigmas) w += std::exp(-d2 / (2.0 * s * s)) / (s * s);
  return w / static_cast<double>(sigmas.size());
}

}  // namespace

MmdResult mmd_sq(const Matrix& p, const Matrix& q, const KernelConfig& cfg) {
  if (p.cols() != q.cols()) throw std::invalid_argument("mmd_sq: dimension mismatch");
  if (p.rows() < 1 || q.rows() < 1) throw std::invalid_argument("mmd_sq: need at least one sample");

  MmdResult out;
  out.sigmas = resolve_sigmas(p, q, cfg);
  const Index m = p.rows();
  const Index h = q.rows();

  const double s_pp = pair_sum(p, p, out.sigmas);
  const double s_pq = pair_sum(p, q, out.sigmas);
  const double s_qq = pair_sum(q, q, out.sigmas);

  out.grad_p = Matrix::Zero(m, p.cols());
  out.grad_q = Matrix::Zero(h, q.cols());

  if (m == h) {
    // Equal batches share one denominator. The training loop only ever
    // compares same-size batches, and rerun determinism pins its outputs
    // byte-for-byte, so this fused arithmetic must not change.
    const double m2 = static_cast<double>(m) * static_cast<double>(m);
    const double raw = (s_pp - 2.0 * s_pq + s_qq) / m2;
    out.value = std::max(0.0, raw);
    if (raw <= 0.0) return out;  // flat at the clamp

    for (Index r = 0; r < m; ++r) {
      RowVector acc = RowVector::Zero(p.cols());
      for (Index t = 0; t < m; ++t) {
        const RowVector dpp = p.row(r) - p.row(t);
        acc -= kernel_weight(dpp.squaredNorm(), out.sigmas) * dpp;
        const RowVector dpq = p.row(r) - q.row(t);
        acc += kernel_weight(dpq.squaredNorm(), out.sigmas) * dpq;
      }
      out.grad_p.row(r) = (2.0 / m2) * acc;
    }
    for (Index r = 0; r < m; ++r) {
      RowVector acc = RowVector::Zero(q.cols());
      for (Index t = 0; t < m; ++t) {
        const RowVector dqq = q.row(r) - q.row(t);
        acc -= kernel_weight(dqq.squaredNorm(), out.sigmas) * dqq;
        const RowVector dqp = q.row(r) - p.row(t);
        acc += kernel_weight(dqp.squaredNorm(), out.sigmas) * dqp;
      }
      out.grad_q.row(r) = (2.0 / m2) * acc;
    }
    return out;
  }

  const double mm = static_cast<double>(m) * static_cast<double>(m);
  const double hh = static_cast<double>(h) * static_cast<double>(h);
  const double mh = static_cast<double>(m) * static_cast<double>(h);
  const double raw = s_pp / mm - 2.0 * s_pq / mh + s_qq / hh;
  out.value = std::max(0.0, raw);
  if (raw <= 0.0) return out;  // flat at the clamp

  for (Index r = 0; r < m; ++r) {
    RowVector own = RowVector::Zero(p.cols());
    for (Index t = 0; t < m; ++t) {
      const RowVector dpp = p.row(r) - p.row(t);
      own -= kernel_weight(dpp.squaredNorm(), out.sigmas) * dpp;
    }
    RowVector cross = RowVector::Zero(p.cols());
    for (Index t = 0; t < h; ++t) {
      const RowVector dpq = p.row(r) - q.row(t);
      cross += kernel_weight(dpq.squaredNorm(), out.sigmas) * dpq;
    }
    out.grad_p.row(r) = (2.0 / mm) * own + (2.0 / mh) * cross;
  }
  for (Index r = 0; r < h; ++r) {
    RowVector own = RowVector::Zero(q.cols());
    for (Index t = 0; t < h; ++t) {
      const RowVector dqq = q.row(r) - q.row(t);
      own -= kernel_weight(dqq.squaredNorm(), out.sigmas) * dqq;
    }
    RowVector cross = RowVector::Zero(q.cols());
    for (Index t = 0; t < m; ++t) {
      const RowVector dqp = q.row(r) - p.row(t);
      cross += kernel_weight(dqp.squaredNorm(), out.sigmas) * dqp;
    }
    out.grad_q.row(r) = (2.0 / hh) * own + (2.0 / mh) * cross;
  }
  return out;
}

}  // namespace rcml
