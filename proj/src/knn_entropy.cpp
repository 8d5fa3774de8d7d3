#include "prelog/knn_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/digamma.hpp>

#include "prelog/parallel.hpp"
#include "prelog/random.hpp"

namespace prelog {

KdTree::KdTree(const RMatrix& points, int leaf_size)
    : n_(points.rows()), d_(static_cast<int>(points.cols())), leaf_size_(std::max(leaf_size, 1)) {
  data_.resize(static_cast<std::size_t>(n_) * d_);
  for (Eigen::Index i = 0; i < n_; ++i) {
    for (int j = 0; j < d_; ++j) {
      data_[static_cast<std::size_t>(i) * d_ + j] = points(i, j);
    }
  }
  index_.resize(n_);
  std::iota(index_.begin(), index_.end(), 0);
  nodes_.reserve(2 * static_cast<std::size_t>(n_) / leaf_size_ + 2);
  if (n_ > 0) {
    build(0, static_cast<int>(n_));
  }
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= leaf_size_) {
    return id;
  }
  int dim = 0;
  double widest = -1.0;
  for (int j = 0; j < d_; ++j) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i = begin; i < end; ++i) {
      const double v = data_[static_cast<std::size_t>(index_[i]) * d_ + j];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      dim = j;
    }
  }
  if (widest <= 0.0) {
    return id;
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                   [&](int a, int b) {
                     return data_[static_cast<std::size_t>(a) * d_ + dim] <
                            data_[static_cast<std::size_t>(b) * d_ + dim];
                   });
  const double split = data_[static_cast<std::size_t>(index_[mid]) * d_ + dim];
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].split_dim = dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const double* q, Eigen::Index self, int k, std::vector<double>& best,
                    std::vector<double>& offset, double region_dist) const {
  const Node& nd = nodes_[node];
  if (nd.split_dim < 0) {
    for (int i = nd.begin; i < nd.end; ++i) {
      const int idx = index_[i];
      if (idx == self) {
        continue;
      }
      const double* p = &data_[static_cast<std::size_t>(idx) * d_];
      const double bound = best[k - 1];
      double dist = 0.0;
      for (int j = 0; j < d_ && dist < bound; ++j) {
        const double diff = p[j] - q[j];
        dist += diff * diff;
      }
      if (dist < bound) {
        int pos = k - 1;
        while (pos > 0 && best[pos - 1] > dist) {
          best[pos] = best[pos - 1];
          --pos;
        }
        best[pos] = dist;
      }
    }
    return;
  }
  const int dim = nd.split_dim;
  const double diff = q[dim] - nd.split;
  const int near = diff < 0.0 ? nd.left : nd.right;
  const int far = diff < 0.0 ? nd.right : nd.left;
  search(near, q, self, k, best, offset, region_dist);
  // Squared distance from q to the far cell, updated in the split dimension only.
  const double old = offset[dim];
  const double far_dist = region_dist - old * old + diff * diff;
  if (far_dist <= best[k - 1]) {
    offset[dim] = diff;
    search(far, q, self, k, best, offset, far_dist);
    offset[dim] = old;
  }
}

double KdTree::kth_neighbor_distance(Eigen::Index i, int k) const {
  if (k < 1 || k >= n_) {
    throw std::invalid_argument("kth_neighbor_distance: need 1 <= k < n");
  }
  std::vector<double> best(k, std::numeric_limits<double>::infinity());
  std::vector<double> offset(d_, 0.0);
  search(0, &data_[static_cast<std::size_t>(i) * d_], i, k, best, offset, 0.0);
  return std::sqrt(best[k - 1]);
}

namespace {

std::size_t jitter_duplicates(RMatrix& samples, std::uint64_t seed) {
  const Eigen::Index n = samples.rows();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
      if (samples(a, j) != samples(b, j)) {
        return samples(a, j) < samples(b, j);
      }
    }
    return a < b;
  };
  std::sort(order.begin(), order.end(), row_less);
  Rng rng = make_rng(seed, 0x6a);
  std::normal_distribution<double> g(0.0, 1e-12);
  std::size_t count = 0;
  Eigen::Index anchor = n > 0 ? order[0] : 0;  // first, unperturbed row of the current group
  for (Eigen::Index i = 1; i < n; ++i) {
    if (samples.row(order[i]) != samples.row(anchor)) {
      anchor = order[i];
    } else {
      for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        samples(order[i], j) += g(rng);
      }
      ++count;
    }
  }
  return count;
}

}  // namespace

KnnEntropyResult entropy_knn(RMatrix samples, int k, int workers, std::uint64_t jitter_seed) {
  const Eigen::Index n = samples.rows();
  const int d = static_cast<int>(samples.cols());
  if (n < 1000) {
    throw std::invalid_argument("entropy_knn: need at least 1000 samples, got " +
                                std::to_string(n));
  }
  if (d < 1 || k < 1 || k >= n) {
    throw std::invalid_argument("entropy_knn: need d >= 1 and 1 <= k < n");
  }
  if (!samples.allFinite()) {
    throw std::invalid_argument("entropy_knn: samples contain non-finite values");
  }
  KnnEntropyResult r;
  r.n = n;
  r.d = d;
  r.k = k;
  r.jittered = jitter_duplicates(samples, jitter_seed);
  if (r.jittered > 0) {
    std::clog << "entropy_knn: perturbed " << r.jittered << " duplicate samples by 1e-12\n";
  }
  const KdTree tree(samples);
  constexpr Eigen::Index kChunk = 4096;
  const auto n_chunks = static_cast<std::uint64_t>((n + kChunk - 1) / kChunk);
  const auto sums = run_chunks<double>(n_chunks, workers, [&](std::uint64_t c) {
    double acc = 0.0;
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(n, begin + kChunk);
    for (Eigen::Index i = begin; i < end; ++i) {
      acc += std::log(tree.kth_neighbor_distance(i, k));
    }
    return acc;
  });
  double sum_log = 0.0;
  for (double s : sums) {
    sum_log += s;
  }
  const double log_vd = 0.5 * d * std::log(kPi) - std::lgamma(1.0 + 0.5 * d);
  r.entropy = boost::math::digamma(static_cast<double>(n)) -
              boost::math::digamma(static_cast<double>(k)) + log_vd +
              static_cast<double>(d) / static_cast<double>(n) * sum_log;
  return r;
}

}  // namespace prelog
