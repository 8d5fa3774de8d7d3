#pragma once

#include <cstdint>
#include <vector>

#include "prelog/types.hpp"

namespace prelog {

// Exact k-nearest-neighbour search (Euclidean) over a fixed point set.
class KdTree {
 public:
  // points: n x d, copied.
  explicit KdTree(const RMatrix& points, int leaf_size = 16);

  // Distance from point i of the set to its k-th nearest other point.
  double kth_neighbor_distance(Eigen::Index i, int k) const;

  Eigen::Index size() const { return n_; }
  int dimension() const { return d_; }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int split_dim = -1;  // -1 for leaves
    double split = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const double* q, Eigen::Index self, int k, std::vector<double>& best,
              std::vector<double>& offset, double region_dist) const;

  Eigen::Index n_ = 0;
  int d_ = 0;
  int leaf_size_ = 16;
  std::vector<double> data_;  // row-major
  std::vector<int> index_;
  std::vector<Node> nodes_;
};

struct KnnEntropyResult {
  double entropy = 0.0;  // nats
  Eigen::Index n = 0;
  int d = 0;
  int k = 0;
  std::size_t jittered = 0;  // duplicate rows perturbed before the search
};

// Kozachenko-Leonenko estimate
//   psi(n) - psi(k) + log V_d + (d/n) sum_i log eps_i,
// eps_i the distance to the k-th neighbour, V_d the unit-ball volume.
// Requires n >= 1000. Duplicate rows get 1e-12 jitter and a notice on
// std::clog. Queries are split into fixed chunks over `workers` threads.
KnnEntropyResult entropy_knn(RMatrix samples, int k = 4, int workers = 1,
                             std::uint64_t jitter_seed = 0);

}  // namespace prelog
