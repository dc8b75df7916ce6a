#pragma once

#include <cstdint>
#include <vector>

#include "vpf/common.hpp"

namespace vpf {

// Static 3D k-d tree over labelled points. Queries return exactly the same
// results as a brute-force linear scan: neighbors ordered by squared
// distance, ties broken by ascending id.
class KdIndex {
 public:
  struct Hit {
    double dist2;
    int64_t id;
  };

  KdIndex(std::vector<Vec3> points, std::vector<int64_t> ids);

  size_t size() const { return points_.size(); }

  // k nearest points to q (k clamped to size()); sorted by (dist2, id)
  std::vector<Hit> nearest(const Vec3& q, int k) const;
  std::vector<int64_t> nearest_ids(const Vec3& q, int k) const;

 private:
  struct Node {
    int axis = -1;   // -1 marks a leaf
    int point = -1;  // index into points_
    int left = -1, right = -1;
  };

  int build(std::vector<int>& order, int lo, int hi, int depth);
  void search(int node, const Vec3& q, int k, std::vector<Hit>& heap) const;

  std::vector<Vec3> points_;
  std::vector<int64_t> ids_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace vpf
