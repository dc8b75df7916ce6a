#include "vpf/kdtree.hpp"

#include <algorithm>

namespace vpf {

namespace {

inline double coord(const Vec3& p, int axis) {
  return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
}

inline bool hit_less(const KdIndex::Hit& a, const KdIndex::Hit& b) {
  if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
  return a.id < b.id;
}

}  // namespace

KdIndex::KdIndex(std::vector<Vec3> points, std::vector<int64_t> ids)
    : points_(std::move(points)), ids_(std::move(ids)) {
  if (points_.size() != ids_.size())
    throw ValidationError("KdIndex: point/id count mismatch");
  for (const auto& p : points_)
    if (!p.finite()) throw ValidationError("KdIndex: non-finite point");
  if (points_.empty()) return;
  std::vector<int> order(points_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  nodes_.reserve(points_.size());
  root_ = build(order, 0, int(order.size()), 0);
}

int KdIndex::build(std::vector<int>& order, int lo, int hi, int depth) {
  if (lo >= hi) return -1;
  const int axis = depth % 3;
  const int mid = lo + (hi - lo) / 2;
  std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                   [&](int a, int b) {
                     const double ca = coord(points_[a], axis);
                     const double cb = coord(points_[b], axis);
                     if (ca != cb) return ca < cb;
                     return ids_[a] < ids_[b];
                   });
  const int node_id = int(nodes_.size());
  nodes_.push_back(Node{axis, order[mid], -1, -1});
  const int left = build(order, lo, mid, depth + 1);
  const int right = build(order, mid + 1, hi, depth + 1);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

void KdIndex::search(int node, const Vec3& q, int k, std::vector<Hit>& heap) const {
  if (node < 0) return;
  const Node& nd = nodes_[node];
  const Vec3& p = points_[nd.point];
  Hit h{(p - q).norm2(), ids_[nd.point]};
  if (int(heap.size()) < k) {
    heap.push_back(h);
    std::push_heap(heap.begin(), heap.end(), hit_less);
  } else if (hit_less(h, heap.front())) {
    std::pop_heap(heap.begin(), heap.end(), hit_less);
    heap.back() = h;
    std::push_heap(heap.begin(), heap.end(), hit_less);
  }

  const double dq = coord(q, nd.axis) - coord(p, nd.axis);
  const int near = dq < 0 ? nd.left : nd.right;
  const int far = dq < 0 ? nd.right : nd.left;
  search(near, q, k, heap);
  // The far side can still hold a point that beats the current worst on a
  // distance tie with a smaller id, so descend on <= rather than <.
  if (int(heap.size()) < k || dq * dq <= heap.front().dist2) search(far, q, k, heap);
}

std::vector<KdIndex::Hit> KdIndex::nearest(const Vec3& q, int k) const {
  if (k < 1) throw ValidationError("KdIndex::nearest: k must be >= 1");
  k = std::min<int>(k, int(points_.size()));
  std::vector<Hit> heap;
  heap.reserve(k);
  search(root_, q, k, heap);
  std::sort_heap(heap.begin(), heap.end(), hit_less);
  return heap;
}

std::vector<int64_t> KdIndex::nearest_ids(const Vec3& q, int k) const {
  auto hits = nearest(q, k);
  std::vector<int64_t> ids(hits.size());
  for (size_t i = 0; i < hits.size(); ++i) ids[i] = hits[i].id;
  return ids;
}

}  // namespace vpf
