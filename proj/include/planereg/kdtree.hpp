#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "planereg/geometry.hpp"

namespace planereg {

/// Static 3D kd-tree over a copy of the given points (nanoflann backend).
class KdTree {
 public:
  explicit KdTree(std::vector<Point3> points);
  ~KdTree();
  KdTree(KdTree&&) noexcept;
  KdTree& operator=(KdTree&&) noexcept;

  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  // Up to k nearest points, closest first.
  std::vector<Neighbor> knn(const Point3& query, std::size_t k) const;
  // All points within `radius`, closest first.
  std::vector<Neighbor> radius(const Point3& query, double radius) const;

  std::size_t size() const;
  const std::vector<Point3>& points() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace planereg
