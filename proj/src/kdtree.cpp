#include "planereg/kdtree.hpp"

#include <nanoflann.hpp>

namespace planereg {
namespace {

struct PointAdaptor {
  const std::vector<Point3>* points;

  std::size_t kdtree_get_point_count() const { return points->size(); }
  double kdtree_get_pt(std::size_t idx, std::size_t dim) const {
    return (*points)[idx](static_cast<Eigen::Index>(dim));
  }
  template <class Bbox>
  bool kdtree_get_bbox(Bbox&) const {
    return false;
  }
};

using Index = nanoflann::KDTreeSingleIndexAdaptor<
    nanoflann::L2_Simple_Adaptor<double, PointAdaptor>, PointAdaptor, 3,
    std::size_t>;

}  // namespace

struct KdTree::Impl {
  explicit Impl(std::vector<Point3> pts)
      : points(std::move(pts)),
        adaptor{&points},
        index(3, adaptor, nanoflann::KDTreeSingleIndexAdaptorParams(10)) {}

  std::vector<Point3> points;
  PointAdaptor adaptor;
  Index index;
};

KdTree::KdTree(std::vector<Point3> points)
    : impl_(std::make_unique<Impl>(std::move(points))) {}

KdTree::~KdTree() = default;
KdTree::KdTree(KdTree&&) noexcept = default;
KdTree& KdTree::operator=(KdTree&&) noexcept = default;

std::vector<KdTree::Neighbor> KdTree::knn(const Point3& query,
                                          std::size_t k) const {
  k = std::min(k, impl_->points.size());
  std::vector<Neighbor> out;
  if (k == 0) return out;
  std::vector<std::size_t> indices(k);
  std::vector<double> dists(k);
  const std::size_t found =
      impl_->index.knnSearch(query.data(), k, indices.data(), dists.data());
  out.reserve(found);
  for (std::size_t i = 0; i < found; ++i) out.push_back({indices[i], dists[i]});
  return out;
}

std::vector<KdTree::Neighbor> KdTree::radius(const Point3& query,
                                             double radius) const {
  std::vector<nanoflann::ResultItem<std::size_t, double>> matches;
  impl_->index.radiusSearch(query.data(), radius * radius, matches);
  std::vector<Neighbor> out;
  out.reserve(matches.size());
  for (const auto& m : matches) out.push_back({m.first, m.second});
  return out;
}

std::size_t KdTree::size() const { return impl_->points.size(); }

const std::vector<Point3>& KdTree::points() const { return impl_->points; }

}  // namespace planereg
