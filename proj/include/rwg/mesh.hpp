#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "rwg/geometry.hpp"

namespace rwg {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BoundaryEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  BoundaryTag tag = BoundaryTag::DIRICHLET;
};

struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;  // counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;
  double h_max = 0.0;
  double grading = 0.0;

  double triangle_area(std::size_t t) const;
  /// Smallest interior angle over all triangles, in degrees.
  double min_angle_deg() const;
  /// Shortest edge over all triangles.
  double min_edge() const;
  double total_area() const;
  /// Throws MeshError if an area is non-positive, the mesh is not conforming,
  /// or the boundary edges do not close the triangulation.
  void check() const;
};

/// Local mesh size h(x) = h_max * min(1, (max(r, r_floor)/r_ref)^grading),
/// r the distance to the nearest grading center. The floor is where the
/// graded size meets the distance to the center.
class SizeField {
 public:
  SizeField(double h_max, double grading, double r_ref, std::vector<Point> centers);

  double operator()(Point p) const;
  double h_max() const { return h_max_; }
  double grading() const { return grading_; }
  double r_ref() const { return r_ref_; }
  const std::vector<Point>& centers() const { return centers_; }
  /// Same field with additional centers appended.
  SizeField with_centers(const std::vector<Point>& extra) const;
  ChordSize as_chord() const;

 private:
  double h_max_;
  double grading_;
  double r_ref_;
  double r_floor_;
  std::vector<Point> centers_;
};

struct TriangulateOptions {
  double min_angle_deg = 20.7;
  /// Refine around reentrant boundary vertices with the same grading law.
  bool grade_reentrant = true;
  std::size_t max_nodes = 2'000'000;
};

/// Constrained Delaunay refinement of the polygon. Deterministic: identical
/// inputs give identical meshes.
Mesh triangulate(const PolygonalBoundary& b, const SizeField& size,
                 const TriangulateOptions& opts = {});

/// Convenience overload grading toward b.corner_markers with r_ref as given.
Mesh triangulate(const PolygonalBoundary& b, double h_max, double grading, double r_ref = 1.0);

/// Reflects a mesh of the half domain x <= axis_x across x = axis_x and glues
/// the copies along their INTERFACE edges. Nodes on the axis are shared.
Mesh mirror_glue(const Mesh& half, double axis_x);

/// Mesh of the full waveguide G(eps, R) built from a mirrored half, so that
/// the discrete domain is exactly symmetric about x = d/2.
Mesh mesh_waveguide(const WaveguideGeometry& geom, double r_trunc, double h_max,
                    double grading, double r_ref);

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

}  // namespace rwg
