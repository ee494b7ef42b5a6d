#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwg {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

double distance(Point a, Point b);

/// Thrown when a requested domain cannot be built from the given parameters.
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary segment tags. INTERFACE marks an artificial cut (used for
/// symmetric meshing); it never survives into a finished mesh.
enum class BoundaryTag { DIRICHLET = 0, GAMMA_1 = 1, GAMMA_2 = 2, INTERFACE = 3 };

std::string to_string(BoundaryTag tag);
BoundaryTag tag_from_string(const std::string& name);

/// Strip of width l with two narrows cut by the scaled double cones
/// centered at O1=(0,0) and O2=(d,0).
struct WaveguideGeometry {
  double l = 1.0;
  double omega = 1.5707963267948966;  // full opening angle of each cone sector
  double d = 2.0;
  double r0 = 0.5;
  double epsilon = 0.3;

  /// Corner exponent pi/omega.
  double exponent() const;
  /// x-offset from a cone vertex to where its sides meet the walls.
  double wall_offset() const;
  /// Half-width of the opening at each narrow.
  double narrow_radius() const { return epsilon * r0; }

  /// Throws GeometryError naming the violated invariant.
  void validate() const;
};

struct BoundarySegment {
  std::size_t a = 0;
  std::size_t b = 0;
  BoundaryTag tag = BoundaryTag::DIRICHLET;
};

/// Closed, simple, positively oriented polygon with tagged edges.
struct PolygonalBoundary {
  std::vector<Point> vertices;
  std::vector<BoundarySegment> segments;
  /// Points at which corner coefficients are extracted (narrow vertices O1,
  /// O2, or the origin of the narrow-shape domain). Not necessarily vertices.
  std::vector<Point> corner_markers;

  double signed_area() const;
  bool is_simple() const;
  bool contains(Point p) const;
  /// Throws GeometryError unless closed, simple, ccw and fully tagged.
  void check() const;
};

/// Local target length used to polygonize arcs, in the same units as the
/// domain. Builders never place a chord longer than this.
using ChordSize = std::function<double(Point)>;

ChordSize uniform_chord(double h);

PolygonalBoundary build_waveguide(const WaveguideGeometry& geom, double r_trunc,
                                  const ChordSize& chord = uniform_chord(0.05));

/// Left half (x <= d/2) of build_waveguide; the cut is tagged INTERFACE.
PolygonalBoundary build_waveguide_half(const WaveguideGeometry& geom, double r_trunc,
                                       const ChordSize& chord = uniform_chord(0.05));

/// Plain strip [x0, x1] x (-l/2, l/2); ends tagged GAMMA_1 (left), GAMMA_2 (right).
PolygonalBoundary build_strip(double l, double x0, double x1);

/// Bounded resonator G2 between the cone vertices; all edges DIRICHLET.
PolygonalBoundary build_resonator(const WaveguideGeometry& geom);

/// Truncated half-strip G1 in coordinates centered at O1; artificial end GAMMA_1.
PolygonalBoundary build_halfstrip(const WaveguideGeometry& geom, double r_trunc);

/// (K u disk(0,r0)) n disk(0,R) in narrow-scale coordinates. Right arc GAMMA_2,
/// left arc GAMMA_1. With single_sector, only the right sector of K.
PolygonalBoundary build_omega(double r0, double omega, double r_trunc,
                              const ChordSize& chord = uniform_chord(0.1),
                              bool single_sector = false);

/// Width of the vertical cut {x = x0} through the polygon (total length of
/// the interior intervals).
double cut_width(const PolygonalBoundary& b, double x0);

}  // namespace rwg
