#include "rwg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace rwg {

namespace {

constexpr double kPi = std::numbers::pi;

double cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point p, Point a, Point b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(p1, q1, q2)) return true;
  if (d2 == 0 && on_segment(p2, q1, q2)) return true;
  if (d3 == 0 && on_segment(q1, p1, p2)) return true;
  if (d4 == 0 && on_segment(q2, p1, p2)) return true;
  return false;
}

// Appends the arc of radius rho about c from angle t0 to t1, excluding the
// start point. An even segment count puts the angular midpoint on a vertex,
// which is placed exactly when mid is given.
void append_arc(std::vector<Point>& out, Point c, double rho, double t0, double t1,
                const ChordSize& chord, int min_segments, const Point* mid = nullptr) {
  const double span = std::abs(t1 - t0);
  double hmin = chord(Point{c.x + rho * std::cos(t0), c.y + rho * std::sin(t0)});
  constexpr int kProbe = 16;
  for (int i = 1; i <= kProbe; ++i) {
    const double t = t0 + (t1 - t0) * i / kProbe;
    hmin = std::min(hmin, chord(Point{c.x + rho * std::cos(t), c.y + rho * std::sin(t)}));
  }
  if (!(hmin > 0.0)) throw GeometryError("chord size must be positive along arcs");
  int n = std::max(min_segments, static_cast<int>(std::ceil(span * rho / hmin)));
  if (n % 2) ++n;
  for (int i = 1; i <= n; ++i) {
    if (mid != nullptr && 2 * i == n) {
      out.push_back(*mid);
      continue;
    }
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / n;
    out.push_back(Point{c.x + rho * std::cos(t), c.y + rho * std::sin(t)});
  }
}

// Upper boundary chain of the narrow centered at (xc, 0): from the left cone
// side at the narrow radius, over the disk arc, to the right cone side.
void append_narrow_top(std::vector<Point>& out, const WaveguideGeometry& g, double xc,
                       const ChordSize& chord) {
  const double a = 0.5 * g.omega;
  const double rho = g.narrow_radius();
  out.push_back(Point{xc - rho * std::cos(a), rho * std::sin(a)});
  const Point top{xc, rho};
  append_arc(out, Point{xc, 0.0}, rho, kPi - a, a, chord, 4, &top);
}

PolygonalBoundary close_chains(const std::vector<Point>& top, BoundaryTag left_tag,
                               BoundaryTag right_tag) {
  PolygonalBoundary b;
  const std::size_t n = top.size();
  for (std::size_t i = 0; i < n; ++i) b.vertices.push_back(Point{top[i].x, -top[i].y});
  for (std::size_t i = n; i-- > 0;) b.vertices.push_back(top[i]);
  const std::size_t nv = b.vertices.size();
  for (std::size_t i = 0; i < nv; ++i) {
    BoundaryTag tag = BoundaryTag::DIRICHLET;
    if (i == n - 1) tag = right_tag;
    if (i == nv - 1) tag = left_tag;
    b.segments.push_back(BoundarySegment{i, (i + 1) % nv, tag});
  }
  return b;
}

std::vector<Point> waveguide_top_chain(const WaveguideGeometry& g, double r_trunc,
                                       const ChordSize& chord, double x_stop) {
  const double half = 0.5 * g.l;
  const double xa = g.wall_offset();
  std::vector<Point> top;
  top.push_back(Point{-r_trunc, half});
  top.push_back(Point{-xa, half});
  append_narrow_top(top, g, 0.0, chord);
  top.push_back(Point{xa, half});
  top.push_back(Point{g.d - xa, half});
  append_narrow_top(top, g, g.d, chord);
  top.push_back(Point{g.d + xa, half});
  top.push_back(Point{g.d + r_trunc, half});
  if (x_stop < g.d + r_trunc) {
    std::vector<Point> cut;
    for (const Point& p : top) {
      if (p.x < x_stop) cut.push_back(p);
    }
    // x_stop lies on the top wall between the narrows
    cut.push_back(Point{x_stop, half});
    return cut;
  }
  return top;
}

void check_truncation(const WaveguideGeometry& g, double r_trunc) {
  if (!(r_trunc > 0.0)) throw GeometryError("truncation radius must be positive");
  if (!(r_trunc > g.wall_offset())) {
    std::ostringstream os;
    os << "truncation radius " << r_trunc << " does not clear the cone sides (need > "
       << g.wall_offset() << ")";
    throw GeometryError(os.str());
  }
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string to_string(BoundaryTag tag) {
  switch (tag) {
    case BoundaryTag::DIRICHLET: return "DIRICHLET";
    case BoundaryTag::GAMMA_1: return "GAMMA_1";
    case BoundaryTag::GAMMA_2: return "GAMMA_2";
    case BoundaryTag::INTERFACE: return "INTERFACE";
  }
  return "UNKNOWN";
}

BoundaryTag tag_from_string(const std::string& name) {
  if (name == "DIRICHLET") return BoundaryTag::DIRICHLET;
  if (name == "GAMMA_1") return BoundaryTag::GAMMA_1;
  if (name == "GAMMA_2") return BoundaryTag::GAMMA_2;
  if (name == "INTERFACE") return BoundaryTag::INTERFACE;
  throw GeometryError("unknown boundary tag '" + name + "'");
}

double WaveguideGeometry::exponent() const { return kPi / omega; }

double WaveguideGeometry::wall_offset() const { return 0.5 * l / std::tan(0.5 * omega); }

void WaveguideGeometry::validate() const {
  std::ostringstream os;
  if (!(l > 0.0)) os << "strip width l must be positive; ";
  if (!(omega > 0.0 && omega < kPi)) os << "opening angle omega must lie in (0, pi); ";
  if (!(d > 0.0)) os << "narrow distance d must be positive; ";
  if (!(r0 > 0.0)) os << "disk radius r0 must be positive; ";
  if (!(epsilon > 0.0)) os << "epsilon must be positive; ";
  if (!os.str().empty()) throw GeometryError(os.str());
  if (!(epsilon * r0 < 0.25 * l)) {
    os << "narrow radius epsilon*r0 = " << epsilon * r0 << " must be below l/4 = " << 0.25 * l;
    throw GeometryError(os.str());
  }
  // The cone sides of K1 and K2 meet at x = d/2, height (d/2)*tan(omega/2);
  // that point must lie strictly outside the strip.
  const double meet_height = 0.5 * d * std::tan(0.5 * omega);
  if (!(meet_height > 0.5 * l * (1.0 + 1e-9))) {
    os << "cone sides cross inside the strip (meet at height " << meet_height
       << " <= l/2); increase d";
    throw GeometryError(os.str());
  }
}

ChordSize uniform_chord(double h) {
  return [h](Point) { return h; };
}

double PolygonalBoundary::signed_area() const {
  double a = 0.0;
  for (const auto& s : segments) {
    const Point& p = vertices[s.a];
    const Point& q = vertices[s.b];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

bool PolygonalBoundary::is_simple() const {
  const std::size_t n = segments.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& s = segments[i];
      const auto& t = segments[j];
      const bool adjacent = s.a == t.a || s.a == t.b || s.b == t.a || s.b == t.b;
      if (adjacent) {
        // adjacent edges may only share their common endpoint
        if (s.a == t.a && s.b == t.b) return false;
        continue;
      }
      if (segments_intersect(vertices[s.a], vertices[s.b], vertices[t.a], vertices[t.b]))
        return false;
    }
  }
  return true;
}

bool PolygonalBoundary::contains(Point p) const {
  bool inside = false;
  for (const auto& s : segments) {
    const Point& a = vertices[s.a];
    const Point& b = vertices[s.b];
    if ((a.y <= p.y && p.y < b.y) || (b.y <= p.y && p.y < a.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (x > p.x) inside = !inside;
    }
  }
  return inside;
}

void PolygonalBoundary::check() const {
  if (vertices.size() < 3 || segments.size() != vertices.size())
    throw GeometryError("boundary must be a closed polygon with one segment per vertex");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.a >= vertices.size() || s.b >= vertices.size())
      throw GeometryError("segment references a missing vertex");
    if (segments[(i + 1) % segments.size()].a != s.b)
      throw GeometryError("segments do not form a closed chain");
    if (distance(vertices[s.a], vertices[s.b]) <= 0.0)
      throw GeometryError("zero-length boundary segment");
  }
  if (!(signed_area() > 0.0)) throw GeometryError("boundary is not positively oriented");
  if (!is_simple()) throw GeometryError("boundary is self-intersecting");
}

PolygonalBoundary build_waveguide(const WaveguideGeometry& geom, double r_trunc,
                                  const ChordSize& chord) {
  geom.validate();
  check_truncation(geom, r_trunc);
  auto top = waveguide_top_chain(geom, r_trunc, chord, geom.d + r_trunc);
  PolygonalBoundary b = close_chains(top, BoundaryTag::GAMMA_1, BoundaryTag::GAMMA_2);
  b.corner_markers = {Point{0.0, 0.0}, Point{geom.d, 0.0}};
  b.check();
  return b;
}

PolygonalBoundary build_waveguide_half(const WaveguideGeometry& geom, double r_trunc,
                                       const ChordSize& chord) {
  geom.validate();
  check_truncation(geom, r_trunc);
  auto top = waveguide_top_chain(geom, r_trunc, chord, 0.5 * geom.d);
  PolygonalBoundary b = close_chains(top, BoundaryTag::GAMMA_1, BoundaryTag::INTERFACE);
  b.corner_markers = {Point{0.0, 0.0}};
  b.check();
  return b;
}

PolygonalBoundary build_strip(double l, double x0, double x1) {
  if (!(l > 0.0) || !(x1 > x0)) throw GeometryError("strip needs l > 0 and x1 > x0");
  std::vector<Point> top{Point{x0, 0.5 * l}, Point{x1, 0.5 * l}};
  PolygonalBoundary b = close_chains(top, BoundaryTag::GAMMA_1, BoundaryTag::GAMMA_2);
  b.check();
  return b;
}

PolygonalBoundary build_resonator(const WaveguideGeometry& geom) {
  geom.validate();
  const double half = 0.5 * geom.l;
  const double xa = geom.wall_offset();
  PolygonalBoundary b;
  b.vertices = {Point{0.0, 0.0},          Point{xa, -half}, Point{geom.d - xa, -half},
                Point{geom.d, 0.0},       Point{geom.d - xa, half}, Point{xa, half}};
  for (std::size_t i = 0; i < 6; ++i)
    b.segments.push_back(BoundarySegment{i, (i + 1) % 6, BoundaryTag::DIRICHLET});
  b.corner_markers = {b.vertices[0], b.vertices[3]};
  b.check();
  return b;
}

PolygonalBoundary build_halfstrip(const WaveguideGeometry& geom, double r_trunc) {
  geom.validate();
  check_truncation(geom, r_trunc);
  const double half = 0.5 * geom.l;
  const double xa = geom.wall_offset();
  PolygonalBoundary b;
  b.vertices = {Point{-r_trunc, -half}, Point{-xa, -half}, Point{0.0, 0.0}, Point{-xa, half},
                Point{-r_trunc, half}};
  for (std::size_t i = 0; i < 5; ++i) {
    const BoundaryTag tag = (i == 4) ? BoundaryTag::GAMMA_1 : BoundaryTag::DIRICHLET;
    b.segments.push_back(BoundarySegment{i, (i + 1) % 5, tag});
  }
  b.corner_markers = {Point{0.0, 0.0}};
  b.check();
  return b;
}

PolygonalBoundary build_omega(double r0, double omega, double r_trunc, const ChordSize& chord,
                              bool single_sector) {
  if (!(omega > 0.0 && omega < kPi)) throw GeometryError("opening angle omega must lie in (0, pi)");
  if (!(r0 > 0.0)) throw GeometryError("disk radius r0 must be positive");
  if (!(r_trunc > 2.0 * r0)) {
    std::ostringstream os;
    os << "truncation radius " << r_trunc << " must exceed 2*r0 = " << 2.0 * r0;
    throw GeometryError(os.str());
  }
  const double a = 0.5 * omega;
  const Point origin{0.0, 0.0};
  const Point right_mid{r_trunc, 0.0};
  const Point left_mid{-r_trunc, 0.0};
  PolygonalBoundary b;
  std::vector<BoundaryTag> tags;
  auto push = [&](Point p, BoundaryTag tag_of_next) {
    b.vertices.push_back(p);
    tags.push_back(tag_of_next);
  };
  auto push_arc = [&](Point c, double rho, double t0, double t1, BoundaryTag tag, int min_seg,
                      const Point* mid) {
    std::vector<Point> pts;
    append_arc(pts, c, rho, t0, t1, chord, min_seg, mid);
    // the last arc point is the junction with the next edge
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) push(pts[i], tag);
    return pts.back();
  };

  if (single_sector) {
    push(origin, BoundaryTag::DIRICHLET);
    push(Point{r_trunc * std::cos(-a), r_trunc * std::sin(-a)}, BoundaryTag::GAMMA_2);
    const Point end = push_arc(origin, r_trunc, -a, a, BoundaryTag::GAMMA_2, 8, &right_mid);
    push(end, BoundaryTag::DIRICHLET);
  } else {
    const Point top_mid{0.0, r0};
    const Point bottom_mid{0.0, -r0};
    // right arc, ccw from -a to a
    push(Point{r_trunc * std::cos(-a), r_trunc * std::sin(-a)}, BoundaryTag::GAMMA_2);
    Point p = push_arc(origin, r_trunc, -a, a, BoundaryTag::GAMMA_2, 8, &right_mid);
    push(p, BoundaryTag::DIRICHLET);  // top-right ray inward
    push(Point{r0 * std::cos(a), r0 * std::sin(a)}, BoundaryTag::DIRICHLET);
    p = push_arc(origin, r0, a, kPi - a, BoundaryTag::DIRICHLET, 4, &top_mid);
    push(p, BoundaryTag::DIRICHLET);  // top-left ray outward
    push(Point{r_trunc * std::cos(kPi - a), r_trunc * std::sin(kPi - a)}, BoundaryTag::GAMMA_1);
    p = push_arc(origin, r_trunc, kPi - a, kPi + a, BoundaryTag::GAMMA_1, 8, &left_mid);
    push(p, BoundaryTag::DIRICHLET);  // bottom-left ray inward
    push(Point{r0 * std::cos(kPi + a), r0 * std::sin(kPi + a)}, BoundaryTag::DIRICHLET);
    p = push_arc(origin, r0, kPi + a, 2.0 * kPi - a, BoundaryTag::DIRICHLET, 4, &bottom_mid);
    push(p, BoundaryTag::DIRICHLET);  // bottom-right ray outward
  }
  const std::size_t n = b.vertices.size();
  for (std::size_t i = 0; i < n; ++i) b.segments.push_back(BoundarySegment{i, (i + 1) % n, tags[i]});
  b.corner_markers = {origin};
  b.check();
  return b;
}

double cut_width(const PolygonalBoundary& b, double x0) {
  std::vector<double> ys;
  for (const auto& s : b.segments) {
    const Point& p = b.vertices[s.a];
    const Point& q = b.vertices[s.b];
    if ((p.x <= x0 && x0 < q.x) || (q.x <= x0 && x0 < p.x)) {
      ys.push_back(p.y + (x0 - p.x) * (q.y - p.y) / (q.x - p.x));
    }
  }
  std::sort(ys.begin(), ys.end());
  double w = 0.0;
  for (std::size_t i = 0; i + 1 < ys.size(); i += 2) w += ys[i + 1] - ys[i];
  return w;
}

}  // namespace rwg
