#include "rwg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace rwg {

namespace {

using Exact = boost::multiprecision::number<
    boost::multiprecision::cpp_bin_float<512, boost::multiprecision::digit_base_2>,
    boost::multiprecision::et_off>;

// Filtered predicates: double evaluation, exact re-evaluation when the
// result is within the rounding error bound.
double orient(Point a, Point b, Point c) {
  const double l = (b.x - a.x) * (c.y - a.y);
  const double r = (b.y - a.y) * (c.x - a.x);
  const double det = l - r;
  const double bound = 1e-15 * (std::abs(l) + std::abs(r));
  if (std::abs(det) > bound) return det;
  const Exact e = (Exact(b.x) - a.x) * (Exact(c.y) - a.y) - (Exact(b.y) - a.y) * (Exact(c.x) - a.x);
  return static_cast<double>(e);
}

// > 0 when d lies strictly inside the circumcircle of the ccw triangle abc.
double incircle(Point a, Point b, Point c, Point d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double bc = bdx * cdy - cdx * bdy, ca = cdx * ady - adx * cdy, ab = adx * bdy - bdx * ady;
  const double det = alift * bc + blift * ca + clift * ab;
  const double perm = alift * (std::abs(bdx * cdy) + std::abs(cdx * bdy)) +
                      blift * (std::abs(cdx * ady) + std::abs(adx * cdy)) +
                      clift * (std::abs(adx * bdy) + std::abs(bdx * ady));
  if (std::abs(det) > 1e-14 * perm) return det;
  const Exact ex = Exact(a.x) - d.x, ey = Exact(a.y) - d.y;
  const Exact fx = Exact(b.x) - d.x, fy = Exact(b.y) - d.y;
  const Exact gx = Exact(c.x) - d.x, gy = Exact(c.y) - d.y;
  const Exact e = (ex * ex + ey * ey) * (fx * gy - gx * fy) + (fx * fx + fy * fy) * (gx * ey - ex * gy) +
                  (gx * gx + gy * gy) * (ex * fy - fx * ey);
  return static_cast<double>(e);
}

Point circumcenter(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double den = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by;
  const double c2 = cx * cx + cy * cy;
  return Point{a.x + (cy * b2 - by * c2) / den, a.y + (bx * c2 - cx * b2) / den};
}

double dot_at(Point c, Point a, Point b) { return (a.x - c.x) * (b.x - c.x) + (a.y - c.y) * (b.y - c.y); }

using EdgeKey = std::pair<int, int>;
EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // neighbor across the edge opposite v[i]
  bool alive = true;
};

struct BoundaryHit {
  int tri = -1;
  int edge = -1;
};

class Triangulator {
 public:
  Triangulator(const SizeField& size, const TriangulateOptions& opts) : size_(size), opts_(opts) {}

  Mesh run(const PolygonalBoundary& b);

 private:
  int add_point(Point p) {
    pts_.push_back(p);
    vtri_.push_back(-1);
    input_.push_back(0);
    acute_.push_back(0);
    return static_cast<int>(pts_.size()) - 1;
  }

  int new_tri(int a, int b, int c) {
    int t;
    if (!free_.empty()) {
      t = free_.back();
      free_.pop_back();
      tris_[t] = Tri{};
    } else {
      t = static_cast<int>(tris_.size());
      tris_.emplace_back();
      stamp_.push_back(0);
    }
    tris_[t].v = {a, b, c};
    return t;
  }

  bool is_constrained(int a, int b) const { return segs_.count(key(a, b)) != 0; }

  int locate(Point p, int start, BoundaryHit* hit, bool stop_at_constraints);
  bool insert(Point p, int seed, const EdgeKey* split, int* out_vertex, std::vector<int>* created);
  int triangle_with_edge(int a, int b) const;
  bool edge_exists(int a, int b) const { return triangle_with_edge(a, b) >= 0; }
  bool encroached(const EdgeKey& s) const;
  bool bad(int t) const;
  void split_segment(const EdgeKey& s);
  void after_insert(const std::vector<int>& created);
  void refine();
  Point split_point(const EdgeKey& s) const;

  const SizeField& size_;
  TriangulateOptions opts_;
  std::vector<Point> pts_;
  std::vector<int> vtri_;
  std::vector<char> input_;
  std::vector<char> acute_;
  std::vector<Tri> tris_;
  std::vector<int> stamp_;
  int stamp_now_ = 0;
  std::vector<int> free_;
  std::map<EdgeKey, BoundaryTag> segs_;
  std::deque<std::pair<EdgeKey, bool>> seg_queue_;  // (subsegment, split unconditionally)
  std::deque<std::pair<int, std::array<int, 3>>> tri_queue_;
  double scale_ = 1.0;
  int last_ = 0;
};

int Triangulator::locate(Point p, int start, BoundaryHit* hit, bool stop_at_constraints) {
  int t = start;
  std::size_t steps = 0;
  const std::size_t limit = 4 * tris_.size() + 16;
  while (true) {
    const Tri& tr = tris_[t];
    bool moved = false;
    for (int k = 0; k < 3; ++k) {
      const int i = static_cast<int>((k + steps) % 3);
      const int a = tr.v[(i + 1) % 3];
      const int b = tr.v[(i + 2) % 3];
      if (orient(pts_[a], pts_[b], p) < 0.0) {
        if ((stop_at_constraints && is_constrained(a, b)) || tr.nb[i] < 0) {
          if (hit != nullptr) *hit = BoundaryHit{t, i};
          return -1;
        }
        t = tr.nb[i];
        moved = true;
        break;
      }
    }
    if (!moved) return t;
    if (++steps > limit) break;
  }
  // Walk failed to terminate; fall back to an exhaustive search.
  for (std::size_t s = 0; s < tris_.size(); ++s) {
    const Tri& tr = tris_[s];
    if (!tr.alive) continue;
    if (orient(pts_[tr.v[0]], pts_[tr.v[1]], p) >= 0 && orient(pts_[tr.v[1]], pts_[tr.v[2]], p) >= 0 &&
        orient(pts_[tr.v[2]], pts_[tr.v[0]], p) >= 0)
      return static_cast<int>(s);
  }
  if (hit != nullptr) *hit = BoundaryHit{};
  return -1;
}

int Triangulator::triangle_with_edge(int a, int b) const {
  const int start = vtri_[a];
  if (start < 0) return -1;
  // rotate around a in both directions
  for (int dir = 0; dir < 2; ++dir) {
    int t = start;
    std::size_t guard = 0;
    while (t >= 0 && guard++ < 4096) {
      const Tri& tr = tris_[t];
      int i = 0;
      while (tr.v[i] != a) ++i;
      if (tr.v[(i + 1) % 3] == b || tr.v[(i + 2) % 3] == b) return t;
      t = dir == 0 ? tr.nb[(i + 1) % 3] : tr.nb[(i + 2) % 3];
      if (t == start) break;
    }
  }
  return -1;
}

bool Triangulator::insert(Point p, int seed, const EdgeKey* split, int* out_vertex,
                          std::vector<int>* created) {
  std::vector<int> excluded;
  std::vector<int> cavity;
  struct Edge {
    int a, b, outer, from;
  };
  std::vector<Edge> border;
  for (int attempt = 0; attempt < 64; ++attempt) {
    ++stamp_now_;
    const int mark = stamp_now_;
    cavity.assign(1, seed);
    stamp_[seed] = mark;
    for (std::size_t k = 0; k < cavity.size(); ++k) {
      const Tri& tr = tris_[cavity[k]];
      for (int i = 0; i < 3; ++i) {
        const int n = tr.nb[i];
        if (n < 0 || stamp_[n] == mark) continue;
        if (std::find(excluded.begin(), excluded.end(), n) != excluded.end()) continue;
        const int a = tr.v[(i + 1) % 3];
        const int b = tr.v[(i + 2) % 3];
        if (is_constrained(a, b)) continue;
        const Tri& nt = tris_[n];
        if (incircle(pts_[nt.v[0]], pts_[nt.v[1]], pts_[nt.v[2]], p) > 0.0) {
          stamp_[n] = mark;
          cavity.push_back(n);
        }
      }
    }
    border.clear();
    int offending = -1;
    for (int t : cavity) {
      const Tri& tr = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int n = tr.nb[i];
        if (n >= 0 && stamp_[n] == mark) continue;
        const int a = tr.v[(i + 1) % 3];
        const int b = tr.v[(i + 2) % 3];
        if (split != nullptr && key(a, b) == *split) continue;
        const double len2 = std::pow(pts_[b].x - pts_[a].x, 2) + std::pow(pts_[b].y - pts_[a].y, 2);
        if (orient(pts_[a], pts_[b], p) <= 1e-13 * len2) {
          if (offending < 0) offending = t;
        }
        border.push_back(Edge{a, b, n, t});
      }
    }
    if (offending < 0) break;
    if (offending == seed) return false;
    excluded.push_back(offending);
    if (attempt == 63) return false;
  }

  const int vi = add_point(p);
  std::vector<int> fresh;
  fresh.reserve(border.size());
  for (const Edge& e : border) {
    const int t = new_tri(e.a, e.b, vi);
    tris_[t].nb[2] = e.outer;
    if (e.outer >= 0) {
      Tri& o = tris_[e.outer];
      for (int i = 0; i < 3; ++i) {
        if (o.nb[i] == e.from) {
          const int oa = o.v[(i + 1) % 3];
          const int ob = o.v[(i + 2) % 3];
          if ((oa == e.b && ob == e.a)) o.nb[i] = t;
        }
      }
    }
    fresh.push_back(t);
  }
  // link the fan: triangle (a, b, p) meets (b, c, p) across (b, p)
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    Tri& ti = tris_[fresh[i]];
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      if (i == j) continue;
      const Tri& tj = tris_[fresh[j]];
      if (tj.v[0] == ti.v[1]) ti.nb[0] = fresh[j];  // edge (b, p)
      if (tj.v[1] == ti.v[0]) ti.nb[1] = fresh[j];  // edge (p, a)
    }
  }
  for (int t : cavity) {
    tris_[t].alive = false;
    free_.push_back(t);
  }
  for (int t : fresh) {
    for (int v : tris_[t].v) vtri_[v] = t;
  }
  last_ = fresh.front();
  if (out_vertex != nullptr) *out_vertex = vi;
  if (created != nullptr) *created = std::move(fresh);
  return true;
}

bool Triangulator::encroached(const EdgeKey& s) const {
  const int t = triangle_with_edge(s.first, s.second);
  if (t < 0) return true;
  const Tri& tr = tris_[t];
  int apex = -1;
  for (int v : tr.v) {
    if (v != s.first && v != s.second) apex = v;
  }
  const Point a = pts_[s.first];
  const Point b = pts_[s.second];
  const double len2 = std::pow(b.x - a.x, 2) + std::pow(b.y - a.y, 2);
  if (dot_at(pts_[apex], a, b) < -1e-12 * len2) return true;
  // Boundary edges have one triangle; the other side is outside the domain.
  for (int i = 0; i < 3; ++i) {
    const int n = tr.nb[i];
    if (n < 0) continue;
    const Tri& nt = tris_[n];
    bool shares = false;
    int other = -1;
    int cnt = 0;
    for (int v : nt.v) {
      if (v == s.first || v == s.second) ++cnt;
      else other = v;
    }
    shares = cnt == 2;
    if (shares && dot_at(pts_[other], a, b) < -1e-12 * len2) return true;
  }
  return false;
}

bool Triangulator::bad(int t) const {
  const Tri& tr = tris_[t];
  const Point a = pts_[tr.v[0]], b = pts_[tr.v[1]], c = pts_[tr.v[2]];
  const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
  const double shortest = std::min({la, lb, lc});
  const double longest = std::max({la, lb, lc});
  const double area = 0.5 * orient(a, b, c);
  const double circumradius = la * lb * lc / (4.0 * area);
  const double bound = 1.0 / (2.0 * std::sin(opts_.min_angle_deg * std::numbers::pi / 180.0));
  if (circumradius / shortest > bound) return true;
  const Point centroid{(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
  return longest > size_(centroid);
}

Point Triangulator::split_point(const EdgeKey& s) const {
  Point a = pts_[s.first];
  Point b = pts_[s.second];
  int apex = -1;
  if (acute_[s.first] && !acute_[s.second]) apex = s.first;
  if (acute_[s.second] && !acute_[s.first]) apex = s.second;
  if (apex < 0) return Point{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
  // concentric shells around acute input vertices
  const Point o = pts_[apex];
  const Point q = apex == s.first ? b : a;
  const double len = distance(o, q);
  double r = std::exp2(std::round(std::log2(0.5 * len)));
  if (r < 0.25 * len || r > 0.75 * len) r = 0.5 * len;
  const double f = r / len;
  return Point{o.x + f * (q.x - o.x), o.y + f * (q.y - o.y)};
}

void Triangulator::after_insert(const std::vector<int>& created) {
  for (int t : created) {
    const Tri& tr = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const int a = tr.v[(i + 1) % 3];
      const int b = tr.v[(i + 2) % 3];
      if (is_constrained(a, b)) seg_queue_.push_back({key(a, b), false});
    }
    tri_queue_.push_back({t, tr.v});
  }
}

void Triangulator::split_segment(const EdgeKey& s) {
  const auto it = segs_.find(s);
  if (it == segs_.end()) return;
  const BoundaryTag tag = it->second;
  const int seed = triangle_with_edge(s.first, s.second);
  if (seed < 0) throw MeshError("internal: lost a boundary subsegment");
  const Point m = split_point(s);
  int vi = -1;
  std::vector<int> created;
  if (!insert(m, seed, &s, &vi, &created)) {
    std::ostringstream os;
    os << "failed to split boundary segment near (" << m.x << ", " << m.y << ")";
    throw MeshError(os.str());
  }
  segs_.erase(s);
  segs_.emplace(key(s.first, vi), tag);
  segs_.emplace(key(vi, s.second), tag);
  after_insert(created);
  seg_queue_.push_back({key(s.first, vi), false});
  seg_queue_.push_back({key(vi, s.second), false});
}

void Triangulator::refine() {
  for (const auto& [k, tag] : segs_) seg_queue_.push_back({k, false});
  for (std::size_t t = 0; t < tris_.size(); ++t) {
    if (tris_[t].alive) tri_queue_.push_back({static_cast<int>(t), tris_[t].v});
  }
  while (true) {
    if (pts_.size() > opts_.max_nodes) {
      const Point& p = pts_.back();
      std::ostringstream os;
      os << "mesh size constraints unreachable: exceeded " << opts_.max_nodes
         << " nodes while refining near (" << p.x << ", " << p.y << ")";
      throw MeshError(os.str());
    }
    if (!seg_queue_.empty()) {
      const auto [s, force] = seg_queue_.front();
      seg_queue_.pop_front();
      if (segs_.count(s) && (force || encroached(s))) split_segment(s);
      continue;
    }
    if (tri_queue_.empty()) break;
    const auto [t, verts] = tri_queue_.front();
    tri_queue_.pop_front();
    if (!tris_[t].alive || tris_[t].v != verts || !bad(t)) continue;
    const Tri& tr = tris_[t];
    const Point c = circumcenter(pts_[tr.v[0]], pts_[tr.v[1]], pts_[tr.v[2]]);
    BoundaryHit hit;
    const int host = locate(c, t, &hit, true);
    if (host < 0) {
      if (hit.tri < 0) continue;
      const Tri& ht = tris_[hit.tri];
      seg_queue_.push_back({key(ht.v[(hit.edge + 1) % 3], ht.v[(hit.edge + 2) % 3]), true});
      tri_queue_.push_back({t, verts});
      continue;
    }
    // reject circumcenters that would encroach a subsegment of the cavity
    bool rejected = false;
    {
      ++stamp_now_;
      const int mark = stamp_now_;
      std::vector<int> cav{host};
      stamp_[host] = mark;
      for (std::size_t k = 0; k < cav.size(); ++k) {
        const Tri& ct = tris_[cav[k]];
        for (int i = 0; i < 3; ++i) {
          const int a = ct.v[(i + 1) % 3];
          const int b = ct.v[(i + 2) % 3];
          if (is_constrained(a, b)) {
            const double len2 =
                std::pow(pts_[b].x - pts_[a].x, 2) + std::pow(pts_[b].y - pts_[a].y, 2);
            if (dot_at(c, pts_[a], pts_[b]) < -1e-12 * len2) {
              seg_queue_.push_back({key(a, b), true});
              rejected = true;
            }
            continue;
          }
          const int n = ct.nb[i];
          if (n < 0 || stamp_[n] == mark) continue;
          const Tri& nt = tris_[n];
          if (incircle(pts_[nt.v[0]], pts_[nt.v[1]], pts_[nt.v[2]], c) > 0.0) {
            stamp_[n] = mark;
            cav.push_back(n);
          }
        }
      }
    }
    if (rejected) {
      tri_queue_.push_back({t, verts});
      continue;
    }
    const Tri& host_tri = tris_[host];
    bool duplicate = false;
    for (int v : host_tri.v) {
      if (distance(pts_[v], c) < 1e-12 * scale_) duplicate = true;
    }
    if (duplicate) continue;
    std::vector<int> created;
    if (!insert(c, host, nullptr, nullptr, &created)) continue;
    after_insert(created);
  }
}

Mesh Triangulator::run(const PolygonalBoundary& b) {
  b.check();
  double xmin = std::numeric_limits<double>::max(), ymin = xmin;
  double xmax = -xmin, ymax = -xmin;
  for (const Point& p : b.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  scale_ = std::max(xmax - xmin, ymax - ymin);
  const double pad = scale_;
  add_point(Point{xmin - pad, ymin - pad});
  add_point(Point{xmax + pad, ymin - pad});
  add_point(Point{xmax + pad, ymax + pad});
  add_point(Point{xmin - pad, ymax + pad});
  {
    const int t0 = new_tri(0, 1, 2);
    const int t1 = new_tri(0, 2, 3);
    tris_[t0].nb[1] = t1;  // edge (2, 0)
    tris_[t1].nb[2] = t0;  // edge (0, 2)
    vtri_[0] = t0;
    vtri_[1] = t0;
    vtri_[2] = t0;
    vtri_[3] = t1;
  }

  // Input vertices, then boundary points pre-split to the local size.
  const std::size_t nv = b.vertices.size();
  std::vector<int> vid(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    vid[i] = add_point(b.vertices[i]);
    input_[vid[i]] = 1;
  }
  for (std::size_t i = 0; i < nv; ++i) {
    const Point prev = b.vertices[(i + nv - 1) % nv];
    const Point cur = b.vertices[i];
    const Point next = b.vertices[(i + 1) % nv];
    const double ux = prev.x - cur.x, uy = prev.y - cur.y;
    const double wx = next.x - cur.x, wy = next.y - cur.y;
    // interior angle, swept counter-clockwise from next to prev
    double interior = std::atan2(wx * uy - wy * ux, ux * wx + uy * wy);
    if (interior < 0) interior += 2.0 * std::numbers::pi;
    if (interior < std::numbers::pi / 3.0) acute_[vid[i]] = 1;
  }
  struct Sub {
    int a, b;
    BoundaryTag tag;
  };
  std::vector<Sub> subs;
  for (const auto& s : b.segments) {
    // split until every piece fits the size at its midpoint
    std::vector<Point> pieces;
    std::function<void(Point, Point)> rec = [&](Point p, Point q) {
      const Point m{0.5 * (p.x + q.x), 0.5 * (p.y + q.y)};
      if (distance(p, q) > size_(m)) {
        rec(p, m);
        rec(m, q);
      } else {
        pieces.push_back(q);
      }
    };
    rec(b.vertices[s.a], b.vertices[s.b]);
    int prev = vid[s.a];
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
      const int v = add_point(pieces[k]);
      subs.push_back(Sub{prev, v, s.tag});
      prev = v;
    }
    subs.push_back(Sub{prev, vid[s.b], s.tag});
  }

  auto insert_free = [&](Point p) {
    BoundaryHit hit;
    const int host = locate(p, last_, &hit, false);
    if (host < 0) throw MeshError("internal: boundary point outside bounding box");
    int vi = -1;
    if (!insert(p, host, nullptr, &vi, nullptr)) {
      std::ostringstream os;
      os << "failed to insert boundary point (" << p.x << ", " << p.y << ")";
      throw MeshError(os.str());
    }
    return vi;
  };

  // Points were staged in pts_ to fix their indices; insert them now and
  // remap the staged indices onto the triangulation vertices.
  const std::size_t staged = pts_.size();
  std::vector<int> remap(staged, -1);
  for (int i = 0; i < 4; ++i) remap[i] = i;
  std::vector<Point> staged_pts(pts_.begin(), pts_.end());
  std::vector<char> staged_input(input_.begin(), input_.end());
  std::vector<char> staged_acute(acute_.begin(), acute_.end());
  pts_.resize(4);
  vtri_.resize(4);
  input_.resize(4);
  acute_.resize(4);
  for (std::size_t i = 4; i < staged; ++i) {
    remap[i] = insert_free(staged_pts[i]);
    input_[remap[i]] = staged_input[i];
    acute_[remap[i]] = staged_acute[i];
  }
  for (auto& s : subs) {
    s.a = remap[s.a];
    s.b = remap[s.b];
  }

  // Recover boundary subsegments by midpoint splitting.
  std::deque<Sub> pending(subs.begin(), subs.end());
  std::vector<Sub> done;
  std::size_t guard = 0;
  while (!pending.empty()) {
    if (++guard > 10 * opts_.max_nodes) throw MeshError("boundary recovery did not converge");
    const Sub s = pending.front();
    pending.pop_front();
    if (edge_exists(s.a, s.b)) {
      done.push_back(s);
      continue;
    }
    const Point m{0.5 * (pts_[s.a].x + pts_[s.b].x), 0.5 * (pts_[s.a].y + pts_[s.b].y)};
    const int host = locate(m, vtri_[s.a], nullptr, false);
    int vi = -1;
    if (host < 0 || !insert(m, host, nullptr, &vi, nullptr))
      throw MeshError("boundary recovery failed near a boundary segment");
    pending.push_back(Sub{s.a, vi, s.tag});
    pending.push_back(Sub{vi, s.b, s.tag});
  }
  // An earlier recovered edge can be destroyed by a later midpoint; repeat.
  bool all = false;
  while (!all) {
    all = true;
    std::vector<Sub> next;
    for (const Sub& s : done) {
      if (edge_exists(s.a, s.b)) {
        next.push_back(s);
        continue;
      }
      all = false;
      const Point m{0.5 * (pts_[s.a].x + pts_[s.b].x), 0.5 * (pts_[s.a].y + pts_[s.b].y)};
      const int host = locate(m, vtri_[s.a], nullptr, false);
      int vi = -1;
      if (host < 0 || !insert(m, host, nullptr, &vi, nullptr))
        throw MeshError("boundary recovery failed near a boundary segment");
      next.push_back(Sub{s.a, vi, s.tag});
      next.push_back(Sub{vi, s.b, s.tag});
    }
    done = std::move(next);
    if (++guard > 10 * opts_.max_nodes) throw MeshError("boundary recovery did not converge");
  }
  for (const Sub& s : done) segs_.emplace(key(s.a, s.b), s.tag);

  // Remove everything reachable from the bounding box without crossing a segment.
  {
    ++stamp_now_;
    const int mark = stamp_now_;
    std::vector<int> stack;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive) continue;
      for (int v : tris_[t].v) {
        if (v < 4 && stamp_[t] != mark) {
          stamp_[t] = mark;
          stack.push_back(static_cast<int>(t));
        }
      }
    }
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      const Tri& tr = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int n = tr.nb[i];
        if (n < 0 || stamp_[n] == mark) continue;
        if (is_constrained(tr.v[(i + 1) % 3], tr.v[(i + 2) % 3])) continue;
        stamp_[n] = mark;
        stack.push_back(n);
      }
    }
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (tris_[t].alive && stamp_[t] == mark) {
        tris_[t].alive = false;
        free_.push_back(static_cast<int>(t));
      }
    }
    for (auto& tr : tris_) {
      if (!tr.alive) continue;
      for (int& n : tr.nb) {
        if (n >= 0 && !tris_[n].alive) n = -1;
      }
    }
    std::fill(vtri_.begin(), vtri_.end(), -1);
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive) continue;
      for (int v : tris_[t].v) vtri_[v] = static_cast<int>(t);
      last_ = static_cast<int>(t);
    }
  }

  refine();

  Mesh mesh;
  mesh.h_max = size_.h_max();
  mesh.grading = size_.grading();
  std::vector<long> newid(pts_.size(), -1);
  for (const auto& tr : tris_) {
    if (!tr.alive) continue;
    std::array<std::size_t, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      const int v = tr.v[k];
      if (newid[v] < 0) {
        newid[v] = static_cast<long>(mesh.nodes.size());
        mesh.nodes.push_back(pts_[v]);
      }
      tri[k] = static_cast<std::size_t>(newid[v]);
    }
    mesh.triangles.push_back(tri);
  }
  for (const auto& [k, tag] : segs_) {
    if (newid[k.first] < 0 || newid[k.second] < 0)
      throw MeshError("internal: boundary edge without triangle");
    mesh.boundary_edges.push_back(BoundaryEdge{static_cast<std::size_t>(newid[k.first]),
                                               static_cast<std::size_t>(newid[k.second]), tag});
  }
  return mesh;
}

}  // namespace

SizeField::SizeField(double h_max, double grading, double r_ref, std::vector<Point> centers)
    : h_max_(h_max), grading_(grading), r_ref_(r_ref), centers_(std::move(centers)) {
  if (!(h_max > 0.0)) throw MeshError("h_max must be positive");
  if (!(grading >= 0.0 && grading < 1.0)) throw MeshError("grading exponent must lie in [0, 1)");
  if (!(r_ref > 0.0)) throw MeshError("grading reference radius must be positive");
  r_floor_ = grading > 0.0 ? r_ref * std::pow(std::min(1.0, h_max / r_ref), 1.0 / (1.0 - grading))
                           : r_ref;
}

double SizeField::operator()(Point p) const {
  double h = h_max_;
  if (grading_ == 0.0) return h;
  for (const Point& c : centers_) {
    const double r = std::max(distance(p, c), r_floor_);
    h = std::min(h, h_max_ * std::pow(std::min(1.0, r / r_ref_), grading_));
  }
  return h;
}

SizeField SizeField::with_centers(const std::vector<Point>& extra) const {
  std::vector<Point> all = centers_;
  all.insert(all.end(), extra.begin(), extra.end());
  return SizeField(h_max_, grading_, r_ref_, std::move(all));
}

ChordSize SizeField::as_chord() const {
  return [field = *this](Point p) { return field(p); };
}

double Mesh::triangle_area(std::size_t t) const {
  const auto& tr = triangles[t];
  return 0.5 * orient(nodes[tr[0]], nodes[tr[1]], nodes[tr[2]]);
}

double Mesh::min_angle_deg() const {
  double best = 180.0;
  for (const auto& tr : triangles) {
    for (int k = 0; k < 3; ++k) {
      const Point o = nodes[tr[k]];
      const Point a = nodes[tr[(k + 1) % 3]];
      const Point b = nodes[tr[(k + 2) % 3]];
      const double c = dot_at(o, a, b) / (distance(o, a) * distance(o, b));
      best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / std::numbers::pi);
    }
  }
  return best;
}

double Mesh::min_edge() const {
  double best = std::numeric_limits<double>::max();
  for (const auto& tr : triangles) {
    for (int k = 0; k < 3; ++k) best = std::min(best, distance(nodes[tr[k]], nodes[tr[(k + 1) % 3]]));
  }
  return best;
}

double Mesh::total_area() const {
  double a = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
  return a;
}

void Mesh::check() const {
  std::map<EdgeKey, int> count;
  for (std::size_t t = 0; t < triangles.size(); ++t) {
    if (!(triangle_area(t) > 0.0)) {
      std::ostringstream os;
      os << "triangle " << t << " has non-positive area";
      throw MeshError(os.str());
    }
    const auto& tr = triangles[t];
    for (int k = 0; k < 3; ++k)
      ++count[key(static_cast<int>(tr[k]), static_cast<int>(tr[(k + 1) % 3]))];
  }
  std::map<EdgeKey, int> bnd;
  for (const auto& e : boundary_edges) ++bnd[key(static_cast<int>(e.a), static_cast<int>(e.b))];
  for (const auto& [k, n] : count) {
    if (n > 2) throw MeshError("non-manifold edge in mesh");
    const bool on_boundary = bnd.count(k) != 0;
    if (n == 1 && !on_boundary) throw MeshError("hanging or untagged boundary edge in mesh");
    if (n == 2 && on_boundary) throw MeshError("tagged boundary edge lies in the interior");
  }
  for (const auto& [k, n] : bnd) {
    if (n != 1 || !count.count(k)) throw MeshError("boundary edge does not belong to the mesh");
  }
}

Mesh triangulate(const PolygonalBoundary& b, const SizeField& size, const TriangulateOptions& opts) {
  std::vector<Point> extra;
  if (opts.grade_reentrant && size.grading() > 0.0) {
    const std::size_t n = b.vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point prev = b.vertices[(i + n - 1) % n];
      const Point cur = b.vertices[i];
      const Point next = b.vertices[(i + 1) % n];
      const double turn = orient(prev, cur, next);
      const double l1 = distance(prev, cur), l2 = distance(cur, next);
      // right turn of more than ~5 degrees in a ccw polygon
      if (turn < -std::sin(5.0 * std::numbers::pi / 180.0) * l1 * l2) extra.push_back(cur);
    }
  }
  const SizeField field = size.with_centers(extra);
  Triangulator tri(field, opts);
  Mesh m = tri.run(b);
  m.check();
  return m;
}

Mesh triangulate(const PolygonalBoundary& b, double h_max, double grading, double r_ref) {
  return triangulate(b, SizeField(h_max, grading, r_ref, b.corner_markers));
}

Mesh mirror_glue(const Mesh& half, double axis_x) {
  std::vector<char> on_axis(half.nodes.size(), 0);
  for (const auto& e : half.boundary_edges) {
    if (e.tag == BoundaryTag::INTERFACE) {
      on_axis[e.a] = 1;
      on_axis[e.b] = 1;
    }
  }
  for (std::size_t i = 0; i < half.nodes.size(); ++i) {
    if (on_axis[i] && half.nodes[i].x != axis_x)
      throw MeshError("interface node off the mirror axis");
  }
  Mesh full = half;
  std::vector<std::size_t> image(half.nodes.size());
  for (std::size_t i = 0; i < half.nodes.size(); ++i) {
    if (on_axis[i]) {
      image[i] = i;
    } else {
      image[i] = full.nodes.size();
      full.nodes.push_back(Point{2.0 * axis_x - half.nodes[i].x, half.nodes[i].y});
    }
  }
  for (const auto& tr : half.triangles) {
    full.triangles.push_back({image[tr[0]], image[tr[2]], image[tr[1]]});
  }
  full.boundary_edges.clear();
  for (const auto& e : half.boundary_edges) {
    if (e.tag == BoundaryTag::INTERFACE) continue;
    full.boundary_edges.push_back(e);
  }
  for (const auto& e : half.boundary_edges) {
    if (e.tag == BoundaryTag::INTERFACE) continue;
    BoundaryTag tag = e.tag;
    if (tag == BoundaryTag::GAMMA_1) tag = BoundaryTag::GAMMA_2;
    else if (tag == BoundaryTag::GAMMA_2) tag = BoundaryTag::GAMMA_1;
    full.boundary_edges.push_back(BoundaryEdge{image[e.a], image[e.b], tag});
  }
  full.check();
  return full;
}

Mesh mesh_waveguide(const WaveguideGeometry& geom, double r_trunc, double h_max, double grading,
                    double r_ref) {
  const SizeField field(h_max, grading, r_ref, {Point{0.0, 0.0}});
  const PolygonalBoundary half = build_waveguide_half(geom, r_trunc, field.as_chord());
  const Mesh m = triangulate(half, field);
  return mirror_glue(m, 0.5 * geom.d);
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  const auto old_precision = os.precision();
  os << std::setprecision(17);
  os << "mesh2d v1\n";
  os << "nodes " << mesh.nodes.size() << "\n";
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
    os << i << " " << mesh.nodes[i].x << " " << mesh.nodes[i].y << "\n";
  os << "tris " << mesh.triangles.size() << "\n";
  for (const auto& t : mesh.triangles) os << t[0] << " " << t[1] << " " << t[2] << "\n";
  os << "bedges " << mesh.boundary_edges.size() << "\n";
  for (const auto& e : mesh.boundary_edges) os << e.a << " " << e.b << " " << to_string(e.tag) << "\n";
  os.precision(old_precision);
}

Mesh read_mesh(std::istream& is) {
  std::string word, version;
  if (!(is >> word >> version) || word != "mesh2d" || version != "v1")
    throw MeshError("not a 'mesh2d v1' file");
  Mesh m;
  std::size_t n = 0;
  if (!(is >> word >> n) || word != "nodes") throw MeshError("expected 'nodes' block");
  m.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx;
    if (!(is >> idx >> m.nodes[i].x >> m.nodes[i].y) || idx != i) throw MeshError("bad node line");
  }
  if (!(is >> word >> n) || word != "tris") throw MeshError("expected 'tris' block");
  m.triangles.resize(n);
  for (auto& t : m.triangles) {
    if (!(is >> t[0] >> t[1] >> t[2])) throw MeshError("bad triangle line");
  }
  if (!(is >> word >> n) || word != "bedges") throw MeshError("expected 'bedges' block");
  m.boundary_edges.resize(n);
  for (auto& e : m.boundary_edges) {
    std::string tag;
    if (!(is >> e.a >> e.b >> tag)) throw MeshError("bad boundary edge line");
    e.tag = tag_from_string(tag);
  }
  return m;
}

}  // namespace rwg
