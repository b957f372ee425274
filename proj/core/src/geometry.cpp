#include "cavityforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <nlohmann/json.hpp>

namespace cavityforge::geometry
{

using std::numbers::pi;

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Seg2
{
  double ax, az, bx, bz;
};

// Distance from (px, pz) to a segment, plus the closest point.
double SegmentDistance(const Seg2 &s, double px, double pz, double &qx, double &qz)
{
  const double dx = s.bx - s.ax;
  const double dz = s.bz - s.az;
  const double len2 = dx * dx + dz * dz;
  double t = len2 > 0.0 ? ((px - s.ax) * dx + (pz - s.az) * dz) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  qx = s.ax + t * dx;
  qz = s.az + t * dz;
  return std::hypot(px - qx, pz - qz);
}

double FrustumRadiusAt(const Frustum &f, double z)
{
  const double t = (z - f.z0) / (f.z1 - f.z0);
  return f.r0 + t * (f.r1 - f.r0);
}

bool InsideFrustum(const Frustum &f, const Vec3 &p)
{
  if (p[2] < f.z0 || p[2] > f.z1)
  {
    return false;
  }
  const double rho = std::hypot(p[0] - f.cx, p[1] - f.cy);
  return rho <= FrustumRadiusAt(f, p[2]);
}

// Unsigned distance to the exposed surface (side and free end) of a post.
double FrustumDistance(const Frustum &f, const Vec3 &p, Vec3 *normal)
{
  const double ex = p[0] - f.cx;
  const double ey = p[1] - f.cy;
  const double rho = std::hypot(ex, ey);
  const Seg2 side{f.r0, f.z0, f.r1, f.z1};
  const Seg2 top{f.r1, f.z1, 0.0, f.z1};
  // Posts stand on the floor: below it the distance is continued straight down.
  const double pz = std::max(p[2], f.z0);
  const bool inside = InsideFrustum(f, {p[0], p[1], pz});
  double qx1, qz1, qx2, qz2;
  const double d1 = SegmentDistance(side, rho, pz, qx1, qz1);
  const double d2 = SegmentDistance(top, rho, pz, qx2, qz2);
  const bool use_side = d1 <= d2;
  const double d = use_side ? d1 : d2;
  if (normal)
  {
    double nr, nz;
    if (d > 1e-12 * (f.z1 + f.r1))
    {
      nr = (rho - (use_side ? qx1 : qx2)) / d;
      nz = (pz - (use_side ? qz1 : qz2)) / d;
      if (inside)
      {
        nr = -nr;
        nz = -nz;
      }
    }
    else if (use_side)
    {
      // Outward normal of the slanted side in (r, z).
      const double dz = f.z1 - f.z0;
      const double dr = f.r1 - f.r0;
      const double len = std::hypot(dz, dr);
      nr = dz / len;
      nz = -dr / len;
    }
    else
    {
      nr = 0.0;
      nz = 1.0;
    }
    const double ux = rho > 0.0 ? ex / rho : 1.0;
    const double uy = rho > 0.0 ? ey / rho : 0.0;
    *normal = {nr * ux, nr * uy, nz};
  }
  return inside ? 0.0 : d;
}

bool InsideBox(const Box &b, const Vec3 &p)
{
  for (int a = 0; a < 3; a++)
  {
    if (p[a] < b.lo[a] || p[a] > b.hi[a])
    {
      return false;
    }
  }
  return true;
}

double BoxDistance(const Box &b, const Vec3 &p, Vec3 *normal)
{
  Vec3 q;
  bool inside = true;
  for (int a = 0; a < 3; a++)
  {
    q[a] = std::clamp(p[a], b.lo[a], b.hi[a]);
    inside = inside && q[a] == p[a];
  }
  if (!inside)
  {
    const double d = std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]);
    if (normal)
    {
      *normal = {(p[0] - q[0]) / d, (p[1] - q[1]) / d, (p[2] - q[2]) / d};
    }
    return d;
  }
  if (normal)
  {
    // Nearest face.
    double best = kInf;
    for (int a = 0; a < 3; a++)
    {
      const double dlo = p[a] - b.lo[a];
      const double dhi = b.hi[a] - p[a];
      if (dlo < best)
      {
        best = dlo;
        *normal = {0, 0, 0};
        (*normal)[a] = -1.0;
      }
      if (dhi < best)
      {
        best = dhi;
        *normal = {0, 0, 0};
        (*normal)[a] = 1.0;
      }
    }
  }
  return 0.0;
}

double WallDistance(double a, double h, const Vec3 &p, Vec3 *normal)
{
  const double rho = std::hypot(p[0], p[1]);
  const double ds = a - rho;
  const double db = p[2];
  const double dt = h - p[2];
  const double d = std::min({ds, db, dt});
  if (normal)
  {
    if (d == ds)
    {
      *normal = rho > 0.0 ? Vec3{-p[0] / rho, -p[1] / rho, 0.0} : Vec3{-1.0, 0.0, 0.0};
    }
    else if (d == db)
    {
      *normal = {0.0, 0.0, 1.0};
    }
    else
    {
      *normal = {0.0, 0.0, -1.0};
    }
  }
  return std::max(d, 0.0);
}

void Require(bool ok, const std::string &message)
{
  if (!ok)
  {
    throw GeometryError(message);
  }
}

bool HasPosts(Family f)
{
  return f == Family::Reentrant || f == Family::TaperedReentrant || f == Family::DoublyReentrant ||
         f == Family::TaperedDoublyReentrant;
}

bool IsDoubly(Family f) { return f == Family::DoublyReentrant || f == Family::TaperedDoublyReentrant; }

bool IsTapered(Family f) { return f == Family::TaperedReentrant || f == Family::TaperedDoublyReentrant; }

}  // namespace

double ConductorDistance::min() const { return std::min({post, plate, wall}); }

std::string_view ToString(Family family)
{
  switch (family)
  {
    case Family::Cylinder:
      return "cylinder";
    case Family::Reentrant:
      return "reentrant";
    case Family::TaperedReentrant:
      return "tapered_reentrant";
    case Family::DoublyReentrant:
      return "doubly_reentrant";
    case Family::TaperedDoublyReentrant:
      return "tapered_doubly_reentrant";
    case Family::PlateLoaded:
      return "plate_loaded";
  }
  return "unknown";
}

Family FamilyFromString(std::string_view name)
{
  for (Family f : {Family::Cylinder, Family::Reentrant, Family::TaperedReentrant, Family::DoublyReentrant,
                   Family::TaperedDoublyReentrant, Family::PlateLoaded})
  {
    if (ToString(f) == name)
    {
      return f;
    }
  }
  throw GeometryError("unknown cavity family '" + std::string(name) + "'");
}

bool BorProfile::Contains(double r, double z) const
{
  bool inside = false;
  const std::size_t n = polyline.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
  {
    const auto &pi_ = polyline[i];
    const auto &pj = polyline[j];
    if ((pi_[1] > z) != (pj[1] > z))
    {
      const double x = pj[0] + (z - pj[1]) * (pi_[0] - pj[0]) / (pi_[1] - pj[1]);
      if (r < x)
      {
        inside = !inside;
      }
    }
  }
  return inside;
}

double BorProfile::Area() const
{
  double s = 0.0;
  const std::size_t n = polyline.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
  {
    s += polyline[j][0] * polyline[i][1] - polyline[i][0] * polyline[j][1];
  }
  return std::abs(0.5 * s);
}

double BorProfile::RevolvedVolume() const
{
  // Integral of r over the polygon: sum (x_j y_i - x_i y_j)(x_i + x_j) / 6.
  double s = 0.0;
  const std::size_t n = polyline.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
  {
    const double cross = polyline[j][0] * polyline[i][1] - polyline[i][0] * polyline[j][1];
    s += cross * (polyline[i][0] + polyline[j][0]);
  }
  return 2.0 * pi * std::abs(s / 6.0);
}

CavityGeometry::CavityGeometry(Family family, CavityParams params)
  : family_(family), params_(std::move(params))
{
}

CavityGeometry CavityGeometry::Make(Family family, const CavityParams &p)
{
  Require(p.a > 0.0, "cavity radius a must be positive");
  Require(p.h > 0.0, "cavity height h must be positive");

  CavityGeometry geo(family, p);
  const Family post_family = family == Family::PlateLoaded ? p.host : family;
  if (family == Family::PlateLoaded)
  {
    Require(p.host == Family::Cylinder || IsDoubly(p.host) || p.host == Family::Reentrant ||
                p.host == Family::TaperedReentrant,
            "plate_loaded host must be a cylinder or a reentrant family");
  }

  if (HasPosts(post_family))
  {
    Require(p.post.has_value(), std::string(ToString(post_family)) + " needs reentrance parameters");
    PostSpec post = *p.post;
    if (!IsTapered(post_family))
    {
      post.R_base = post.R;
    }
    Require(post.R > 0.0, "reentrance radius R must be positive");
    Require(post.R_base > 0.0, "reentrance base radius R' must be positive");
    Require(post.h_r > 0.0, "reentrance height h_r must be positive");
    Require(post.h_r < p.h, "reentrance height h_r must be below the cavity height h");
    const double rmax = std::max(post.R, post.R_base);
    if (IsDoubly(post_family))
    {
      Require(p.post_gap > 0.0, "reentrance gap g must be positive");
      const double cx = 0.5 * p.post_gap + post.R;
      Require(cx + rmax < p.a, "reentrances do not fit inside the cavity radius");
      geo.posts_.push_back({-cx, 0.0, 0.0, post.h_r, post.R_base, post.R});
      geo.posts_.push_back({cx, 0.0, 0.0, post.h_r, post.R_base, post.R});
    }
    else
    {
      Require(rmax < p.a, "reentrance radius must be smaller than the cavity radius");
      geo.posts_.push_back({0.0, 0.0, 0.0, post.h_r, post.R_base, post.R});
    }
    geo.params_.post = post;
  }

  if (family == Family::PlateLoaded)
  {
    Require(p.plate.has_value(), "plate_loaded needs plate parameters");
    const PlateSpec &pl = *p.plate;
    Require(pl.d > 0.0, "plate length d must be positive");
    Require(pl.t > 0.0, "plate thickness t must be positive");
    Require(pl.g > 0.0, "plate gap g must be positive");
    Require(pl.d + 2.0 * pl.g <= 2.0 * p.a, "plate does not fit: d + 2g exceeds the cavity diameter");
    const double height = pl.height.value_or(pl.d);
    Require(height > 0.0 && height < p.h, "plate height must fit inside the cavity height");
    const double xc = pl.x_center.value_or(p.a - pl.g - 0.5 * pl.d);
    const double zc = pl.z_center.value_or(0.5 * p.h);
    Box box{{xc - 0.5 * pl.d, -0.5 * pl.t, zc - 0.5 * height}, {xc + 0.5 * pl.d, 0.5 * pl.t, zc + 0.5 * height}};
    Require(box.lo[2] > 0.0 && box.hi[2] < p.h, "plate must not touch the end caps");
    const double half_t = 0.5 * pl.t;
    Require(std::hypot(std::max(std::abs(box.lo[0]), std::abs(box.hi[0])), half_t) < p.a,
            "plate must not touch the side wall");
    for (const auto &post : geo.posts_)
    {
      const double rmax = std::max(post.r0, post.r1);
      const bool overlap_x = box.hi[0] > post.cx - rmax && box.lo[0] < post.cx + rmax;
      const bool overlap_z = box.lo[2] < post.z1;
      Require(!(overlap_x && overlap_z), "plate intersects a reentrance");
    }
    geo.plate_ = box;
  }
  else
  {
    Require(!p.plate.has_value(), std::string(ToString(family)) + " does not take plate parameters");
  }
  return geo;
}

bool CavityGeometry::axisymmetric() const
{
  return family_ == Family::Cylinder || family_ == Family::Reentrant || family_ == Family::TaperedReentrant;
}

bool CavityGeometry::IsVacuum(const Vec3 &p) const
{
  if (!(p[2] > 0.0 && p[2] < params_.h && std::hypot(p[0], p[1]) < params_.a))
  {
    return false;
  }
  for (const auto &post : posts_)
  {
    if (InsideFrustum(post, p))
    {
      return false;
    }
  }
  if (plate_ && InsideBox(*plate_, p))
  {
    return false;
  }
  return true;
}

ConductorDistance CavityGeometry::Distance(const Vec3 &p) const
{
  ConductorDistance d{kInf, kInf, WallDistance(params_.a, params_.h, p, nullptr)};
  for (const auto &post : posts_)
  {
    d.post = std::min(d.post, FrustumDistance(post, p, nullptr));
  }
  if (plate_)
  {
    d.plate = BoxDistance(*plate_, p, nullptr);
  }
  return d;
}

Vec3 CavityGeometry::SurfaceNormal(const Vec3 &p) const
{
  Vec3 best_n;
  double best = WallDistance(params_.a, params_.h, p, &best_n);
  for (const auto &post : posts_)
  {
    Vec3 n;
    const double d = FrustumDistance(post, p, &n);
    if (d < best)
    {
      best = d;
      best_n = n;
    }
  }
  if (plate_)
  {
    Vec3 n;
    const double d = BoxDistance(*plate_, p, &n);
    if (d < best)
    {
      best_n = n;
    }
  }
  return best_n;
}

double CavityGeometry::VacuumVolume() const
{
  double v = pi * params_.a * params_.a * params_.h;
  for (const auto &post : posts_)
  {
    v -= pi * (post.z1 - post.z0) * (post.r0 * post.r0 + post.r0 * post.r1 + post.r1 * post.r1) / 3.0;
  }
  if (plate_)
  {
    v -= (plate_->hi[0] - plate_->lo[0]) * (plate_->hi[1] - plate_->lo[1]) * (plate_->hi[2] - plate_->lo[2]);
  }
  return v;
}

BorProfile CavityGeometry::Profile() const
{
  if (!axisymmetric())
  {
    throw UnsupportedGeometry(std::string(ToString(family_)) + " is not a body of revolution");
  }
  const double a = params_.a;
  const double h = params_.h;
  BorProfile prof;
  if (posts_.empty())
  {
    prof.polyline = {{0.0, 0.0}, {a, 0.0}, {a, h}, {0.0, h}};
  }
  else
  {
    const auto &post = posts_.front();
    prof.polyline = {{0.0, post.z1}, {post.r1, post.z1}, {post.r0, 0.0}, {a, 0.0}, {a, h}, {0.0, h}};
  }
  return prof;
}

std::vector<Feature> CavityGeometry::Features() const
{
  std::vector<Feature> out;
  const double a = params_.a;
  const double h = params_.h;
  out.push_back({"cavity radius", 0, -a, a});
  out.push_back({"cavity height", 2, 0.0, h});
  for (std::size_t i = 0; i < posts_.size(); i++)
  {
    const auto &p = posts_[i];
    const double rmin = std::min(p.r0, p.r1);
    const std::string tag = "reentrance " + std::to_string(i);
    out.push_back({tag + " radius", 0, p.cx - rmin, p.cx + rmin});
    out.push_back({tag + " radius (y)", 1, p.cy - rmin, p.cy + rmin});
  }
  if (!posts_.empty())
  {
    out.push_back({"reentrance-lid gap", 2, posts_.front().z1, h});
  }
  if (posts_.size() == 2)
  {
    const double g = params_.post_gap;
    out.push_back({"reentrance gap", 0, -0.5 * g, 0.5 * g});
  }
  if (plate_)
  {
    out.push_back({"plate thickness", 1, plate_->lo[1], plate_->hi[1]});
    out.push_back({"plate-wall gap", 0, plate_->hi[0], a});
    out.push_back({"plate length", 0, plate_->lo[0], plate_->hi[0]});
  }
  return out;
}

std::vector<double> CavityGeometry::Breakpoints(int axis) const
{
  std::set<double> pts;
  const double a = params_.a;
  if (axis == 2)
  {
    pts.insert(0.0);
    pts.insert(params_.h);
  }
  else
  {
    pts.insert(-a);
    pts.insert(a);
    pts.insert(0.0);
  }
  for (const auto &p : posts_)
  {
    if (axis == 2)
    {
      pts.insert(p.z1);
      continue;
    }
    const double c = axis == 0 ? p.cx : p.cy;
    for (double r : {p.r0, p.r1})
    {
      pts.insert(c - r);
      pts.insert(c + r);
    }
  }
  if (plate_)
  {
    pts.insert(plate_->lo[axis]);
    pts.insert(plate_->hi[axis]);
  }
  return {pts.begin(), pts.end()};
}

CavityGeometry CavityGeometry::Scaled(double s) const
{
  CavityParams p = params_;
  p.a *= s;
  p.h *= s;
  if (p.post)
  {
    p.post->R *= s;
    p.post->R_base *= s;
    p.post->h_r *= s;
  }
  p.post_gap *= s;
  if (p.plate)
  {
    p.plate->d *= s;
    p.plate->t *= s;
    p.plate->g *= s;
    for (auto *o : {&p.plate->x_center, &p.plate->z_center, &p.plate->height})
    {
      if (*o)
      {
        **o *= s;
      }
    }
  }
  return Make(family_, p);
}

namespace
{

double RequireNumber(const nlohmann::json &j, const std::string &key, const std::string &path)
{
  if (!j.contains(key))
  {
    throw GeometryError("missing key '" + path + key + "'");
  }
  if (!j.at(key).is_number())
  {
    throw GeometryError("key '" + path + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

void RejectUnknown(const nlohmann::json &j, std::initializer_list<std::string_view> allowed, const std::string &path)
{
  for (const auto &[key, value] : j.items())
  {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
    {
      throw GeometryError("unknown key '" + path + key + "'");
    }
  }
}

}  // namespace

nlohmann::json CavityGeometry::ToJson() const
{
  nlohmann::json j;
  j["family"] = ToString(family_);
  j["a"] = params_.a;
  j["h"] = params_.h;
  const Family post_family = family_ == Family::PlateLoaded ? params_.host : family_;
  auto write_post = [&](nlohmann::json &out)
  {
    if (params_.post)
    {
      out["R"] = params_.post->R;
      if (IsTapered(post_family))
      {
        out["R_base"] = params_.post->R_base;
      }
      out["h_r"] = params_.post->h_r;
    }
    if (IsDoubly(post_family))
    {
      out["g"] = params_.post_gap;
    }
  };
  if (family_ == Family::PlateLoaded)
  {
    const auto &pl = *params_.plate;
    j["d"] = pl.d;
    j["t"] = pl.t;
    j["g"] = pl.g;
    if (pl.x_center)
    {
      j["plate_x_center"] = *pl.x_center;
    }
    if (pl.z_center)
    {
      j["plate_z_center"] = *pl.z_center;
    }
    if (pl.height)
    {
      j["plate_height"] = *pl.height;
    }
    if (params_.host != Family::Cylinder)
    {
      nlohmann::json host;
      host["family"] = ToString(params_.host);
      write_post(host);
      j["host"] = host;
    }
  }
  else
  {
    write_post(j);
  }
  return j;
}

CavityGeometry CavityGeometry::FromJson(const nlohmann::json &j)
{
  if (!j.is_object())
  {
    throw GeometryError("geometry must be an object");
  }
  if (!j.contains("family") || !j.at("family").is_string())
  {
    throw GeometryError("missing key 'geometry.family'");
  }
  const Family family = FamilyFromString(j.at("family").get<std::string>());
  const std::string path = "geometry.";
  CavityParams p;
  p.a = RequireNumber(j, "a", path);
  p.h = RequireNumber(j, "h", path);

  auto read_post = [](const nlohmann::json &src, Family fam, CavityParams &out, const std::string &where)
  {
    switch (fam)
    {
      case Family::Cylinder:
        RejectUnknown(src, {"family", "a", "h"}, where);
        return;
      case Family::Reentrant:
        RejectUnknown(src, {"family", "a", "h", "R", "h_r"}, where);
        break;
      case Family::TaperedReentrant:
        RejectUnknown(src, {"family", "a", "h", "R", "R_base", "h_r"}, where);
        break;
      case Family::DoublyReentrant:
        RejectUnknown(src, {"family", "a", "h", "R", "h_r", "g"}, where);
        break;
      case Family::TaperedDoublyReentrant:
        RejectUnknown(src, {"family", "a", "h", "R", "R_base", "h_r", "g"}, where);
        break;
      case Family::PlateLoaded:
        throw GeometryError("plate_loaded cannot be nested");
    }
    PostSpec post;
    post.R = RequireNumber(src, "R", where);
    post.R_base = IsTapered(fam) ? RequireNumber(src, "R_base", where) : post.R;
    post.h_r = RequireNumber(src, "h_r", where);
    out.post = post;
    if (IsDoubly(fam))
    {
      out.post_gap = RequireNumber(src, "g", where);
    }
  };

  if (family == Family::PlateLoaded)
  {
    RejectUnknown(j, {"family", "a", "h", "d", "t", "g", "plate_x_center", "plate_z_center", "plate_height", "host"},
                  path);
    PlateSpec pl;
    pl.d = RequireNumber(j, "d", path);
    pl.t = RequireNumber(j, "t", path);
    pl.g = RequireNumber(j, "g", path);
    if (j.contains("plate_x_center"))
    {
      pl.x_center = RequireNumber(j, "plate_x_center", path);
    }
    if (j.contains("plate_z_center"))
    {
      pl.z_center = RequireNumber(j, "plate_z_center", path);
    }
    if (j.contains("plate_height"))
    {
      pl.height = RequireNumber(j, "plate_height", path);
    }
    p.plate = pl;
    if (j.contains("host"))
    {
      const auto &host = j.at("host");
      if (!host.is_object() || !host.contains("family"))
      {
        throw GeometryError("key 'geometry.host' must be an object with a family");
      }
      p.host = FamilyFromString(host.at("family").get<std::string>());
      read_post(host, p.host, p, path + "host.");
    }
  }
  else
  {
    read_post(j, family, p, path);
  }
  return Make(family, p);
}

// ----------------------------------------------------------------------------
// Grids

double Grid3::MaxSpacing() const
{
  double m = 0.0;
  for (const auto &axis : nodes)
  {
    for (std::size_t i = 1; i < axis.size(); i++)
    {
      m = std::max(m, axis[i] - axis[i - 1]);
    }
  }
  return m;
}

double Grid3::MinSpacing(int axis) const
{
  double m = kInf;
  for (std::size_t i = 1; i < nodes[axis].size(); i++)
  {
    m = std::min(m, nodes[axis][i] - nodes[axis][i - 1]);
  }
  return m;
}

Grid3 Grid3::Scaled(double s) const
{
  Grid3 g = *this;
  for (auto &axis : g.nodes)
  {
    for (double &x : axis)
    {
      x *= s;
    }
  }
  return g;
}

std::vector<double> UniformAxis(double lo, double hi, double cell)
{
  if (!(hi > lo) || !(cell > 0.0))
  {
    throw GeometryError("uniform axis needs hi > lo and a positive cell size");
  }
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / cell - 1e-9));
  std::vector<double> out(n + 1);
  for (std::size_t i = 0; i <= n; i++)
  {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  }
  out.back() = hi;
  return out;
}

std::vector<double> GradedAxis(double lo, double hi, std::vector<double> breakpoints, double fine, double coarse,
                               double growth)
{
  if (!(hi > lo) || !(fine > 0.0) || !(coarse >= fine) || !(growth >= 1.0))
  {
    throw GeometryError("graded axis needs hi > lo, 0 < fine <= coarse, growth >= 1");
  }
  if (coarse == fine)
  {
    growth = 1.0;
  }
  breakpoints.push_back(lo);
  breakpoints.push_back(hi);
  std::sort(breakpoints.begin(), breakpoints.end());
  std::vector<double> bps;
  const double merge = 1e-9 * (hi - lo);
  for (double b : breakpoints)
  {
    if (b < lo || b > hi)
    {
      continue;
    }
    if (bps.empty() || b - bps.back() > merge)
    {
      bps.push_back(b);
    }
  }
  bps.back() = hi;
  auto size_at = [&](double x)
  {
    double dist = kInf;
    for (double b : bps)
    {
      dist = std::min(dist, std::abs(x - b));
    }
    return std::min(coarse, fine + (growth - 1.0) * dist);
  };
  std::vector<double> out{bps.front()};
  constexpr int kSamples = 4000;
  for (std::size_t s = 0; s + 1 < bps.size(); s++)
  {
    const double x0 = bps[s];
    const double x1 = bps[s + 1];
    // Cumulative integral of 1/size on a fine sampling of the segment.
    std::vector<double> cum(kSamples + 1, 0.0);
    const double dx = (x1 - x0) / kSamples;
    for (int i = 1; i <= kSamples; i++)
    {
      const double xa = x0 + (i - 1) * dx;
      const double xb = x0 + i * dx;
      cum[i] = cum[i - 1] + 0.5 * dx * (1.0 / size_at(xa) + 1.0 / size_at(xb));
    }
    const int n = std::max(1, static_cast<int>(std::ceil(cum.back() - 1e-6)));
    int seg = 0;
    for (int k = 1; k < n; k++)
    {
      const double target = cum.back() * k / n;
      while (cum[seg + 1] < target)
      {
        seg++;
      }
      const double frac = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
      out.push_back(x0 + (seg + frac) * dx);
    }
    out.push_back(x1);
  }
  return out;
}

ResolutionSpec ResolutionSpec::Uniform(double cell)
{
  ResolutionSpec s;
  s.fine = cell;
  s.coarse = cell;
  s.growth = 1.0;
  return s;
}

ResolutionSpec ResolutionSpec::Graded(double fine, double coarse, double growth)
{
  ResolutionSpec s;
  s.fine = fine;
  s.coarse = coarse;
  s.growth = growth;
  return s;
}

ResolutionSpec ResolutionSpec::Scaled(double s) const
{
  ResolutionSpec out = *this;
  out.fine *= s;
  out.coarse *= s;
  if (out.domain)
  {
    for (int a = 0; a < 3; a++)
    {
      out.domain->lo[a] *= s;
      out.domain->hi[a] *= s;
    }
  }
  for (auto &axis : out.extra_breakpoints)
  {
    for (double &x : axis)
    {
      x *= s;
    }
  }
  return out;
}

namespace
{

std::string_view BoundaryName(BoundaryKind k)
{
  switch (k)
  {
    case BoundaryKind::Wall:
      return "wall";
    case BoundaryKind::PecSymmetry:
      return "pec";
    case BoundaryKind::PmcSymmetry:
      return "pmc";
  }
  return "wall";
}

BoundaryKind BoundaryFromName(const std::string &s)
{
  if (s == "wall")
  {
    return BoundaryKind::Wall;
  }
  if (s == "pec")
  {
    return BoundaryKind::PecSymmetry;
  }
  if (s == "pmc")
  {
    return BoundaryKind::PmcSymmetry;
  }
  throw GeometryError("unknown boundary kind '" + s + "' (wall, pec, pmc)");
}

}  // namespace

nlohmann::json ResolutionSpec::ToJson() const
{
  nlohmann::json j;
  j["fine"] = fine;
  j["coarse"] = coarse;
  j["growth"] = growth;
  if (domain)
  {
    j["domain"] = {{"lo", domain->lo}, {"hi", domain->hi}};
  }
  nlohmann::json b = nlohmann::json::array();
  for (int a = 0; a < 3; a++)
  {
    b.push_back({BoundaryName(boundary[a][0]), BoundaryName(boundary[a][1])});
  }
  j["boundary"] = b;
  return j;
}

ResolutionSpec ResolutionSpec::FromJson(const nlohmann::json &j)
{
  ResolutionSpec s;
  if (j.is_number())
  {
    return Uniform(j.get<double>());
  }
  RejectUnknown(j, {"cell", "fine", "coarse", "growth", "domain", "boundary"}, "resolution.");
  if (j.contains("cell"))
  {
    s = Uniform(j.at("cell").get<double>());
  }
  else
  {
    s.fine = RequireNumber(j, "fine", "resolution.");
    s.coarse = j.value("coarse", s.fine);
    s.growth = j.value("growth", 1.3);
  }
  if (!(s.fine > 0.0) || s.coarse < s.fine || s.growth < 1.0)
  {
    throw GeometryError("resolution needs 0 < fine <= coarse and growth >= 1");
  }
  if (j.contains("domain"))
  {
    Box b;
    b.lo = j.at("domain").at("lo").get<Vec3>();
    b.hi = j.at("domain").at("hi").get<Vec3>();
    s.domain = b;
  }
  if (j.contains("boundary"))
  {
    const auto &b = j.at("boundary");
    for (int a = 0; a < 3; a++)
    {
      s.boundary[a][0] = BoundaryFromName(b.at(a).at(0).get<std::string>());
      s.boundary[a][1] = BoundaryFromName(b.at(a).at(1).get<std::string>());
    }
  }
  return s;
}

Grid3 BuildGrid(const CavityGeometry &geometry, const ResolutionSpec &spec)
{
  const double a = geometry.params().a;
  const Box domain = spec.domain.value_or(Box{{-a, -a, 0.0}, {a, a, geometry.params().h}});
  Grid3 grid;
  grid.boundary = spec.boundary;
  for (int axis = 0; axis < 3; axis++)
  {
    auto bps = geometry.Breakpoints(axis);
    bps.insert(bps.end(), spec.extra_breakpoints[axis].begin(), spec.extra_breakpoints[axis].end());
    if (spec.coarse == spec.fine)
    {
      // Uniform means uniform: snapping to breakpoints would hide under-resolved features.
      grid.nodes[axis] = UniformAxis(domain.lo[axis], domain.hi[axis], spec.fine);
    }
    else
    {
      grid.nodes[axis] = GradedAxis(domain.lo[axis], domain.hi[axis], bps, spec.fine, spec.coarse, spec.growth);
    }
  }
  return grid;
}

double VoxelMask::VacuumVolume() const
{
  double v = 0.0;
  const auto &n = grid.nodes;
  for (std::size_t i = 0; i < grid.cells(0); i++)
  {
    for (std::size_t j = 0; j < grid.cells(1); j++)
    {
      for (std::size_t k = 0; k < grid.cells(2); k++)
      {
        if (IsVacuumCell(i, j, k))
        {
          v += (n[0][i + 1] - n[0][i]) * (n[1][j + 1] - n[1][j]) * (n[2][k + 1] - n[2][k]);
        }
      }
    }
  }
  return v;
}

VoxelMask Voxelize(const CavityGeometry &geometry, const Grid3 &grid)
{
  for (const auto &feature : geometry.Features())
  {
    const auto &nodes = grid.nodes[feature.axis];
    const double lo = std::max(feature.lo, nodes.front());
    const double hi = std::min(feature.hi, nodes.back());
    if (!(hi > lo))
    {
      continue;
    }
    int count = 0;
    for (std::size_t i = 0; i + 1 < nodes.size(); i++)
    {
      const double c = 0.5 * (nodes[i] + nodes[i + 1]);
      if (c > lo && c < hi)
      {
        count++;
      }
    }
    if (count < 2)
    {
      throw RefinementRequired(feature.name, "grid puts " + std::to_string(count) + " cell(s) across feature '" +
                                                 feature.name + "'; refine to at least 2");
    }
  }

  VoxelMask mask;
  mask.grid = grid;
  const std::size_t nx = grid.cells(0);
  const std::size_t ny = grid.cells(1);
  const std::size_t nz = grid.cells(2);
  mask.vacuum.assign(nx * ny * nz, 0);
  const auto &n = grid.nodes;
  for (std::size_t i = 0; i < nx; i++)
  {
    const double x = 0.5 * (n[0][i] + n[0][i + 1]);
    for (std::size_t j = 0; j < ny; j++)
    {
      const double y = 0.5 * (n[1][j] + n[1][j + 1]);
      for (std::size_t k = 0; k < nz; k++)
      {
        const double z = 0.5 * (n[2][k] + n[2][k + 1]);
        mask.vacuum[mask.Index(i, j, k)] = geometry.IsVacuum({x, y, z}) ? 1 : 0;
      }
    }
  }

  const std::array<std::size_t, 3> dims{nx, ny, nz};
  for (std::size_t i = 0; i < nx; i++)
  {
    for (std::size_t j = 0; j < ny; j++)
    {
      for (std::size_t k = 0; k < nz; k++)
      {
        if (!mask.IsVacuumCell(i, j, k))
        {
          continue;
        }
        const std::array<std::size_t, 3> idx{i, j, k};
        for (int axis = 0; axis < 3; axis++)
        {
          for (int side = 0; side < 2; side++)
          {
            auto nb = idx;
            bool outside = false;
            if (side == 0)
            {
              outside = idx[axis] == 0;
              nb[axis] = outside ? 0 : idx[axis] - 1;
            }
            else
            {
              outside = idx[axis] + 1 == dims[axis];
              nb[axis] = idx[axis] + 1;
            }
            bool wall;
            if (outside)
            {
              wall = grid.boundary[axis][side] == BoundaryKind::Wall;
            }
            else
            {
              wall = !mask.IsVacuumCell(nb[0], nb[1], nb[2]);
            }
            if (wall)
            {
              mask.surface_cells.push_back(
                  {{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k)},
                   static_cast<Face>(2 * axis + side)});
            }
          }
        }
      }
    }
  }
  return mask;
}

VoxelMask Voxelize(const CavityGeometry &geometry, const ResolutionSpec &spec)
{
  return Voxelize(geometry, BuildGrid(geometry, spec));
}

}  // namespace cavityforge::geometry
