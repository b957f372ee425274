#include "cavityforge/fdtd3d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "cavityforge/physcore.hpp"

namespace cavityforge::fdtd
{

using geometry::BoundaryKind;
using geometry::Grid3;
using geometry::VoxelMask;
using std::numbers::pi;
using cd = std::complex<double>;

namespace
{

constexpr double kEnvelopeCut = 4.2919320526;  // sqrt(ln 1e8)
constexpr double kBandWidthFactor = 1.3660;    // tau * bandwidth for a 1% band edge

struct Lengths
{
  std::array<std::vector<double>, 3> d;  // per cell
  std::array<std::vector<double>, 3> h;  // per node, half cells at the ends
};

Lengths MakeLengths(const Grid3 &grid)
{
  Lengths L;
  for (int a = 0; a < 3; a++)
  {
    const auto &n = grid.nodes[a];
    L.d[a].resize(n.size() - 1);
    for (std::size_t i = 0; i + 1 < n.size(); i++)
    {
      L.d[a][i] = n[i + 1] - n[i];
    }
    L.h[a].resize(n.size());
    for (std::size_t i = 0; i < n.size(); i++)
    {
      const double lo = i > 0 ? L.d[a][i - 1] : 0.0;
      const double hi = i + 1 < n.size() ? L.d[a][i] : 0.0;
      L.h[a][i] = 0.5 * (lo + hi);
    }
  }
  return L;
}

double Multiplicity(const Grid3 &grid)
{
  double m = 1.0;
  for (int a = 0; a < 3; a++)
  {
    for (int s = 0; s < 2; s++)
    {
      if (grid.boundary[a][s] != BoundaryKind::Wall)
      {
        m *= 2.0;
      }
    }
  }
  return m;
}

// Calls f(i, j, k) over the valid index box of an edge (edge = true) or face
// component along axis a.
template <class F>
void ForComponent(const Grid3 &grid, int a, bool edge, F &&f)
{
  std::array<std::size_t, 3> n{};
  for (int b = 0; b < 3; b++)
  {
    const bool along = b == a;
    n[b] = (along == edge) ? grid.cells(b) : grid.nodes[b].size();
  }
  for (std::size_t i = 0; i < n[0]; i++)
  {
    for (std::size_t j = 0; j < n[1]; j++)
    {
      for (std::size_t k = 0; k < n[2]; k++)
      {
        f(i, j, k);
      }
    }
  }
}

double EdgeVol(const Lengths &L, int a, std::size_t i, std::size_t j, std::size_t k)
{
  const std::array<std::size_t, 3> x{i, j, k};
  double v = 1.0;
  for (int b = 0; b < 3; b++)
  {
    v *= b == a ? L.d[b][x[b]] : L.h[b][x[b]];
  }
  return v;
}

double FaceVol(const Lengths &L, int a, std::size_t i, std::size_t j, std::size_t k)
{
  const std::array<std::size_t, 3> x{i, j, k};
  double v = 1.0;
  for (int b = 0; b < 3; b++)
  {
    v *= b == a ? L.h[b][x[b]] : L.d[b][x[b]];
  }
  return v;
}

std::size_t CellOf(const std::vector<double> &nodes, double x)
{
  auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
  std::size_t i = it == nodes.begin() ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
  return std::min(i, nodes.size() - 2);
}

std::size_t NearestNode(const std::vector<double> &nodes, double x)
{
  const std::size_t c = CellOf(nodes, x);
  return (x - nodes[c] <= nodes[c + 1] - x) ? c : c + 1;
}

// Edge of component a nearest to p.
std::array<std::size_t, 3> NearestEdge(const Grid3 &grid, int a, const Vec3 &p)
{
  std::array<std::size_t, 3> idx{};
  for (int b = 0; b < 3; b++)
  {
    idx[b] = b == a ? CellOf(grid.nodes[b], p[b]) : NearestNode(grid.nodes[b], p[b]);
  }
  return idx;
}

bool InsideDomain(const Grid3 &grid, const Vec3 &p)
{
  for (int a = 0; a < 3; a++)
  {
    if (p[a] < grid.nodes[a].front() || p[a] > grid.nodes[a].back())
    {
      return false;
    }
  }
  return true;
}

bool CellVacuumAt(const VoxelMask &mask, const Vec3 &p)
{
  const auto &g = mask.grid;
  return mask.IsVacuumCell(CellOf(g.nodes[0], p[0]), CellOf(g.nodes[1], p[1]), CellOf(g.nodes[2], p[2]));
}

double LocalCell(const Grid3 &grid, const Vec3 &p)
{
  double s = 0.0;
  for (int a = 0; a < 3; a++)
  {
    const std::size_t c = CellOf(grid.nodes[a], p[a]);
    s = std::max(s, grid.nodes[a][c + 1] - grid.nodes[a][c]);
  }
  return s;
}

double SymmetryPlaneDistance(const Grid3 &grid, const Vec3 &p)
{
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; a++)
  {
    if (grid.boundary[a][0] != BoundaryKind::Wall)
    {
      d = std::min(d, p[a] - grid.nodes[a].front());
    }
    if (grid.boundary[a][1] != BoundaryKind::Wall)
    {
      d = std::min(d, grid.nodes[a].back() - p[a]);
    }
  }
  return d;
}

// Random vacuum points at least two local cells from conductors and mirror planes.
std::vector<Vec3> RandomInteriorPoints(const geometry::CavityGeometry &geo, const VoxelMask &mask, int count,
                                       std::mt19937_64 &rng)
{
  const auto &g = mask.grid;
  std::array<std::uniform_real_distribution<double>, 3> u{
      std::uniform_real_distribution<double>(g.nodes[0].front(), g.nodes[0].back()),
      std::uniform_real_distribution<double>(g.nodes[1].front(), g.nodes[1].back()),
      std::uniform_real_distribution<double>(g.nodes[2].front(), g.nodes[2].back())};
  std::vector<Vec3> out;
  for (int tries = 0; tries < 200000 && static_cast<int>(out.size()) < count; tries++)
  {
    const Vec3 p{u[0](rng), u[1](rng), u[2](rng)};
    const double cell = LocalCell(g, p);
    if (geo.IsVacuum(p) && CellVacuumAt(mask, p) && geo.Distance(p).min() > 2.0 * cell &&
        SymmetryPlaneDistance(g, p) > 2.0 * cell)
    {
      out.push_back(p);
    }
  }
  if (static_cast<int>(out.size()) < count)
  {
    throw DomainError("could not place sources or probes in the vacuum region");
  }
  return out;
}

Vec3 RandomDirection(std::mt19937_64 &rng)
{
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v{n(rng), n(rng), n(rng)};
  const double s = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / s, v[1] / s, v[2] / s};
}

}  // namespace

double StableTimeStep(const Grid3 &grid)
{
  double s = 0.0;
  for (int a = 0; a < 3; a++)
  {
    const double m = grid.MinSpacing(a);
    s += 1.0 / (m * m);
  }
  return 0.99 / (constants::c * std::sqrt(s));
}

nlohmann::json ExcitationSpec::ToJson() const
{
  nlohmann::json j;
  j["f_center"] = f_center;
  j["bandwidth"] = bandwidth;
  j["amplitude"] = amplitude;
  j["random_dipoles"] = random_dipoles;
  j["random_probes"] = random_probes;
  j["seed"] = seed;
  j["dipoles"] = nlohmann::json::array();
  for (const auto &d : dipoles)
  {
    j["dipoles"].push_back({{"position", d.position}, {"moment", d.moment}});
  }
  j["probes"] = probes;
  return j;
}

double SourceDuration(const ExcitationSpec &spec)
{
  return spec.bandwidth > 0.0 ? 2.0 * kEnvelopeCut * kBandWidthFactor / spec.bandwidth : 0.0;
}

nlohmann::json RunManifest::ToJson() const
{
  return {{"cells", cells},         {"dt", dt},
          {"steps", steps},         {"source_end", source_end},
          {"max_spacing", max_spacing}, {"min_spacing", min_spacing},
          {"excitation", excitation.ToJson()}};
}

YeeLayout::YeeLayout(const Grid3 &grid)
{
  for (int a = 0; a < 3; a++)
  {
    nodes[a] = grid.nodes[a].size();
  }
  sJ = nodes[2] + 1;
  sI = (nodes[1] + 1) * sJ;
  size = (nodes[0] + 1) * sI;
}

Simulation::Simulation(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
                       std::optional<double> dt)
  : mask_(std::make_shared<VoxelMask>(geometry::Voxelize(geometry, spec)))
{
  Init(geometry, dt);
}

Simulation::Simulation(const geometry::CavityGeometry &geometry, std::shared_ptr<const VoxelMask> mask,
                       std::optional<double> dt)
  : mask_(std::move(mask))
{
  Init(geometry, dt);
}

void Simulation::Init(const geometry::CavityGeometry &geometry, std::optional<double> dt)
{
  geometry_ = std::make_shared<geometry::CavityGeometry>(geometry);
  const Grid3 &grid = mask_->grid;
  const double limit = StableTimeStep(grid);
  if (dt)
  {
    if (!(*dt > 0.0) || *dt > limit)
    {
      throw DomainError("time step " + std::to_string(*dt) + " s exceeds the stability limit " +
                        std::to_string(limit) + " s");
    }
    dt_ = *dt;
  }
  else
  {
    dt_ = limit;
  }
  layout_ = YeeLayout(grid);
  multiplicity_ = Multiplicity(grid);
  const Lengths L = MakeLengths(grid);
  for (int a = 0; a < 3; a++)
  {
    d_[a] = L.d[a];
    h_[a] = L.h[a];
    id_[a].resize(d_[a].size());
    ih_[a].resize(h_[a].size());
    for (std::size_t i = 0; i < d_[a].size(); i++)
    {
      id_[a][i] = 1.0 / d_[a][i];
    }
    for (std::size_t i = 0; i < h_[a].size(); i++)
    {
      ih_[a][i] = 1.0 / h_[a][i];
    }
  }
  for (auto *v : {&fields_.Ex, &fields_.Ey, &fields_.Ez, &fields_.Bx, &fields_.By, &fields_.Bz})
  {
    v->assign(layout_.size, 0.0);
  }

  // An edge carries field only if every cell touching it is vacuum and it
  // does not lie on a conducting boundary plane.
  const double coef = dt_ * constants::c * constants::c;
  std::array<std::vector<double> *, 3> cE{&cEx_, &cEy_, &cEz_};
  for (int a = 0; a < 3; a++)
  {
    cE[a]->assign(layout_.size, 0.0);
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    ForComponent(grid, a, true,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::array<std::size_t, 3> x{i, j, k};
                   for (int o : {b, c})
                   {
                     const std::size_t last = grid.nodes[o].size() - 1;
                     if ((x[o] == 0 && grid.boundary[o][0] != BoundaryKind::PmcSymmetry) ||
                         (x[o] == last && grid.boundary[o][1] != BoundaryKind::PmcSymmetry))
                     {
                       return;
                     }
                   }
                   for (int db = -1; db <= 0; db++)
                   {
                     for (int dc = -1; dc <= 0; dc++)
                     {
                       auto cell = x;
                       const long cb = static_cast<long>(x[b]) + db;
                       const long cc = static_cast<long>(x[c]) + dc;
                       if (cb < 0 || cb >= static_cast<long>(grid.cells(b)) || cc < 0 ||
                           cc >= static_cast<long>(grid.cells(c)))
                       {
                         continue;
                       }
                       cell[b] = static_cast<std::size_t>(cb);
                       cell[c] = static_cast<std::size_t>(cc);
                       if (!mask_->IsVacuumCell(cell[0], cell[1], cell[2]))
                       {
                         return;
                       }
                     }
                   }
                   (*cE[a])[layout_(i, j, k)] = coef;
                 });
  }
}

bool Simulation::EdgeActive(int component, std::size_t index) const
{
  const std::array<const std::vector<double> *, 3> cE{&cEx_, &cEy_, &cEz_};
  return (*cE[component])[index] != 0.0;
}

double Simulation::EdgeVolume(int component, std::size_t i, std::size_t j, std::size_t k) const
{
  const std::array<std::size_t, 3> x{i, j, k};
  double v = 1.0;
  for (int b = 0; b < 3; b++)
  {
    v *= b == component ? d_[b][x[b]] : h_[b][x[b]];
  }
  return v;
}

double Simulation::FaceVolume(int component, std::size_t i, std::size_t j, std::size_t k) const
{
  const std::array<std::size_t, 3> x{i, j, k};
  double v = 1.0;
  for (int b = 0; b < 3; b++)
  {
    v *= b == component ? h_[b][x[b]] : d_[b][x[b]];
  }
  return v;
}

std::size_t Simulation::SetExcitation(const ExcitationSpec &spec)
{
  injections_.clear();
  probes_.clear();
  const Grid3 &grid = mask_->grid;
  std::mt19937_64 rng(spec.seed);
  std::vector<Dipole> dipoles = spec.dipoles;
  if (dipoles.empty() && spec.amplitude != 0.0)
  {
    for (const auto &p : RandomInteriorPoints(*geometry_, *mask_, spec.random_dipoles, rng))
    {
      dipoles.push_back({p, RandomDirection(rng)});
    }
  }
  if (spec.amplitude != 0.0 && !(spec.f_center > 0.0 && spec.bandwidth > 0.0))
  {
    throw DomainError("excitation needs a positive centre frequency and bandwidth");
  }
  const std::array<const std::vector<double> *, 3> cE{&cEx_, &cEy_, &cEz_};
  for (const auto &d : dipoles)
  {
    if (!InsideDomain(grid, d.position) || !geometry_->IsVacuum(d.position))
    {
      throw DomainError("source lies outside the vacuum region");
    }
    for (int a = 0; a < 3; a++)
    {
      if (d.moment[a] == 0.0)
      {
        continue;
      }
      const auto e = NearestEdge(grid, a, d.position);
      const std::size_t idx = layout_(e[0], e[1], e[2]);
      if ((*cE[a])[idx] == 0.0)
      {
        continue;
      }
      const int b = (a + 1) % 3;
      const int c = (a + 2) % 3;
      const double area = h_[b][e[b]] * h_[c][e[c]];
      injections_.push_back({a, idx, -d.moment[a] * dt_ / (constants::eps0 * area)});
    }
  }

  std::vector<Vec3> probes = spec.probes;
  if (probes.empty())
  {
    std::mt19937_64 prng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    probes = RandomInteriorPoints(*geometry_, *mask_, spec.random_probes, prng);
  }
  for (const auto &p : probes)
  {
    if (!InsideDomain(grid, p) || !geometry_->IsVacuum(p) || !CellVacuumAt(*mask_, p))
    {
      throw DomainError("probe point lies in a conductor or outside the grid");
    }
    ProbeIndex pi{p, {}};
    for (int a = 0; a < 3; a++)
    {
      const auto e = NearestEdge(grid, a, p);
      pi.index[a] = layout_(e[0], e[1], e[2]);
    }
    probes_.push_back(pi);
  }

  src_amp_ = spec.amplitude;
  src_f_ = spec.f_center;
  src_tau_ = spec.bandwidth > 0.0 ? kBandWidthFactor / spec.bandwidth : 0.0;
  src_t0_ = kEnvelopeCut * src_tau_;
  src_end_ = steps_ + static_cast<std::size_t>(std::ceil(2.0 * src_t0_ / dt_)) + 1;
  if (src_amp_ == 0.0 || injections_.empty())
  {
    src_end_ = steps_;
  }
  src_start_step_ = steps_;
  return src_end_;
}

double Simulation::SourceValue(double t) const
{
  const double s = t - src_t0_;
  if (s > src_t0_ || s < -src_t0_)
  {
    return 0.0;
  }
  const double x = s / src_tau_;
  return src_amp_ * std::exp(-x * x) * std::sin(2.0 * pi * src_f_ * s);
}

std::vector<Vec3> Simulation::probes() const
{
  std::vector<Vec3> out;
  for (const auto &p : probes_)
  {
    out.push_back(p.position);
  }
  return out;
}

std::vector<double> Simulation::SampleProbes() const
{
  std::vector<double> out;
  out.reserve(3 * probes_.size());
  for (const auto &p : probes_)
  {
    out.push_back(fields_.Ex[p.index[0]]);
    out.push_back(fields_.Ey[p.index[1]]);
    out.push_back(fields_.Ez[p.index[2]]);
  }
  return out;
}

double Simulation::Step(bool energy)
{
  const std::size_t NX = layout_.nodes[0], NY = layout_.nodes[1], NZ = layout_.nodes[2];
  const std::size_t cx = NX - 1, cy = NY - 1, cz = NZ - 1;
  const std::size_t sI = layout_.sI, sJ = layout_.sJ;
  double *Ex = fields_.Ex.data(), *Ey = fields_.Ey.data(), *Ez = fields_.Ez.data();
  double *Bx = fields_.Bx.data(), *By = fields_.By.data(), *Bz = fields_.Bz.data();
  const double dt = dt_;
  const double *idx = id_[0].data(), *idy = id_[1].data(), *idz = id_[2].data();
  const double *ihx = ih_[0].data(), *ihy = ih_[1].data(), *ihz = ih_[2].data();

  // B^{n+1/2} = B^{n-1/2} - dt curl E^n
  for (std::size_t i = 0; i < NX; i++)
  {
    for (std::size_t j = 0; j < NY; j++)
    {
      const std::size_t base = layout_(i, j, 0);
      if (j < cy)
      {
        const double ay = dt * idy[j];
        for (std::size_t k = 0; k < cz; k++)
        {
          const std::size_t p = base + k;
          Bx[p] -= ay * (Ez[p + sJ] - Ez[p]) - dt * idz[k] * (Ey[p + 1] - Ey[p]);
        }
      }
      if (i < cx)
      {
        const double ax = dt * idx[i];
        for (std::size_t k = 0; k < cz; k++)
        {
          const std::size_t p = base + k;
          By[p] -= dt * idz[k] * (Ex[p + 1] - Ex[p]) - ax * (Ez[p + sI] - Ez[p]);
        }
        if (j < cy)
        {
          const double ay = dt * idy[j];
          for (std::size_t k = 0; k < NZ; k++)
          {
            const std::size_t p = base + k;
            Bz[p] -= ax * (Ey[p + sI] - Ey[p]) - ay * (Ex[p + sJ] - Ex[p]);
          }
        }
      }
    }
  }

  double wb = 0.0;
  if (energy)
  {
    ForComponent(mask_->grid, 0, false,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::size_t p = layout_(i, j, k);
                   wb += Bx[p] * Bx[p] * FaceVolume(0, i, j, k);
                 });
    ForComponent(mask_->grid, 1, false,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::size_t p = layout_(i, j, k);
                   wb += By[p] * By[p] * FaceVolume(1, i, j, k);
                 });
    ForComponent(mask_->grid, 2, false,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::size_t p = layout_(i, j, k);
                   wb += Bz[p] * Bz[p] * FaceVolume(2, i, j, k);
                 });
  }
  std::vector<double> old;
  if (energy)
  {
    old.reserve(3 * layout_.size);
    old.insert(old.end(), fields_.Ex.begin(), fields_.Ex.end());
    old.insert(old.end(), fields_.Ey.begin(), fields_.Ey.end());
    old.insert(old.end(), fields_.Ez.begin(), fields_.Ez.end());
  }

  // E^{n+1} = E^n + dt c^2 curl B^{n+1/2} - dt J / eps0
  const double *cx_ = cEx_.data(), *cy_ = cEy_.data(), *cz_ = cEz_.data();
  for (std::size_t i = 0; i < NX; i++)
  {
    for (std::size_t j = 0; j < NY; j++)
    {
      const std::size_t base = layout_(i, j, 0);
      if (i < cx)
      {
        const double hy = ihy[j];
        for (std::size_t k = 0; k < NZ; k++)
        {
          const std::size_t p = base + k;
          Ex[p] += cx_[p] * ((Bz[p] - Bz[p - sJ]) * hy - (By[p] - By[p - 1]) * ihz[k]);
        }
      }
      const double hx = ihx[i];
      if (j < cy)
      {
        for (std::size_t k = 0; k < NZ; k++)
        {
          const std::size_t p = base + k;
          Ey[p] += cy_[p] * ((Bx[p] - Bx[p - 1]) * ihz[k] - (Bz[p] - Bz[p - sI]) * hx);
        }
      }
      const double hy = ihy[j];
      for (std::size_t k = 0; k < cz; k++)
      {
        const std::size_t p = base + k;
        Ez[p] += cz_[p] * ((By[p] - By[p - sI]) * hx - (Bx[p] - Bx[p - sJ]) * hy);
      }
    }
  }
  if (steps_ < src_end_ && !injections_.empty())
  {
    const double I = SourceValue((static_cast<double>(steps_ - src_start_step_) + 0.5) * dt_);
    std::array<double *, 3> E{Ex, Ey, Ez};
    for (const auto &inj : injections_)
    {
      E[inj.component][inj.index] += inj.weight * I;
    }
  }
  steps_++;

  double result = std::numeric_limits<double>::quiet_NaN();
  if (energy)
  {
    double we = 0.0;
    const std::array<const double *, 3> E{Ex, Ey, Ez};
    for (int a = 0; a < 3; a++)
    {
      const double *o = old.data() + a * layout_.size;
      ForComponent(mask_->grid, a, true,
                   [&](std::size_t i, std::size_t j, std::size_t k)
                   {
                     const std::size_t p = layout_(i, j, k);
                     we += o[p] * E[a][p] * EdgeVolume(a, i, j, k);
                   });
    }
    result = multiplicity_ * 0.5 * (constants::eps0 * we + wb / constants::mu0);
  }
  Accumulate();
  return result;
}

double Simulation::RelativeDivB() const
{
  const Grid3 &g = mask_->grid;
  const auto &B = fields_;
  double worst = 0.0;
  double bmax = 0.0;
  for (const auto *v : {&B.Bx, &B.By, &B.Bz})
  {
    for (double x : *v)
    {
      bmax = std::max(bmax, std::abs(x));
    }
  }
  if (bmax == 0.0)
  {
    return 0.0;
  }
  for (std::size_t i = 0; i < g.cells(0); i++)
  {
    for (std::size_t j = 0; j < g.cells(1); j++)
    {
      for (std::size_t k = 0; k < g.cells(2); k++)
      {
        const std::size_t p = layout_(i, j, k);
        const double div = (B.Bx[p + layout_.sI] - B.Bx[p]) * id_[0][i] +
                           (B.By[p + layout_.sJ] - B.By[p]) * id_[1][j] + (B.Bz[p + 1] - B.Bz[p]) * id_[2][k];
        const double cell = std::min({d_[0][i], d_[1][j], d_[2][k]});
        worst = std::max(worst, std::abs(div) * cell);
      }
    }
  }
  return worst / bmax;
}

void Simulation::BeginTransform(double f, std::size_t length, std::size_t stride)
{
  if (!(f > 0.0) || length == 0 || stride == 0)
  {
    throw DomainError("transform needs a positive frequency, length and stride");
  }
  dft_f_ = f;
  dft_start_ = steps_;
  dft_stride_ = stride;
  dft_len_ = length / stride;
  dft_count_ = 0;
  for (auto *v : {&phasors_.Ex, &phasors_.Ey, &phasors_.Ez, &phasors_.Bx, &phasors_.By, &phasors_.Bz})
  {
    v->assign(layout_.size, cd(0.0, 0.0));
  }
}

bool Simulation::TransformDone() const { return dft_len_ > 0 && dft_count_ >= dft_len_; }

void Simulation::Accumulate()
{
  if (dft_len_ == 0 || dft_count_ >= dft_len_ || steps_ < dft_start_ || (steps_ - dft_start_) % dft_stride_ != 0)
  {
    return;
  }
  const double m = static_cast<double>(dft_count_);
  const double s = std::sin(pi * (m + 0.5) / static_cast<double>(dft_len_));
  const double w = s * s;
  const double omega = 2.0 * pi * dft_f_;
  const double tE = static_cast<double>(steps_) * dt_;
  const cd pe = w * std::exp(cd(0.0, -omega * tE));
  const cd pb = w * std::exp(cd(0.0, -omega * (tE - 0.5 * dt_)));
  const std::array<const std::vector<double> *, 6> src{&fields_.Ex, &fields_.Ey, &fields_.Ez,
                                                        &fields_.Bx, &fields_.By, &fields_.Bz};
  const std::array<std::vector<cd> *, 6> dst{&phasors_.Ex, &phasors_.Ey, &phasors_.Ez,
                                             &phasors_.Bx, &phasors_.By, &phasors_.Bz};
  for (int c = 0; c < 6; c++)
  {
    const cd ph = c < 3 ? pe : pb;
    const double *x = src[c]->data();
    cd *y = dst[c]->data();
    for (std::size_t p = 0; p < layout_.size; p++)
    {
      y[p] += ph * x[p];
    }
  }
  dft_count_++;
}

ProbeSeries RunBroadband(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
                         const ExcitationSpec &excitation, std::size_t steps, const RunOptions &options)
{
  Simulation sim(geometry, spec, options.dt);
  const std::size_t end = sim.SetExcitation(excitation);
  ProbeSeries series;
  series.positions = sim.probes();
  series.channels.assign(3 * series.positions.size(), {});
  for (auto &c : series.channels)
  {
    c.reserve(steps);
  }
  series.dt = sim.dt();
  series.source_end = end;
  const double half = 0.7071 * excitation.bandwidth;
  series.f_lo = std::max(0.0, excitation.f_center - half);
  series.f_hi = excitation.f_center + half;
  series.max_spacing = sim.mask().grid.MaxSpacing();
  for (std::size_t n = 0; n < steps; n++)
  {
    const bool rec = options.record_energy && sim.step_count() >= end;
    const double w = sim.Step(rec);
    if (rec)
    {
      series.energy.push_back(w);
    }
    const auto s = sim.SampleProbes();
    for (std::size_t c = 0; c < s.size(); c++)
    {
      series.channels[c].push_back(s[c]);
    }
  }
  auto &m = series.manifest;
  for (int a = 0; a < 3; a++)
  {
    m.cells[a] = sim.mask().grid.cells(a);
  }
  m.dt = sim.dt();
  m.steps = steps;
  m.source_end = end;
  m.max_spacing = sim.mask().grid.MaxSpacing();
  m.min_spacing = std::min({sim.mask().grid.MinSpacing(0), sim.mask().grid.MinSpacing(1),
                            sim.mask().grid.MinSpacing(2)});
  m.excitation = excitation;
  m.excitation.probes = series.positions;
  return series;
}

namespace
{

struct Pole
{
  double f;
  double decay;
  double amplitude;
};

// Matrix pencil on decimated real channels sharing their poles.
std::vector<Pole> MatrixPencil(const std::vector<std::vector<double>> &x, double step, double f_lo, double f_hi,
                               std::string &diag)
{
  const std::size_t N = x.front().size();
  const std::size_t L = N / 3;
  if (L < 4)
  {
    diag = "too few samples after the source for harmonic inversion";
    return {};
  }
  const std::size_t rows_per = N - L;
  Eigen::MatrixXd Y(rows_per * x.size(), L + 1);
  for (std::size_t c = 0; c < x.size(); c++)
  {
    for (std::size_t r = 0; r < rows_per; r++)
    {
      for (std::size_t q = 0; q <= L; q++)
      {
        Y(c * rows_per + r, q) = x[c][r + q];
      }
    }
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinV);
  const auto &sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0)
  {
    diag = "signal is identically zero";
    return {};
  }
  Eigen::Index M = 0;
  while (M < sv.size() && sv(M) > 1e-10 * sv(0))
  {
    M++;
  }
  M = std::min<Eigen::Index>(M, static_cast<Eigen::Index>(L) - 1);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(M);
  const Eigen::MatrixXd V1 = V.topRows(L);
  const Eigen::MatrixXd V2 = V.bottomRows(L);
  const Eigen::MatrixXd A = V1.completeOrthogonalDecomposition().solve(V2);
  Eigen::EigenSolver<Eigen::MatrixXd> es(A.transpose());
  const Eigen::VectorXcd z = es.eigenvalues();

  // Complex amplitudes by least squares against all poles.
  Eigen::MatrixXcd Vd(N, M);
  for (Eigen::Index k = 0; k < M; k++)
  {
    cd p(1.0, 0.0);
    for (std::size_t n = 0; n < N; n++)
    {
      Vd(static_cast<Eigen::Index>(n), k) = p;
      p *= z(k);
    }
  }
  const auto qr = Vd.householderQr();
  Eigen::VectorXd amp = Eigen::VectorXd::Zero(M);
  for (const auto &ch : x)
  {
    Eigen::VectorXcd b(N);
    for (std::size_t n = 0; n < N; n++)
    {
      b(static_cast<Eigen::Index>(n)) = ch[n];
    }
    const Eigen::VectorXcd c = qr.solve(b);
    amp += c.cwiseAbs2();
  }
  std::vector<Pole> poles;
  for (Eigen::Index k = 0; k < M; k++)
  {
    const double f = std::arg(z(k)) / (2.0 * pi * step);
    if (f <= 0.0 || f < f_lo || f > f_hi)
    {
      continue;
    }
    const double decay = -std::log(std::abs(z(k))) / step;
    poles.push_back({f, decay, 2.0 * std::sqrt(amp(k))});
  }
  return poles;
}

// Power spectrum peaks (Hann window, 8x zero padding), summed over channels.
std::vector<double> FftPeaks(const std::vector<std::vector<double>> &x, double step, double f_lo, double f_hi,
                             double &bin)
{
  const std::size_t N = x.front().size();
  std::size_t P = 1;
  while (P < 8 * N)
  {
    P <<= 1;
  }
  std::vector<double> in(P, 0.0);
  std::vector<fftw_complex> out(P / 2 + 1);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(P), in.data(), out.data(), FFTW_ESTIMATE);
  std::vector<double> power(P / 2 + 1, 0.0);
  for (const auto &ch : x)
  {
    std::fill(in.begin(), in.end(), 0.0);
    for (std::size_t n = 0; n < N; n++)
    {
      const double s = std::sin(pi * (static_cast<double>(n) + 0.5) / static_cast<double>(N));
      in[n] = ch[n] * s * s;
    }
    fftw_execute(plan);
    for (std::size_t k = 0; k < power.size(); k++)
    {
      power[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
  }
  fftw_destroy_plan(plan);
  bin = 1.0 / (static_cast<double>(P) * step);
  const double pmax = *std::max_element(power.begin(), power.end());
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < power.size(); k++)
  {
    const double f = static_cast<double>(k) * bin;
    if (f < f_lo || f > f_hi)
    {
      continue;
    }
    if (power[k] > power[k - 1] && power[k] >= power[k + 1] && power[k] > 1e-10 * pmax)
    {
      // Parabolic interpolation of the log power.
      const double a = std::log(power[k - 1]), b = std::log(power[k]), c = std::log(power[k + 1]);
      const double den = a - 2.0 * b + c;
      const double off = den != 0.0 ? 0.5 * (a - c) / den : 0.0;
      peaks.push_back((static_cast<double>(k) + off) * bin);
    }
  }
  return peaks;
}

}  // namespace

ResonanceSet ExtractResonances(const ProbeSeries &series, const InversionOptions &options)
{
  ResonanceSet result;
  const std::size_t total = series.sample_count();
  if (series.channels.empty() || total <= series.source_end + 8)
  {
    result.diagnostic = "no samples after the source";
    return result;
  }
  const double f_hi = options.f_max > 0.0 ? options.f_max : (series.f_hi > 0.0 ? series.f_hi : 0.25 / series.dt);
  const double f_lo = options.f_min;
  std::size_t D = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(1.0 / (2.5 * f_hi * series.dt))));
  const std::size_t avail = total - series.source_end;
  std::size_t N = avail / D;
  N = std::min(N, options.max_samples);
  const double step = static_cast<double>(D) * series.dt;
  std::vector<std::vector<double>> x;
  double scale = 0.0;
  for (const auto &ch : series.channels)
  {
    std::vector<double> v(N);
    for (std::size_t n = 0; n < N; n++)
    {
      v[n] = ch[series.source_end + n * D];
      scale = std::max(scale, std::abs(v[n]));
    }
    x.push_back(std::move(v));
  }
  if (scale == 0.0)
  {
    result.diagnostic = "signal is identically zero";
    return result;
  }
  for (auto &v : x)
  {
    for (double &s : v)
    {
      s /= scale;
    }
  }

  double bin = 0.0;
  const auto peaks = FftPeaks(x, step, f_lo, f_hi, bin);
  std::string diag;
  auto poles = MatrixPencil(x, step, f_lo, f_hi, diag);
  if (poles.empty())
  {
    result.diagnostic = diag.empty() ? "no stable exponential components in band" : diag;
    return result;
  }
  // Second fit on the first two thirds of the record to estimate uncertainty.
  std::vector<std::vector<double>> head;
  for (const auto &v : x)
  {
    head.emplace_back(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(2 * N / 3));
  }
  std::string diag2;
  const auto check = MatrixPencil(head, step, f_lo, f_hi, diag2);

  double amax = 0.0;
  for (const auto &p : poles)
  {
    amax = std::max(amax, p.amplitude);
  }
  const double duration = static_cast<double>(N) * step;
  const double trust = constants::c / (10.0 * series.max_spacing);
  for (const auto &p : poles)
  {
    if (p.amplitude < options.threshold * amax)
    {
      continue;
    }
    // Growing or very fast-decaying components are fitting artefacts.
    if (p.decay < -1.0 / duration || p.decay > 20.0 / duration)
    {
      continue;
    }
    Resonance r;
    r.f = p.f;
    r.amplitude = p.amplitude * scale;
    r.decay = p.decay;
    double du = std::numeric_limits<double>::infinity();
    for (const auto &q : check)
    {
      du = std::min(du, std::abs(q.f - p.f));
    }
    r.uncertainty = std::isfinite(du) ? std::max(du, 1e-12 * p.f) : 1.0 / duration;
    double dp = std::numeric_limits<double>::infinity();
    for (double f : peaks)
    {
      dp = std::min(dp, std::abs(f - p.f));
    }
    r.confidence = std::isfinite(dp) ? std::exp(-dp / (4.0 * bin)) : 0.0;
    r.trusted = series.max_spacing > 0.0 ? p.f < trust : true;
    result.modes.push_back(r);
  }
  std::sort(result.modes.begin(), result.modes.end(),
            [](const Resonance &a, const Resonance &b) { return a.f < b.f; });
  if (result.modes.empty())
  {
    result.diagnostic = "no exponential component above threshold";
  }
  return result;
}

double PatternEnergy(const ModePattern &pattern)
{
  const Grid3 &grid = pattern.mask->grid;
  const Lengths L = MakeLengths(grid);
  const YeeLayout lay(grid);
  const auto &F = pattern.fields;
  const std::array<const std::vector<cd> *, 3> E{&F.Ex, &F.Ey, &F.Ez};
  const std::array<const std::vector<cd> *, 3> B{&F.Bx, &F.By, &F.Bz};
  double we = 0.0;
  double wb = 0.0;
  for (int a = 0; a < 3; a++)
  {
    ForComponent(grid, a, true,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 { we += std::norm((*E[a])[lay(i, j, k)]) * EdgeVol(L, a, i, j, k); });
    ForComponent(grid, a, false,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 { wb += std::norm((*B[a])[lay(i, j, k)]) * FaceVol(L, a, i, j, k); });
  }
  return pattern.multiplicity * 0.25 * (constants::eps0 * we + wb / constants::mu0);
}

ModePattern ExtractModePattern(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
                               double f, std::size_t steps, const PatternOptions &options)
{
  if (!(f > 0.0))
  {
    throw DomainError("pattern frequency must be positive");
  }
  if (options.periods < 4)
  {
    throw DomainError("pattern window needs at least 4 periods");
  }
  Simulation sim(geometry, spec, options.dt);
  ExcitationSpec ex;
  ex.f_center = f;
  ex.bandwidth = options.bandwidth_fraction * f;
  ex.dipoles = options.dipoles;
  ex.seed = options.seed;
  const std::size_t end = sim.SetExcitation(ex);
  const double dt = sim.dt();
  const std::size_t per = static_cast<std::size_t>(std::llround(1.0 / (f * dt)));
  const std::size_t stride = std::max<std::size_t>(1, per / 16);
  std::size_t length = static_cast<std::size_t>(std::llround(options.periods / (f * dt)));
  if (steps > 0)
  {
    if (steps <= end + 4 * per)
    {
      throw DomainError("step budget too small for the source and a 4-period window");
    }
    length = std::min(length, steps - end);
  }
  length = (length / stride) * stride;

  ProbeSeries series;
  series.positions = sim.probes();
  series.channels.assign(3 * series.positions.size(), {});
  series.dt = dt;
  series.source_end = end;
  series.f_lo = std::max(0.0, f - 0.7071 * ex.bandwidth);
  series.f_hi = f + 0.7071 * ex.bandwidth;
  series.max_spacing = sim.mask().grid.MaxSpacing();
  auto record = [&]
  {
    const auto s = sim.SampleProbes();
    for (std::size_t c = 0; c < s.size(); c++)
    {
      series.channels[c].push_back(s[c]);
    }
  };
  while (sim.step_count() < end)
  {
    sim.Step();
    record();
  }
  sim.BeginTransform(f, length, stride);
  while (!sim.TransformDone())
  {
    sim.Step();
    record();
  }

  const double window = static_cast<double>(length) * dt;
  const auto res = ExtractResonances(series);
  double target_amp = 0.0;
  for (const auto &r : res.modes)
  {
    if (std::abs(r.f - f) <= 1.0 / window)
    {
      target_amp = std::max(target_amp, r.amplitude);
    }
  }
  for (const auto &r : res.modes)
  {
    const double sep = std::abs(r.f - f);
    if (sep > 1.0 / window && sep < 3.0 * 2.0 / window && r.amplitude > 1e-2 * target_amp)
    {
      throw AmbiguousMode("resonance at " + std::to_string(r.f) + " Hz lies within 3 linewidths of " +
                          std::to_string(f) + " Hz");
    }
  }

  ModePattern pat;
  pat.mask = sim.shared_mask();
  pat.f = f;
  pat.dt = dt;
  pat.multiplicity = sim.multiplicity();
  pat.fields = sim.phasors();
  pat.window = window;
  auto &m = pat.manifest;
  for (int a = 0; a < 3; a++)
  {
    m.cells[a] = sim.mask().grid.cells(a);
  }
  m.dt = dt;
  m.steps = sim.step_count();
  m.source_end = end;
  m.max_spacing = sim.mask().grid.MaxSpacing();
  m.min_spacing = std::min({sim.mask().grid.MinSpacing(0), sim.mask().grid.MinSpacing(1),
                            sim.mask().grid.MinSpacing(2)});
  m.excitation = ex;
  m.excitation.probes = series.positions;

  // Phase so that the magnetic pattern is as real as possible, then unit energy.
  cd sum(0.0, 0.0);
  for (const auto *v : {&pat.fields.Bx, &pat.fields.By, &pat.fields.Bz})
  {
    for (const cd &b : *v)
    {
      sum += b * b;
    }
  }
  const cd rot = std::abs(sum) > 0.0 ? std::exp(cd(0.0, -0.5 * std::arg(sum))) : cd(1.0, 0.0);
  const double U = PatternEnergy(pat);
  if (!(U > 0.0))
  {
    throw ConvergenceError("mode pattern has no energy at " + std::to_string(f) + " Hz", 0.0);
  }
  const cd s = rot / std::sqrt(U);
  for (auto *v : {&pat.fields.Ex, &pat.fields.Ey, &pat.fields.Ez, &pat.fields.Bx, &pat.fields.By, &pat.fields.Bz})
  {
    for (cd &x : *v)
    {
      x *= s;
    }
  }
  pat.energy = PatternEnergy(pat);

  // Discrete Faraday law: curl E + i w' B = 0 with the leapfrog frequency w'.
  const Grid3 &grid = sim.mask().grid;
  const YeeLayout &lay = sim.layout();
  const double wp = 2.0 * std::sin(pi * f * dt) / dt;
  const auto &F = pat.fields;
  double num = 0.0, den = 0.0;
  const std::array<const std::vector<cd> *, 3> E{&F.Ex, &F.Ey, &F.Ez};
  const std::array<const std::vector<cd> *, 3> B{&F.Bx, &F.By, &F.Bz};
  const std::array<std::size_t, 3> stride3{lay.sI, lay.sJ, 1};
  for (int a = 0; a < 3; a++)
  {
    const int b = (a + 1) % 3;
    const int c = (a + 2) % 3;
    ForComponent(grid, a, false,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::array<std::size_t, 3> x{i, j, k};
                   const std::size_t p = lay(i, j, k);
                   const cd curl = ((*E[c])[p + stride3[b]] - (*E[c])[p]) / (grid.nodes[b][x[b] + 1] - grid.nodes[b][x[b]]) -
                                   ((*E[b])[p + stride3[c]] - (*E[b])[p]) / (grid.nodes[c][x[c] + 1] - grid.nodes[c][x[c]]);
                   const double vol = sim.FaceVolume(a, i, j, k);
                   num += std::norm(curl + cd(0.0, wp) * (*B[a])[p]) * vol;
                   den += std::norm(wp * (*B[a])[p]) * vol;
                 });
  }
  pat.faraday_residual = den > 0.0 ? std::sqrt(num / den) : 0.0;

  double emax = 0.0, etan = 0.0;
  for (int a = 0; a < 3; a++)
  {
    ForComponent(grid, a, true,
                 [&](std::size_t i, std::size_t j, std::size_t k)
                 {
                   const std::size_t p = lay(i, j, k);
                   const double v = std::abs((*E[a])[p]);
                   emax = std::max(emax, v);
                   if (!sim.EdgeActive(a, p))
                   {
                     etan = std::max(etan, v);
                   }
                 });
  }
  pat.tangential_e = emax > 0.0 ? etan / emax : 0.0;
  return pat;
}

namespace
{

struct FieldSampler_Curved
{
  double d;
  Vec3 n;  // into the vacuum
};

// Signed distance (positive in vacuum) and outward normal of a post.
FieldSampler_Curved FrustumSigned(const geometry::Frustum &f, const Vec3 &p)
{
  const double ex = p[0] - f.cx, ey = p[1] - f.cy;
  const double rho = std::hypot(ex, ey);
  const double z = std::max(p[2], f.z0);
  auto closest = [&](double r0, double z0, double r1, double z1, double &qr, double &qz)
  {
    const double dr = r1 - r0, dz = z1 - z0;
    const double t = std::clamp(((rho - r0) * dr + (z - z0) * dz) / (dr * dr + dz * dz), 0.0, 1.0);
    qr = r0 + t * dr;
    qz = z0 + t * dz;
    return std::hypot(rho - qr, z - qz);
  };
  double sr, sz, tr, tz;
  const double ds = closest(f.r0, f.z0, f.r1, f.z1, sr, sz);
  const double dt = closest(f.r1, f.z1, 0.0, f.z1, tr, tz);
  const bool side = ds <= dt;
  const double d = side ? ds : dt;
  const double wall_r = f.r0 + (f.r1 - f.r0) * (z - f.z0) / (f.z1 - f.z0);
  const bool inside = z <= f.z1 && rho < wall_r;
  double nr, nz;
  if (side)
  {
    const double len = std::hypot(f.z1 - f.z0, f.r1 - f.r0);
    nr = (f.z1 - f.z0) / len;
    nz = -(f.r1 - f.r0) / len;
    if (d > 1e-12 * f.z1 && (sr == f.r1 && sz == f.z1))
    {
      // Past the rim: radial from the edge.
      nr = (rho - sr) / d;
      nz = (z - sz) / d;
      if (inside)
      {
        nr = -nr;
        nz = -nz;
      }
    }
  }
  else
  {
    nr = 0.0;
    nz = 1.0;
  }
  const double ux = rho > 0.0 ? ex / rho : 1.0, uy = rho > 0.0 ? ey / rho : 0.0;
  return {inside ? -d : d, {nr * ux, nr * uy, nz}};
}

// Samples the exported magnetic field. Within 1.5 cells of a staircased
// (curved) conductor the cell values carry the staircase corner fields, so
// there B is extrapolated linearly along the true normal from 1.5 and 2.5
// cells out.
class FieldSampler
{
public:
  FieldSampler(std::shared_ptr<const VoxelMask> mask, std::shared_ptr<const geometry::CavityGeometry> geo,
               std::vector<CVec3> cell_b)
    : mask_(std::move(mask)), geo_(std::move(geo)), b_(std::move(cell_b))
  {
  }

  std::optional<CVec3> Interpolate(const Vec3 &q) const
  {
    const Grid3 &g = mask_->grid;
    Vec3 p = q;
    std::array<double, 3> flip{1.0, 1.0, 1.0};
    for (int a = 0; a < 3; a++)
    {
      for (int side = 0; side < 2; side++)
      {
        const double plane = side == 0 ? g.nodes[a].front() : g.nodes[a].back();
        const bool outside = side == 0 ? p[a] < plane : p[a] > plane;
        const auto kind = g.boundary[a][side];
        if (!outside || kind == BoundaryKind::Wall)
        {
          continue;
        }
        p[a] = 2.0 * plane - p[a];
        // B' = -sigma R B for a mirror of parity sigma.
        const double sigma = kind == BoundaryKind::PecSymmetry ? -1.0 : 1.0;
        for (int c = 0; c < 3; c++)
        {
          flip[c] *= c == a ? sigma : -sigma;
        }
      }
    }
    if (!InsideDomain(g, p) || !geo_->IsVacuum(p))
    {
      return std::nullopt;
    }
    std::array<std::array<std::size_t, 2>, 3> idx{};
    std::array<std::array<double, 2>, 3> wt{};
    for (int a = 0; a < 3; a++)
    {
      const auto &n = g.nodes[a];
      const std::size_t cells = n.size() - 1;
      auto ctr = [&](std::size_t c) { return 0.5 * (n[c] + n[c + 1]); };
      const std::size_t c = CellOf(n, p[a]);
      const std::size_t c0 = p[a] < ctr(c) ? (c == 0 ? 0 : c - 1) : c;
      const std::size_t c1 = std::min(c0 + 1, cells - 1);
      const double t = c1 == c0 ? 0.0 : std::clamp((p[a] - ctr(c0)) / (ctr(c1) - ctr(c0)), 0.0, 1.0);
      idx[a] = {c0, c1};
      wt[a] = {1.0 - t, t};
    }
    CVec3 s{};
    double w = 0.0;
    for (int u = 0; u < 2; u++)
    {
      for (int v = 0; v < 2; v++)
      {
        for (int r = 0; r < 2; r++)
        {
          const double ww = wt[0][u] * wt[1][v] * wt[2][r];
          if (ww == 0.0 || !mask_->IsVacuumCell(idx[0][u], idx[1][v], idx[2][r]))
          {
            continue;
          }
          const CVec3 &b = b_[mask_->Index(idx[0][u], idx[1][v], idx[2][r])];
          for (int c = 0; c < 3; c++)
          {
            s[c] += ww * b[c];
          }
          w += ww;
        }
      }
    }
    if (w == 0.0)
    {
      const std::size_t i = CellOf(g.nodes[0], p[0]), j = CellOf(g.nodes[1], p[1]), k = CellOf(g.nodes[2], p[2]);
      if (!mask_->IsVacuumCell(i, j, k))
      {
        return std::nullopt;
      }
      s = b_[mask_->Index(i, j, k)];
      w = 1.0;
    }
    for (int c = 0; c < 3; c++)
    {
      s[c] *= flip[c] / w;
    }
    return s;
  }

  using Curved = FieldSampler_Curved;

  // Nearest staircased surface: the can's side wall or a post. The distance
  // is signed (negative inside the conductor).
  std::optional<Curved> NearestCurved(const Vec3 &p) const
  {
    std::optional<Curved> best;
    const double a = geo_->params().a;
    const double r = std::hypot(p[0], p[1]);
    if (r > 0.0)
    {
      best = Curved{a - r, {-p[0] / r, -p[1] / r, 0.0}};
    }
    for (const auto &f : geo_->posts())
    {
      const auto c = FrustumSigned(f, p);
      if (!best || std::abs(c.d) < std::abs(best->d))
      {
        best = c;
      }
    }
    return best;
  }

  std::optional<CVec3> Estimate(const Vec3 &p, const std::optional<Curved> &known = std::nullopt) const
  {
    const auto c = known ? known : NearestCurved(p);
    if (!c)
    {
      return Interpolate(p);
    }
    const auto &g = mask_->grid;
    double dn = 0.0;
    for (int a = 0; a < 3; a++)
    {
      const std::size_t i = CellOf(g.nodes[a], p[a]);
      dn += std::abs(c->n[a]) * (g.nodes[a][i + 1] - g.nodes[a][i]);
    }
    if (c->d >= 1.5 * dn)
    {
      return Interpolate(p);
    }
    Vec3 p1{}, p2{};
    for (int a = 0; a < 3; a++)
    {
      const double s = p[a] - c->d * c->n[a];
      p1[a] = s + 1.5 * dn * c->n[a];
      p2[a] = s + 2.5 * dn * c->n[a];
    }
    const auto B1 = Interpolate(p1);
    const auto B2 = Interpolate(p2);
    if (!B1 || !B2)
    {
      return Interpolate(p);
    }
    const double t = (c->d - 1.5 * dn) / dn;
    CVec3 B{};
    for (int a = 0; a < 3; a++)
    {
      B[a] = (*B1)[a] + t * ((*B2)[a] - (*B1)[a]);
    }
    return B;
  }

  double SpacingAt(const Vec3 &p) const { return LocalCell(mask_->grid, p); }

private:
  std::shared_ptr<const VoxelMask> mask_;
  std::shared_ptr<const geometry::CavityGeometry> geo_;
  std::vector<CVec3> b_;
};

double Norm2(const CVec3 &b) { return std::norm(b[0]) + std::norm(b[1]) + std::norm(b[2]); }

}  // namespace

ModeField ToModeField(const ModePattern &pattern, const geometry::CavityGeometry &geometry)
{
  const VoxelMask &mask = *pattern.mask;
  const Grid3 &grid = mask.grid;
  const YeeLayout lay(grid);
  const Lengths L = MakeLengths(grid);
  const auto &F = pattern.fields;
  const std::size_t cx = grid.cells(0), cy = grid.cells(1), cz = grid.cells(2);
  auto centre = [&](std::size_t i, std::size_t j, std::size_t k) -> Vec3
  {
    return {0.5 * (grid.nodes[0][i] + grid.nodes[0][i + 1]), 0.5 * (grid.nodes[1][j] + grid.nodes[1][j + 1]),
            0.5 * (grid.nodes[2][k] + grid.nodes[2][k + 1])};
  };

  std::vector<CVec3> cell_b(cx * cy * cz, CVec3{});
  for (std::size_t i = 0; i < cx; i++)
  {
    for (std::size_t j = 0; j < cy; j++)
    {
      for (std::size_t k = 0; k < cz; k++)
      {
        if (mask.IsVacuumCell(i, j, k))
        {
          const std::size_t p = lay(i, j, k);
          cell_b[mask.Index(i, j, k)] = {0.5 * (F.Bx[p] + F.Bx[p + lay.sI]), 0.5 * (F.By[p] + F.By[p + lay.sJ]),
                                         0.5 * (F.Bz[p] + F.Bz[p + 1])};
        }
      }
    }
  }

  ModeField out;
  out.f = pattern.f;
  out.multiplicity = pattern.multiplicity;
  out.solver = "fdtd3d";
  for (std::size_t i = 0; i < cx; i++)
  {
    for (std::size_t j = 0; j < cy; j++)
    {
      for (std::size_t k = 0; k < cz; k++)
      {
        if (mask.IsVacuumCell(i, j, k))
        {
          out.volume.push_back(
              {centre(i, j, k), Norm2(cell_b[mask.Index(i, j, k)]), L.d[0][i] * L.d[1][j] * L.d[2][k]});
        }
      }
    }
  }
  auto geo = std::make_shared<const geometry::CavityGeometry>(geometry);
  auto sampler = std::make_shared<const FieldSampler>(pattern.mask, geo, std::move(cell_b));
  for (const auto &v : out.volume)
  {
    const auto B = sampler->Estimate(v.position);
    out.candidates.push_back({v.position, B ? Norm2(*B) : v.b2});
  }
  out.b2_at = [sampler](const Vec3 &p) -> std::optional<double>
  {
    const auto B = sampler->Estimate(p);
    return B ? std::optional<double>(Norm2(*B)) : std::nullopt;
  };

  // Node charges from the discrete Gauss law; they are shared out among the
  // surface faces meeting at each node so the face sum equals the node sum.
  const std::size_t NX = grid.nodes[0].size(), NY = grid.nodes[1].size(), NZ = grid.nodes[2].size();
  auto node_id = [&](std::size_t i, std::size_t j, std::size_t k) { return (i * NY + j) * NZ + k; };
  std::vector<cd> q(NX * NY * NZ, cd(0.0, 0.0));
  for (std::size_t i = 0; i < NX; i++)
  {
    for (std::size_t j = 0; j < NY; j++)
    {
      for (std::size_t k = 0; k < NZ; k++)
      {
        const std::size_t p = lay(i, j, k);
        const cd flux = (F.Ex[p] - F.Ex[p - lay.sI]) * L.h[1][j] * L.h[2][k] +
                        (F.Ey[p] - F.Ey[p - lay.sJ]) * L.h[0][i] * L.h[2][k] +
                        (F.Ez[p] - F.Ez[p - 1]) * L.h[0][i] * L.h[1][j];
        q[node_id(i, j, k)] = constants::eps0 * flux;
      }
    }
  }
  // Charge is odd across a PEC mirror plane, so it vanishes on the plane.
  for (int a = 0; a < 3; a++)
  {
    for (int side = 0; side < 2; side++)
    {
      if (grid.boundary[a][side] != BoundaryKind::PecSymmetry)
      {
        continue;
      }
      const std::size_t plane = side == 0 ? 0 : grid.nodes[a].size() - 1;
      for (std::size_t i = 0; i < NX; i++)
      {
        for (std::size_t j = 0; j < NY; j++)
        {
          for (std::size_t k = 0; k < NZ; k++)
          {
            const std::array<std::size_t, 3> x{i, j, k};
            if (x[a] == plane)
            {
              q[node_id(i, j, k)] = 0.0;
            }
          }
        }
      }
    }
  }

  std::vector<std::array<std::size_t, 4>> face_nodes;
  std::vector<int> share(NX * NY * NZ, 0);
  for (const auto &sc : mask.surface_cells)
  {
    const int f = static_cast<int>(sc.face);
    const int a = f / 2;
    const int side = f % 2;
    std::array<std::size_t, 3> base{sc.cell[0], sc.cell[1], sc.cell[2]};
    base[a] += side;
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    std::array<std::size_t, 4> fn{};
    int n = 0;
    for (int db = 0; db < 2; db++)
    {
      for (int dc = 0; dc < 2; dc++)
      {
        auto x = base;
        x[b] += db;
        x[c] += dc;
        fn[n++] = node_id(x[0], x[1], x[2]);
      }
    }
    for (auto id : fn)
    {
      share[id]++;
    }
    face_nodes.push_back(fn);
  }

  const double h = geometry.params().h;
  std::vector<SurfaceSample> samples;
  samples.reserve(mask.surface_cells.size());
  for (std::size_t s = 0; s < mask.surface_cells.size(); s++)
  {
    const auto &sc = mask.surface_cells[s];
    const int f = static_cast<int>(sc.face);
    const int a = f / 2;
    const int side = f % 2;
    const int b = (a + 1) % 3, c = (a + 2) % 3;
    const std::size_t i = sc.cell[0], j = sc.cell[1], k = sc.cell[2];
    Vec3 pos = centre(i, j, k);
    pos[a] = grid.nodes[a][sc.cell[a] + side];
    Vec3 nf{0.0, 0.0, 0.0};
    nf[a] = side == 0 ? 1.0 : -1.0;
    const double face_area = L.d[b][sc.cell[b]] * L.d[c][sc.cell[c]];
    const auto dist = geometry.Distance(pos);

    // Faces of a staircased surface are evaluated on the true surface.
    Vec3 nt = geometry.SurfaceNormal(pos);
    Vec3 at = pos;
    std::optional<FieldSampler::Curved> curved = sampler->NearestCurved(pos);
    const double flat = std::min({pos[2], h - pos[2], dist.plate});
    if (curved && std::abs(curved->d) <= flat + 0.5 * sampler->SpacingAt(pos))
    {
      nt = curved->n;
      for (int e = 0; e < 3; e++)
      {
        at[e] = pos[e] - curved->d * nt[e];
      }
      curved->d = 0.0;
    }
    else
    {
      curved.reset();
    }
    const double cosang = std::abs(nf[0] * nt[0] + nf[1] * nt[1] + nf[2] * nt[2]);
    SurfaceSample smp;
    smp.position = at;
    smp.normal = nt;
    smp.area = face_area * std::max(cosang, 0.05);
    auto Bopt = sampler->Estimate(at, curved);
    if (!Bopt)
    {
      Bopt = sampler->Interpolate(centre(i, j, k));
    }
    const CVec3 B = Bopt ? *Bopt : CVec3{};
    const cd bn = B[0] * nt[0] + B[1] * nt[1] + B[2] * nt[2];
    smp.bt2 = std::max(0.0, Norm2(B) - std::norm(bn));
    const double imu = 1.0 / constants::mu0;
    smp.J = {(nt[1] * B[2] - nt[2] * B[1]) * imu, (nt[2] * B[0] - nt[0] * B[2]) * imu,
             (nt[0] * B[1] - nt[1] * B[0]) * imu};
    cd qf(0.0, 0.0);
    for (auto id : face_nodes[s])
    {
      qf += q[id] / static_cast<double>(share[id]);
    }
    smp.rho = qf / smp.area;
    smp.conductor = (dist.wall <= dist.post && dist.wall <= dist.plate) ? 0 : (dist.plate < dist.post ? -1 : 1);
    samples.push_back(smp);
  }

  // Mirror copies: E and J pick up the plane's parity sigma (-1 PEC, +1 PMC).
  for (int a = 0; a < 3; a++)
  {
    for (int side = 0; side < 2; side++)
    {
      const auto kind = grid.boundary[a][side];
      if (kind == BoundaryKind::Wall)
      {
        continue;
      }
      const double sigma = kind == BoundaryKind::PecSymmetry ? -1.0 : 1.0;
      const double plane = side == 0 ? grid.nodes[a].front() : grid.nodes[a].back();
      const std::size_t n = samples.size();
      for (std::size_t s = 0; s < n; s++)
      {
        SurfaceSample m = samples[s];
        m.position[a] = 2.0 * plane - m.position[a];
        m.normal[a] = -m.normal[a];
        for (int c = 0; c < 3; c++)
        {
          m.J[c] *= sigma * (c == a ? -1.0 : 1.0);
        }
        m.rho *= sigma;
        samples.push_back(m);
      }
    }
  }
  out.surface = std::move(samples);
  return out;
}

}  // namespace cavityforge::fdtd
