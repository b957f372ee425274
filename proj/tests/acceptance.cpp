// Acceptance suite: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Usage: acceptance [criterion ...] [--cache DIR]
// Exit status 0 only when every requested criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <unistd.h>

#include "cavityforge/analytic.hpp"
#include "cavityforge/axisym.hpp"
#include "cavityforge/fdtd3d.hpp"
#include "cavityforge/forge.hpp"
#include "cavityforge/metrics.hpp"
#include "cavityforge/physcore.hpp"

using namespace cavityforge;
namespace fs = std::filesystem;

namespace
{

// Tolerances, pinned.
constexpr double kC1FreqTol = 1e-3;
constexpr double kC1VolumeTol = 5e-3;
constexpr double kC2FreqTol = 2e-3;
constexpr double kC2MinOrder = 1.9;
constexpr double kC3cFreqTol = 0.05, kC3cVolumeTol = 0.15;
constexpr double kC4aFreqTol = 0.10, kC4aVolumeTol = 0.30;
constexpr double kC4FreqTol = 0.10;
constexpr double kC3dVolumeTol = 0.30;
constexpr double kC4bVolumeFactor = 2.0;
constexpr double kC5MinR2 = 0.99, kC5MaxQSpread = 0.10, kC5Factor = 2.0;
constexpr double kC6FreqTol = 0.02, kC6QTol = 0.15, kC6VolumeTol = 0.20;
constexpr double kC7Tol = 0.01;
constexpr double kC8EnergyDrift = 1e-6;
constexpr double kC8DivB = 1e-10;
constexpr double kC8ScaleTol = 1e-6;
constexpr double kC8IdentityTol = 1e-12;
constexpr double kC8SymmetryTol = 1e-12;
constexpr double kC8OrthoTol = 1e-8;
constexpr double kC8DiamondFactor = 3.0;

forge::Cache *g_cache = nullptr;

struct Outcome
{
  bool pass = true;
  std::ostringstream text;

  void Add(bool ok, const std::string &what)
  {
    pass = pass && ok;
    if (text.tellp() > 0)
    {
      text << "; ";
    }
    text << what << (ok ? "" : " [x]");
  }
};

std::string Num(double v, int precision = 4)
{
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

bool Within(double value, double target, double rel)
{
  return std::isfinite(value) && std::abs(value - target) <= rel * std::abs(target);
}

bool WithinFactor(double value, double target, double factor)
{
  return std::isfinite(value) && value > 0.0 && value <= factor * target && value >= target / factor;
}

void Log(const std::string &m) { std::cerr << "  " << m << std::endl; }

forge::SweepResult Sweep(const std::string &name)
{
  const auto config = forge::LoadConfig(fs::path(CAVITYFORGE_SOURCE_DIR) / "configs" / (name + ".json"));
  forge::SweepOptions opt;
  opt.cache = g_cache;
  opt.log = [&](const std::string &m) { Log(name + ": " + m); };
  return forge::RunSweep(config, opt);
}

const forge::Row &Single(const forge::SweepResult &r)
{
  if (r.rows.empty() || !r.rows.front().ok)
  {
    throw std::runtime_error(r.rows.empty() ? "no rows" : r.rows.front().error);
  }
  return r.rows.front();
}

// f and V_B/lambda^3 of a single-point config against published values.
void CompareDesign(Outcome &o, const std::string &label, const std::string &config, double f, double f_tol, double vb,
                   double vb_tol, bool vb_is_factor)
{
  try
  {
    const auto &row = Single(Sweep(config));
    o.Add(Within(row.f, f, f_tol), label + " f " + Num(row.f / 1e9) + " GHz vs " + Num(f / 1e9));
    const bool ok = vb_is_factor ? WithinFactor(row.V_B_lambda3, vb, vb_tol) : Within(row.V_B_lambda3, vb, vb_tol);
    o.Add(ok, label + " V_B " + Num(row.V_B_lambda3, 3) + " vs " + Num(vb, 3));
  }
  catch (const std::exception &e)
  {
    o.Add(false, label + " not solved (" + e.what() + ")");
  }
}

geometry::CavityGeometry Cylinder(double a, double h)
{
  geometry::CavityParams p;
  p.a = a;
  p.h = h;
  return geometry::CavityGeometry::Make(geometry::Family::Cylinder, p);
}

const analytic::ModeIndex kTM010{0, 1, 0, analytic::ModeFamily::TM};

void Criterion1(Outcome &o)
{
  const double f = analytic::ResonanceFrequency(kTM010, 0.02, 0.02);
  o.Add(Within(f, 5.74e9, kC1FreqTol), "f " + Num(f / 1e9, 5) + " GHz");
  const double lambda3 = std::pow(constants::c / f, 3);
  const double v20 = analytic::Tm010ModeVolume(0.02, f) / lambda3;
  const double v5 = analytic::Tm010ModeVolume(0.005, f) / lambda3;
  o.Add(Within(v20, 0.140, kC1VolumeTol), "V_B(h=2cm) " + Num(v20));
  o.Add(Within(v5, 0.0349, kC1VolumeTol), "V_B(h=5mm) " + Num(v5));
}

void Criterion2(Outcome &o)
{
  const double exact = analytic::ResonanceFrequency(kTM010, 0.02, 0.02);
  std::vector<double> err;
  for (int n : {64, 128, 256})
  {
    const auto prob = axisym::Assemble(Cylinder(0.02, 0.02).Profile(), axisym::MeshSpec::Cells(n, n));
    err.push_back(std::abs(axisym::SolveModes(prob, 1).at(0).f - exact) / exact);
  }
  const double order = std::min(std::log2(err[0] / err[1]), std::log2(err[1] / err[2]));
  o.Add(err[2] < kC2FreqTol, "error at 256^2 " + Num(err[2] * 100, 3) + "%");
  o.Add(order >= kC2MinOrder, "order " + Num(order, 3));
}

void Criterion3(Outcome &o)
{
  CompareDesign(o, "3c", "fig3c", 2.23e9, kC3cFreqTol, 1.44e-3, kC3cVolumeTol, false);
  CompareDesign(o, "4a", "fig4a", 1.41e9, kC4aFreqTol, 1.76e-5, kC4aVolumeTol, false);
}

void Criterion4(Outcome &o)
{
  // The split-mode cavity is given only as R = 5 mm: no post heights or gap.
  o.Add(false, "3b not reproducible (geometry unspecified)");
  CompareDesign(o, "3d", "fig3d", 3.21e9, kC4FreqTol, 4.03e-4, kC3dVolumeTol, false);
  CompareDesign(o, "4b", "fig4b", 2.12e9, kC4FreqTol, 5.06e-6, kC4bVolumeFactor, true);
}

void Criterion5(Outcome &o)
{
  const auto res = Sweep("fig5");
  std::vector<double> t, vb, q;
  for (const auto &r : res.rows)
  {
    if (!r.ok)
    {
      o.Add(false, "t = " + Num(r.geometry.at("t").get<double>() * 1e6) + " um failed (" + r.error + ")");
      continue;
    }
    t.push_back(r.geometry.at("t").get<double>());
    vb.push_back(r.V_B_lambda3);
    q.push_back(r.Q_Nb);
  }
  if (t.size() < 3)
  {
    o.Add(false, "fewer than three thicknesses");
    return;
  }
  const double n = static_cast<double>(t.size());
  double mt = 0, mv = 0;
  for (std::size_t i = 0; i < t.size(); i++)
  {
    mt += t[i] / n;
    mv += vb[i] / n;
  }
  double stt = 0, svv = 0, stv = 0;
  for (std::size_t i = 0; i < t.size(); i++)
  {
    stt += (t[i] - mt) * (t[i] - mt);
    svv += (vb[i] - mv) * (vb[i] - mv);
    stv += (t[i] - mt) * (vb[i] - mv);
  }
  const double slope = stv / stt;
  const double r2 = stv * stv / (stt * svv);
  const double v10 = mv + slope * (10e-6 - mt);
  const auto [qmin, qmax] = std::minmax_element(q.begin(), q.end());
  const double spread = (*qmax - *qmin) / (std::accumulate(q.begin(), q.end(), 0.0) / n);
  o.Add(r2 > kC5MinR2, "R^2 " + Num(r2, 5));
  o.Add(spread < kC5MaxQSpread, "Q spread " + Num(spread * 100, 3) + "%");
  // Slope read as 3.18e-6 per um, the reading consistent with the plotted point.
  o.Add(WithinFactor(v10, 3.18e-5, kC5Factor), "V_B(10um) " + Num(v10, 3) + " vs 3.18e-05 (slope " +
                                                   Num(slope * 1e-6, 3) + "/um)");
}

void Criterion6(Outcome &o)
{
  try
  {
    const auto &row = Single(Sweep("experimental"));
    o.Add(Within(row.f, 2.864e9, kC6FreqTol), "f " + Num(row.f / 1e9, 5) + " GHz");
    o.Add(Within(row.Q, 3169.0, kC6QTol), "Q " + Num(row.Q, 5));
    o.Add(Within(row.V_B_lambda3, 1.95e-3, kC6VolumeTol), "V_B " + Num(row.V_B_lambda3, 3) + " vs 1.95e-03");
  }
  catch (const std::exception &e)
  {
    o.Add(false, std::string("not solved (") + e.what() + ")");
  }
}

void Criterion7(Outcome &o)
{
  const double f = 10e9;
  const auto sp = metrics::SinglePhoton(f, 3.62e-8 * std::pow(constants::c / f, 3));
  const double g = metrics::CouplingRate(sp.B_s, {});
  o.Add(Within(sp.B_s, 2.06e-9, kC7Tol), "B_s " + Num(sp.B_s * 1e9) + " nT");
  o.Add(Within(g, 57.7, kC7Tol), "g " + Num(g) + " Hz");
  metrics::CouplerSpec flux;
  flux.kind = metrics::CouplerSpec::Kind::FluxQubit;
  flux.loop_area = 30e-12;
  flux.circulating_current = 100e-9;
  const double f_q = 5e9;
  const double g_flux = metrics::CouplingRate(sp.B0 * f_q * f_q, flux);
  o.Add(Within(g_flux, 2.33e6, kC7Tol), "flux-qubit g " + Num(g_flux / 1e6) + " MHz");
}

void Criterion8(Outcome &o)
{
  // Lossless time stepping conserves the discrete energy after the source.
  {
    const auto g = Cylinder(0.02, 0.02);
    fdtd::Simulation sim(g, geometry::ResolutionSpec::Uniform(1.5e-3));
    fdtd::ExcitationSpec ex;
    ex.f_center = 7e9;
    ex.bandwidth = 8e9;
    const auto end = sim.SetExcitation(ex);
    while (sim.step_count() < end)
    {
      sim.Step();
    }
    const double w0 = sim.Step(true);
    double div = sim.RelativeDivB();
    for (int n = 0; n < 10000; n++)
    {
      sim.Step();
      if (n % 1000 == 0)
      {
        div = std::max(div, sim.RelativeDivB());
      }
    }
    const double w1 = sim.Step(true);
    const double drift = std::abs(w1 - w0) / w0;
    o.Add(drift < kC8EnergyDrift, "energy drift " + Num(drift, 2));
    o.Add(div < kC8DivB, "div B " + Num(div, 2));
  }
  // B0 is invariant when geometry and mesh scale together.
  {
    geometry::CavityParams p;
    p.a = 0.02;
    p.h = 0.02;
    p.post = geometry::PostSpec{0.005, 0.005, 0.018};
    const auto g1 = geometry::CavityGeometry::Make(geometry::Family::Reentrant, p);
    const double s = 3.7;
    const auto g2 = g1.Scaled(s);
    const auto spec = axisym::MeshSpec::Graded(4e-4, 1e-3, 1.3);
    auto b0 = [](const geometry::CavityGeometry &g, const axisym::MeshSpec &m)
    {
      const auto prob = axisym::Assemble(g.Profile(), m);
      const auto field = axisym::ToModeField(prob, axisym::SolveModes(prob, 1).at(0));
      const auto vb = metrics::ComputeModeVolume(field, metrics::ProbeRule::Standoff(50e-6 * g.params().a / 0.02), &g);
      return metrics::SinglePhoton(field.f, vb.V_B).B0;
    };
    const double r = b0(g2, axisym::MeshSpec::Graded(4e-4 * s, 1e-3 * s, 1.3)) / b0(g1, spec);
    o.Add(std::abs(r - 1.0) < kC8ScaleTol, "B0 scale ratio-1 " + Num(r - 1.0, 2));

    // V_B definition holds as an identity, and the discrete operators are symmetric.
    const auto prob = axisym::Assemble(g1.Profile(), spec);
    const auto modes = axisym::SolveModes(prob, 3);
    const auto field = axisym::ToModeField(prob, modes[0]);
    const auto vb = metrics::ComputeModeVolume(field, metrics::ProbeRule::Standoff(50e-6), &g1);
    const double integral = field.VolumeIntegral();
    const double identity = std::abs(integral - vb.b2_probe * vb.V_B) / integral;
    o.Add(identity < kC8IdentityTol, "V_B identity " + Num(identity, 2));
    const Eigen::SparseMatrix<double> Kt = prob.K.transpose(), Mt = prob.M.transpose();
    const double asym = std::max((prob.K - Kt).norm() / prob.K.norm(), (prob.M - Mt).norm() / prob.M.norm());
    o.Add(asym < kC8SymmetryTol, "K, M asymmetry " + Num(asym, 2));
    double ortho = 0.0;
    std::vector<Eigen::VectorXd> x;
    for (const auto &m : modes)
    {
      Eigen::VectorXd v(static_cast<Eigen::Index>(prob.node_of_dof.size()));
      for (std::size_t d = 0; d < prob.node_of_dof.size(); d++)
      {
        v(static_cast<Eigen::Index>(d)) = m.H_phi[prob.node_of_dof[d]];
      }
      x.push_back(v);
    }
    for (std::size_t i = 0; i < x.size(); i++)
    {
      for (std::size_t j = i + 1; j < x.size(); j++)
      {
        const double mij = x[i].dot(prob.M * x[j]);
        ortho = std::max(ortho, std::abs(mij) / std::sqrt(x[i].dot(prob.M * x[i]) * x[j].dot(prob.M * x[j])));
      }
    }
    o.Add(ortho < kC8OrthoTol, "M-orthogonality " + Num(ortho, 2));
  }
  // Cached and recomputed sweeps agree bit for bit.
  {
    const auto dir = fs::temp_directory_path() / ("cavityforge_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    forge::Cache cache(dir);
    const auto config = forge::LoadConfig(fs::path(CAVITYFORGE_SOURCE_DIR) / "configs" / "fig3c.json");
    forge::SweepOptions opt;
    opt.cache = &cache;
    const auto a = forge::RunSweep(config);
    const auto b = forge::RunSweep(config, opt);
    const auto c = forge::RunSweep(config, opt);
    const bool same = a.rows[0].ToJson().dump() == b.rows[0].ToJson().dump() &&
                      b.rows[0].ToJson().dump() == c.rows[0].ToJson().dump() && a.manifest == c.manifest;
    o.Add(same && cache.List().size() == 1, "cache/rerun bitwise");
    fs::remove_all(dir);
  }
  // The black-diamond-class design in the trade-off set.
  try
  {
    const auto &row = Single(Sweep("black_diamond"));
    const double ratio = row.Q_Nb / row.V_B_lambda3;
    o.Add(WithinFactor(ratio, 3e16, kC8DiamondFactor), "black-diamond class Q_Nb/V_B " + Num(ratio, 3) + " vs 3e16");
  }
  catch (const std::exception &e)
  {
    o.Add(false, std::string("black-diamond class not solved (") + e.what() + ")");
  }
}

}  // namespace

int main(int argc, char **argv)
{
  std::set<int> wanted;
  std::optional<forge::Cache> cache;
  for (int i = 1; i < argc; i++)
  {
    const std::string arg = argv[i];
    if (arg == "--cache" && i + 1 < argc)
    {
      cache.emplace(argv[++i]);
      g_cache = &*cache;
    }
    else if (arg.find_first_not_of("0123456789") == std::string::npos && !arg.empty())
    {
      wanted.insert(std::stoi(arg));
    }
    else
    {
      std::cerr << "usage: acceptance [criterion ...] [--cache DIR]\n";
      return 2;
    }
  }
  const std::map<int, std::pair<std::string, std::function<void(Outcome &)>>> criteria{
      {1, {"analytic oracle", Criterion1}},
      {2, {"axisym convergence", Criterion2}},
      {3, {"reentrant designs (axisym)", Criterion3}},
      {4, {"non-axisymmetric designs (fdtd3d)", Criterion4}},
      {5, {"field-expulsion law", Criterion5}},
      {6, {"experimental cavity", Criterion6}},
      {7, {"coupling arithmetic", Criterion7}},
      {8, {"property suites and trade-off extreme", Criterion8}},
  };
  bool all = true;
  for (const auto &[n, c] : criteria)
  {
    if (!wanted.empty() && !wanted.count(n))
    {
      continue;
    }
    std::cerr << "criterion " << n << ": " << c.first << std::endl;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try
    {
      c.second(o);
    }
    catch (const std::exception &e)
    {
      o.Add(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << "  " << c.first << ": " << o.text.str()
              << "  (" << Num(secs, 3) << " s)" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
