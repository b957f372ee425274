// Throughput of the two field solvers on small, fixed problems.

#include <benchmark/benchmark.h>

#include "cavityforge/axisym.hpp"
#include "cavityforge/fdtd3d.hpp"
#include "cavityforge/geometry.hpp"

using namespace cavityforge;

namespace
{

geometry::CavityGeometry Reentrant()
{
  geometry::CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  p.post = geometry::PostSpec{0.005, 0.005, 0.018};
  return geometry::CavityGeometry::Make(geometry::Family::Reentrant, p);
}

void FdtdStep(benchmark::State &state)
{
  geometry::CavityParams p;
  p.a = 0.02;
  p.h = 0.02;
  const auto g = geometry::CavityGeometry::Make(geometry::Family::Cylinder, p);
  fdtd::Simulation sim(g, geometry::ResolutionSpec::Uniform(state.range(0) * 1e-6));
  fdtd::ExcitationSpec ex;
  ex.f_center = 6e9;
  ex.bandwidth = 4e9;
  sim.SetExcitation(ex);
  for (auto _ : state)
  {
    sim.Step();
  }
  state.counters["cells"] = static_cast<double>(sim.mask().vacuum.size());
}
BENCHMARK(FdtdStep)->Arg(1000)->Arg(500)->Unit(benchmark::kMicrosecond);

void AxisymAssemble(benchmark::State &state)
{
  const auto profile = Reentrant().Profile();
  const double fine = state.range(0) * 1e-6;
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(axisym::Assemble(profile, axisym::MeshSpec::Graded(fine, 5 * fine, 1.2)));
  }
}
BENCHMARK(AxisymAssemble)->Arg(400)->Arg(200)->Unit(benchmark::kMillisecond);

void AxisymSolve(benchmark::State &state)
{
  const double fine = state.range(0) * 1e-6;
  const auto prob = axisym::Assemble(Reentrant().Profile(), axisym::MeshSpec::Graded(fine, 5 * fine, 1.2));
  for (auto _ : state)
  {
    benchmark::DoNotOptimize(axisym::SolveModes(prob, 1));
  }
  state.counters["dof"] = static_cast<double>(prob.node_of_dof.size());
}
BENCHMARK(AxisymSolve)->Arg(400)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
