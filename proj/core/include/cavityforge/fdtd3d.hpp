#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>
#include <nlohmann/json_fwd.hpp>

#include "cavityforge/geometry.hpp"
#include "cavityforge/mode_field.hpp"

namespace cavityforge::fdtd
{

using geometry::Vec3;

class AmbiguousMode : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Largest stable leapfrog step for the grid, times the 0.99 safety factor.
double StableTimeStep(const geometry::Grid3 &grid);

struct Dipole
{
  Vec3 position{};
  Vec3 moment{0.0, 0.0, 1.0};  // current-element direction and weight
};

// Gaussian-modulated sinusoid current sources. When `dipoles` is empty,
// `random_dipoles` positions and orientations are drawn from `seed`.
struct ExcitationSpec
{
  double f_center = 0.0;
  double bandwidth = 0.0;  // full width where the spectrum is down to 1%
  double amplitude = 1.0;
  std::vector<Dipole> dipoles;
  int random_dipoles = 3;
  std::vector<Vec3> probes;  // empty: `random_probes` drawn from `seed`
  int random_probes = 3;
  std::uint64_t seed = 1;

  nlohmann::json ToJson() const;
};

// Time after which the excitation is exactly zero (s).
double SourceDuration(const ExcitationSpec &spec);

// Index and layout of the staggered field arrays (padded by one ghost layer on
// the low side of every axis).
struct YeeLayout
{
  std::array<std::size_t, 3> nodes{};  // node counts
  std::size_t sI = 0;
  std::size_t sJ = 0;
  std::size_t size = 0;

  explicit YeeLayout(const geometry::Grid3 &grid = {});
  std::size_t operator()(std::size_t i, std::size_t j, std::size_t k) const
  {
    return (i + 1) * sI + (j + 1) * sJ + (k + 1);
  }
};

class Simulation
{
public:
  Simulation(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
             std::optional<double> dt = std::nullopt);
  Simulation(const geometry::CavityGeometry &geometry, std::shared_ptr<const geometry::VoxelMask> mask,
             std::optional<double> dt = std::nullopt);

  const geometry::VoxelMask &mask() const { return *mask_; }
  std::shared_ptr<const geometry::VoxelMask> shared_mask() const { return mask_; }
  const YeeLayout &layout() const { return layout_; }
  double dt() const { return dt_; }
  std::size_t step_count() const { return steps_; }
  // Volume of the full cavity over the simulated (possibly mirrored) part.
  double multiplicity() const { return multiplicity_; }

  // Installs the excitation and returns the step after which it is exactly zero.
  std::size_t SetExcitation(const ExcitationSpec &spec);
  std::vector<Vec3> probes() const;
  // E components nearest each probe (x, y, z per probe).
  std::vector<double> SampleProbes() const;

  // Advances one step. With `energy` set, returns the conserved discrete energy
  // at the half step (J, whole cavity).
  double Step(bool energy = false);

  // Largest |div B| times the local cell size, relative to max |B|.
  double RelativeDivB() const;

  // Running Hann-windowed transform at f over steps [start, start + length).
  void BeginTransform(double f, std::size_t length, std::size_t stride);
  bool TransformDone() const;

  struct Fields
  {
    std::vector<double> Ex, Ey, Ez, Bx, By, Bz;
  };
  const Fields &fields() const { return fields_; }
  struct Phasors
  {
    std::vector<std::complex<double>> Ex, Ey, Ez, Bx, By, Bz;
  };
  const Phasors &phasors() const { return phasors_; }

  // Edge active flags (nonzero when the edge is not shorted by a conductor).
  bool EdgeActive(int component, std::size_t index) const;
  // Dual volumes for energy sums.
  double EdgeVolume(int component, std::size_t i, std::size_t j, std::size_t k) const;
  double FaceVolume(int component, std::size_t i, std::size_t j, std::size_t k) const;

private:
  void Init(const geometry::CavityGeometry &geometry, std::optional<double> dt);
  double SourceValue(double t) const;
  void Accumulate();

  std::shared_ptr<const geometry::VoxelMask> mask_;
  std::shared_ptr<const geometry::CavityGeometry> geometry_;
  YeeLayout layout_;
  double dt_ = 0.0;
  double multiplicity_ = 1.0;
  std::size_t steps_ = 0;
  Fields fields_;
  std::vector<double> cEx_, cEy_, cEz_;
  std::array<std::vector<double>, 3> d_, id_, h_, ih_;  // primal and dual lengths

  struct Injection
  {
    int component;
    std::size_t index;
    double weight;
  };
  std::vector<Injection> injections_;
  double src_amp_ = 0.0, src_t0_ = 0.0, src_tau_ = 0.0, src_f_ = 0.0;
  std::size_t src_end_ = 0;
  std::size_t src_start_step_ = 0;
  struct ProbeIndex
  {
    Vec3 position;
    std::array<std::size_t, 3> index;
  };
  std::vector<ProbeIndex> probes_;

  double dft_f_ = 0.0;
  std::size_t dft_start_ = 0, dft_len_ = 0, dft_stride_ = 1, dft_count_ = 0;
  Phasors phasors_;
};

struct RunManifest
{
  std::array<std::size_t, 3> cells{};
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t source_end = 0;
  double max_spacing = 0.0;
  double min_spacing = 0.0;
  ExcitationSpec excitation;

  nlohmann::json ToJson() const;
};

struct ProbeSeries
{
  std::vector<Vec3> positions;
  // channels[c][n]: channel c = 3 * probe + component, sample n at step n.
  std::vector<std::vector<double>> channels;
  double dt = 0.0;
  std::size_t source_end = 0;
  double f_lo = 0.0;  // band the excitation covered
  double f_hi = 0.0;
  double max_spacing = 0.0;
  std::vector<double> energy;  // per step after the source, when recorded
  RunManifest manifest;

  std::size_t sample_count() const { return channels.empty() ? 0 : channels.front().size(); }
};

struct RunOptions
{
  std::optional<double> dt;
  bool record_energy = false;
};

// Refuses (DomainError) a dt above the stability limit or probes in conductor.
ProbeSeries RunBroadband(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
                         const ExcitationSpec &excitation, std::size_t steps, const RunOptions &options = {});

struct Resonance
{
  double f = 0.0;
  double amplitude = 0.0;
  double decay = 0.0;        // 1/s
  double uncertainty = 0.0;  // Hz
  double confidence = 0.0;   // 0..1
  bool trusted = false;      // below c / (10 max cell)
};

struct ResonanceSet
{
  std::vector<Resonance> modes;  // ascending f
  std::string diagnostic;
};

struct InversionOptions
{
  double f_min = 0.0;
  double f_max = 0.0;        // 0: series band edge
  double threshold = 1e-4;   // amplitude relative to the strongest
  std::size_t max_samples = 1200;
};

// Harmonic inversion of the post-source part of the series: FFT peaks seed a
// matrix-pencil fit shared by all channels.
ResonanceSet ExtractResonances(const ProbeSeries &series, const InversionOptions &options = {});

struct ModePattern
{
  std::shared_ptr<const geometry::VoxelMask> mask;
  double f = 0.0;
  double dt = 0.0;
  double multiplicity = 1.0;
  Simulation::Phasors fields;  // Yee layout, normalised to unit full-cavity energy
  double energy = 0.0;
  double faraday_residual = 0.0;
  double tangential_e = 0.0;   // max |E_t| on PEC edges over max |E|
  double window = 0.0;         // s
  RunManifest manifest;
};

struct PatternOptions
{
  double bandwidth_fraction = 0.3;
  int periods = 40;
  std::uint64_t seed = 1;
  std::vector<Dipole> dipoles;
  std::optional<double> dt;
};

// Narrow-band run at f followed by a windowed transform over an integer
// number of periods. `steps` caps the total run length (0: as needed).
ModePattern ExtractModePattern(const geometry::CavityGeometry &geometry, const geometry::ResolutionSpec &spec,
                               double f, std::size_t steps = 0, const PatternOptions &options = {});

// Energy of a phasor pattern: (1/4) integral (eps0 |E|^2 + |B|^2 / mu0), whole cavity.
double PatternEnergy(const ModePattern &pattern);

ModeField ToModeField(const ModePattern &pattern, const geometry::CavityGeometry &geometry);

}  // namespace cavityforge::fdtd
