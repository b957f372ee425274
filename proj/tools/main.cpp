// cavityforge command-line front end: solve, sweep, report, cache.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "cavityforge/forge.hpp"
#include "cavityforge/physcore.hpp"
#include "report.hpp"

using namespace cavityforge;
namespace fs = std::filesystem;

namespace
{

enum Exit
{
  kOk = 0,
  kUsage = 1,
  kConfig = 2,
  kNoConvergence = 3,
  kPartial = 4
};

struct Common
{
  std::string config;
  std::string out;
  std::string format;
  int parallel = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> resolution;
  std::string cache_dir;
  bool no_cache = false;
  bool quiet = false;
};

fs::path DefaultCacheDir()
{
  if (const char *env = std::getenv("CAVITYFORGE_CACHE"))
  {
    return env;
  }
  return ".cavityforge-cache";
}

forge::RunConfig Load(const Common &c)
{
  auto config = forge::LoadConfig(c.config);
  if (c.seed)
  {
    config.seed = *c.seed;
  }
  if (c.resolution)
  {
    const double ratio = config.resolution.coarse / config.resolution.fine;
    config.resolution.fine = *c.resolution;
    config.resolution.coarse = *c.resolution * ratio;
  }
  if (!c.format.empty())
  {
    config.format = c.format;
  }
  if (!c.out.empty())
  {
    config.out = c.out;
  }
  return config;
}

void PrintRows(const std::vector<forge::Row> &rows)
{
  for (const auto &r : rows)
  {
    std::cout << r.family << " [" << r.solver << ", " << r.resolution << "] " << r.geometry.dump() << "\n";
    if (!r.ok)
    {
      std::cout << "  failed: " << r.error << "\n";
      continue;
    }
    std::cout << std::setprecision(7) << "  f = " << r.f << " Hz";
    if (r.extrapolated)
    {
      std::cout << " (+- " << std::setprecision(2) << r.f_error << ")";
    }
    std::cout << std::setprecision(5) << "\n  V_B = " << r.V_B_lambda3 << " lambda^3";
    if (r.extrapolated)
    {
      std::cout << " (+- " << std::setprecision(2) << r.V_B_error / std::pow(constants::c / r.f, 3) << ")";
    }
    std::cout << std::setprecision(5) << "\n  G = " << r.G << " Ohm  Q = " << r.Q << "  Q_Nb = " << r.Q_Nb
              << "  Q_Cu = " << r.Q_Cu << "\n  B_s = " << r.B_s << " T  B0 = " << r.B0 << " T/Hz^2\n";
    for (const auto &l : r.levels)
    {
      std::cout << "    level h = " << l.h << " m: f = " << std::setprecision(7) << l.f << std::setprecision(5)
                << " Hz, V_B = " << l.V_B_lambda3 << " lambda^3, G = " << l.G << " Ohm, probe (" << l.probe[0]
                << ", " << l.probe[1] << ", " << l.probe[2] << ")\n";
    }
  }
}

int Finish(const forge::SweepResult &result, const forge::RunConfig &config)
{
  PrintRows(result.rows);
  if (!config.out.empty())
  {
    forge::EmitTradeoff(result, config.out, config.format);
    std::cout << "wrote " << config.out << "\n";
  }
  return result.failures() > 0 ? kPartial : kOk;
}

int RunSweep(const Common &c, bool single_point)
{
  auto config = Load(c);
  if (single_point)
  {
    config.sweep.clear();
  }
  std::optional<forge::Cache> cache;
  if (!c.no_cache)
  {
    cache.emplace(c.cache_dir.empty() ? DefaultCacheDir() : fs::path(c.cache_dir));
  }
  forge::SweepOptions opt;
  opt.parallel = c.parallel;
  opt.cache = cache ? &*cache : nullptr;
  if (!c.quiet)
  {
    opt.log = [](const std::string &m) { std::cerr << m << "\n"; };
  }
  const auto result = forge::RunSweep(config, opt);
  if (cache)
  {
    for (const auto &w : cache->warnings())
    {
      std::cerr << "warning: " << w << "\n";
    }
  }
  return Finish(result, config);
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"cavityforge: magnetic mode volume and quality factor of microwave cavities"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App *sub, bool sweep)
  {
    sub->add_option("config", common.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", common.out, "trade-off table path (overrides the config)");
    sub->add_option("--format", common.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", common.seed, "excitation seed");
    sub->add_option("--resolution", common.resolution, "finest cell size in metres; coarse keeps its ratio")
        ->check(CLI::PositiveNumber);
    sub->add_option("--cache", common.cache_dir, "cache directory (default .cavityforge-cache or $CAVITYFORGE_CACHE)");
    sub->add_flag("--no-cache", common.no_cache, "always recompute");
    sub->add_flag("-q,--quiet", common.quiet, "no progress log");
    if (sweep)
    {
      sub->add_option("--parallel", common.parallel, "concurrent design points")->check(CLI::PositiveNumber);
    }
  };

  auto *solve = app.add_subcommand("solve", "solve the config's base geometry");
  add_common(solve, false);
  std::string dump;
  solve->add_option("--dump", dump, "write the finest mode field to this JSON file");

  auto *sweep = app.add_subcommand("sweep", "solve every point of the config's sweep");
  add_common(sweep, true);

  auto *report = app.add_subcommand("report", "reproduce a reference figure and compare with its published values");
  int figure = 0;
  std::string configs_dir = "configs";
  std::string report_out = "out";
  report->add_option("--figure", figure, "figure number")->required()->check(CLI::Range(2, 6));
  report->add_option("--configs", configs_dir, "directory holding the figure configs")->check(CLI::ExistingDirectory);
  report->add_option("--out", report_out, "directory for the figure tables");
  report->add_option("--parallel", common.parallel, "concurrent design points")->check(CLI::PositiveNumber);
  report->add_option("--cache", common.cache_dir, "cache directory");
  report->add_flag("--no-cache", common.no_cache, "always recompute");
  report->add_flag("-q,--quiet", common.quiet, "no progress log");

  auto *cache_cmd = app.add_subcommand("cache", "inspect or clear the result cache");
  std::string cache_action;
  cache_cmd->add_option("action", cache_action, "ls or clear")->required()->check(CLI::IsMember({"ls", "clear"}));
  cache_cmd->add_option("--cache", common.cache_dir, "cache directory");

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (*solve || *sweep)
    {
      if (*solve && !dump.empty())
      {
        const auto config = Load(common);
        const auto field = forge::SolveField(config, config.geometry);
        std::ofstream(dump) << forge::FieldDump(field, config.geometry).dump() << "\n";
        std::cerr << "field written to " << dump << "\n";
      }
      return RunSweep(common, static_cast<bool>(*solve));
    }
    if (*report)
    {
      std::optional<forge::Cache> cache;
      if (!common.no_cache)
      {
        cache.emplace(common.cache_dir.empty() ? DefaultCacheDir() : fs::path(common.cache_dir));
      }
      report::ReportOptions opt;
      opt.configs = configs_dir;
      opt.out = report_out;
      opt.parallel = common.parallel;
      opt.cache = cache ? &*cache : nullptr;
      if (!common.quiet)
      {
        opt.log = [](const std::string &m) { std::cerr << m << "\n"; };
      }
      const auto rep = report::RunFigure(figure, opt);
      report::Print(rep, std::cout);
      return rep.all_pass() ? kOk : kPartial;
    }
    if (*cache_cmd)
    {
      forge::Cache cache(common.cache_dir.empty() ? DefaultCacheDir() : fs::path(common.cache_dir));
      if (cache_action == "ls")
      {
        for (const auto &p : cache.List())
        {
          std::cout << p.string() << "\n";
        }
        std::cout << cache.List().size() << " entries in " << cache.dir().string() << "\n";
      }
      else
      {
        std::cout << "removed " << cache.Clear() << " entries from " << cache.dir().string() << "\n";
      }
      return kOk;
    }
  }
  catch (const forge::ConfigError &e)
  {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  }
  catch (const ConvergenceError &e)
  {
    std::cerr << "no result: " << e.what() << "\n";
    return kNoConvergence;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << "\n";
    return kNoConvergence;
  }
  return kUsage;
}
