#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cavityforge/forge.hpp"

namespace cavityforge::report
{

struct Check
{
  std::string label;
  double value = 0.0;
  double target = 0.0;
  std::string tolerance;  // e.g. "5%", "x2", "> 0.99"
  bool pass = false;
  std::string note;
};

struct FigureReport
{
  int figure = 0;
  std::vector<forge::Row> rows;
  std::vector<Check> checks;
  std::vector<std::string> notes;
  bool all_pass() const;
};

struct ReportOptions
{
  std::filesystem::path configs;  // directory with the shipped figure configs
  std::filesystem::path out;      // where the per-figure tables go
  forge::Cache *cache = nullptr;
  int parallel = 1;
  std::function<void(const std::string &)> log;
};

// Runs the figure's configs and compares with the published values.
FigureReport RunFigure(int figure, const ReportOptions &options);

void Print(const FigureReport &report, std::ostream &out);

// Relative and factor comparisons shared by the checks.
Check Relative(std::string label, double value, double target, double tol);
Check Factor(std::string label, double value, double target, double factor);

// Least-squares line y = slope x + intercept with its R^2.
struct LineFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit FitLine(const std::vector<double> &x, const std::vector<double> &y);

}  // namespace cavityforge::report
