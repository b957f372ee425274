#include "report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace cavityforge::report
{

namespace
{

std::string Percent(double tol)
{
  std::ostringstream s;
  s << tol * 100.0 << "%";
  return s.str();
}

struct Loaded
{
  forge::SweepResult result;
  std::string error;
};

Loaded Run(const std::string &name, const ReportOptions &opt)
{
  Loaded out;
  try
  {
    const auto config = forge::LoadConfig(opt.configs / (name + ".json"));
    forge::SweepOptions so;
    so.parallel = opt.parallel;
    so.cache = opt.cache;
    so.log = [&](const std::string &m)
    {
      if (opt.log)
      {
        opt.log(name + ": " + m);
      }
    };
    out.result = forge::RunSweep(config, so);
  }
  catch (const std::exception &e)
  {
    out.error = e.what();
  }
  return out;
}

const forge::Row *Only(const Loaded &l)
{
  return l.error.empty() && !l.result.rows.empty() && l.result.rows.front().ok ? &l.result.rows.front() : nullptr;
}

Check Failed(std::string label, double target, std::string tol, std::string why)
{
  Check c;
  c.label = std::move(label);
  c.target = target;
  c.value = std::nan("");
  c.tolerance = std::move(tol);
  c.pass = false;
  c.note = std::move(why);
  return c;
}

void Emit(const forge::SweepResult &r, const ReportOptions &opt, const std::string &name, FigureReport &rep)
{
  if (opt.out.empty() || r.rows.empty())
  {
    return;
  }
  const auto path = opt.out / (name + ".csv");
  forge::EmitTradeoff(r, path, "csv");
  rep.notes.push_back("table written to " + path.string());
}

// f and V_B against published values for a single-point config.
void Compare(FigureReport &rep, const ReportOptions &opt, const std::string &name, const std::string &tag,
             double f, double f_tol, double vb, double vb_tol, bool vb_factor)
{
  const auto l = Run(name, opt);
  Emit(l.result, opt, name, rep);
  const auto *row = Only(l);
  const std::string vb_label = tag + " V_B/lambda^3";
  if (!row)
  {
    const std::string why = !l.error.empty()                ? l.error
                            : l.result.rows.empty()          ? "no rows"
                                                             : l.result.rows.front().error;
    rep.checks.push_back(Failed(tag + " f (Hz)", f, Percent(f_tol), why));
    rep.checks.push_back(Failed(vb_label, vb, vb_factor ? "x" + std::to_string(vb_tol) : Percent(vb_tol), why));
    return;
  }
  rep.rows.push_back(*row);
  rep.checks.push_back(Relative(tag + " f (Hz)", row->f, f, f_tol));
  rep.checks.push_back(vb_factor ? Factor(vb_label, row->V_B_lambda3, vb, vb_tol)
                                 : Relative(vb_label, row->V_B_lambda3, vb, vb_tol));
}

void Figure2(FigureReport &rep, const ReportOptions &opt)
{
  const auto l = Run("fig2", opt);
  Emit(l.result, opt, "fig2", rep);
  std::vector<double> h, vb;
  const forge::Row *h20 = nullptr, *h5 = nullptr;
  for (const auto &r : l.result.rows)
  {
    if (!r.ok)
    {
      continue;
    }
    rep.rows.push_back(r);
    const double hh = r.geometry.at("h").get<double>();
    h.push_back(hh);
    vb.push_back(r.V_B_lambda3);
    if (std::abs(hh - 0.02) < 1e-12)
    {
      h20 = &r;
    }
    if (std::abs(hh - 0.005) < 1e-12)
    {
      h5 = &r;
    }
  }
  if (!h20 || !h5)
  {
    rep.checks.push_back(Failed("fig2 sweep", 0.0, "-", l.error.empty() ? "h = 2 cm or 5 mm missing" : l.error));
    return;
  }
  rep.checks.push_back(Relative("h = 2 cm f (Hz)", h20->f, 5.74e9, 0.005));
  rep.checks.push_back(Relative("h = 2 cm V_B/lambda^3", h20->V_B_lambda3, 0.140, 0.02));
  rep.checks.push_back(Relative("h = 5 mm V_B/lambda^3", h5->V_B_lambda3, 0.0349, 0.02));
  const auto fit = FitLine(h, vb);
  Check c;
  c.label = "V_B linear in h (R^2)";
  c.value = fit.r2;
  c.target = 0.999;
  c.tolerance = "> 0.999";
  c.pass = fit.r2 > 0.999;
  rep.checks.push_back(c);
}

void Figure3(FigureReport &rep, const ReportOptions &opt)
{
  rep.checks.push_back(Failed("3b split-mode f (Hz)", 3.39e9, "10%",
                              "not reproducible: only R = 5 mm is given for this cavity"));
  Compare(rep, opt, "fig3c", "3c reentrant", 2.23e9, 0.05, 1.44e-3, 0.15, false);
  Compare(rep, opt, "fig3d", "3d doubly reentrant", 3.21e9, 0.10, 4.03e-4, 0.30, false);
}

void Figure4(FigureReport &rep, const ReportOptions &opt)
{
  Compare(rep, opt, "fig4a", "4a tapered reentrant", 1.41e9, 0.10, 1.76e-5, 0.30, false);
  Compare(rep, opt, "fig4b", "4b tapered doubly reentrant", 2.12e9, 0.10, 5.06e-6, 2.0, true);
}

void Figure5(FigureReport &rep, const ReportOptions &opt)
{
  const auto l = Run("fig5", opt);
  Emit(l.result, opt, "fig5", rep);
  std::vector<double> t, vb, q;
  for (const auto &r : l.result.rows)
  {
    if (r.ok)
    {
      rep.rows.push_back(r);
      t.push_back(r.geometry.at("t").get<double>());
      vb.push_back(r.V_B_lambda3);
      q.push_back(r.Q_Nb);
    }
  }
  if (t.size() < 3)
  {
    const std::string why = l.error.empty() ? "fewer than three thicknesses solved" : l.error;
    rep.checks.push_back(Failed("V_B linear in t (R^2)", 0.99, "> 0.99", why));
    rep.checks.push_back(Failed("Q spread over t", 0.10, "< 10%", why));
    rep.checks.push_back(Failed("V_B/lambda^3 at t = 10 um", 3.18e-5, "x2", why));
    return;
  }
  const auto fit = FitLine(t, vb);
  Check lin;
  lin.label = "V_B linear in t (R^2)";
  lin.value = fit.r2;
  lin.target = 0.99;
  lin.tolerance = "> 0.99";
  lin.pass = fit.r2 > 0.99;
  rep.checks.push_back(lin);

  const auto [qmin, qmax] = std::minmax_element(q.begin(), q.end());
  double qmean = 0.0;
  for (double v : q)
  {
    qmean += v / static_cast<double>(q.size());
  }
  Check spread;
  spread.label = "Q spread over t";
  spread.value = (*qmax - *qmin) / qmean;
  spread.target = 0.10;
  spread.tolerance = "< 10%";
  spread.pass = spread.value < 0.10;
  rep.checks.push_back(spread);

  auto ex = Factor("V_B/lambda^3 at t = 10 um", fit.slope * 10e-6 + fit.intercept, 3.18e-5, 2.0);
  std::ostringstream note;
  note << "slope " << fit.slope * 1e-6 << " per um, intercept " << fit.intercept;
  ex.note = note.str();
  rep.checks.push_back(ex);
  rep.notes.push_back("the dashed-line slope is read as 3.18e-6 per um, the value consistent with the plotted "
                      "t = 10 um point");
}

void Figure6(FigureReport &rep, const ReportOptions &opt)
{
  forge::SweepResult merged;
  merged.manifest = {{"configs", nlohmann::json::array()}};
  const forge::Row *diamond = nullptr;
  const forge::Row *experimental = nullptr;
  std::vector<Loaded> runs;
  const std::vector<std::string> names{"fig6_cylinder", "fig6_reentrant", "fig6_tapered", "black_diamond",
                                       "experimental"};
  for (const auto &name : names)
  {
    runs.push_back(Run(name, opt));
    if (!runs.back().error.empty())
    {
      rep.notes.push_back(name + ": " + runs.back().error);
    }
  }
  for (std::size_t i = 0; i < names.size(); i++)
  {
    merged.manifest["configs"].push_back(runs[i].result.manifest);
    for (const auto &r : runs[i].result.rows)
    {
      merged.rows.push_back(r);
    }
  }
  Emit(merged, opt, "fig6", rep);
  for (const auto &r : merged.rows)
  {
    if (r.ok)
    {
      rep.rows.push_back(r);
    }
  }
  diamond = Only(runs[3]);
  experimental = Only(runs[4]);
  if (diamond)
  {
    rep.checks.push_back(Factor("black-diamond class Q_Nb/V_B (1/lambda^3)", diamond->Q_Nb / diamond->V_B_lambda3,
                                3e16, 3.0));
  }
  else
  {
    rep.checks.push_back(Failed("black-diamond class Q_Nb/V_B (1/lambda^3)", 3e16, "x3", "not solved"));
  }
  if (experimental)
  {
    rep.checks.push_back(Relative("experimental f (Hz)", experimental->f, 2.864e9, 0.02));
    rep.checks.push_back(Relative("experimental Q (Cu, 15.1 mOhm)", experimental->Q, 3169.0, 0.15));
    rep.checks.push_back(Relative("experimental V_B/lambda^3", experimental->V_B_lambda3, 1.95e-3, 0.20));
  }
  else
  {
    rep.checks.push_back(Failed("experimental cavity", 2.864e9, "2%", "not solved"));
  }
}

}  // namespace

bool FigureReport::all_pass() const
{
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check &c) { return c.pass; });
}

Check Relative(std::string label, double value, double target, double tol)
{
  Check c;
  c.label = std::move(label);
  c.value = value;
  c.target = target;
  c.tolerance = Percent(tol);
  c.pass = std::isfinite(value) && std::abs(value - target) <= tol * std::abs(target);
  return c;
}

Check Factor(std::string label, double value, double target, double factor)
{
  Check c;
  c.label = std::move(label);
  c.value = value;
  c.target = target;
  std::ostringstream s;
  s << "x" << factor;
  c.tolerance = s.str();
  c.pass = value > 0.0 && std::isfinite(value) && value <= factor * target && value >= target / factor;
  return c;
}

LineFit FitLine(const std::vector<double> &x, const std::vector<double> &y)
{
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); i++)
  {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); i++)
  {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

FigureReport RunFigure(int figure, const ReportOptions &options)
{
  FigureReport rep;
  rep.figure = figure;
  switch (figure)
  {
    case 2:
      Figure2(rep, options);
      break;
    case 3:
      Figure3(rep, options);
      break;
    case 4:
      Figure4(rep, options);
      break;
    case 5:
      Figure5(rep, options);
      break;
    case 6:
      Figure6(rep, options);
      break;
    default:
      throw forge::ConfigError("figure", "reports exist for figures 2 to 6");
  }
  return rep;
}

void Print(const FigureReport &report, std::ostream &out)
{
  out << "figure " << report.figure << "\n";
  for (const auto &r : report.rows)
  {
    out << "  " << std::left << std::setw(26) << r.family << std::right << std::setprecision(6)
        << " f=" << r.f << " Hz  V_B=" << r.V_B_lambda3 << " lambda^3  G=" << r.G << " Ohm  Q_Nb=" << r.Q_Nb
        << "  Q_Cu=" << r.Q_Cu << (r.extrapolated ? "  (extrapolated)" : "") << "\n";
  }
  for (const auto &c : report.checks)
  {
    out << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.label << ": " << std::setprecision(5) << c.value
        << " vs " << c.target << " (" << c.tolerance << ")";
    if (!c.note.empty())
    {
      out << "  " << c.note;
    }
    out << "\n";
  }
  for (const auto &n : report.notes)
  {
    out << "  note: " << n << "\n";
  }
}

}  // namespace cavityforge::report
