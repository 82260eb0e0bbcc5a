#include "mup/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "mup/error.hpp"
#include "mup/text.hpp"

namespace mup {

std::string_view to_string(PlotKind kind) {
  return kind == PlotKind::LossVsLrByWidth ? "loss_vs_lr_by_width" : "coord_check_by_width";
}

PlotKind parse_plot_kind(std::string_view name) {
  std::string n = to_lower(trim(name));
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "loss_vs_lr_by_width" || n == "loss") return PlotKind::LossVsLrByWidth;
  if (n == "coord_check_by_width" || n == "coord") return PlotKind::CoordCheckByWidth;
  throw InvalidArgument("unknown plot kind '" + std::string(name) + "'");
}

namespace {

using Series = std::map<long long, std::vector<std::pair<double, double>>>;  // width -> (x, y)

constexpr std::array<std::string_view, 8> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                                      "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;

void require_header(const CsvTable& t, std::string_view expected) {
  if (t.rows.empty()) throw InvalidArgument("plot: no rows");
  if (header_line(t) != expected)
    throw InvalidArgument("plot: header '" + header_line(t) + "' does not match '" + std::string(expected) + "'");
}

Series loss_series(const CsvTable& t) {
  require_header(t, kSweepHeader);
  const std::size_t cw = t.column("width"), clr = t.column("lr"), cv = t.column("val_loss"),
                    cd = t.column("diverged");
  std::map<std::pair<long long, double>, std::pair<double, int>> acc;
  for (const auto& r : t.rows) {
    const double lr = parse_double(r[clr]);
    const double v = parse_double(r[cv]);
    if (r[cd] != "0" || !std::isfinite(v) || !(lr > 0.0)) continue;
    auto& a = acc[{parse_int(r[cw]), lr}];
    a.first += v;
    ++a.second;
  }
  Series s;
  for (const auto& [key, a] : acc) s[key.first].emplace_back(std::log2(key.second), a.first / a.second);
  return s;
}

Series coord_series(const CsvTable& t, std::optional<std::size_t> layer) {
  require_header(t, kCoordCheckHeader);
  const std::size_t cw = t.column("width"), cs = t.column("step"), cl = t.column("layer"),
                    cr = t.column("rel_to_first");
  long long target = 0;
  if (layer) {
    target = static_cast<long long>(*layer);
  } else {
    for (const auto& r : t.rows) target = std::max(target, parse_int(r[cl]));
  }
  Series s;
  bool seen = false;
  for (const auto& r : t.rows) {
    if (parse_int(r[cl]) != target) continue;
    seen = true;
    const double v = parse_double(r[cr]);
    if (std::isfinite(v)) s[parse_int(r[cw])].emplace_back(static_cast<double>(parse_int(r[cs])), v);
  }
  if (!seen) throw InvalidArgument("plot: no rows for layer " + std::to_string(target));
  for (auto& [w, pts] : s) std::sort(pts.begin(), pts.end());
  return s;
}

struct Axis {
  double lo = 0, hi = 1;
  bool log = false;
  double map(double v, double a, double b) const {
    const double t = ((log ? std::log10(v) : v) - lo) / (hi - lo);
    return a + t * (b - a);
  }
};

Axis make_axis(const std::vector<double>& vals, bool allow_log) {
  Axis ax;
  const bool positive = std::all_of(vals.begin(), vals.end(), [](double v) { return v > 0.0; });
  ax.log = allow_log && positive && !vals.empty();
  std::vector<double> t;
  for (double v : vals) t.push_back(ax.log ? std::log10(v) : v);
  if (t.empty()) return ax;
  ax.lo = *std::min_element(t.begin(), t.end());
  ax.hi = *std::max_element(t.begin(), t.end());
  if (ax.hi - ax.lo < 1e-12) {
    ax.lo -= 0.5;
    ax.hi += 0.5;
  }
  const double pad = 0.05 * (ax.hi - ax.lo);
  ax.lo -= pad;
  ax.hi += pad;
  return ax;
}

std::string fmt(double v) { return format_fixed(v, 2); }

std::string tick_label(const Axis& ax, double t) {
  if (!ax.log) return format_number(std::round(t * 1000.0) / 1000.0);
  return format_number(std::round(std::pow(10.0, t) * 1000.0) / 1000.0);
}

}  // namespace

std::string render_svg(const CsvTable& rows, PlotKind kind, const PlotOptions& opts) {
  const Series series = kind == PlotKind::LossVsLrByWidth ? loss_series(rows) : coord_series(rows, opts.layer);
  std::vector<double> xs, ys;
  for (const auto& [w, pts] : series)
    for (const auto& [x, y] : pts) {
      xs.push_back(x);
      ys.push_back(y);
    }
  const Axis ax = make_axis(xs, false);
  const Axis ay = make_axis(ys, true);
  const double x0 = kLeft, x1 = kW - kRight, y0 = kH - kBottom, y1 = kTop;

  const bool loss = kind == PlotKind::LossVsLrByWidth;
  const std::string title = loss ? "validation loss vs learning rate" : "coordinate check (rel_to_first)";
  const std::string xlabel = loss ? "log2(lr)" : "step";
  const std::string ylabel = loss ? "mean val loss" : "rel_to_first";

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(kW) << "\" height=\"" << fmt(kH)
    << "\" viewBox=\"0 0 " << fmt(kW) << ' ' << fmt(kH) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << fmt(kW / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n"
    << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x1) << "\" y2=\"" << fmt(y0) << "\"/>\n"
    << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0) << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(y1) << "\"/>\n"
    << "</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double tx = ax.lo + (ax.hi - ax.lo) * k / 4.0;
    const double px = x0 + (x1 - x0) * k / 4.0;
    o << "<text x=\"" << fmt(px) << "\" y=\"" << fmt(y0 + 15) << "\" text-anchor=\"middle\">" << tick_label(ax, tx)
      << "</text>\n";
    const double ty = ay.lo + (ay.hi - ay.lo) * k / 4.0;
    const double py = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << fmt(x0 - 6) << "\" y=\"" << fmt(py + 3) << "\" text-anchor=\"end\">" << tick_label(ay, ty)
      << "</text>\n";
  }
  o << "</g>\n"
    << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kH - 15)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xlabel << "</text>\n"
    << "<text x=\"15\" y=\"" << fmt((y0 + y1) / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"12\" transform=\"rotate(-90 15 " << fmt((y0 + y1) / 2) << ")\">" << ylabel
    << (ay.log ? " (log scale)" : "") << "</text>\n";

  std::size_t k = 0;
  for (const auto& [w, pts] : series) {
    const std::string_view color = kPalette[k % kPalette.size()];
    o << "<polyline class=\"series\" data-width=\"" << w << "\" fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
      o << (i ? " " : "") << fmt(ax.map(pts[i].first, x0, x1)) << ',' << fmt(ay.map(pts[i].second, y0, y1));
    o << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    o << "<g class=\"legend\"><line x1=\"" << fmt(x1 + 15) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(x1 + 35)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text x=\"" << fmt(x1 + 40)
      << "\" y=\"" << fmt(ly + 4) << "\" font-family=\"sans-serif\" font-size=\"11\">width " << w
      << "</text></g>\n";
    ++k;
  }
  o << "</svg>\n";
  return o.str();
}

void emit_plot(const CsvTable& rows, PlotKind kind, const std::filesystem::path& out_path, const PlotOptions& opts) {
  write_file(out_path, render_svg(rows, kind, opts));
}

}  // namespace mup
