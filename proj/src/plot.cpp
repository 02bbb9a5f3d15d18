#include "fdsel/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fdsel {

namespace {

constexpr double kPanelW = 420, kPanelH = 280;
constexpr double kLeft = 60, kRight = 20, kTop = 34, kBottom = 46;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string rgb(const std::array<int, 3>& c) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

struct Axis {
  double lo, hi, a, b;  // data range -> pixel range
  double operator()(double v) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double span = hi - lo;
  if (!(span > 0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (f * mag >= raw) {
      step = f * mag;
      break;
    }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return out;
}

void axes(std::ostringstream& os, const Axis& x, const Axis& y, const std::string& xlabel,
          const std::string& ylabel) {
  os << "<rect x=\"" << px(x.a) << "\" y=\"" << px(y.b) << "\" width=\"" << px(x.b - x.a)
     << "\" height=\"" << px(y.a - y.b) << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (double t : ticks(x.lo, x.hi)) {
    os << "<line x1=\"" << px(x(t)) << "\" y1=\"" << px(y.a) << "\" x2=\"" << px(x(t))
       << "\" y2=\"" << px(y.a + 4) << "\" stroke=\"#333\"/>"
       << "<text x=\"" << px(x(t)) << "\" y=\"" << px(y.a + 16)
       << "\" font-size=\"10\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  for (double t : ticks(y.lo, y.hi)) {
    os << "<line x1=\"" << px(x.a - 4) << "\" y1=\"" << px(y(t)) << "\" x2=\"" << px(x.a)
       << "\" y2=\"" << px(y(t)) << "\" stroke=\"#333\"/>"
       << "<text x=\"" << px(x.a - 6) << "\" y=\"" << px(y(t) + 3)
       << "\" font-size=\"10\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  os << "<text x=\"" << px(0.5 * (x.a + x.b)) << "\" y=\"" << px(y.a + 34)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  const double cy = 0.5 * (y.a + y.b), cx = x.a - 44;
  os << "<text x=\"" << px(cx) << "\" y=\"" << px(cy) << "\" font-size=\"12\" text-anchor=\"middle\""
     << " transform=\"rotate(-90 " << px(cx) << ' ' << px(cy) << ")\">" << ylabel << "</text>\n";
}

std::string open_svg(double w, double h) {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(w) << "\" height=\"" << px(h)
     << "\" viewBox=\"0 0 " << px(w) << ' ' << px(h) << "\" font-family=\"sans-serif\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

std::string order_label(std::size_t l) {
  return l == 0 ? std::string("D0 (curves)") : "D" + std::to_string(l) + " (derivative)";
}

}  // namespace

std::array<int, 3> colormap(double x) {
  static const double anchors[9][3] = {
      {68, 1, 84},    {71, 44, 122},  {59, 81, 139},  {44, 113, 142}, {33, 144, 141},
      {39, 173, 129}, {92, 200, 99},  {170, 220, 50}, {253, 231, 37}};
  if (!(x > 0)) x = 0;
  if (x > 1) x = 1;
  const double pos = x * 8.0;
  const int i = std::min(7, int(pos));
  const double f = pos - i;
  std::array<int, 3> out{};
  for (int c = 0; c < 3; ++c)
    out[c] = int(std::lround(anchors[i][c] + f * (anchors[i + 1][c] - anchors[i][c])));
  return out;
}

std::string pvalue_svg(const Grid& grid, const IwtResult& result) {
  const std::size_t orders = result.pvalues.size();
  const double width = kPanelW * double(orders);
  const double height = kPanelH + 24;
  std::ostringstream os;
  os << open_svg(width, height);
  const double astar = result.selection.alpha_star;
  os << "<text x=\"" << px(width / 2) << "\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">"
     << "Adjusted p-value functions, alpha* = " << num(astar) << " ("
     << to_string(result.selection.method) << ")</text>\n";
  for (std::size_t l = 0; l < orders; ++l) {
    const double x0 = kPanelW * double(l);
    const Axis x{grid.a(), grid.b(), x0 + kLeft, x0 + kPanelW - kRight};
    const Axis y{0.0, 1.0, 24 + kPanelH - kBottom, 24 + kTop};
    os << "<g class=\"panel\" id=\"order-" << l << "\">\n";
    for (const auto& iv : index_runs(result.selection.selected_by_order[l], grid)) {
      const double lo = grid.cell_lower(iv.first), hi = grid.cell_upper(iv.last);
      os << "<rect class=\"selected\" x=\"" << px(x(lo)) << "\" y=\"" << px(y.b) << "\" width=\""
         << px(x(hi) - x(lo)) << "\" height=\"" << px(y.a - y.b)
         << "\" fill=\"#9ecae1\" fill-opacity=\"0.5\"/>\n";
    }
    const auto line = [&](const std::vector<double>& p, const char* style) {
      os << "<polyline " << style << " fill=\"none\" points=\"";
      for (std::size_t j = 0; j < grid.size(); ++j)
        os << (j ? " " : "") << px(x(grid[j])) << ',' << px(y(std::clamp(p[j], 0.0, 1.0)));
      os << "\"/>\n";
    };
    line(result.pvalues[l].unadjusted, "class=\"unadjusted\" stroke=\"#999\" stroke-width=\"0.8\"");
    line(result.pvalues[l].adjusted, "class=\"adjusted\" stroke=\"#08306b\" stroke-width=\"1.6\"");
    os << "<line class=\"threshold\" x1=\"" << px(x.a) << "\" y1=\"" << px(y(astar)) << "\" x2=\""
       << px(x.b) << "\" y2=\"" << px(y(astar))
       << "\" stroke=\"#cb181d\" stroke-dasharray=\"6 4\"/>\n";
    axes(os, x, y, "t", "p-value");
    os << "<text x=\"" << px(0.5 * (x.a + x.b)) << "\" y=\"" << px(y.b - 6)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << order_label(l) << "</text>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_svg(const Grid& grid, const EffectSizeResult& result) {
  const std::size_t orders = result.orders.size();
  constexpr double kLegend = 70;
  const double width = (kPanelW + kLegend) * double(orders);
  const double height = kPanelH + 24;
  std::ostringstream os;
  os << open_svg(width, height);
  os << "<text x=\"" << px(width / 2) << "\" y=\"16\" font-size=\"13\" text-anchor=\"middle\">"
     << "Effect size G^2(t; Delta)</text>\n";
  const std::size_t m = grid.size();
  for (std::size_t l = 0; l < orders; ++l) {
    const auto& map = result.orders[l].map;
    const std::size_t S = map.ladder.size();
    const double x0 = (kPanelW + kLegend) * double(l);
    const Axis x{grid.a(), grid.b(), x0 + kLeft, x0 + kPanelW - kRight};
    const Axis y{0.0, map.ladder.back(), 24 + kPanelH - kBottom, 24 + kTop};
    double vmax = 0.0;
    for (const auto& row : map.values)
      for (double v : row)
        if (std::isfinite(v)) vmax = std::max(vmax, v);
    if (!(vmax > 0)) vmax = 1.0;

    os << "<g class=\"panel\" id=\"order-" << l << "\">\n";
    const double rh = (y.a - y.b) / double(S);
    for (std::size_t r = 0; r < S; ++r) {
      const double top = y.a - rh * double(r + 1);
      for (std::size_t j = 0; j < m; ++j) {
        const double v = map.values[r][j];
        const double lo = grid.cell_lower(j), hi = grid.cell_upper(j);
        os << "<rect class=\"cell\" data-row=\"" << r << "\" data-col=\"" << j << "\" x=\""
           << px(x(lo)) << "\" y=\"" << px(top) << "\" width=\""
           << px(x(hi) - x(lo) + 0.3) << "\" height=\"" << px(rh + 0.3) << "\" fill=\""
           << rgb(colormap(std::isfinite(v) ? v / vmax : 1.0)) << "\"/>\n";
      }
    }
    // Outline of the rows where the window is not truncated.
    std::vector<std::pair<double, double>> left, right;
    for (std::size_t r = 0; r < S; ++r) {
      const auto& tri = map.triangle[r];
      const auto first = std::find(tri.begin(), tri.end(), 1);
      if (first == tri.end()) break;
      const auto last = std::find(tri.rbegin(), tri.rend(), 1);
      const std::size_t jf = std::size_t(first - tri.begin());
      const std::size_t jl = m - 1 - std::size_t(last - tri.rbegin());
      const double ylo = y.a - rh * double(r), yhi = y.a - rh * double(r + 1);
      left.push_back({x(grid.cell_lower(jf)), ylo});
      left.push_back({x(grid.cell_lower(jf)), yhi});
      right.push_back({x(grid.cell_upper(jl)), ylo});
      right.push_back({x(grid.cell_upper(jl)), yhi});
    }
    if (!left.empty()) {
      os << "<polygon class=\"triangle\" fill=\"none\" stroke=\"white\" stroke-width=\"1.2\" points=\"";
      for (const auto& [a, b] : left) os << px(a) << ',' << px(b) << ' ';
      for (auto it = right.rbegin(); it != right.rend(); ++it)
        os << px(it->first) << ',' << px(it->second) << ' ';
      os << "\"/>\n";
    }
    axes(os, x, y, "t", "Delta");
    os << "<text x=\"" << px(0.5 * (x.a + x.b)) << "\" y=\"" << px(y.b - 6)
       << "\" font-size=\"12\" text-anchor=\"middle\">" << order_label(l) << "</text>\n";

    const double lx = x.b + 14, lw = 14;
    constexpr int kSteps = 64;
    const double sh = (y.a - y.b) / kSteps;
    os << "<g class=\"legend\">\n";
    for (int s = 0; s < kSteps; ++s)
      os << "<rect x=\"" << px(lx) << "\" y=\"" << px(y.a - sh * (s + 1)) << "\" width=\""
         << px(lw) << "\" height=\"" << px(sh + 0.3) << "\" fill=\""
         << rgb(colormap((s + 0.5) / kSteps)) << "\"/>\n";
    const Axis ly{0.0, vmax, y.a, y.b};
    for (double t : ticks(0.0, vmax, 4))
      os << "<line x1=\"" << px(lx + lw) << "\" y1=\"" << px(ly(t)) << "\" x2=\"" << px(lx + lw + 3)
         << "\" y2=\"" << px(ly(t)) << "\" stroke=\"#333\"/><text x=\"" << px(lx + lw + 5)
         << "\" y=\"" << px(ly(t) + 3) << "\" font-size=\"9\">" << num(t) << "</text>\n";
    os << "</g>\n</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace fdsel
