#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "racekit/geometry.hpp"
#include "racekit/opponent.hpp"
#include "racekit/track.hpp"

namespace racekit {

// Minimal SVG writer with fixed numeric formatting so identical inputs
// always produce identical bytes.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height) : w_(width), h_(height) {}

  static std::string fmt(double v) {
    if (!std::isfinite(v)) v = 0.0;
    if (std::abs(v) < 5e-3) v = 0.0;  // avoid -0.00
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }

  void comment(const std::string& text) {
    body_ << "<!-- " << text << " -->\n";
  }

  void polyline(const std::vector<Vec2>& pts, const std::string& stroke,
                double width, const std::string& extra = "") {
    if (pts.size() < 2) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke
          << "\" stroke-width=\"" << fmt(width) << "\"";
    if (!extra.empty()) body_ << " " << extra;
    body_ << " points=\"";
    append_points(pts);
    body_ << "\"/>\n";
  }

  void polygon(const std::vector<Vec2>& pts, const std::string& fill,
               double opacity, const std::string& extra = "") {
    if (pts.size() < 3) return;
    body_ << "<polygon fill=\"" << fill << "\" fill-opacity=\""
          << fmt(opacity) << "\" stroke=\"none\"";
    if (!extra.empty()) body_ << " " << extra;
    body_ << " points=\"";
    append_points(pts);
    body_ << "\"/>\n";
  }

  void circle(Vec2 c, double r, const std::string& fill,
              double opacity = 1.0) {
    body_ << "<circle cx=\"" << fmt(c.x) << "\" cy=\"" << fmt(c.y)
          << "\" r=\"" << fmt(r) << "\" fill=\"" << fill
          << "\" fill-opacity=\"" << fmt(opacity) << "\"/>\n";
  }

  void line(Vec2 a, Vec2 b, const std::string& stroke, double width) {
    body_ << "<line x1=\"" << fmt(a.x) << "\" y1=\"" << fmt(a.y) << "\" x2=\""
          << fmt(b.x) << "\" y2=\"" << fmt(b.y) << "\" stroke=\"" << stroke
          << "\" stroke-width=\"" << fmt(width) << "\"/>\n";
  }

  void text(Vec2 at, double size, const std::string& content,
            const std::string& anchor = "start",
            const std::string& fill = "#333333") {
    body_ << "<text x=\"" << fmt(at.x) << "\" y=\"" << fmt(at.y)
          << "\" font-size=\"" << fmt(size)
          << "\" font-family=\"monospace\" text-anchor=\"" << anchor
          << "\" fill=\"" << fill << "\">" << content << "</text>\n";
  }

  std::string render(const std::string& header_comment) const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w_)
        << "\" height=\"" << fmt(h_) << "\" viewBox=\"0 0 " << fmt(w_) << " "
        << fmt(h_) << "\">\n";
    if (!header_comment.empty()) out << "<!-- " << header_comment << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    out << body_.str();
    out << "</svg>\n";
    return out.str();
  }

 private:
  void append_points(const std::vector<Vec2>& pts) {
    for (size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << " ";
      body_ << fmt(pts[i].x) << "," << fmt(pts[i].y);
    }
  }

  double w_, h_;
  std::ostringstream body_;
};

namespace detail {

// Maps data space to a pixel rectangle; y flips so larger values plot higher.
struct AxisMap {
  double x0, x1, y0, y1;      // data range
  double px, py, pw, ph;      // pixel rectangle

  Vec2 operator()(double x, double y) const {
    double fx = (x - x0) / (x1 - x0);
    double fy = (y - y0) / (y1 - y0);
    return {px + fx * pw, py + ph - fy * ph};
  }
};

inline void nice_span(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;
}

}  // namespace detail

// GP regression figure: one band series per signal (lateral offset and
// velocity), mean line, raw observations as dots.
inline std::string gp_plot_svg(const OpponentTrajectoryGP& gp,
                               const std::vector<OpponentObservation>& obs,
                               const std::string& header_comment) {
  const double W = 860, H = 560;
  SvgCanvas svg(W, H);
  const double lap = gp.lap_length();
  const int n_grid = 400;

  struct Panel {
    const char* label;
    bool is_d;
    detail::AxisMap ax;
  };
  Panel panels[2] = {{"lateral offset d [m]", true, {}},
                     {"velocity v_s [m/s]", false, {}}};
  double panel_h = (H - 90.0) / 2.0;

  for (int p = 0; p < 2; ++p) {
    std::vector<double> mean(n_grid + 1), dev(n_grid + 1);
    double lo = std::numeric_limits<double>::max(), hi = -lo;
    for (int i = 0; i <= n_grid; ++i) {
      double s = lap * static_cast<double>(i) / n_grid;
      auto [m, sd] = panels[p].is_d ? gp.predict_d(s) : gp.predict_vs(s);
      mean[static_cast<size_t>(i)] = m;
      dev[static_cast<size_t>(i)] = sd;
      lo = std::min(lo, m - sd);
      hi = std::max(hi, m + sd);
    }
    for (const auto& o : obs) {
      double v = panels[p].is_d ? o.d : o.v_s;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    detail::nice_span(lo, hi);
    panels[p].ax = {0.0,  lap, lo, hi, 60.0, 30.0 + p * (panel_h + 40.0),
                    W - 90.0, panel_h};
    const detail::AxisMap& ax = panels[p].ax;

    // frame and zero line
    svg.line({ax.px, ax.py}, {ax.px, ax.py + ax.ph}, "#888888", 1.0);
    svg.line({ax.px, ax.py + ax.ph}, {ax.px + ax.pw, ax.py + ax.ph},
             "#888888", 1.0);
    if (lo < 0.0 && hi > 0.0) {
      Vec2 z0 = ax(0.0, 0.0), z1 = ax(lap, 0.0);
      svg.line(z0, z1, "#cccccc", 0.8);
    }

    // one sigma band
    std::vector<Vec2> band;
    band.reserve(2 * (static_cast<size_t>(n_grid) + 1));
    for (int i = 0; i <= n_grid; ++i) {
      double s = lap * static_cast<double>(i) / n_grid;
      band.push_back(ax(s, mean[static_cast<size_t>(i)] + dev[static_cast<size_t>(i)]));
    }
    for (int i = n_grid; i >= 0; --i) {
      double s = lap * static_cast<double>(i) / n_grid;
      band.push_back(ax(s, mean[static_cast<size_t>(i)] - dev[static_cast<size_t>(i)]));
    }
    svg.polygon(band, panels[p].is_d ? "#4876c8" : "#c86a48", 0.25,
                "class=\"band\"");

    std::vector<Vec2> mline;
    mline.reserve(static_cast<size_t>(n_grid) + 1);
    for (int i = 0; i <= n_grid; ++i) {
      double s = lap * static_cast<double>(i) / n_grid;
      mline.push_back(ax(s, mean[static_cast<size_t>(i)]));
    }
    svg.polyline(mline, panels[p].is_d ? "#2c4f9e" : "#9e442c", 1.6);

    for (const auto& o : obs) {
      double v = panels[p].is_d ? o.d : o.v_s;
      svg.circle(ax(std::fmod(o.s, lap), v), 1.4, "#333333", 0.45);
    }

    svg.text({ax.px, ax.py - 8.0}, 13.0, panels[p].label);
    svg.text({ax.px + ax.pw, ax.py + ax.ph + 16.0}, 12.0, "s [m]", "end");
  }
  return svg.render(header_comment);
}

// Track map: corridor walls, reference line, driven paths, and the shaded
// region of collision lifted onto the corridor between its bounds.
struct MapPath {
  std::vector<Vec2> pts;
  std::string color;
  double width;
};

inline std::string track_map_svg(const TrackModel& track,
                                 const std::vector<MapPath>& paths,
                                 bool have_roc, double c_start, double c_end,
                                 const std::string& header_comment) {
  double xlo = std::numeric_limits<double>::max(), xhi = -xlo;
  double ylo = xlo, yhi = -xlo;
  const auto& wps = track.waypoints();
  for (const auto& wp : wps) {
    double w = std::max(wp.w_left, wp.w_right);
    xlo = std::min(xlo, wp.pos.x - w);
    xhi = std::max(xhi, wp.pos.x + w);
    ylo = std::min(ylo, wp.pos.y - w);
    yhi = std::max(yhi, wp.pos.y + w);
  }
  double span_x = xhi - xlo, span_y = yhi - ylo;
  const double W = 820.0;
  double scale = (W - 60.0) / span_x;
  double H = span_y * scale + 60.0;
  SvgCanvas svg(W, H);
  auto map = [&](Vec2 p) -> Vec2 {
    return {30.0 + (p.x - xlo) * scale, H - 30.0 - (p.y - ylo) * scale};
  };

  std::vector<Vec2> left, right, center;
  left.reserve(wps.size() + 1);
  right.reserve(wps.size() + 1);
  center.reserve(wps.size() + 1);
  for (const auto& wp : wps) {
    Vec2 n = heading_vec(wp.heading).perp();
    left.push_back(map(wp.pos + wp.w_left * n));
    right.push_back(map(wp.pos - wp.w_right * n));
    center.push_back(map(wp.pos));
  }
  left.push_back(left.front());
  right.push_back(right.front());
  center.push_back(center.front());

  if (have_roc) {
    double lap = track.length();
    double span = std::fmod(c_end - c_start, lap);
    if (span < 0.0) span += lap;
    if (span > 1e-6) {
      int n = std::max(8, static_cast<int>(span / 0.25));
      std::vector<Vec2> shade;
      shade.reserve(2 * (static_cast<size_t>(n) + 1));
      for (int i = 0; i <= n; ++i) {
        double s = track.wrap_s(c_start + span * static_cast<double>(i) / n);
        shade.push_back(map(track.position_at(s, track.width_left_at(s))));
      }
      for (int i = n; i >= 0; --i) {
        double s = track.wrap_s(c_start + span * static_cast<double>(i) / n);
        shade.push_back(map(track.position_at(s, -track.width_right_at(s))));
      }
      svg.polygon(shade, "#d84343", 0.30, "class=\"roc\"");
    }
  }

  svg.polyline(left, "#444444", 1.6);
  svg.polyline(right, "#444444", 1.6);
  svg.polyline(center, "#bbbbbb", 0.9, "stroke-dasharray=\"4 4\"");
  for (const auto& p : paths) {
    std::vector<Vec2> px;
    px.reserve(p.pts.size());
    for (const Vec2& v : p.pts) px.push_back(map(v));
    svg.polyline(px, p.color, p.width);
  }
  return svg.render(header_comment);
}

}  // namespace racekit
