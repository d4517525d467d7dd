#pragma once

#include <map>
#include <string>
#include <vector>

#include "henon/classifier.hpp"

namespace henon::io {

// Locale-independent shortest round-trip decimal form.
std::string fmt(double v);
// Bit-exact hexadecimal float form and its parser.
std::string fmt_hex(double v);
double parse_hex(const std::string& s);

// Geometry of a box system: everything needed to revalidate it against the
// map rebuilt from (c, delta). Frames are stored as 12 reals per box.
struct SystemGeometry {
  double c = 0, delta = 0;
  double kappa = 0, eta = 0;
  std::vector<BoxEmbedding> boxes;
  TransitionGraph graph;
};

std::string serialize_system(const ThreeBoxSystem& sys);
std::string serialize_geometry(const SystemGeometry& g);
SystemGeometry parse_system(const std::string& text);

// Rebuilds the crossed system (Henon edge maps) over parsed geometry.
CrossedSystem assemble_crossed(const SystemGeometry& g);

struct SvgCanvas {
  double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
  int width = 900, height = 900;
  std::string body;

  void fit(double x0, double x1, double y0, double y1) {
    min_x = x0; max_x = x1; min_y = y0; max_y = y1;
  }
  double px(double x) const { return (x - min_x) / (max_x - min_x) * width; }
  double py(double y) const { return height - (y - min_y) / (max_y - min_y) * height; }
  void polyline(const std::vector<RealPoint>& pts, const std::string& color, double w,
                size_t stride = 1);
  void circle(const RealPoint& p, double r_px, const std::string& color);
  void rect_outline(const std::vector<RealPoint>& corners, const std::string& color, double w);
  void text(const RealPoint& p, const std::string& s, const std::string& color);
  std::string finish() const;
};

// flat key=value config files; '#' starts a comment
std::map<std::string, std::string> parse_config(const std::string& text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace henon::io
