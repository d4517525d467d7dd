#include "henon/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace henon::io {

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

std::string fmt_hex(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

double parse_hex(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc()) throw std::invalid_argument("parse_hex: bad value '" + s + "'");
  (void)p;
  return v;
}

namespace {

void put_box(std::ostringstream& os, const BoxEmbedding& b) {
  os << "box " << b.id;
  const Complex vals[6] = {b.origin.x(), b.origin.y(), b.h_axis.x(),
                           b.h_axis.y(), b.v_axis.x(), b.v_axis.y()};
  for (const Complex& c : vals) os << ' ' << fmt_hex(c.real()) << ' ' << fmt_hex(c.imag());
  os << '\n';
}

}  // namespace

std::string serialize_geometry(const SystemGeometry& g) {
  std::ostringstream os;
  os << "henon-box-system v1\n";
  os << "params " << fmt_hex(g.c) << ' ' << fmt_hex(g.delta) << '\n';
  os << "kappa " << fmt_hex(g.kappa) << '\n';
  os << "eta " << fmt_hex(g.eta) << '\n';
  os << "boxes " << g.boxes.size() << '\n';
  for (const auto& b : g.boxes) put_box(os, b);
  os << "edges " << g.graph.edges.size() << '\n';
  for (const auto& e : g.graph.edges)
    os << "edge " << e.first << ' ' << e.second << ' ' << g.graph.degrees.at(e) << '\n';
  return os.str();
}

std::string serialize_system(const ThreeBoxSystem& sys) {
  SystemGeometry g;
  g.c = sys.params.c;
  g.delta = sys.params.delta;
  g.kappa = sys.crossed.boxes.empty() ? 0.0 : sys.crossed.boxes.front().kappa;
  g.eta = sys.separation.eta;
  g.boxes = sys.crossed.boxes;
  g.graph = sys.crossed.graph;
  return serialize_geometry(g);
}

SystemGeometry parse_system(const std::string& text) {
  SystemGeometry g;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "henon-box-system v1")
    throw std::invalid_argument("parse_system: bad header");
  std::string tok;
  while (is >> tok) {
    if (tok == "params") {
      std::string a, b;
      is >> a >> b;
      g.c = parse_hex(a);
      g.delta = parse_hex(b);
    } else if (tok == "kappa") {
      std::string a;
      is >> a;
      g.kappa = parse_hex(a);
    } else if (tok == "eta") {
      std::string a;
      is >> a;
      g.eta = parse_hex(a);
    } else if (tok == "boxes") {
      size_t n;
      is >> n;
      g.boxes.reserve(n);
    } else if (tok == "box") {
      BoxEmbedding b;
      is >> b.id;
      double re[12];
      for (double& v : re) {
        std::string s;
        is >> s;
        v = parse_hex(s);
      }
      b.origin = PlanePoint(Complex(re[0], re[1]), Complex(re[2], re[3]));
      b.h_axis = PlanePoint(Complex(re[4], re[5]), Complex(re[6], re[7]));
      b.v_axis = PlanePoint(Complex(re[8], re[9]), Complex(re[10], re[11]));
      b.kappa = g.kappa;
      g.boxes.push_back(b);
    } else if (tok == "edges") {
      size_t n;
      is >> n;
      g.graph.edges.reserve(n);
    } else if (tok == "edge") {
      int a, b, d;
      is >> a >> b >> d;
      g.graph.edges.emplace_back(a, b);
      g.graph.degrees[{a, b}] = d;
    } else {
      throw std::invalid_argument("parse_system: unknown token '" + tok + "'");
    }
  }
  g.graph.n = int(g.boxes.size());
  return g;
}

CrossedSystem assemble_crossed(const SystemGeometry& g) {
  CrossedSystem cs;
  cs.boxes = g.boxes;
  cs.graph = g.graph;
  const Params prm(g.c, g.delta);
  for (const auto& e : g.graph.edges) {
    EdgeMap em;
    em.fwd = [prm](const PlanePoint& p) { return apply_map(prm, p); };
    em.inv = [prm](const PlanePoint& p) { return apply_inverse(prm, p); };
    cs.maps[e] = em;
  }
  return cs;
}

void SvgCanvas::polyline(const std::vector<RealPoint>& pts, const std::string& color, double w,
                         size_t stride) {
  if (pts.size() < 2) return;
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << w
     << "\" points=\"";
  for (size_t i = 0; i < pts.size(); i += stride) {
    os << fmt(px(pts[i].x())) << ',' << fmt(py(pts[i].y())) << ' ';
  }
  if ((pts.size() - 1) % stride != 0)
    os << fmt(px(pts.back().x())) << ',' << fmt(py(pts.back().y()));
  os << "\"/>\n";
  body += os.str();
}

void SvgCanvas::circle(const RealPoint& p, double r_px, const std::string& color) {
  std::ostringstream os;
  os << "<circle cx=\"" << fmt(px(p.x())) << "\" cy=\"" << fmt(py(p.y())) << "\" r=\"" << r_px
     << "\" fill=\"" << color << "\"/>\n";
  body += os.str();
}

void SvgCanvas::rect_outline(const std::vector<RealPoint>& corners, const std::string& color,
                             double w) {
  if (corners.empty()) return;
  std::ostringstream os;
  os << "<polygon fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << w << "\" points=\"";
  for (const auto& p : corners) os << fmt(px(p.x())) << ',' << fmt(py(p.y())) << ' ';
  os << "\"/>\n";
  body += os.str();
}

void SvgCanvas::text(const RealPoint& p, const std::string& s, const std::string& color) {
  std::ostringstream os;
  os << "<text x=\"" << fmt(px(p.x())) << "\" y=\"" << fmt(py(p.y())) << "\" fill=\"" << color
     << "\" font-size=\"14\">" << s << "</text>\n";
  body += os.str();
}

std::string SvgCanvas::finish() const {
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << body << "</svg>\n";
  return os.str();
}

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!key.empty()) kv[key] = val;
  }
  return kv;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

}  // namespace henon::io
