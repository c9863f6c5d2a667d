// Copyright 2026 The amskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Netlist recovery from a schematic raster and labeled component boxes.
//
// Wires are traced by flood fill from each box's boundary. A connected
// wire region touching exactly two pin contacts is a net. Regions with an
// even number (four or more) of contacts are assumed to hide wire crossings:
// the crossing is located as the peak of a box-filter convolution over the
// region, cut out, and the wire arms entering it on opposite sides are joined
// straight through. Odd regions cannot be explained by crossings and flag the
// schematic. Multi-pin nets must be drawn through junction (dot) boxes.
//
// Box sidecar format, one box per line ('#' comments):
//
//   <id> <kind> <orientation> <x0> <y0> <x1> <y1> [key=value ...]
//
// kinds: nmos pmos resistor capacitor isource vsource junction ground port
// symbol. Orientations R0 R90 R180 R270 and mirrored M0 M90 M180 M270.
// Keys: model=, value=, net= (port name), role=, pins=name@deg,name@deg...

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "amskit/common.hpp"
#include "amskit/netlist.hpp"

namespace amskit::trace {

class TraceError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Rasters

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (str::is_space(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
  std::string tok = pgm_token(in);
  int v = 0;
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v <= 0)
    throw TraceError(std::string("bad PGM ") + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

/// Reads a portable graymap, plain (P2) or raw (P5), maxval up to 255.
inline GrayImage read_pgm(std::istream& in) {
  std::string magic = detail::pgm_token(in);
  if (magic != "P2" && magic != "P5") throw TraceError("not a PGM file (magic '" + magic + "')");
  int w = detail::pgm_int(in, "width");
  int h = detail::pgm_int(in, "height");
  int maxval = detail::pgm_int(in, "maxval");
  if (maxval > 255) throw TraceError("16-bit PGM is not supported");
  GrayImage img(w, h);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
      throw TraceError("truncated PGM raster");
  } else {
    for (auto& p : img.pixels) {
      std::string tok = detail::pgm_token(in);
      int v = -1;
      std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (v < 0 || v > maxval) throw TraceError("bad PGM sample '" + tok + "'");
      p = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255)
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(p * 255 / maxval);
  return img;
}

inline GrayImage read_pgm_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open image " + path);
  return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const GrayImage& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

// ---------------------------------------------------------------------------
// Boxes

/// Inclusive pixel rectangle.
struct Rect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  bool interior(int x, int y) const { return x > x0 && x < x1 && y > y0 && y < y1; }
  bool on_boundary(int x, int y) const { return contains(x, y) && !interior(x, y); }
  bool overlaps(const Rect& o) const {
    return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
  }
  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
};

/// Symbol rotation (counter-clockwise) with optional mirror about the
/// vertical axis applied before rotating.
enum class Orientation { R0, R90, R180, R270, M0, M90, M180, M270 };

inline constexpr std::array<std::string_view, 8> kOrientationNames = {
    "R0", "R90", "R180", "R270", "M0", "M90", "M180", "M270"};

inline std::string_view to_string(Orientation o) { return kOrientationNames[static_cast<int>(o)]; }

inline std::optional<Orientation> orientation_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kOrientationNames.size(); ++i)
    if (str::iequals(s, kOrientationNames[i])) return static_cast<Orientation>(i);
  return std::nullopt;
}

inline double rotation_deg(Orientation o) { return 90.0 * (static_cast<int>(o) % 4); }
inline bool mirrored(Orientation o) { return static_cast<int>(o) >= 4; }

inline double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  return a;
}

/// Image-frame angle of a direction given in the symbol's own frame.
inline double to_image_angle(Orientation o, double local) {
  return wrap_deg(rotation_deg(o) + (mirrored(o) ? 180.0 - local : local));
}

/// Inverse of to_image_angle.
inline double to_local_angle(Orientation o, double image) {
  double a = image - rotation_deg(o);
  return wrap_deg(mirrored(o) ? 180.0 - a : a);
}

enum class BoxKind {
  NMOS,
  PMOS,
  Resistor,
  Capacitor,
  CurrentSource,
  VoltageSource,
  Junction,
  Ground,
  Port,
  Symbol,
};

inline constexpr std::array<std::string_view, 10> kBoxKindNames = {
    "nmos", "pmos", "resistor", "capacitor", "isource", "vsource",
    "junction", "ground", "port", "symbol"};

inline std::string_view to_string(BoxKind k) { return kBoxKindNames[static_cast<int>(k)]; }

inline std::optional<BoxKind> box_kind_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kBoxKindNames.size(); ++i)
    if (str::iequals(s, kBoxKindNames[i])) return static_cast<BoxKind>(i);
  return std::nullopt;
}

/// Boxes that name a net instead of becoming a component.
inline bool is_net_marker(BoxKind k) {
  return k == BoxKind::Junction || k == BoxKind::Ground || k == BoxKind::Port;
}

inline std::optional<netlist::DeviceKind> device_kind(BoxKind k) {
  using netlist::DeviceKind;
  switch (k) {
    case BoxKind::NMOS: return DeviceKind::NMOS;
    case BoxKind::PMOS: return DeviceKind::PMOS;
    case BoxKind::Resistor: return DeviceKind::Resistor;
    case BoxKind::Capacitor: return DeviceKind::Capacitor;
    case BoxKind::CurrentSource: return DeviceKind::CurrentSource;
    case BoxKind::VoltageSource: return DeviceKind::VoltageSource;
    case BoxKind::Symbol: return DeviceKind::SubcircuitInstance;
    default: return std::nullopt;
  }
}

struct SymbolPin {
  std::string name;
  double angle = 0.0;  // symbol frame, degrees
};

struct LabeledBox {
  std::string id;
  BoxKind kind = BoxKind::Resistor;
  Orientation orientation = Orientation::R0;
  Rect rect;
  std::optional<std::string> model;
  std::optional<double> value;
  std::optional<std::string> net;   // port name
  std::optional<std::string> role;  // port role label
  std::vector<SymbolPin> pinmap;    // symbols only
};

inline std::vector<LabeledBox> parse_boxes(std::string_view text) {
  std::vector<LabeledBox> out;
  int line_no = 0;
  for (const auto& raw : str::split(text, '\n')) {
    ++line_no;
    auto line = str::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto toks = str::tokenize(line);
    auto fail = [&](const std::string& why) -> TraceError {
      return TraceError("boxes line " + std::to_string(line_no) + ": " + why);
    };
    if (toks.size() < 7) throw fail("expected id kind orientation x0 y0 x1 y1");
    LabeledBox b;
    b.id = toks[0].text;
    auto kind = box_kind_from_string(toks[1].text);
    if (!kind) throw fail("unknown box kind '" + toks[1].text + "'");
    b.kind = *kind;
    auto orient = orientation_from_string(toks[2].text);
    if (!orient) throw fail("unknown orientation '" + toks[2].text + "'");
    b.orientation = *orient;
    int coords[4];
    for (int i = 0; i < 4; ++i) {
      const auto& t = toks[3 + i].text;
      auto res = std::from_chars(t.data(), t.data() + t.size(), coords[i]);
      if (res.ec != std::errc() || res.ptr != t.data() + t.size()) throw fail("bad coordinate '" + t + "'");
    }
    b.rect = {coords[0], coords[1], coords[2], coords[3]};
    if (b.rect.x1 - b.rect.x0 < 2 || b.rect.y1 - b.rect.y0 < 2) throw fail("box too small");
    for (std::size_t i = 7; i < toks.size(); ++i) {
      const auto& t = toks[i].text;
      auto eq = t.find('=');
      if (eq == std::string::npos) throw fail("expected key=value, got '" + t + "'");
      std::string key = str::lower(t.substr(0, eq));
      std::string val = t.substr(eq + 1);
      if (key == "model") {
        b.model = val;
      } else if (key == "value") {
        auto v = netlist::parse_value(val);
        if (!v) throw fail("bad value '" + val + "'");
        b.value = *v;
      } else if (key == "net") {
        b.net = val;
      } else if (key == "role") {
        b.role = val;
      } else if (key == "pins") {
        for (const auto& item : str::split(val, ',')) {
          auto at = item.find('@');
          if (at == std::string::npos) throw fail("pin map entries are name@degrees");
          SymbolPin p{item.substr(0, at), 0.0};
          auto deg = item.substr(at + 1);
          auto res = std::from_chars(deg.data(), deg.data() + deg.size(), p.angle);
          if (res.ec != std::errc()) throw fail("bad pin angle '" + deg + "'");
          b.pinmap.push_back(std::move(p));
        }
      } else {
        throw fail("unknown key '" + key + "'");
      }
    }
    if (b.kind == BoxKind::Symbol && (b.pinmap.empty() || !b.model))
      throw fail("symbol boxes need pins= and model=");
    if (b.kind == BoxKind::Port && !b.net) throw fail("port boxes need net=");
    for (const auto& o : out)
      if (o.id == b.id) throw fail("duplicate box id '" + b.id + "'");
    out.push_back(std::move(b));
  }
  return out;
}

inline std::string emit_boxes(const std::vector<LabeledBox>& boxes) {
  std::ostringstream os;
  for (const auto& b : boxes) {
    os << b.id << ' ' << to_string(b.kind) << ' ' << to_string(b.orientation) << ' ' << b.rect.x0
       << ' ' << b.rect.y0 << ' ' << b.rect.x1 << ' ' << b.rect.y1;
    if (b.model) os << " model=" << *b.model;
    if (b.value) os << " value=" << netlist::format_value(*b.value);
    if (b.net) os << " net=" << *b.net;
    if (b.role) os << " role=" << *b.role;
    if (!b.pinmap.empty()) {
      os << " pins=";
      for (std::size_t i = 0; i < b.pinmap.size(); ++i)
        os << (i ? "," : "") << b.pinmap[i].name << '@' << str::shortest(b.pinmap[i].angle);
    }
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Mask and grouping

struct WireMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
};

/// Dark-on-light thresholding; box interiors are cleared, boundaries kept.
inline WireMask binarize(const GrayImage& image, int threshold,
                         const std::vector<LabeledBox>& boxes = {}) {
  if (image.width <= 0 || image.height <= 0 || image.pixels.empty())
    throw TraceError("empty image");
  WireMask m{image.width, image.height, std::vector<std::uint8_t>(image.pixels.size(), 0)};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) m.bits[i] = image.pixels[i] < threshold ? 1 : 0;
  for (const auto& b : boxes) {
    for (int y = std::max(0, b.rect.y0 + 1); y < std::min(image.height, b.rect.y1); ++y)
      for (int x = std::max(0, b.rect.x0 + 1); x < std::min(image.width, b.rect.x1); ++x)
        m.bits[static_cast<std::size_t>(y) * image.width + x] = 0;
  }
  return m;
}

/// Where a wire meets a box: one run of wire pixels along the box boundary.
struct PinContact {
  std::string box;
  int x = 0;
  int y = 0;
  double angle = 0.0;     // image frame, box-normalized, counter-clockwise from +x
  std::vector<int> run;   // pixel indices (y * width + x) of the boundary run

  bool operator==(const PinContact& o) const { return box == o.box && x == o.x && y == o.y; }
};

/// Boxes reachable from each other through wire pixels.
struct Group {
  std::vector<std::string> boxes;
  std::vector<PinContact> contacts;
  std::vector<int> pixels;                     // sorted pixel indices
  std::vector<std::pair<int, int>> bridges;    // pixel pairs joined across a resolved crossing

  /// Member count; an isolated box counts as one.
  std::size_t size() const { return contacts.empty() ? (boxes.empty() ? 0 : 1) : contacts.size(); }
};

struct TraceConfig {
  int threshold = 128;
  int kernel = 5;
  double angle_tolerance = 15.0;
  bool eight_connected = false;
  int max_resolutions = 64;
};

namespace detail {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

/// Perimeter pixels of a rectangle, clockwise from the top-left corner.
inline std::vector<std::pair<int, int>> perimeter(const Rect& r) {
  std::vector<std::pair<int, int>> out;
  for (int x = r.x0; x <= r.x1; ++x) out.emplace_back(x, r.y0);
  for (int y = r.y0 + 1; y <= r.y1; ++y) out.emplace_back(r.x1, y);
  for (int x = r.x1 - 1; x >= r.x0; --x) out.emplace_back(x, r.y1);
  for (int y = r.y1 - 1; y > r.y0; --y) out.emplace_back(r.x0, y);
  return out;
}

inline double contact_angle(const Rect& r, int x, int y) {
  double hw = std::max(0.5, 0.5 * (r.x1 - r.x0));
  double hh = std::max(0.5, 0.5 * (r.y1 - r.y0));
  double nx = (x - r.cx()) / hw;
  double ny = (r.cy() - y) / hh;
  return wrap_deg(std::atan2(ny, nx) * 180.0 / M_PI);
}

/// Runs of wire pixels along a box boundary. A run that wraps past the
/// starting corner is joined with the last one.
inline std::vector<PinContact> boundary_contacts(const WireMask& m, const LabeledBox& b) {
  auto per = perimeter(b.rect);
  std::vector<std::vector<std::pair<int, int>>> runs;
  bool in_run = false;
  for (const auto& [x, y] : per) {
    if (m.at(x, y)) {
      if (!in_run) runs.emplace_back();
      runs.back().emplace_back(x, y);
      in_run = true;
    } else {
      in_run = false;
    }
  }
  if (runs.size() > 1 && m.at(per.front().first, per.front().second) &&
      m.at(per.back().first, per.back().second)) {
    auto head = std::move(runs.front());
    runs.erase(runs.begin());
    runs.back().insert(runs.back().end(), head.begin(), head.end());
  }
  std::vector<PinContact> out;
  for (const auto& run : runs) {
    PinContact c;
    c.box = b.id;
    auto [mx, my] = run[run.size() / 2];
    c.x = mx;
    c.y = my;
    c.angle = contact_angle(b.rect, mx, my);
    for (const auto& [x, y] : run) c.run.push_back(y * m.width + x);
    out.push_back(std::move(c));
  }
  return out;
}

/// Connected components of `pixels` (sorted) under the tracing adjacency:
/// boundary pixels only join pixels of their own run or non-boundary pixels.
inline std::vector<std::vector<int>> components(int width, int height, const std::vector<int>& pixels,
                                                const std::map<int, int>& run_of,
                                                const std::vector<std::pair<int, int>>& bridges,
                                                bool eight) {
  std::map<int, int> slot;
  for (std::size_t i = 0; i < pixels.size(); ++i) slot[pixels[i]] = static_cast<int>(i);
  DisjointSet ds(pixels.size());
  auto run = [&](int p) {
    auto it = run_of.find(p);
    return it == run_of.end() ? -1 : it->second;
  };
  static constexpr int d4[][2] = {{1, 0}, {0, 1}};
  static constexpr int d8[][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
  int nd = eight ? 4 : 2;
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    int p = pixels[i];
    int x = p % width, y = p / width;
    for (int k = 0; k < nd; ++k) {
      int dx = eight ? d8[k][0] : d4[k][0];
      int dy = eight ? d8[k][1] : d4[k][1];
      int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
      auto it = slot.find(ny * width + nx);
      if (it == slot.end()) continue;
      int ra = run(p), rb = run(it->first);
      if (ra >= 0 && rb >= 0 && ra != rb) continue;
      ds.unite(static_cast<int>(i), it->second);
    }
  }
  for (const auto& [a, b] : bridges) {
    auto ia = slot.find(a), ib = slot.find(b);
    if (ia != slot.end() && ib != slot.end()) ds.unite(ia->second, ib->second);
  }
  std::map<int, std::vector<int>> by_root;
  for (std::size_t i = 0; i < pixels.size(); ++i) by_root[ds.find(static_cast<int>(i))].push_back(pixels[i]);
  std::vector<std::vector<int>> out;
  for (auto& [root, px] : by_root) out.push_back(std::move(px));
  return out;
}

/// Splits pixel components into groups, attaching the contacts they hold.
inline std::vector<Group> assemble_groups(const std::vector<std::vector<int>>& comps,
                                          const std::vector<PinContact>& contacts,
                                          const std::vector<std::pair<int, int>>& bridges) {
  std::map<int, std::size_t> comp_of;
  for (std::size_t i = 0; i < comps.size(); ++i)
    for (int p : comps[i]) comp_of[p] = i;
  std::vector<Group> groups(comps.size());
  for (const auto& c : contacts) {
    auto it = comp_of.find(c.run.front());
    if (it == comp_of.end()) continue;
    groups[it->second].contacts.push_back(c);
  }
  std::vector<Group> out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (groups[i].contacts.empty()) continue;
    Group g = std::move(groups[i]);
    g.pixels = comps[i];
    for (const auto& c : g.contacts)
      if (std::find(g.boxes.begin(), g.boxes.end(), c.box) == g.boxes.end()) g.boxes.push_back(c.box);
    std::set<int> px(g.pixels.begin(), g.pixels.end());
    for (const auto& br : bridges)
      if (px.count(br.first) && px.count(br.second)) g.bridges.push_back(br);
    out.push_back(std::move(g));
  }
  return out;
}

inline std::map<int, int> run_index(const std::vector<PinContact>& contacts) {
  std::map<int, int> out;
  for (std::size_t i = 0; i < contacts.size(); ++i)
    for (int p : contacts[i].run) out[p] = static_cast<int>(i);
  return out;
}

}  // namespace detail

/// Flood fill from every box boundary through wire pixels outside all boxes.
/// Boxes without any contact come back as one-member groups.
inline std::vector<Group> group_components(const WireMask& mask, const std::vector<LabeledBox>& boxes,
                                           const TraceConfig& cfg = {}) {
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& r = boxes[i].rect;
    if (r.x0 < 0 || r.y0 < 0 || r.x1 >= mask.width || r.y1 >= mask.height)
      throw TraceError("box " + boxes[i].id + " lies outside the image");
    for (std::size_t j = 0; j < i; ++j)
      if (r.overlaps(boxes[j].rect)) throw TraceError("boxes " + boxes[j].id + " and " + boxes[i].id + " overlap");
  }
  std::vector<std::uint8_t> inside(mask.bits.size(), 0);
  for (const auto& b : boxes)
    for (int y = b.rect.y0; y <= b.rect.y1; ++y)
      for (int x = b.rect.x0; x <= b.rect.x1; ++x) inside[static_cast<std::size_t>(y) * mask.width + x] = 1;

  std::vector<PinContact> contacts;
  for (const auto& b : boxes) {
    auto cs = detail::boundary_contacts(mask, b);
    contacts.insert(contacts.end(), cs.begin(), cs.end());
  }
  std::vector<int> pixels;
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i] && !inside[i]) pixels.push_back(static_cast<int>(i));
  for (const auto& c : contacts) pixels.insert(pixels.end(), c.run.begin(), c.run.end());
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());

  auto comps = detail::components(mask.width, mask.height, pixels, detail::run_index(contacts), {},
                                  cfg.eight_connected);
  auto groups = detail::assemble_groups(comps, contacts, {});
  std::vector<Group> out;
  for (const auto& b : boxes) {
    bool touched = std::any_of(contacts.begin(), contacts.end(), [&](const PinContact& c) { return c.box == b.id; });
    if (!touched) {
      Group g;
      g.boxes.push_back(b.id);
      out.push_back(std::move(g));
    }
  }
  out.insert(out.end(), groups.begin(), groups.end());
  return out;
}

enum class GroupCase { Singleton, Pair, OddException, EvenCrossing };

inline std::string_view to_string(GroupCase c) {
  switch (c) {
    case GroupCase::Singleton: return "singleton";
    case GroupCase::Pair: return "pair";
    case GroupCase::OddException: return "odd";
    case GroupCase::EvenCrossing: return "even-crossing";
  }
  return "?";
}

inline GroupCase classify_size(std::size_t n) {
  if (n <= 1) return GroupCase::Singleton;
  if (n == 2) return GroupCase::Pair;
  return n % 2 ? GroupCase::OddException : GroupCase::EvenCrossing;
}

inline GroupCase classify_group(const Group& g) { return classify_size(g.size()); }

// ---------------------------------------------------------------------------
// Crossings

class CrossingError : public TraceError {
 public:
  using TraceError::TraceError;
};

struct Resolution {
  int x = 0, y = 0;      // convolution peak
  int peak = 0;          // peak response
  bool tie = false;      // several pixels share the peak response
  std::vector<std::pair<double, double>> pairs;  // arm angles joined through
  std::vector<Group> groups;
};

/// Locates one crossing in an even group and joins the wire arms that
/// enter it from opposite sides. The kernel-sized window around the peak
/// is removed from every resulting group.
inline Resolution resolve_intersection(const WireMask& mask, const Group& g, int kernel,
                                       double tolerance = 15.0, bool eight_connected = false) {
  if (kernel < 3 || kernel % 2 == 0) throw CrossingError("kernel must be an odd integer >= 3");
  if (g.pixels.empty()) throw CrossingError("group has no wire pixels");
  const int w = mask.width;
  const int r = kernel / 2;
  int xmin = w, ymin = mask.height, xmax = -1, ymax = -1;
  for (int p : g.pixels) {
    xmin = std::min(xmin, p % w);
    xmax = std::max(xmax, p % w);
    ymin = std::min(ymin, p / w);
    ymax = std::max(ymax, p / w);
  }
  // Summed-area table over the group's bounding box.
  int bw = xmax - xmin + 1, bh = ymax - ymin + 1;
  std::vector<int> sat(static_cast<std::size_t>(bw + 1) * (bh + 1), 0);
  auto S = [&](int x, int y) -> int& { return sat[static_cast<std::size_t>(y) * (bw + 1) + x]; };
  std::vector<std::uint8_t> on(static_cast<std::size_t>(bw) * bh, 0);
  for (int p : g.pixels) on[static_cast<std::size_t>(p / w - ymin) * bw + (p % w - xmin)] = 1;
  for (int y = 0; y < bh; ++y)
    for (int x = 0; x < bw; ++x)
      S(x + 1, y + 1) = on[static_cast<std::size_t>(y) * bw + x] + S(x, y + 1) + S(x + 1, y) - S(x, y);
  auto box_sum = [&](int cx, int cy) {
    int ax = std::max(0, cx - r - xmin), ay = std::max(0, cy - r - ymin);
    int bx = std::min(bw, cx + r - xmin + 1), by = std::min(bh, cy + r - ymin + 1);
    if (ax >= bx || ay >= by) return 0;
    return S(bx, by) - S(ax, by) - S(bx, ay) + S(ax, ay);
  };
  Resolution res;
  res.peak = -1;
  std::vector<std::pair<int, int>> maxima;
  // Evaluated on the traced wire pixels themselves (sorted, so row-major):
  // off the wire, the corner of a bend scores as high as a crossing.
  for (int p : g.pixels) {
    int v = box_sum(p % w, p / w);
    if (v > res.peak) {
      res.peak = v;
      maxima.clear();
    }
    if (v == res.peak) maxima.emplace_back(p % w, p / w);
  }
  // Around a crossing the response is flat along both wires for kernel/2
  // pixels; take the center of the plateau holding the first maximum.
  detail::DisjointSet plateau(maxima.size());
  for (std::size_t i = 0; i < maxima.size(); ++i)
    for (std::size_t j = i + 1; j < maxima.size() && maxima[j].second <= maxima[i].second + 1; ++j)
      if (std::abs(maxima[i].first - maxima[j].first) <= 1) plateau.unite(static_cast<int>(i), static_cast<int>(j));
  std::set<int> roots;
  double sx = 0, sy = 0;
  int members = 0;
  for (std::size_t i = 0; i < maxima.size(); ++i) {
    int root = plateau.find(static_cast<int>(i));
    roots.insert(root);
    if (root == plateau.find(0)) {
      sx += maxima[i].first;
      sy += maxima[i].second;
      ++members;
    }
  }
  res.x = static_cast<int>(std::lround(sx / members));
  res.y = static_cast<int>(std::lround(sy / members));
  res.tie = roots.size() > 1;

  Rect win{res.x - r, res.y - r, res.x + r, res.y + r};
  auto run_of = detail::run_index(g.contacts);
  for (const auto& c : g.contacts)
    for (int p : c.run)
      if (win.contains(p % w, p / w)) throw CrossingError("crossing window overlaps box " + c.box);
  for (const auto& [a, b] : g.bridges)
    if (win.contains(a % w, a / w) || win.contains(b % w, b / w))
      throw CrossingError("crossing window overlaps an earlier crossing");

  std::set<int> inside_win;
  std::vector<int> rest;
  for (int p : g.pixels) {
    if (win.contains(p % w, p / w)) inside_win.insert(p);
    else rest.push_back(p);
  }

  // Entry pixels: outside the window, 4-adjacent to a wire pixel inside it.
  std::vector<int> entries;
  for (int p : rest) {
    int x = p % w, y = p / w;
    static constexpr int d[][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& dd : d) {
      int nx = x + dd[0], ny = y + dd[1];
      if (nx < 0 || ny < 0 || nx >= w || ny >= mask.height) continue;
      if (inside_win.count(ny * w + nx)) {
        entries.push_back(p);
        break;
      }
    }
  }
  // Clustered into arms by 8-adjacency.
  detail::DisjointSet ds(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i)
    for (std::size_t j = i + 1; j < entries.size(); ++j)
      if (std::abs(entries[i] % w - entries[j] % w) <= 1 && std::abs(entries[i] / w - entries[j] / w) <= 1)
        ds.unite(static_cast<int>(i), static_cast<int>(j));
  std::map<int, std::vector<int>> arm_px;
  for (std::size_t i = 0; i < entries.size(); ++i) arm_px[ds.find(static_cast<int>(i))].push_back(entries[i]);
  struct Arm {
    int pixel;
    double angle;
  };
  std::vector<Arm> arms;
  for (const auto& [root, px] : arm_px) {
    double sx = 0, sy = 0;
    for (int p : px) {
      sx += p % w;
      sy += p / w;
    }
    sx /= static_cast<double>(px.size());
    sy /= static_cast<double>(px.size());
    arms.push_back({px.front(), wrap_deg(std::atan2(res.y - sy, sx - res.x) * 180.0 / M_PI)});
  }
  if (arms.size() < 4 || arms.size() % 2)
    throw CrossingError("convolution peak at (" + std::to_string(res.x) + "," + std::to_string(res.y) +
                        ") has " + std::to_string(arms.size()) + " wire arms");

  // Pair arms facing each other, closest to exactly opposite first.
  struct Cand {
    double dev;
    std::size_t a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < arms.size(); ++i)
    for (std::size_t j = i + 1; j < arms.size(); ++j) {
      double diff = std::fabs(wrap_deg(arms[i].angle - arms[j].angle) - 180.0);
      if (diff <= tolerance) cands.push_back({diff, i, j});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) { return x.dev < y.dev; });
  std::vector<bool> used(arms.size(), false);
  auto bridges = g.bridges;
  for (const auto& c : cands) {
    if (used[c.a] || used[c.b]) continue;
    used[c.a] = used[c.b] = true;
    bridges.emplace_back(arms[c.a].pixel, arms[c.b].pixel);
    res.pairs.emplace_back(arms[c.a].angle, arms[c.b].angle);
  }
  if (std::find(used.begin(), used.end(), false) != used.end())
    throw CrossingError("no opposite arm within tolerance at (" + std::to_string(res.x) + "," +
                        std::to_string(res.y) + ")");

  auto comps = detail::components(w, mask.height, rest, run_of, bridges, eight_connected);
  res.groups = detail::assemble_groups(comps, g.contacts, bridges);
  return res;
}

// ---------------------------------------------------------------------------
// Pin ordering

class PinOrderError : public TraceError {
 public:
  using TraceError::TraceError;
};

struct Sector {
  std::string pin;
  double from;  // inclusive, symbol frame
  double to;    // exclusive; may wrap past 360
};

inline bool in_sector(const Sector& s, double a) {
  double from = wrap_deg(s.from), to = wrap_deg(s.to);
  if (from < to) return a >= from && a < to;
  return a >= from || a < to;
}

/// Upright (R0) sector table. MOS: gate on the left, body on the right.
inline std::vector<Sector> sector_table(BoxKind k) {
  switch (k) {
    case BoxKind::NMOS:
      return {{"drain", 45, 135}, {"gate", 135, 225}, {"source", 225, 300}, {"body", 300, 45}};
    case BoxKind::PMOS:
      return {{"drain", 225, 300}, {"gate", 135, 225}, {"source", 45, 135}, {"body", 300, 45}};
    case BoxKind::CurrentSource:
    case BoxKind::VoltageSource:
      return {{"a", 0, 180}, {"b", 180, 360}};
    default:
      return {};
  }
}

inline std::size_t pin_arity(const LabeledBox& b) {
  switch (b.kind) {
    case BoxKind::NMOS:
    case BoxKind::PMOS: return 4;
    case BoxKind::Resistor:
    case BoxKind::Capacitor:
    case BoxKind::CurrentSource:
    case BoxKind::VoltageSource: return 2;
    case BoxKind::Symbol: return b.pinmap.size();
    default: return 0;  // any number
  }
}

/// Assigns contacts to pins by entry angle. Non-polar two-terminal devices
/// take their contacts in (y, x) order; symbols use the nearest pin-map angle.
inline std::vector<PinContact> order_pins(const LabeledBox& box, std::vector<PinContact> contacts) {
  std::size_t arity = pin_arity(box);
  if (arity == 0) {
    std::sort(contacts.begin(), contacts.end(),
              [](const PinContact& a, const PinContact& b) { return a.angle < b.angle; });
    return contacts;
  }
  if (contacts.size() != arity)
    throw PinOrderError("box " + box.id + " has " + std::to_string(contacts.size()) + " contacts, expected " +
                        std::to_string(arity));
  if (box.kind == BoxKind::Resistor || box.kind == BoxKind::Capacitor) {
    std::sort(contacts.begin(), contacts.end(), [](const PinContact& a, const PinContact& b) {
      return std::pair(a.y, a.x) < std::pair(b.y, b.x);
    });
    return contacts;
  }
  std::vector<std::optional<PinContact>> slots(arity);
  if (box.kind == BoxKind::Symbol) {
    for (const auto& c : contacts) {
      double local = to_local_angle(box.orientation, c.angle);
      std::size_t best = 0;
      double best_d = 1e9;
      for (std::size_t i = 0; i < arity; ++i) {
        double d = std::fabs(wrap_deg(local - box.pinmap[i].angle + 180.0) - 180.0);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      if (slots[best]) throw PinOrderError("box " + box.id + ": two contacts near pin " + box.pinmap[best].name);
      slots[best] = c;
    }
  } else {
    auto table = sector_table(box.kind);
    for (const auto& c : contacts) {
      double local = to_local_angle(box.orientation, c.angle);
      std::size_t i = 0;
      while (i < table.size() && !in_sector(table[i], local)) ++i;
      if (slots[i]) throw PinOrderError("box " + box.id + ": two contacts in the " + table[i].pin + " sector");
      slots[i] = c;
    }
  }
  std::vector<PinContact> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---------------------------------------------------------------------------
// Whole-schematic tracing

struct CrossingRecord {
  int x = 0, y = 0;
  int peak = 0;
  bool tie = false;
};

struct TraceException {
  std::string reason;
  std::vector<std::string> boxes;
};

struct TraceResult {
  std::vector<std::vector<PinContact>> nets;
  std::vector<CrossingRecord> junctions;
  std::vector<TraceException> exceptions;
  std::map<std::string, std::size_t> case_counts;
};

namespace detail {

inline netlist::Component box_component(const LabeledBox& b) {
  using netlist::DeviceKind;
  netlist::Component c;
  DeviceKind k = *device_kind(b.kind);
  c.kind = k;
  char letter = netlist::card_letter(k);
  c.name = (!b.id.empty() && std::toupper(static_cast<unsigned char>(b.id[0])) == letter)
               ? b.id
               : std::string(1, letter) + b.id;
  switch (k) {
    case DeviceKind::NMOS:
    case DeviceKind::PMOS:
      c.params = {{"W", 1e-6}, {"L", 1e-7}};
      c.model = b.model ? *b.model : std::string(netlist::to_string(k));
      break;
    case DeviceKind::Resistor: c.params = {{"R", b.value.value_or(1e3)}}; break;
    case DeviceKind::Capacitor: c.params = {{"C", b.value.value_or(1e-12)}}; break;
    case DeviceKind::CurrentSource: c.params = {{"I", b.value.value_or(1e-5)}}; break;
    case DeviceKind::VoltageSource: c.params = {{"V", b.value.value_or(1.0)}}; break;
    default: c.model = b.model; break;
  }
  return c;
}

}  // namespace detail

/// Full pipeline: binarize, group, resolve crossings, order pins, name nets.
/// Nets joined through junction boxes are collapsed; ground and port boxes
/// name the net they touch. Other nets are numbered n1, n2, ... in
/// component order.
inline std::pair<netlist::Netlist, TraceResult> trace_to_netlist(const GrayImage& image,
                                                                 const std::vector<LabeledBox>& boxes,
                                                                 const TraceConfig& cfg = {}) {
  TraceResult result;
  WireMask mask = binarize(image, cfg.threshold, boxes);
  auto initial = group_components(mask, boxes, cfg);

  std::deque<Group> work(initial.begin(), initial.end());
  std::vector<Group> finals;
  int resolutions = 0;
  while (!work.empty()) {
    Group g = std::move(work.front());
    work.pop_front();
    GroupCase gc = classify_group(g);
    if (gc == GroupCase::EvenCrossing) {
      if (++resolutions > cfg.max_resolutions) {
        result.exceptions.push_back({"crossing resolution limit reached", g.boxes});
        finals.push_back(std::move(g));
        continue;
      }
      try {
        auto res = resolve_intersection(mask, g, cfg.kernel, cfg.angle_tolerance, cfg.eight_connected);
        result.junctions.push_back({res.x, res.y, res.peak, res.tie});
        std::size_t covered = 0;
        for (const auto& sub : res.groups) covered += sub.contacts.size();
        if (covered != g.contacts.size()) throw CrossingError("crossing cut detached a pin contact");
        for (auto it = res.groups.rbegin(); it != res.groups.rend(); ++it) work.push_front(std::move(*it));
      } catch (const CrossingError& e) {
        result.exceptions.push_back({e.what(), g.boxes});
        ++result.case_counts[std::string(to_string(GroupCase::OddException))];
        finals.push_back(std::move(g));
      }
      continue;
    }
    ++result.case_counts[std::string(to_string(gc))];
    if (gc == GroupCase::OddException)
      result.exceptions.push_back({"odd group of " + std::to_string(g.size()) + " contacts", g.boxes});
    finals.push_back(std::move(g));
  }

  // Contact -> net class.
  std::map<std::string, std::size_t> box_index;
  for (std::size_t i = 0; i < boxes.size(); ++i) box_index[boxes[i].id] = i;
  auto key_of = [](const PinContact& c) { return std::pair(c.box, c.run.front()); };
  std::map<std::pair<std::string, int>, int> net_of;
  int next_class = 0;
  for (const auto& g : finals) {
    if (g.contacts.empty()) continue;
    int cls = next_class++;
    for (const auto& c : g.contacts) net_of[key_of(c)] = cls;
    std::vector<PinContact> members = g.contacts;
    std::sort(members.begin(), members.end(), [&](const PinContact& a, const PinContact& b) {
      return std::tuple(box_index[a.box], a.y, a.x) < std::tuple(box_index[b.box], b.y, b.x);
    });
    result.nets.push_back(std::move(members));
  }
  std::sort(result.nets.begin(), result.nets.end(), [&](const auto& a, const auto& b) {
    return std::tuple(box_index[a.front().box], a.front().y, a.front().x) <
           std::tuple(box_index[b.front().box], b.front().y, b.front().x);
  });

  std::map<std::string, std::vector<PinContact>> by_box;
  for (const auto& g : finals)
    for (const auto& c : g.contacts) by_box[c.box].push_back(c);

  std::vector<std::pair<int, int>> unions;
  std::vector<std::pair<int, std::string>> labels;
  std::map<std::string, std::set<std::string>> roles;
  netlist::Netlist out;
  std::vector<std::vector<int>> pin_classes;
  for (const auto& b : boxes) {
    auto cs = by_box[b.id];
    if (is_net_marker(b.kind)) {
      std::vector<int> cls;
      for (const auto& c : cs) cls.push_back(net_of[key_of(c)]);
      for (std::size_t i = 1; i < cls.size(); ++i) unions.emplace_back(cls[0], cls[i]);
      if (b.kind == BoxKind::Junction || cls.empty()) continue;
      std::string name = b.kind == BoxKind::Ground ? std::string(netlist::kGround) : *b.net;
      labels.emplace_back(cls[0], name);
      if (b.role) roles[name].insert(*b.role);
      else if (b.kind == BoxKind::Port) roles[name].insert("port");
      continue;
    }
    std::size_t arity = pin_arity(b);
    std::vector<int> cls;
    if (cs.empty()) {
      for (std::size_t i = 0; i < arity; ++i) cls.push_back(next_class++);
    } else {
      try {
        for (const auto& c : order_pins(b, cs)) cls.push_back(net_of[key_of(c)]);
      } catch (const PinOrderError& e) {
        result.exceptions.push_back({e.what(), {b.id}});
        std::sort(cs.begin(), cs.end(), [](const PinContact& x, const PinContact& y) { return x.angle < y.angle; });
        for (std::size_t i = 0; i < arity; ++i) cls.push_back(i < cs.size() ? net_of[key_of(cs[i])] : next_class++);
      }
    }
    out.components.push_back(detail::box_component(b));
    pin_classes.push_back(std::move(cls));
  }

  detail::DisjointSet classes(static_cast<std::size_t>(next_class));
  for (const auto& [a, b] : unions) classes.unite(a, b);
  // Fixed names per merged class; conflicting labels are an exception.
  std::map<int, std::string> class_name;
  for (const auto& [cls, name] : labels) {
    auto [it, inserted] = class_name.emplace(classes.find(cls), name);
    if (!inserted && it->second != name) {
      result.exceptions.push_back({"net carries conflicting labels " + it->second + " and " + name, {}});
      if (name == netlist::kGround) it->second = name;
    }
  }
  int counter = 0;
  for (std::size_t i = 0; i < out.components.size(); ++i) {
    for (int c : pin_classes[i]) {
      int root = classes.find(c);
      auto it = class_name.find(root);
      if (it == class_name.end()) it = class_name.emplace(root, "n" + std::to_string(++counter)).first;
      out.components[i].pins.push_back(it->second);
    }
  }
  auto used = out.nets();
  for (auto& [net, rs] : roles)
    if (net != netlist::kGround && used.count(net)) out.net_roles[net].insert(rs.begin(), rs.end());
  return {std::move(out), std::move(result)};
}

/// Structured trace report.
inline nlohmann::json report_json(const TraceResult& r) {
  nlohmann::json j;
  j["nets"] = nlohmann::json::array();
  for (const auto& net : r.nets) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& c : net)
      members.push_back({{"box", c.box}, {"x", c.x}, {"y", c.y}, {"angle", c.angle}});
    j["nets"].push_back(members);
  }
  j["junctions"] = nlohmann::json::array();
  for (const auto& x : r.junctions)
    j["junctions"].push_back({{"x", x.x}, {"y", x.y}, {"peak", x.peak}, {"tie", x.tie}});
  j["exceptions"] = nlohmann::json::array();
  for (const auto& e : r.exceptions) j["exceptions"].push_back({{"reason", e.reason}, {"boxes", e.boxes}});
  j["cases"] = r.case_counts;
  return j;
}

}  // namespace amskit::trace
