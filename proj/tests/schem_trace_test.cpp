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

#include "amskit/schem_trace.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "support/schem_render.hpp"

namespace amskit::trace {
namespace {

using netlist::Netlist;

void hline(GrayImage& img, int y, int x0, int x1) {
  for (int x = x0; x <= x1; ++x) img.at(x, y) = 0;
}
void vline(GrayImage& img, int x, int y0, int y1) {
  for (int y = y0; y <= y1; ++y) img.at(x, y) = 0;
}

LabeledBox box(std::string id, BoxKind k, Rect r, Orientation o = Orientation::R0) {
  LabeledBox b;
  b.id = std::move(id);
  b.kind = k;
  b.rect = r;
  b.orientation = o;
  return b;
}

Netlist fixture(const std::string& name) {
  auto n = netlist::parse_netlist(read_file(std::string(AMSKIT_DATA_DIR) + "/netlists/" + name + ".sp"));
  n.net_roles = netlist::parse_net_roles(read_file(std::string(AMSKIT_DATA_DIR) + "/netlists/" + name + ".roles"));
  return n;
}

std::set<std::string> labeled(const Netlist& n) {
  std::set<std::string> out;
  for (const auto& [net, roles] : n.net_roles) out.insert(net);
  return out;
}

testing::Schematic render_until_ok(const Netlist& n, const std::set<std::string>& ports, std::uint64_t seed,
                                   testing::RenderOptions opt = {}) {
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < 200; ++attempt)
    if (auto s = testing::render_schematic(n, ports, rng, opt)) return *s;
  throw Error("renderer could not lay out the netlist");
}

// Net recovery score against the generating netlist: a source net counts as
// recovered when some traced net has exactly the same pin set.
struct Recovery {
  std::size_t nets = 0, recovered = 0, false_merges = 0;
};

Recovery score(const Netlist& source, const Netlist& traced) {
  auto pinsets = [](const Netlist& n) {
    std::map<std::string, std::set<std::pair<std::string, std::size_t>>> out;
    for (const auto& c : n.components)
      for (std::size_t i = 0; i < c.pins.size(); ++i) out[c.pins[i]].insert({c.name, i});
    return out;
  };
  auto a = pinsets(source), b = pinsets(traced);
  std::set<std::set<std::pair<std::string, std::size_t>>> traced_sets;
  for (const auto& [net, pins] : b) traced_sets.insert(pins);
  Recovery r;
  r.nets = a.size();
  for (const auto& [net, pins] : a) r.recovered += traced_sets.count(pins);
  std::map<std::pair<std::string, std::size_t>, std::string> src_net;
  for (const auto& [net, pins] : a)
    for (const auto& p : pins) src_net[p] = net;
  for (const auto& [net, pins] : b) {
    std::set<std::string> sources;
    for (const auto& p : pins) sources.insert(src_net[p]);
    if (sources.size() > 1) ++r.false_merges;
  }
  return r;
}

// ---------------------------------------------------------------------------

TEST(Binarize, AllWhiteIsEmpty) {
  GrayImage img(40, 30, 255);
  EXPECT_EQ(binarize(img, 128).count(), 0u);
}

TEST(Binarize, SingleLine) {
  GrayImage img(40, 30, 255);
  hline(img, 10, 5, 34);
  auto m = binarize(img, 128);
  EXPECT_EQ(m.count(), 30u);
  for (int x = 5; x <= 34; ++x) EXPECT_TRUE(m.at(x, 10));
  EXPECT_FALSE(m.at(4, 10));
}

TEST(Binarize, EmptyImageIsAnError) { EXPECT_THROW(binarize(GrayImage{}, 128), TraceError); }

TEST(Binarize, RenderedFixtureMatchesStrokeCount) {
  auto n = fixture("five_t_opamp");
  auto s = render_until_ok(n, labeled(n), 11);
  auto m = binarize(s.image, 128, s.boxes);
  EXPECT_EQ(m.count(), s.wire_pixels);
}

TEST(Pgm, RoundTripRawAndPlain) {
  GrayImage img(7, 3, 0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i * 11);
  std::stringstream raw;
  write_pgm(raw, img);
  auto back = read_pgm(raw);
  EXPECT_EQ(back.pixels, img.pixels);
  std::stringstream plain("P2\n# comment\n3 1\n15\n0 15 5\n");
  auto p = read_pgm(plain);
  EXPECT_EQ(p.width, 3);
  EXPECT_EQ(p.pixels, (std::vector<std::uint8_t>{0, 255, 85}));
  std::stringstream bad("P7\n1 1\n255\n");
  EXPECT_THROW(read_pgm(bad), TraceError);
}

TEST(Boxes, ParseAndEmit) {
  auto boxes = parse_boxes(
      "# header\n"
      "M1 nmos R90 10 10 30 30 model=nch\n"
      "P1 port R0 40 10 60 30 net=vdd role=supply\n"
      "X1 symbol M0 70 10 90 30 model=buf pins=in@180,out@0\n");
  ASSERT_EQ(boxes.size(), 3u);
  EXPECT_EQ(boxes[0].orientation, Orientation::R90);
  EXPECT_EQ(boxes[0].model, "nch");
  EXPECT_EQ(boxes[1].net, "vdd");
  EXPECT_EQ(boxes[2].pinmap.size(), 2u);
  auto again = parse_boxes(emit_boxes(boxes));
  EXPECT_EQ(emit_boxes(again), emit_boxes(boxes));
  EXPECT_THROW(parse_boxes("M1 nmos R0 1 2 3\n"), TraceError);
  EXPECT_THROW(parse_boxes("M1 diode R0 0 0 9 9\n"), TraceError);
  EXPECT_THROW(parse_boxes("S1 symbol R0 0 0 9 9\n"), TraceError);
}

TEST(GroupComponents, TwoBoxesOneLine) {
  GrayImage img(60, 20, 255);
  hline(img, 10, 12, 47);
  std::vector<LabeledBox> boxes = {box("R1", BoxKind::Resistor, {2, 5, 12, 15}),
                                   box("R2", BoxKind::Resistor, {47, 5, 57, 15})};
  auto groups = group_components(binarize(img, 128, boxes), boxes);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].size(), 2u);
  EXPECT_EQ(classify_group(groups[0]), GroupCase::Pair);
}

TEST(GroupComponents, IsolatedBoxIsSingleton) {
  GrayImage img(30, 30, 255);
  std::vector<LabeledBox> boxes = {box("R1", BoxKind::Resistor, {5, 5, 20, 20})};
  auto groups = group_components(binarize(img, 128, boxes), boxes);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].size(), 1u);
  EXPECT_EQ(classify_group(groups[0]), GroupCase::Singleton);
}

TEST(GroupComponents, RenderedFixtureGroupsMatchNets) {
  auto n = fixture("five_t_opamp");
  auto s = render_until_ok(n, labeled(n), 5);
  auto groups = group_components(binarize(s.image, 128, s.boxes), s.boxes);
  auto [traced, report] = trace_to_netlist(s.image, s.boxes);
  EXPECT_TRUE(report.exceptions.empty());
  auto r = score(n, traced);
  EXPECT_EQ(r.recovered, r.nets);
  EXPECT_EQ(r.false_merges, 0u);
  // Every pin contact appears in exactly one group.
  std::size_t contacts = 0;
  for (const auto& g : groups) contacts += g.contacts.size();
  std::size_t expected = 0;
  for (const auto& b : s.boxes) expected += detail::boundary_contacts(binarize(s.image, 128, s.boxes), b).size();
  EXPECT_EQ(contacts, expected);
}

TEST(GroupComponents, OverlappingBoxesRejected) {
  GrayImage img(30, 30, 255);
  std::vector<LabeledBox> boxes = {box("R1", BoxKind::Resistor, {2, 2, 12, 12}),
                                   box("R2", BoxKind::Resistor, {10, 10, 20, 20})};
  EXPECT_THROW(group_components(binarize(img, 128), boxes), TraceError);
}

TEST(ClassifyGroup, Sizes) {
  EXPECT_EQ(classify_size(1), GroupCase::Singleton);
  EXPECT_EQ(classify_size(2), GroupCase::Pair);
  EXPECT_EQ(classify_size(3), GroupCase::OddException);
  EXPECT_EQ(classify_size(4), GroupCase::EvenCrossing);
  EXPECT_EQ(classify_size(5), GroupCase::OddException);
  EXPECT_EQ(classify_size(6), GroupCase::EvenCrossing);
}

struct PlusScene {
  GrayImage img{100, 100, 255};
  std::vector<LabeledBox> boxes;
  PlusScene() {
    hline(img, 50, 16, 84);
    vline(img, 50, 16, 84);
    boxes = {box("RA", BoxKind::Resistor, {6, 45, 16, 55}), box("RB", BoxKind::Resistor, {84, 45, 94, 55}),
             box("RC", BoxKind::Resistor, {45, 6, 55, 16}), box("RD", BoxKind::Resistor, {45, 84, 55, 94})};
  }
};

std::set<std::string> members(const Group& g) { return {g.boxes.begin(), g.boxes.end()}; }

TEST(ResolveIntersection, SymmetricPlus) {
  PlusScene s;
  auto mask = binarize(s.img, 128, s.boxes);
  auto groups = group_components(mask, s.boxes);
  ASSERT_EQ(groups.size(), 1u);
  ASSERT_EQ(classify_group(groups[0]), GroupCase::EvenCrossing);
  auto res = resolve_intersection(mask, groups[0], 5);
  EXPECT_EQ(res.x, 50);
  EXPECT_EQ(res.y, 50);
  EXPECT_EQ(res.peak, 9);
  EXPECT_FALSE(res.tie);
  ASSERT_EQ(res.groups.size(), 2u);
  std::set<std::set<std::string>> got = {members(res.groups[0]), members(res.groups[1])};
  EXPECT_EQ(got, (std::set<std::set<std::string>>{{"RA", "RB"}, {"RC", "RD"}}));
  for (const auto& g : res.groups) EXPECT_EQ(classify_group(g), GroupCase::Pair);
}

TEST(ResolveIntersection, SixMembersTwoCrossings) {
  GrayImage img(100, 100, 255);
  hline(img, 50, 16, 84);
  vline(img, 35, 16, 84);
  vline(img, 65, 16, 84);
  std::vector<LabeledBox> boxes = {
      box("RA", BoxKind::Resistor, {6, 45, 16, 55}),  box("RB", BoxKind::Resistor, {84, 45, 94, 55}),
      box("RC", BoxKind::Resistor, {30, 6, 40, 16}),  box("RD", BoxKind::Resistor, {30, 84, 40, 94}),
      box("RE", BoxKind::Resistor, {60, 6, 70, 16}),  box("RF", BoxKind::Resistor, {60, 84, 70, 94})};
  auto mask = binarize(img, 128, boxes);
  auto groups = group_components(mask, boxes);
  ASSERT_EQ(groups.size(), 1u);
  ASSERT_EQ(groups[0].size(), 6u);
  auto first = resolve_intersection(mask, groups[0], 5);
  EXPECT_TRUE(first.tie);  // both crossings give the same response
  EXPECT_EQ(first.x, 35);
  ASSERT_EQ(first.groups.size(), 2u);
  std::vector<std::size_t> sizes = {first.groups[0].size(), first.groups[1].size()};
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{2, 4}));
  const Group& rest = first.groups[0].size() == 4 ? first.groups[0] : first.groups[1];
  auto second = resolve_intersection(mask, rest, 5);
  EXPECT_EQ(second.x, 65);
  ASSERT_EQ(second.groups.size(), 2u);

  // As labeled ports, a wrong pairing would surface as conflicting labels.
  const char* nets[] = {"h", "h", "v1", "v1", "v2", "v2"};
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    boxes[i].kind = BoxKind::Port;
    boxes[i].net = nets[i];
  }
  auto [traced, report] = trace_to_netlist(img, boxes);
  EXPECT_TRUE(report.exceptions.empty());
  EXPECT_EQ(report.junctions.size(), 2u);
  EXPECT_EQ(report.nets.size(), 3u);
  for (const auto& net : report.nets) EXPECT_EQ(net.size(), 2u);
}

TEST(ResolveIntersection, TJunctionHasNoOppositePartners) {
  GrayImage img(100, 100, 255);
  hline(img, 50, 16, 84);
  vline(img, 50, 16, 50);
  std::vector<LabeledBox> boxes = {box("RA", BoxKind::Resistor, {6, 45, 16, 55}),
                                   box("RB", BoxKind::Resistor, {84, 45, 94, 55}),
                                   box("RC", BoxKind::Resistor, {45, 6, 55, 16})};
  auto mask = binarize(img, 128, boxes);
  auto groups = group_components(mask, boxes);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(classify_group(groups[0]), GroupCase::OddException);
  auto [traced, report] = trace_to_netlist(img, boxes);
  EXPECT_FALSE(report.exceptions.empty());
}

TEST(ResolveIntersection, RejectsEvenKernel) {
  PlusScene s;
  auto mask = binarize(s.img, 128, s.boxes);
  auto groups = group_components(mask, s.boxes);
  EXPECT_THROW(resolve_intersection(mask, groups[0], 4), CrossingError);
}

TEST(ResolveIntersection, PeakNearRenderedCrossings) {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int i = 0; i < 60 && checked < 10; ++i) {
    std::set<std::string> ports;
    auto n = testing::random_schematic_netlist(rng, ports);
    auto s = testing::render_schematic(n, ports, rng, {.crossing_cost = 1});
    if (!s || s->crossings.empty()) continue;
    auto [traced, report] = trace_to_netlist(s->image, s->boxes);
    ASSERT_EQ(report.junctions.size(), s->crossings.size());
    for (const auto& j : report.junctions) {
      bool near = std::any_of(s->crossings.begin(), s->crossings.end(), [&](const auto& c) {
        return std::abs(c.first - j.x) <= 2 && std::abs(c.second - j.y) <= 2;
      });
      EXPECT_TRUE(near) << "peak at " << j.x << "," << j.y;
    }
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

// ---------------------------------------------------------------------------

PinContact contact_at(const LabeledBox& b, int x, int y) {
  PinContact c;
  c.box = b.id;
  c.x = x;
  c.y = y;
  c.angle = detail::contact_angle(b.rect, x, y);
  c.run = {y * 1000 + x};
  return c;
}

std::vector<std::pair<int, int>> positions(const std::vector<PinContact>& cs) {
  std::vector<std::pair<int, int>> out;
  for (const auto& c : cs) out.emplace_back(c.x, c.y);
  return out;
}

TEST(OrderPins, UprightNmos) {
  auto b = box("M1", BoxKind::NMOS, {0, 0, 20, 20});
  // top, left, bottom, bottom-right; given shuffled
  std::vector<PinContact> cs = {contact_at(b, 10, 20), contact_at(b, 20, 18), contact_at(b, 0, 10),
                                contact_at(b, 10, 0)};
  auto ordered = order_pins(b, cs);
  EXPECT_EQ(positions(ordered), (std::vector<std::pair<int, int>>{{10, 0}, {0, 10}, {10, 20}, {20, 18}}));
}

TEST(OrderPins, RotatedNmosKeepsSemanticOrder) {
  auto b = box("M1", BoxKind::NMOS, {0, 0, 20, 20}, Orientation::R180);
  // Rotated by 180: drain at the bottom, gate on the right, source on top.
  std::vector<PinContact> cs = {contact_at(b, 10, 0), contact_at(b, 20, 10), contact_at(b, 10, 20),
                                contact_at(b, 0, 10)};
  auto ordered = order_pins(b, cs);
  EXPECT_EQ(positions(ordered), (std::vector<std::pair<int, int>>{{10, 20}, {20, 10}, {10, 0}, {0, 10}}));
}

TEST(OrderPins, AllOrientationsRoundTrip) {
  const std::vector<double> local = {90, 180, 270, 0};
  for (int o = 0; o < 8; ++o) {
    auto b = box("M1", BoxKind::PMOS, {0, 0, 20, 20}, static_cast<Orientation>(o));
    std::vector<PinContact> cs;
    for (double a : {270.0, 180.0, 90.0, 0.0}) {  // pmos drain, gate, source, body
      double img = to_image_angle(b.orientation, a);
      int x = 10 + static_cast<int>(std::lround(10 * std::cos(img * M_PI / 180)));
      int y = 10 - static_cast<int>(std::lround(10 * std::sin(img * M_PI / 180)));
      cs.push_back(contact_at(b, x, y));
    }
    auto expected = positions(cs);
    std::reverse(cs.begin(), cs.end());
    EXPECT_EQ(positions(order_pins(b, cs)), expected) << "orientation " << to_string(b.orientation);
  }
  (void)local;
}

TEST(OrderPins, ResistorLexicographic) {
  auto b = box("R1", BoxKind::Resistor, {0, 0, 20, 20}, Orientation::R90);
  auto ordered = order_pins(b, {contact_at(b, 20, 10), contact_at(b, 0, 10)});
  EXPECT_EQ(positions(ordered), (std::vector<std::pair<int, int>>{{0, 10}, {20, 10}}));
}

TEST(OrderPins, Errors) {
  auto b = box("M1", BoxKind::NMOS, {0, 0, 20, 20});
  EXPECT_THROW(order_pins(b, {contact_at(b, 10, 0), contact_at(b, 0, 10)}), PinOrderError);
  EXPECT_THROW(order_pins(b, {contact_at(b, 8, 0), contact_at(b, 12, 0), contact_at(b, 0, 10), contact_at(b, 10, 20)}),
               PinOrderError);
}

TEST(OrderPins, SymbolPinMap) {
  auto b = box("X1", BoxKind::Symbol, {0, 0, 20, 20}, Orientation::M0);
  b.model = "buf";
  b.pinmap = {{"in", 180}, {"out", 0}};
  // Mirrored: "in" appears on the right.
  auto ordered = order_pins(b, {contact_at(b, 0, 10), contact_at(b, 20, 10)});
  EXPECT_EQ(positions(ordered), (std::vector<std::pair<int, int>>{{20, 10}, {0, 10}}));
}

// ---------------------------------------------------------------------------

TEST(TraceToNetlist, BlankImageGivesUnconnectedComponents) {
  GrayImage img(100, 40, 255);
  std::vector<LabeledBox> boxes = {box("M1", BoxKind::NMOS, {5, 5, 25, 25}),
                                   box("R1", BoxKind::Resistor, {40, 5, 60, 25})};
  auto [n, report] = trace_to_netlist(img, boxes);
  ASSERT_EQ(n.components.size(), 2u);
  EXPECT_EQ(n.nets().size(), 6u);
  EXPECT_TRUE(report.exceptions.empty());
  EXPECT_EQ(report.case_counts.at("singleton"), 2u);
}

TEST(TraceToNetlist, FiveTransistorOpampRoundTrip) {
  auto n = fixture("five_t_opamp");
  for (std::uint64_t seed : {1, 2, 3}) {
    auto s = render_until_ok(n, labeled(n), seed);
    auto [traced, report] = trace_to_netlist(s.image, s.boxes);
    EXPECT_TRUE(report.exceptions.empty());
    EXPECT_TRUE(netlist::equivalent_up_to_net_renaming(traced, n)) << netlist::emit_netlist(traced);
    EXPECT_TRUE(netlist::validate(traced).empty());
  }
}

TEST(TraceToNetlist, TwoStageOpampRoundTrip) {
  auto n = fixture("two_stage_opamp");
  auto s = render_until_ok(n, labeled(n), 9);
  auto [traced, report] = trace_to_netlist(s.image, s.boxes);
  EXPECT_TRUE(report.exceptions.empty());
  EXPECT_TRUE(netlist::equivalent_up_to_net_renaming(traced, n)) << netlist::emit_netlist(traced);
}

TEST(TraceToNetlist, Deterministic) {
  auto n = fixture("five_t_opamp");
  auto s = render_until_ok(n, labeled(n), 4);
  auto a = trace_to_netlist(s.image, s.boxes);
  auto b = trace_to_netlist(s.image, s.boxes);
  EXPECT_EQ(netlist::emit_netlist(a.first), netlist::emit_netlist(b.first));
  EXPECT_EQ(report_json(a.second).dump(), report_json(b.second).dump());
}

TEST(TraceToNetlist, PixelConservationAcrossResolution) {
  std::mt19937_64 rng(91);
  int seen = 0;
  for (int i = 0; i < 40 && seen < 5; ++i) {
    std::set<std::string> ports;
    auto n = testing::random_schematic_netlist(rng, ports);
    auto s = testing::render_schematic(n, ports, rng, {.crossing_cost = 1});
    if (!s || s->crossings.empty()) continue;
    auto mask = binarize(s->image, 128, s->boxes);
    std::deque<Group> work;
    for (auto& g : group_components(mask, s->boxes)) work.push_back(g);
    std::vector<Group> done;
    while (!work.empty()) {
      Group g = work.front();
      work.pop_front();
      if (classify_group(g) != GroupCase::EvenCrossing) {
        done.push_back(g);
        continue;
      }
      auto res = resolve_intersection(mask, g, 5);
      std::size_t total = 0;
      for (const auto& sub : res.groups) total += sub.size();
      EXPECT_EQ(total, g.size());
      for (auto& sub : res.groups) {
        EXPECT_LE(sub.size(), g.size());
        work.push_back(sub);
      }
    }
    std::set<int> all;
    std::size_t sum = 0;
    for (const auto& g : done) {
      all.insert(g.pixels.begin(), g.pixels.end());
      sum += g.pixels.size();
    }
    EXPECT_EQ(all.size(), sum);  // no pixel in two groups
    ++seen;
  }
  EXPECT_GT(seen, 0);
}

TEST(TraceToNetlist, OmittedJunctionIsFlagged) {
  std::mt19937_64 rng(5);
  int flagged = 0;
  for (int i = 0; i < 100 && flagged < 10; ++i) {
    std::set<std::string> ports;
    auto n = testing::random_schematic_netlist(rng, ports);
    testing::RenderOptions opt;
    opt.omit_junctions = true;
    auto s = testing::render_schematic(n, ports, rng, opt);
    if (!s || s->omitted_junctions == 0) continue;
    auto [traced, report] = trace_to_netlist(s->image, s->boxes);
    // Three-way joins are odd groups; four-way joins look like crossings and
    // only the odd ones are guaranteed to be caught.
    bool has_three = false;
    std::map<std::string, int> degree;
    for (const auto& c : n.components)
      for (const auto& p : c.pins) ++degree[p];
    for (const auto& [net, d] : degree)
      if (net != netlist::kGround && !ports.count(net) && d == 3) has_three = true;
    if (!has_three) continue;
    EXPECT_FALSE(report.exceptions.empty());
    ++flagged;
  }
  EXPECT_GT(flagged, 0);
}

TEST(TraceToNetlist, PartialContactsAreExceptions) {
  GrayImage img(100, 40, 255);
  std::vector<LabeledBox> boxes = {box("M1", BoxKind::NMOS, {5, 5, 25, 25}),
                                   box("R1", BoxKind::Resistor, {60, 5, 80, 25}, Orientation::R90)};
  hline(img, 15, 0, 5);  // gate stub to the image edge
  hline(img, 15, 25, 60);  // body to R1
  auto [n, report] = trace_to_netlist(img, boxes);
  EXPECT_FALSE(report.exceptions.empty());
  EXPECT_EQ(n.components.size(), 2u);
}

TEST(TraceToNetlist, GroundAndPortBoxesNameNets) {
  GrayImage img(100, 40, 255);
  std::vector<LabeledBox> boxes = {box("R1", BoxKind::Resistor, {40, 5, 60, 25}, Orientation::R90),
                                   box("G1", BoxKind::Ground, {5, 5, 25, 25}),
                                   box("P1", BoxKind::Port, {75, 5, 95, 25})};
  boxes[2].net = "out";
  boxes[2].role = "output";
  hline(img, 15, 25, 40);
  hline(img, 15, 60, 75);
  auto [n, report] = trace_to_netlist(img, boxes);
  ASSERT_EQ(n.components.size(), 1u);
  EXPECT_EQ(n.components[0].pins, (std::vector<std::string>{"0", "out"}));
  EXPECT_EQ(n.net_roles.at("out"), std::set<std::string>{"output"});
}

}  // namespace
}  // namespace amskit::trace

namespace amskit::trace {
namespace {

TEST(TraceCorpus, HundredSchematicsRecoverAllNets) {
  auto corpus = testing::schematic_corpus(2024, 100);
  ASSERT_EQ(corpus.size(), 100u);
  std::map<std::size_t, int> by_crossings;
  Recovery total;
  for (const auto& s : corpus) {
    ++by_crossings[s.crossings.size()];
    auto [traced, report] = trace_to_netlist(s.image, s.boxes);
    EXPECT_TRUE(report.exceptions.empty());
    EXPECT_EQ(report.junctions.size(), s.crossings.size());
    auto r = score(s.source, traced);
    total.nets += r.nets;
    total.recovered += r.recovered;
    total.false_merges += r.false_merges;
    EXPECT_TRUE(netlist::equivalent_up_to_net_renaming(traced, s.source));
  }
  EXPECT_EQ(total.recovered, total.nets);
  EXPECT_EQ(total.false_merges, 0u);
  for (int c = 0; c <= 3; ++c) EXPECT_GT(by_crossings[static_cast<std::size_t>(c)], 0) << c << " crossings";
}

}  // namespace
}  // namespace amskit::trace
