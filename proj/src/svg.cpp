#include "copush/svg.hpp"

#include "copush/model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace copush {

namespace {

struct Mapper {
  double min_x, max_y, scale;

  double px(double x) const { return (x - min_x) * scale; }
  double py(double y) const { return (max_y - y) * scale; }
};

std::string f3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void polyline(std::ofstream& out, const std::vector<Vec2>& pts, const Mapper& m,
              const char* color, double width) {
  if (pts.size() < 2) return;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
      << "\" points=\"";
  for (const Vec2& p : pts) out << f3(m.px(p.x())) << ',' << f3(m.py(p.y())) << ' ';
  out << "\"/>\n";
}

void circle(std::ofstream& out, const Vec2& c, double r, const Mapper& m,
            const char* stroke, const char* fill, const char* dash = nullptr) {
  out << "<circle cx=\"" << f3(m.px(c.x())) << "\" cy=\"" << f3(m.py(c.y()))
      << "\" r=\"" << f3(r * m.scale) << "\" stroke=\"" << stroke << "\" fill=\""
      << fill << "\"";
  if (dash != nullptr) out << " stroke-dasharray=\"" << dash << "\"";
  out << "/>\n";
}

}  // namespace

void write_overhead_svg(const Scenario& scenario, const TrajectoryLog& log,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write svg: " + path);

  const auto contacts = scenario.planner_model().contacts;
  std::vector<Vec2> object_path;
  std::vector<std::vector<Vec2>> agent_paths(contacts.size());
  for (const TickRecord& tick : log.ticks) {
    object_path.push_back(tick.object.position());
    PlannerState st;
    st.object = tick.object;
    st.d = tick.d;
    for (size_t i = 0; i < contacts.size(); ++i) {
      agent_paths[i].push_back(agent_world_position(st, static_cast<int>(i), contacts));
    }
  }

  double min_x = log.goal_position.x(), max_x = log.goal_position.x();
  double min_y = log.goal_position.y(), max_y = log.goal_position.y();
  auto grow = [&](const Vec2& p, double r) {
    min_x = std::min(min_x, p.x() - r);
    max_x = std::max(max_x, p.x() + r);
    min_y = std::min(min_y, p.y() - r);
    max_y = std::max(max_y, p.y() + r);
  };
  for (const Vec2& p : object_path) grow(p, 0.5);
  for (const auto& ap : agent_paths)
    for (const Vec2& p : ap) grow(p, 0.3);
  for (const ObstacleScript& o : scenario.obstacles) {
    grow(obstacle_update(o, 0.0).center, o.base.radius_object);
    if (!log.ticks.empty()) {
      grow(obstacle_update(o, log.ticks.back().t).center, o.base.radius_object);
    }
  }

  const double margin = 0.5;
  min_x -= margin;
  max_x += margin;
  min_y -= margin;
  max_y += margin;
  const double scale = 640.0 / std::max(max_x - min_x, 1e-6);
  const Mapper m{min_x, max_y, scale};
  const double h = (max_y - min_y) * scale;

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\""
      << f3(h) << "\" viewBox=\"0 0 640 " << f3(h) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (const ObstacleScript& o : scenario.obstacles) {
    const Obstacle start = obstacle_update(o, 0.0);
    circle(out, start.center, start.radius_object, m, "#999", "none", "6,4");
    circle(out, start.center, start.radius_robot, m, "#bbb", "none", "2,4");
    circle(out, start.center, 0.08, m, "#444", "#444");
    if (!o.waypoints.empty() && !log.ticks.empty()) {
      const Obstacle end = obstacle_update(o, log.ticks.back().t);
      std::vector<Vec2> track = {start.center, end.center};
      polyline(out, track, m, "#ccc", 1.0);
      circle(out, end.center, end.radius_object, m, "#999", "none", "6,4");
      circle(out, end.center, 0.08, m, "#777", "#777");
    }
  }

  polyline(out, object_path, m, "#c0392b", 2.0);
  const char* agent_colors[] = {"#2980b9", "#27ae60", "#8e44ad", "#d68910"};
  for (size_t i = 0; i < agent_paths.size(); ++i) {
    polyline(out, agent_paths[i], m, agent_colors[i % 4], 1.2);
  }

  if (!object_path.empty()) circle(out, object_path.front(), 0.08, m, "#000", "#0a0");
  circle(out, log.goal_position, 0.1, m, "#000", "#e22");
  out << "</svg>\n";
}

}  // namespace copush
