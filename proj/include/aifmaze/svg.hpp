#ifndef AIFMAZE_SVG_HPP
#define AIFMAZE_SVG_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "aifmaze/maze.hpp"

namespace aifmaze {

// Renders the arena with obstacles, the two goal squares and trajectory
// polylines (one color cycle per episode) to an SVG file. Input rows come
// from the trajectory CSV exporter.
inline void render_trajectories_svg(const MazeConfig& cfg,
                                    const std::map<int, std::vector<std::pair<double, double>>>& paths,
                                    const std::string& out_path, double px_per_unit = 24.0) {
    const double W = (cfg.arena.x1 - cfg.arena.x0) * px_per_unit;
    const double H = (cfg.arena.y1 - cfg.arena.y0) * px_per_unit;
    auto X = [&](double x) { return (x - cfg.arena.x0) * px_per_unit; };
    auto Y = [&](double y) { return H - (y - cfg.arena.y0) * px_per_unit; }; // world y up

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H
        << "\" fill=\"#fafafa\" stroke=\"#222\" stroke-width=\"2\"/>\n";

    auto rect = [&](const Rect& r, const char* fill, const char* stroke) {
        svg << "<rect x=\"" << X(r.x0) << "\" y=\"" << Y(r.y1) << "\" width=\""
            << (r.x1 - r.x0) * px_per_unit << "\" height=\"" << (r.y1 - r.y0) * px_per_unit
            << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    };
    rect(cfg.goal_se, "#cdeccd", "#3a7a3a");
    rect(cfg.goal_nw, "#cdd8ec", "#3a4a7a");
    rect(cfg.spawn_band, "#f6e3c5", "none");
    for (const Rect& o : cfg.obstacles) rect(o, "#555", "#333");

    static const char* colors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d68910", "#16a085"};
    int ci = 0;
    for (const auto& [episode, pts] : paths) {
        if (pts.empty()) continue;
        svg << "<polyline fill=\"none\" stroke=\"" << colors[ci % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : pts) svg << X(x) << "," << Y(y) << " ";
        svg << "\"/>\n";
        svg << "<circle cx=\"" << X(pts.front().first) << "\" cy=\"" << Y(pts.front().second)
            << "\" r=\"3\" fill=\"" << colors[ci % 6] << "\"/>\n";
        ++ci;
    }
    svg << "</svg>\n";

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write SVG: " + out_path);
    out << svg.str();
}

// Parses the trajectory CSV produced by the evaluation runs.
inline std::map<int, std::vector<std::pair<double, double>>> read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
    std::map<int, std::vector<std::pair<double, double>>> paths;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < 4) continue;
        paths[std::stoi(cells[0])].emplace_back(std::stod(cells[2]), std::stod(cells[3]));
    }
    return paths;
}

} // namespace aifmaze

#endif
