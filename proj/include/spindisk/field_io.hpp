#pragma once

#include "spindisk/grid.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spindisk {

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// CSV columns r,theta,re,im plus a sidecar <path>.json with the grid shape.
inline void write_field_csv(const std::string& path, const ComplexField& u, const std::string& metric_preset) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "r,theta,re,im\n";
    const auto& g = u.grid;
    for (int j = 0; j < g.n_r; ++j)
        for (int i = 0; i < g.n_theta; ++i)
            os << format_double(g.r(j)) << ',' << format_double(g.theta(i)) << ',' << format_double(u(j, i).real())
               << ',' << format_double(u(j, i).imag()) << '\n';
    nlohmann::ordered_json side;
    side["n_r"] = g.n_r;
    side["n_theta"] = g.n_theta;
    side["metric_preset"] = metric_preset;
    std::ofstream js(path + ".json", std::ios::binary);
    if (!js) throw std::runtime_error("cannot write " + path + ".json");
    js << side.dump(2) << '\n';
}

inline ComplexField read_field_csv(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) throw std::runtime_error("missing sidecar for " + path);
    auto side = nlohmann::json::parse(js);
    PolarGrid g(side.at("n_r").get<int>(), side.at("n_theta").get<int>());
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    std::string line;
    std::getline(is, line);
    if (line != "r,theta,re,im") throw std::runtime_error("bad CSV header in " + path);
    ComplexField u(g);
    std::size_t k = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (k >= u.size()) throw std::runtime_error("too many rows in " + path);
        std::istringstream ls(line);
        std::string tok[4];
        for (auto& t : tok) std::getline(ls, t, ',');
        u.v[k++] = {std::stod(tok[2]), std::stod(tok[3])};
    }
    if (k != u.size()) throw std::runtime_error("too few rows in " + path);
    return u;
}

} // namespace spindisk
