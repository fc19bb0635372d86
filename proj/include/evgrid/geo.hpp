#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "evgrid/errors.hpp"

namespace evgrid {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dist2(Vec2 a, Vec2 b) { return dot(a - b, a - b); }
inline double dist(Vec2 a, Vec2 b) { return std::sqrt(dist2(a, b)); }

struct LatLon {
    double lat = 0.0, lon = 0.0;
};

// Equirectangular projection about a fixed reference point. One projection
// instance is built per region and reused for every point so planar
// distances are consistent across modules.
class Projection {
  public:
    Projection() = default;
    Projection(double lat0_deg, double lon0_deg) : lat0_(lat0_deg), lon0_(lon0_deg) {
        cos_lat0_ = std::cos(lat0_ * kDegToRad);
    }

    static Projection about_centroid(const std::vector<LatLon>& pts) {
        if (pts.empty()) return Projection(0.0, 0.0);
        double sla = 0.0, slo = 0.0;
        for (const auto& p : pts) {
            sla += p.lat;
            slo += p.lon;
        }
        return Projection(sla / static_cast<double>(pts.size()), slo / static_cast<double>(pts.size()));
    }

    Vec2 to_plane(LatLon p) const {
        return {kEarthRadiusM * cos_lat0_ * (p.lon - lon0_) * kDegToRad,
                kEarthRadiusM * (p.lat - lat0_) * kDegToRad};
    }

    LatLon to_latlon(Vec2 v) const {
        return {lat0_ + v.y / kEarthRadiusM / kDegToRad,
                lon0_ + v.x / (kEarthRadiusM * cos_lat0_) / kDegToRad};
    }

    static constexpr double kEarthRadiusM = 6371000.0;
    static constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

  private:
    double lat0_ = 0.0, lon0_ = 0.0, cos_lat0_ = 1.0;
};

struct BBox {
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    bool contains(Vec2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
    double area() const { return (xmax - xmin) * (ymax - ymin); }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }

    static BBox around(const std::vector<Vec2>& pts, double margin_fraction) {
        BBox b;
        b.xmin = b.ymin = std::numeric_limits<double>::infinity();
        b.xmax = b.ymax = -std::numeric_limits<double>::infinity();
        for (const auto& p : pts) {
            b.xmin = std::min(b.xmin, p.x);
            b.xmax = std::max(b.xmax, p.x);
            b.ymin = std::min(b.ymin, p.y);
            b.ymax = std::max(b.ymax, p.y);
        }
        const double mx = std::max(1.0, b.width()) * margin_fraction;
        const double my = std::max(1.0, b.height()) * margin_fraction;
        b.xmin -= mx;
        b.xmax += mx;
        b.ymin -= my;
        b.ymax += my;
        return b;
    }
};

}  // namespace evgrid
