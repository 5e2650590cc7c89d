#include "hazerp/montage.hpp"

#include "hazerp/error.hpp"
#include "hazerp/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace hazerp {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double rad(double deg) { return deg * kPi / 180.0; }

// Inclination is measured from the vertex (Cz), azimuth from the nasion
// meridian; positive azimuth sweeps toward the left hemisphere.
Vec3 sphere_point(double inclination_deg, double azimuth_deg) {
    double t = rad(inclination_deg);
    double p = rad(azimuth_deg);
    return {-std::sin(t) * std::sin(p), std::sin(t) * std::cos(p), std::cos(t)};
}

Vec3 normalized(Vec3 v) {
    double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    return {v.x / n, v.y / n, v.z / n};
}

// Great-circle interpolation from a toward b; f in [0, 1].
Vec3 slerp(const Vec3& a, const Vec3& b, double f) {
    double dot = a.x * b.x + a.y * b.y + a.z * b.z;
    double omega = std::acos(std::clamp(dot, -1.0, 1.0));
    double sa = std::sin((1.0 - f) * omega);
    double sb = std::sin(f * omega);
    double s = std::sin(omega);
    return normalized({(sa * a.x + sb * b.x) / s,
                       (sa * a.y + sb * b.y) / s,
                       (sa * a.z + sb * b.z) / s});
}

Vec3 mirror_x(const Vec3& v) { return {-v.x, v.y, v.z}; }

void add_pair(Montage& m, const std::string& left, const std::string& right, const Vec3& left_pos) {
    m.entries[left] = left_pos;
    m.entries[right] = mirror_x(left_pos);
}

} // namespace

Montage builtin_montage() {
    Montage m;

    // Outer ring sits at 72 degrees inclination, sites every 18 degrees of
    // azimuth starting at FPz on the nasion meridian.
    m.entries["FPz"] = sphere_point(72.0, 0.0);
    m.entries["Oz"] = sphere_point(72.0, 180.0);
    const char* ring_left[] = {"FP1", "AF7", "F7", "FT7", "T7", "TP7", "P7", "PO7", "O1"};
    const char* ring_right[] = {"FP2", "AF8", "F8", "FT8", "T8", "TP8", "P8", "PO8", "O2"};
    for (int i = 0; i < 9; ++i) {
        add_pair(m, ring_left[i], ring_right[i], sphere_point(72.0, 18.0 * (i + 1)));
    }

    // Midline sites every 18 degrees of inclination between FPz and Oz.
    m.entries["AFz"] = sphere_point(54.0, 0.0);
    m.entries["Fz"] = sphere_point(36.0, 0.0);
    m.entries["FCz"] = sphere_point(18.0, 0.0);
    m.entries["Cz"] = sphere_point(0.0, 0.0);
    m.entries["CPz"] = sphere_point(18.0, 180.0);
    m.entries["Pz"] = sphere_point(36.0, 180.0);
    m.entries["POz"] = sphere_point(54.0, 180.0);

    // Interior sites lie on the great-circle arc from the row's midline site
    // to its outer-ring site, at quarter-arc fractions.
    struct Row {
        const char* mid;
        const char* ring;
        const char* quarter;       // 1/4 of the way out
        const char* half;          // 2/4
        const char* three_quarter; // 3/4
    };
    const Row rows[] = {
        {"AFz", "AF7", nullptr, "AF3", nullptr},
        {"Fz", "F7", "F1", "F3", "F5"},
        {"FCz", "FT7", "FC1", "FC3", "FC5"},
        {"Cz", "T7", "C1", "C3", "C5"},
        {"CPz", "TP7", "CP1", "CP3", "CP5"},
        {"Pz", "P7", "P1", "P3", "P5"},
        {"POz", "PO7", nullptr, "PO3", nullptr},
    };
    for (const Row& row : rows) {
        Vec3 a = m.entries.at(row.mid);
        Vec3 b = m.entries.at(row.ring);
        struct Frac {
            const char* name;
            double f;
        };
        const Frac fracs[] = {{row.quarter, 0.25}, {row.half, 0.5}, {row.three_quarter, 0.75}};
        for (const Frac& fr : fracs) {
            if (!fr.name) continue;
            std::string left = fr.name;
            std::string right = left;
            // Left interior names end in an odd digit; the homologue is one up.
            right.back() = static_cast<char>(right.back() + 1);
            add_pair(m, left, right, slerp(a, b, fr.f));
        }
    }

    // Mastoids idealized at the TP9/TP10 positions: the TP meridian extended
    // down to the equator of the sphere.
    add_pair(m, "M1", "M2", sphere_point(90.0, 108.0));

    return m;
}

Montage read_montage(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::MissingFile, "cannot open montage file: " + path);
    Montage m;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields = split_csv(line);
        if (fields.size() != 4) {
            raise(ErrorCode::SchemaError,
                  path + ":" + std::to_string(line_no) + ": expected name,x,y,z");
        }
        const std::string& name = fields[0];
        if (name.empty()) {
            raise(ErrorCode::SchemaError, path + ":" + std::to_string(line_no) + ": empty channel name");
        }
        if (m.entries.count(name)) {
            raise(ErrorCode::SchemaError,
                  path + ":" + std::to_string(line_no) + ": duplicate channel " + name);
        }
        const std::string where = path + ":" + std::to_string(line_no);
        Vec3 v{parse_double(fields[1], where), parse_double(fields[2], where),
               parse_double(fields[3], where)};
        double norm = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
        if (std::abs(norm - 1.0) > 1e-6) {
            raise(ErrorCode::SchemaError,
                  path + ":" + std::to_string(line_no) + ": coordinate for " + name +
                      " is not unit-norm");
        }
        // Stored as-is so write/read round trips bit-identically; distance
        // computations are scale-invariant.
        m.entries[name] = v;
    }
    if (m.entries.empty()) raise(ErrorCode::SchemaError, path + ": montage file has no rows");
    return m;
}

void write_montage(const Montage& montage, const std::string& path) {
    std::ostringstream out;
    for (const auto& [name, pos] : montage.entries) {
        out << name << ',' << format_double(pos.x) << ',' << format_double(pos.y) << ','
            << format_double(pos.z) << '\n';
    }
    write_file_atomic(path, out.str());
}

} // namespace hazerp
