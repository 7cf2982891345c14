#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"

// On-disk formats:
//   trajectory  "timestamp tx ty tz qx qy qz qw" per line, '#' comments
//   PCD v0.7    ASCII only, FIELDS "x y z" or "x y z rgb"
//               (rgb packed as 0x00RRGGBB reinterpreted as float32)
//   XYZ         "x y z" or "x y z r g b" per line
//   PGM         plain P2 maxval 255 for 2D grids; P2/P5 16-bit in
//               millimeters (0 = invalid) for depth images.
//
// Coordinates are written with 9 decimal places so that parse(write(x))
// recovers positions to 1e-9. Packed rgb floats are written with 9
// significant digits, which round-trips float32 bit patterns exactly.

namespace mapeval {

namespace detail {

inline std::string fmt_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

inline std::string fmt_float9(float v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline bool blank(const std::string& line) {
    for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

inline std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline double parse_double(const std::string& tok, int line_no) {
    std::istringstream ss(tok);
    double v = 0.0;
    ss >> v;
    if (ss.fail() || !ss.eof() || !std::isfinite(v)) {
        throw ParseError("expected a finite number, got '" + tok + "'", line_no);
    }
    return v;
}

inline std::uint32_t pack_rgb(const Rgb& c) {
    return (static_cast<std::uint32_t>(c[0]) << 16) |
           (static_cast<std::uint32_t>(c[1]) << 8) |
           static_cast<std::uint32_t>(c[2]);
}

inline Rgb unpack_rgb(std::uint32_t bits) {
    return {static_cast<std::uint8_t>((bits >> 16) & 0xff),
            static_cast<std::uint8_t>((bits >> 8) & 0xff),
            static_cast<std::uint8_t>(bits & 0xff)};
}

}  // namespace detail

// ---------------------------------------------------------------- trajectory

inline Trajectory parse_trajectory(std::istream& in) {
    Trajectory traj;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::blank(line) || line[0] == '#') continue;
        const auto toks = detail::split_ws(line);
        if (toks.size() != 8) {
            throw ParseError("expected 8 fields (timestamp tx ty tz qx qy qz qw), got " +
                                 std::to_string(toks.size()),
                             line_no);
        }
        double v[8];
        for (int i = 0; i < 8; ++i) v[i] = detail::parse_double(toks[i], line_no);
        Pose pose;
        try {
            pose = Pose(v[0], Vec3(v[1], v[2], v[3]), Quat(v[7], v[4], v[5], v[6]));
        } catch (const InvalidInputError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!traj.poses.empty() && !(pose.timestamp > traj.poses.back().timestamp)) {
            throw ParseError("timestamps not strictly increasing", line_no);
        }
        traj.poses.push_back(pose);
    }
    return traj;
}

inline void write_trajectory(const Trajectory& traj, std::ostream& out) {
    out << "# timestamp tx ty tz qx qy qz qw\n";
    for (const Pose& p : traj.poses) {
        const Quat& q = p.orientation;
        out << detail::fmt_coord(p.timestamp) << ' ' << detail::fmt_coord(p.position.x())
            << ' ' << detail::fmt_coord(p.position.y()) << ' '
            << detail::fmt_coord(p.position.z()) << ' ' << detail::fmt_coord(q.x()) << ' '
            << detail::fmt_coord(q.y()) << ' ' << detail::fmt_coord(q.z()) << ' '
            << detail::fmt_coord(q.w()) << '\n';
    }
}

// ----------------------------------------------------------------------- PCD

/// Parse an ASCII PCD v0.7 document with FIELDS "x y z" or "x y z rgb".
/// Errors name the violated header key. Binary DATA is rejected.
inline PointCloud parse_pcd(std::istream& in) {
    std::string line;
    int line_no = 0;

    std::vector<std::string> fields;
    std::vector<std::string> types;
    long long points = -1, width = -1, height = -1;
    bool saw_size = false, saw_type = false, saw_count = false, saw_data = false;

    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::blank(line) || line[0] == '#') continue;
        const auto toks = detail::split_ws(line);
        const std::string& key = toks[0];
        if (key == "VERSION") {
            continue;
        } else if (key == "FIELDS") {
            fields.assign(toks.begin() + 1, toks.end());
        } else if (key == "SIZE") {
            saw_size = true;
            if (!fields.empty() && toks.size() - 1 != fields.size())
                throw ParseError("SIZE entry count does not match FIELDS", line_no);
        } else if (key == "TYPE") {
            saw_type = true;
            types.assign(toks.begin() + 1, toks.end());
            if (!fields.empty() && types.size() != fields.size())
                throw ParseError("TYPE entry count does not match FIELDS", line_no);
        } else if (key == "COUNT") {
            saw_count = true;
        } else if (key == "WIDTH") {
            if (toks.size() != 2) throw ParseError("WIDTH expects one value", line_no);
            width = std::stoll(toks[1]);
        } else if (key == "HEIGHT") {
            if (toks.size() != 2) throw ParseError("HEIGHT expects one value", line_no);
            height = std::stoll(toks[1]);
        } else if (key == "VIEWPOINT") {
            continue;
        } else if (key == "POINTS") {
            if (toks.size() != 2) throw ParseError("POINTS expects one value", line_no);
            try {
                points = std::stoll(toks[1]);
            } catch (const std::exception&) {
                throw ParseError("POINTS value is not an integer", line_no);
            }
        } else if (key == "DATA") {
            saw_data = true;
            if (toks.size() != 2 || toks[1] != "ascii")
                throw ParseError("DATA must be ascii (binary PCD is not supported)", line_no);
            break;
        } else {
            throw ParseError("unknown PCD header key '" + key + "'", line_no);
        }
    }

    if (fields.empty()) throw ParseError("missing PCD header field FIELDS");
    if (!saw_size) throw ParseError("missing PCD header field SIZE");
    if (!saw_type) throw ParseError("missing PCD header field TYPE");
    if (!saw_count) throw ParseError("missing PCD header field COUNT");
    if (width < 0) throw ParseError("missing PCD header field WIDTH");
    if (height < 0) throw ParseError("missing PCD header field HEIGHT");
    if (points < 0) throw ParseError("missing PCD header field POINTS");
    if (!saw_data) throw ParseError("missing PCD header field DATA");

    const bool with_rgb = fields.size() == 4 && fields[0] == "x" && fields[1] == "y" &&
                          fields[2] == "z" && fields[3] == "rgb";
    const bool plain = fields.size() == 3 && fields[0] == "x" && fields[1] == "y" &&
                       fields[2] == "z";
    if (!with_rgb && !plain) {
        throw ParseError("FIELDS must be 'x y z' or 'x y z rgb'");
    }
    if (width * height != points) {
        throw ParseError("WIDTH*HEIGHT does not equal POINTS");
    }
    // PCL wrote packed rgb as float historically and as uint32 in newer
    // files; accept both on read.
    const bool rgb_is_float = !with_rgb || types.size() < 4 || types[3] == "F";

    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(points));
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::blank(line)) continue;
        const auto toks = detail::split_ws(line);
        const std::size_t want = with_rgb ? 4 : 3;
        if (toks.size() != want) {
            throw ParseError("data row has " + std::to_string(toks.size()) +
                                 " fields, header FIELDS declares " + std::to_string(want),
                             line_no);
        }
        if (static_cast<long long>(cloud.points.size()) == points) {
            throw ParseError("more data rows than POINTS declares", line_no);
        }
        Point3 p(detail::parse_double(toks[0], line_no), detail::parse_double(toks[1], line_no),
                 detail::parse_double(toks[2], line_no));
        if (with_rgb) {
            const double raw = detail::parse_double(toks[3], line_no);
            std::uint32_t bits;
            if (rgb_is_float) {
                bits = std::bit_cast<std::uint32_t>(static_cast<float>(raw));
            } else {
                bits = static_cast<std::uint32_t>(raw);
            }
            p.color = detail::unpack_rgb(bits);
        }
        cloud.points.push_back(p);
    }
    if (static_cast<long long>(cloud.points.size()) != points) {
        throw ParseError("POINTS declares " + std::to_string(points) + " but body has " +
                         std::to_string(cloud.points.size()) + " rows");
    }
    return cloud;
}

/// Write ASCII PCD v0.7. The rgb field is emitted only when every point
/// carries a color. Frame tags are not representable in PCD and are
/// dropped.
inline void write_pcd(const PointCloud& cloud, std::ostream& out) {
    bool with_rgb = !cloud.empty();
    for (const Point3& p : cloud.points) {
        if (!p.color) {
            with_rgb = false;
            break;
        }
    }
    const std::size_t n = cloud.size();
    out << "# .PCD v0.7 - Point Cloud Data file format\n";
    out << "VERSION 0.7\n";
    if (with_rgb) {
        out << "FIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n";
    } else {
        out << "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n";
    }
    out << "WIDTH " << n << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
    out << "POINTS " << n << "\nDATA ascii\n";
    for (const Point3& p : cloud.points) {
        out << detail::fmt_coord(p.xyz.x()) << ' ' << detail::fmt_coord(p.xyz.y()) << ' '
            << detail::fmt_coord(p.xyz.z());
        if (with_rgb) {
            const float f = std::bit_cast<float>(detail::pack_rgb(*p.color));
            out << ' ' << detail::fmt_float9(f);
        }
        out << '\n';
    }
}

// ----------------------------------------------------------------------- XYZ

/// Parse "x y z" or "x y z r g b" lines; the first data line fixes the
/// arity for the whole file. '#' comment lines are skipped.
inline PointCloud parse_xyz(std::istream& in) {
    PointCloud cloud;
    std::string line;
    int line_no = 0;
    int arity = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::blank(line) || line[0] == '#') continue;
        const auto toks = detail::split_ws(line);
        if (toks.size() != 3 && toks.size() != 6) {
            throw ParseError("expected 3 or 6 fields, got " + std::to_string(toks.size()),
                             line_no);
        }
        if (arity == 0) arity = static_cast<int>(toks.size());
        if (static_cast<int>(toks.size()) != arity) {
            throw ParseError("mixed 3- and 6-field lines", line_no);
        }
        Point3 p(detail::parse_double(toks[0], line_no), detail::parse_double(toks[1], line_no),
                 detail::parse_double(toks[2], line_no));
        if (arity == 6) {
            Rgb c{};
            for (int i = 0; i < 3; ++i) {
                const double v = detail::parse_double(toks[3 + i], line_no);
                if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
                    throw ParseError("color component must be an integer in [0,255]", line_no);
                }
                c[i] = static_cast<std::uint8_t>(v);
            }
            p.color = c;
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

inline void write_xyz(const PointCloud& cloud, std::ostream& out) {
    bool with_rgb = !cloud.empty();
    for (const Point3& p : cloud.points) {
        if (!p.color) {
            with_rgb = false;
            break;
        }
    }
    for (const Point3& p : cloud.points) {
        out << detail::fmt_coord(p.xyz.x()) << ' ' << detail::fmt_coord(p.xyz.y()) << ' '
            << detail::fmt_coord(p.xyz.z());
        if (with_rgb) {
            out << ' ' << int((*p.color)[0]) << ' ' << int((*p.color)[1]) << ' '
                << int((*p.color)[2]);
        }
        out << '\n';
    }
}

// ----------------------------------------------------------------------- PGM

/// Plain (P2) PGM of a 2D occupancy grid: occupied cells black (0), free
/// white (255). Row 0 is the top of the image and maps to the grid's
/// highest y index; columns run with +x.
inline void write_grid_pgm(const OccupancyGrid2D& grid, std::ostream& out) {
    const std::int64_t w = grid.width();
    const std::int64_t h = grid.height();
    out << "P2\n" << w << ' ' << h << "\n255\n";
    for (std::int64_t r = 0; r < h; ++r) {
        const std::int64_t y = grid.min_y() + (h - 1 - r);
        for (std::int64_t c = 0; c < w; ++c) {
            const std::int64_t x = grid.min_x() + c;
            out << (grid.contains({x, y}) ? 0 : 255);
            out << (c + 1 == w ? '\n' : ' ');
        }
    }
}

/// Raw 16-bit depth image as stored in PGM files (values in millimeters,
/// 0 meaning no return).
struct DepthImage {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::vector<std::uint16_t> samples;  // row-major

    std::uint16_t at(int row, int col) const {
        return samples[static_cast<std::size_t>(row) * width + col];
    }
};

namespace detail {

inline std::string next_pgm_token(std::istream& in) {
    std::string tok;
    while (true) {
        const int c = in.peek();
        if (c == EOF) throw ParseError("unexpected end of PGM header");
        if (c == '#') {
            std::string junk;
            std::getline(in, junk);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    while (true) {
        const int c = in.peek();
        if (c == EOF || std::isspace(c)) break;
        tok.push_back(static_cast<char>(in.get()));
    }
    return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
    const std::string tok = next_pgm_token(in);
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("PGM ") + what + " is not an integer: '" + tok + "'");
    }
}

}  // namespace detail

/// Read a P2 (ascii) or P5 (binary) PGM. P5 samples wider than 8 bits are
/// big-endian per the Netpbm convention.
inline DepthImage parse_depth_pgm(std::istream& in) {
    const std::string magic = detail::next_pgm_token(in);
    if (magic != "P2" && magic != "P5") {
        throw ParseError("not a PGM stream (magic '" + magic + "')");
    }
    DepthImage img;
    img.width = detail::pgm_int(in, "width");
    img.height = detail::pgm_int(in, "height");
    img.maxval = detail::pgm_int(in, "maxval");
    if (img.width <= 0 || img.height <= 0) throw ParseError("PGM dimensions must be positive");
    if (img.maxval <= 0 || img.maxval > 65535) throw ParseError("PGM maxval out of range");
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    img.samples.resize(n);
    if (magic == "P2") {
        for (std::size_t i = 0; i < n; ++i) {
            img.samples[i] = static_cast<std::uint16_t>(detail::pgm_int(in, "sample"));
        }
    } else {
        in.get();  // single whitespace after maxval
        const int bytes = img.maxval > 255 ? 2 : 1;
        std::vector<char> raw(n * bytes);
        in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
        if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
            throw ParseError("PGM data truncated");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (bytes == 2) {
                const auto hi = static_cast<std::uint8_t>(raw[2 * i]);
                const auto lo = static_cast<std::uint8_t>(raw[2 * i + 1]);
                img.samples[i] = static_cast<std::uint16_t>((hi << 8) | lo);
            } else {
                img.samples[i] = static_cast<std::uint8_t>(raw[i]);
            }
        }
    }
    return img;
}

// ------------------------------------------------------------ file wrappers

inline Trajectory load_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trajectory file: " + path);
    return parse_trajectory(in);
}

inline void save_trajectory(const Trajectory& traj, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    write_trajectory(traj, out);
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

/// Load a point cloud, picking the parser from the file extension
/// (.pcd -> PCD, anything else -> XYZ text).
inline PointCloud load_point_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open point cloud file: " + path);
    if (has_suffix(path, ".pcd") || has_suffix(path, ".PCD")) return parse_pcd(in);
    return parse_xyz(in);
}

inline void save_point_cloud(const PointCloud& cloud, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    if (has_suffix(path, ".pcd") || has_suffix(path, ".PCD")) {
        write_pcd(cloud, out);
    } else {
        write_xyz(cloud, out);
    }
}

inline DepthImage load_depth_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open depth image: " + path);
    return parse_depth_pgm(in);
}

}  // namespace mapeval
