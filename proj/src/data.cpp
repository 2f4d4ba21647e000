#include "htnet/data.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <zlib.h>

#include "htnet/rng.hpp"

namespace htnet {

namespace {

bool ends_with_gz(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::string read_file(const std::string& path) {
    if (ends_with_gz(path)) {
        gzFile f = gzopen(path.c_str(), "rb");
        if (!f) throw std::runtime_error("cannot open pose file: " + path);
        std::string out;
        char buf[1 << 16];
        int got = 0;
        while ((got = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<size_t>(got));
        const bool bad = got < 0;
        gzclose(f);
        if (bad) throw std::runtime_error("gzip read failed: " + path);
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open pose file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    if (ends_with_gz(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (!f) throw std::runtime_error("cannot write pose file: " + path);
        const bool ok = gzwrite(f, text.data(), static_cast<unsigned>(text.size())) ==
                        static_cast<int>(text.size());
        gzclose(f);
        if (!ok) throw std::runtime_error("gzip write failed: " + path);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write pose file: " + path);
    out << text;
}

int expected_joints(const std::string& skeleton) {
    return skeleton == "h36m17" ? 17 : -1;  // unknown skeletons are self-describing
}

Mat parse_points(const nlohmann::json& j, int cols, const std::string& what) {
    Mat m(static_cast<int>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw std::runtime_error(what + " row " + std::to_string(i) + " has " +
                                     std::to_string(j[i].size()) + " values, expected " +
                                     std::to_string(cols));
        for (int c = 0; c < cols; ++c) {
            const double v = j[i][static_cast<size_t>(c)].get<double>();
            if (!std::isfinite(v))
                throw std::runtime_error(what + " contains a non-finite value at row " +
                                         std::to_string(i));
            m(static_cast<int>(i), c) = v;
        }
    }
    return m;
}

}  // namespace

PoseSet load_poseset(const std::string& path) {
    const std::string text = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("poseset JSON is malformed (" + path + "): " + e.what());
    }

    PoseSet set;
    try {
        set.skeleton = j.at("skeleton").get<std::string>();
        set.image_width = j.at("image_size").at(0).get<int>();
        set.image_height = j.at("image_size").at(1).get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("poseset missing or mistyped field (" + path + "): " + e.what());
    }
    if (set.image_width <= 0 || set.image_height <= 0)
        throw std::runtime_error("poseset image_size must be positive");

    const int want = expected_joints(set.skeleton);
    bool recentered = false;
    for (std::size_t f = 0; f < j.at("frames").size(); ++f) {
        const auto& jf = j.at("frames")[f];
        PoseSample s;
        try {
            s.p2d = parse_points(jf.at("p2d"), 2, "frame " + std::to_string(f) + " p2d");
            s.p3d = parse_points(jf.at("p3d"), 3, "frame " + std::to_string(f) + " p3d");
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("poseset frame " + std::to_string(f) + " is malformed: " + e.what());
        }
        if (s.p2d.rows != s.p3d.rows)
            throw std::runtime_error("frame " + std::to_string(f) + " has " + std::to_string(s.p2d.rows) +
                                     " 2D joints but " + std::to_string(s.p3d.rows) + " 3D joints");
        if (want > 0 && s.p2d.rows != want)
            throw std::runtime_error("frame " + std::to_string(f) + " has " + std::to_string(s.p2d.rows) +
                                     " joints but skeleton '" + set.skeleton + "' requires " +
                                     std::to_string(want));
        if (!set.frames.empty() && s.p2d.rows != set.frames[0].p2d.rows)
            throw std::runtime_error("frame " + std::to_string(f) + " joint count differs from frame 0");

        // joint 0 is the root by convention; re-center if the file is off
        const double r0 = s.p3d(0, 0), r1 = s.p3d(0, 1), r2 = s.p3d(0, 2);
        if (std::abs(r0) > 1e-9 || std::abs(r1) > 1e-9 || std::abs(r2) > 1e-9) {
            for (int i = 0; i < s.p3d.rows; ++i) {
                s.p3d(i, 0) -= r0;
                s.p3d(i, 1) -= r1;
                s.p3d(i, 2) -= r2;
            }
            recentered = true;
        }
        set.frames.push_back(std::move(s));
    }
    if (recentered)
        std::cerr << "warning: " << path << " was not root-relative; frames were re-centered\n";
    return set;
}

void save_poseset(const std::string& path, const PoseSet& set) {
    nlohmann::json j;
    j["skeleton"] = set.skeleton;
    j["image_size"] = {set.image_width, set.image_height};
    auto frames = nlohmann::json::array();
    for (const PoseSample& s : set.frames) {
        nlohmann::json jf;
        auto p2d = nlohmann::json::array();
        for (int i = 0; i < s.p2d.rows; ++i) p2d.push_back({s.p2d(i, 0), s.p2d(i, 1)});
        auto p3d = nlohmann::json::array();
        for (int i = 0; i < s.p3d.rows; ++i) p3d.push_back({s.p3d(i, 0), s.p3d(i, 1), s.p3d(i, 2)});
        jf["p2d"] = std::move(p2d);
        jf["p3d"] = std::move(p3d);
        frames.push_back(std::move(jf));
    }
    j["frames"] = std::move(frames);
    write_file(path, j.dump());
}

Mat normalize_2d(const Mat& p2d, int image_width, int image_height) {
    if (image_width <= 0 || image_height <= 0)
        throw std::invalid_argument("normalize_2d: image size must be positive");
    if (p2d.cols != 2)
        throw std::invalid_argument("normalize_2d: expected N x 2, got " +
                                    shape_str(p2d.rows, p2d.cols));
    Mat out(p2d.rows, 2);
    const double w = static_cast<double>(image_width);
    const double h = static_cast<double>(image_height);
    for (int i = 0; i < p2d.rows; ++i) {
        out(i, 0) = (2.0 * p2d(i, 0) - w) / w;
        out(i, 1) = (2.0 * p2d(i, 1) - h) / w;  // both axes scaled by width/2
    }
    return out;
}

CameraModel synth_camera() { return {1145.0, 1145.0, 512.0, 512.0}; }

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

Mat3 identity3() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3 mul3(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Vec3 apply3(const Mat3& a, const Vec3& v) {
    Vec3 out{};
    for (int i = 0; i < 3; ++i) out[i] = a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2];
    return out;
}

Mat3 rot_x(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{1, 0, 0}, {0, c, -s}, {0, s, c}}};
}

Mat3 rot_y(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{c, 0, s}, {0, 1, 0}, {-s, 0, c}}};
}

Mat3 rot_z(double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

// Rest offsets per joint (mm), camera-like frame: +x right, +y down,
// +z away from the camera. Arms hang, legs point down.
const std::array<Vec3, 17> kRestOffset = {{
    {0, 0, 0},       // 0 hip (root)
    {-130, 0, 0},    // 1 r_hip
    {0, 450, 0},     // 2 r_knee
    {0, 430, 0},     // 3 r_ankle
    {130, 0, 0},     // 4 l_hip
    {0, 450, 0},     // 5 l_knee
    {0, 430, 0},     // 6 l_ankle
    {0, -250, 0},    // 7 spine
    {0, -250, 0},    // 8 thorax
    {0, -120, 0},    // 9 neck
    {0, -130, 0},    // 10 head
    {180, 0, 0},     // 11 l_shoulder
    {0, 280, 0},     // 12 l_elbow
    {0, 250, 0},     // 13 l_wrist
    {-180, 0, 0},    // 14 r_shoulder
    {0, 280, 0},     // 15 r_elbow
    {0, 250, 0},     // 16 r_wrist
}};

const std::array<int, 17> kParent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};

struct AngleRange {
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0, z_lo = 0, z_hi = 0;
};

// Per-joint local rotation ranges (radians), applied to the joint's subtree.
// Leaf joints get no rotation; knees and elbows are hinges.
AngleRange joint_range(int j) {
    switch (j) {
        case 0: return {-0.25, 0.25, -M_PI, M_PI, -0.25, 0.25};  // whole body
        case 1:
        case 4: return {-0.6, 0.6, 0, 0, -0.4, 0.4};             // hips
        case 2:
        case 5: return {0.0, 1.4, 0, 0, 0, 0};                   // knees
        case 7:
        case 8:
        case 9: return {-0.15, 0.15, -0.3, 0.3, -0.15, 0.15};    // torso chain
        case 11:
        case 14: return {-0.9, 0.9, 0, 0, -0.9, 0.9};            // shoulders
        case 12:
        case 15: return {0.0, 2.0, 0, 0, 0, 0};                  // elbows
        default: return {};                                       // leaves
    }
}

}  // namespace

const std::vector<double>& synth_bone_lengths() {
    static const std::vector<double> lengths = [] {
        std::vector<double> out(17, 0.0);
        for (int j = 1; j < 17; ++j) {
            const Vec3& o = kRestOffset[static_cast<size_t>(j)];
            out[static_cast<size_t>(j)] = std::sqrt(o[0] * o[0] + o[1] * o[1] + o[2] * o[2]);
        }
        return out;
    }();
    return lengths;
}

PoseSet synth_generate(int n, std::uint64_t seed, double noise_mm) {
    if (n < 1) throw std::invalid_argument("synth_generate: n must be >= 1");
    Rng rng(seed);
    const CameraModel cam = synth_camera();
    const double sigma_px = noise_mm * cam.fx / kSynthDepthMm;

    PoseSet set;
    set.skeleton = "h36m17";
    set.image_width = kSynthImageSize;
    set.image_height = kSynthImageSize;

    for (int f = 0; f < n; ++f) {
        std::array<Mat3, 17> acc;
        std::array<Vec3, 17> pos{};
        for (int j = 0; j < 17; ++j) {
            const AngleRange r = joint_range(j);
            const double ax = rng.uniform(r.x_lo, r.x_hi);
            const double ay = rng.uniform(r.y_lo, r.y_hi);
            const double az = rng.uniform(r.z_lo, r.z_hi);
            const Mat3 local = mul3(rot_x(ax), mul3(rot_y(ay), rot_z(az)));
            if (j == 0) {
                acc[0] = local;
                pos[0] = {0, 0, 0};
            } else {
                const int p = kParent[static_cast<size_t>(j)];
                const Vec3 off = apply3(acc[static_cast<size_t>(p)], kRestOffset[static_cast<size_t>(j)]);
                pos[static_cast<size_t>(j)] = {pos[static_cast<size_t>(p)][0] + off[0],
                                               pos[static_cast<size_t>(p)][1] + off[1],
                                               pos[static_cast<size_t>(p)][2] + off[2]};
                acc[static_cast<size_t>(j)] = mul3(acc[static_cast<size_t>(p)], local);
            }
        }

        PoseSample s;
        s.p3d = Mat(17, 3);
        s.p2d = Mat(17, 2);
        for (int j = 0; j < 17; ++j) {
            s.p3d(j, 0) = pos[static_cast<size_t>(j)][0];
            s.p3d(j, 1) = pos[static_cast<size_t>(j)][1];
            s.p3d(j, 2) = pos[static_cast<size_t>(j)][2];
            const double z = pos[static_cast<size_t>(j)][2] + kSynthDepthMm;
            s.p2d(j, 0) = cam.fx * pos[static_cast<size_t>(j)][0] / z + cam.cx;
            s.p2d(j, 1) = cam.fy * pos[static_cast<size_t>(j)][1] / z + cam.cy;
        }
        for (int j = 0; j < 17; ++j) {
            const double gx = rng.gaussian();
            const double gy = rng.gaussian();
            if (sigma_px > 0.0) {
                s.p2d(j, 0) += sigma_px * gx;
                s.p2d(j, 1) += sigma_px * gy;
            }
        }
        set.frames.push_back(std::move(s));
    }
    return set;
}

}  // namespace htnet
