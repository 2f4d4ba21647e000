#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htnet/mat.hpp"

namespace htnet {

// One frame: 2D keypoints in pixels, 3D joints in millimeters with the root
// at the origin.
struct PoseSample {
    Mat p2d;  // N x 2
    Mat p3d;  // N x 3
};

struct CameraModel {
    double fx = 0, fy = 0;  // focal, pixels
    double cx = 0, cy = 0;  // principal point, pixels
};

struct PoseSet {
    std::string skeleton = "h36m17";
    int image_width = 0;
    int image_height = 0;
    std::vector<PoseSample> frames;
};

// PoseSet JSON (schema in docs/formats.md); paths ending in .gz are
// transparently gzip-compressed.
PoseSet load_poseset(const std::string& path);
void save_poseset(const std::string& path, const PoseSet& set);

// Maps pixels to [-1, 1] on x while preserving aspect:
//   x' = (2x - width) / width,  y' = (2y - height) / width
Mat normalize_2d(const Mat& p2d, int image_width, int image_height);

// Camera and root depth used by the synthetic generator.
CameraModel synth_camera();
constexpr double kSynthDepthMm = 5000.0;
constexpr int kSynthImageSize = 1024;

// Samples random joint angles within anatomical ranges on a fixed-bone-length
// 17-joint tree, runs forward kinematics, projects through synth_camera() at
// kSynthDepthMm, and optionally perturbs the 2D points with Gaussian noise
// equivalent to noise_mm at that depth. Deterministic given seed.
PoseSet synth_generate(int n, std::uint64_t seed, double noise_mm);

// Canonical bone lengths (mm) of the generator, indexed by child joint.
const std::vector<double>& synth_bone_lengths();

}  // namespace htnet
