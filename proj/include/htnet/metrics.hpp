#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "htnet/mat.hpp"
#include "htnet/skeleton.hpp"

namespace htnet {

struct MetricsReport {
    double mpjpe = 0.0;    // mm
    double p_mpjpe = 0.0;  // mm
    double pck = 0.0;      // percent, threshold 150 mm
    double auc = 0.0;      // percent, mean PCK over 0..150 mm step 5
    std::array<double, 4> per_pdof_mpjpe{};  // mm per PDoF class
    std::vector<double> per_joint_mpjpe;     // mm per joint

    std::string to_json_text() const;
    static std::string csv_header();
    std::string to_csv_row() const;
};

// Mean Euclidean joint error over frames and joints, in input units.
double mpjpe(std::span<const Mat> pred, std::span<const Mat> gt);

// Best-fit similarity transform (rotation with det +1, positive scale,
// translation) of pred onto gt; returns the transformed pred. Throws on
// point sets of rank < 2.
Mat procrustes_align(const Mat& pred, const Mat& gt);

// mpjpe after per-frame Procrustes alignment.
double p_mpjpe(std::span<const Mat> pred, std::span<const Mat> gt);

// Percent of (frame, joint) errors <= threshold.
double pck(std::span<const Mat> pred, std::span<const Mat> gt, double threshold_mm = 150.0);

// Mean of pck over thresholds 0, 5, ..., 150 mm (31 samples).
double auc(std::span<const Mat> pred, std::span<const Mat> gt);

// Mean joint error per PDoF class {0,1,2,3}.
std::array<double, 4> pdof_breakdown(std::span<const Mat> pred, std::span<const Mat> gt,
                                     const SkeletonSpec& spec);

MetricsReport evaluate_poses(std::span<const Mat> pred, std::span<const Mat> gt,
                             const SkeletonSpec& spec);

}  // namespace htnet
