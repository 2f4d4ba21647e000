#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "htnet/mat.hpp"

namespace htnet {

// One limb chain, ordered root-outward: 1-PDoF joint (hip/shoulder),
// 2-PDoF joint (knee/elbow), 3-PDoF joint (ankle/wrist).
struct Limb {
    int one = -1;
    int two = -1;
    int three = -1;
};

// Body topology: a tree of joints with PDoF labels (hop distance from the
// torso along a limb) and the four limb chains. Immutable after construction;
// the constructor rejects anything that breaks the invariants.
class SkeletonSpec {
public:
    SkeletonSpec(std::string name,
                 std::vector<std::string> joint_names,
                 std::vector<int> parent,
                 std::vector<int> pdof,
                 std::array<Limb, 4> limbs);

    const std::string& name() const { return name_; }
    int joint_count() const { return static_cast<int>(parent_.size()); }
    const std::vector<std::string>& joint_names() const { return joint_names_; }
    const std::vector<int>& parent() const { return parent_; }
    const std::vector<int>& pdof() const { return pdof_; }
    const std::array<Limb, 4>& limbs() const { return limbs_; }
    int root_index() const { return root_; }
    // tree edges (child, parent), one per non-root joint
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }

private:
    std::string name_;
    std::vector<std::string> joint_names_;
    std::vector<int> parent_;
    std::vector<int> pdof_;
    std::array<Limb, 4> limbs_;
    std::vector<std::pair<int, int>> edges_;
    int root_ = -1;
};

// The standard 17-joint skeleton. Index order: 0 hip (root), 1-3 right leg
// (hip, knee, ankle), 4-6 left leg, 7 spine, 8 thorax, 9 neck, 10 head,
// 11-13 left arm (shoulder, elbow, wrist), 14-16 right arm. Limb order:
// right leg, left leg, left arm, right arm.
SkeletonSpec build_h36m17();

// Symmetrically normalized adjacency with self-loops of an undirected graph:
// with A the 0/1 adjacency, returns D^{-1/2} (A+I) D^{-1/2}.
Mat normalized_adjacency(int joint_count, const std::vector<std::pair<int, int>>& edges);
Mat normalized_adjacency(const SkeletonSpec& spec);

struct ReplacementMasks {
    std::vector<bool> mask1;   // 3-PDoF joints
    std::vector<bool> mask2;   // 2- and 3-PDoF joints
    std::vector<int> limb_of;  // limb index for masked joints, -1 elsewhere
};

ReplacementMasks replacement_masks(const SkeletonSpec& spec);

// JSON round-trip so alternate skeletons can be loaded from file
// (schema in docs/formats.md).
SkeletonSpec load_skeleton(const std::string& path);
void save_skeleton(const std::string& path, const SkeletonSpec& spec);
SkeletonSpec skeleton_from_json_text(const std::string& text);
std::string skeleton_to_json_text(const SkeletonSpec& spec);

}  // namespace htnet
