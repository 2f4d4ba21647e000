#include "htnet/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace htnet {

namespace {

[[noreturn]] void reject(const std::string& why) {
    throw std::invalid_argument("SkeletonSpec: " + why);
}

}  // namespace

SkeletonSpec::SkeletonSpec(std::string name,
                           std::vector<std::string> joint_names,
                           std::vector<int> parent,
                           std::vector<int> pdof,
                           std::array<Limb, 4> limbs)
    : name_(std::move(name)),
      joint_names_(std::move(joint_names)),
      parent_(std::move(parent)),
      pdof_(std::move(pdof)),
      limbs_(limbs) {
    const int n = joint_count();
    if (n < 13) reject("needs at least 13 joints (4 limbs + root), got " + std::to_string(n));
    if (static_cast<int>(joint_names_.size()) != n)
        reject(std::to_string(joint_names_.size()) + " names for " + std::to_string(n) + " joints");
    if (static_cast<int>(pdof_.size()) != n)
        reject(std::to_string(pdof_.size()) + " pdof labels for " + std::to_string(n) + " joints");

    for (int i = 0; i < n; ++i) {
        if (parent_[i] < 0 || parent_[i] >= n)
            reject("parent of joint " + std::to_string(i) + " out of range");
        if (parent_[i] == i) {
            if (root_ != -1) reject("multiple roots (" + std::to_string(root_) + ", " + std::to_string(i) + ")");
            root_ = i;
        }
    }
    if (root_ == -1) reject("no root joint (parent[i] == i)");

    // parent links must form a tree: N-1 edges, every joint reaching the root
    for (int i = 0; i < n; ++i) {
        if (i == root_) continue;
        int j = i, hops = 0;
        while (j != root_) {
            j = parent_[j];
            if (++hops > n) reject("parent links contain a cycle at joint " + std::to_string(i));
        }
        edges_.emplace_back(i, parent_[i]);
    }

    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        if (pdof_[i] < 0 || pdof_[i] > 3) reject("pdof label out of {0,1,2,3} at joint " + std::to_string(i));
        ++counts[pdof_[i]];
    }
    if (counts[1] != 4 || counts[2] != 4 || counts[3] != 4)
        reject("pdof class sizes must be 4/4/4 for classes 1/2/3, got " + std::to_string(counts[1]) + "/" +
               std::to_string(counts[2]) + "/" + std::to_string(counts[3]));
    if (counts[0] != n - 12) reject("all non-limb joints must be pdof 0");

    for (std::size_t l = 0; l < limbs_.size(); ++l) {
        const Limb& limb = limbs_[l];
        for (int j : {limb.one, limb.two, limb.three})
            if (j < 0 || j >= n) reject("limb " + std::to_string(l) + " references joint out of range");
        if (pdof_[limb.one] != 1 || pdof_[limb.two] != 2 || pdof_[limb.three] != 3)
            reject("limb " + std::to_string(l) + " must be ordered (1,2,3)-PDoF");
        if (parent_[limb.three] != limb.two)
            reject("3-PDoF joint " + std::to_string(limb.three) + " must hang off its limb's 2-PDoF joint");
        if (parent_[limb.two] != limb.one)
            reject("2-PDoF joint " + std::to_string(limb.two) + " must hang off its limb's 1-PDoF joint");
    }
    // the 12 limb joints must be distinct, i.e. they cover every pdof>0 joint
    std::vector<bool> seen(static_cast<size_t>(n), false);
    for (const Limb& limb : limbs_)
        for (int j : {limb.one, limb.two, limb.three}) {
            if (seen[static_cast<size_t>(j)]) reject("joint " + std::to_string(j) + " appears in two limbs");
            seen[static_cast<size_t>(j)] = true;
        }
}

SkeletonSpec build_h36m17() {
    std::vector<std::string> names = {
        "hip",      "r_hip",     "r_knee", "r_ankle", "l_hip",   "l_knee",
        "l_ankle",  "spine",     "thorax", "neck",    "head",    "l_shoulder",
        "l_elbow",  "l_wrist",   "r_shoulder", "r_elbow", "r_wrist"};
    std::vector<int> parent = {0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15};
    std::vector<int> pdof = {0, 1, 2, 3, 1, 2, 3, 0, 0, 0, 0, 1, 2, 3, 1, 2, 3};
    std::array<Limb, 4> limbs = {{{1, 2, 3}, {4, 5, 6}, {11, 12, 13}, {14, 15, 16}}};
    return SkeletonSpec("h36m17", std::move(names), std::move(parent), std::move(pdof), limbs);
}

Mat normalized_adjacency(int joint_count, const std::vector<std::pair<int, int>>& edges) {
    if (joint_count <= 0) throw std::invalid_argument("normalized_adjacency: empty graph");
    Mat a(joint_count, joint_count);
    for (auto [i, j] : edges) {
        if (i < 0 || i >= joint_count || j < 0 || j >= joint_count)
            throw std::invalid_argument("normalized_adjacency: edge (" + std::to_string(i) + "," +
                                        std::to_string(j) + ") out of range for " +
                                        std::to_string(joint_count) + " joints");
        a(i, j) = 1.0;
        a(j, i) = 1.0;
    }
    for (int i = 0; i < joint_count; ++i) a(i, i) = 1.0;  // self loops

    std::vector<double> dinv(static_cast<size_t>(joint_count));
    for (int i = 0; i < joint_count; ++i) {
        double deg = 0.0;
        for (int j = 0; j < joint_count; ++j) deg += a(i, j);
        dinv[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
    }
    Mat out(joint_count, joint_count);
    for (int i = 0; i < joint_count; ++i)
        for (int j = 0; j < joint_count; ++j)
            out(i, j) = dinv[static_cast<size_t>(i)] * a(i, j) * dinv[static_cast<size_t>(j)];
    return out;
}

Mat normalized_adjacency(const SkeletonSpec& spec) {
    return normalized_adjacency(spec.joint_count(), spec.edges());
}

ReplacementMasks replacement_masks(const SkeletonSpec& spec) {
    const int n = spec.joint_count();
    ReplacementMasks m;
    m.mask1.assign(static_cast<size_t>(n), false);
    m.mask2.assign(static_cast<size_t>(n), false);
    m.limb_of.assign(static_cast<size_t>(n), -1);
    for (std::size_t l = 0; l < spec.limbs().size(); ++l) {
        const Limb& limb = spec.limbs()[l];
        m.mask1[static_cast<size_t>(limb.three)] = true;
        m.mask2[static_cast<size_t>(limb.two)] = true;
        m.mask2[static_cast<size_t>(limb.three)] = true;
        m.limb_of[static_cast<size_t>(limb.two)] = static_cast<int>(l);
        m.limb_of[static_cast<size_t>(limb.three)] = static_cast<int>(l);
    }
    return m;
}

SkeletonSpec skeleton_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("skeleton JSON is malformed: ") + e.what());
    }
    try {
        std::array<Limb, 4> limbs{};
        const auto& jl = j.at("limbs");
        if (jl.size() != 4) throw std::runtime_error("expected 4 limbs, got " + std::to_string(jl.size()));
        for (std::size_t i = 0; i < 4; ++i) {
            limbs[i].one = jl[i].at(0).get<int>();
            limbs[i].two = jl[i].at(1).get<int>();
            limbs[i].three = jl[i].at(2).get<int>();
        }
        return SkeletonSpec(j.at("name").get<std::string>(),
                            j.at("joint_names").get<std::vector<std::string>>(),
                            j.at("parents").get<std::vector<int>>(),
                            j.at("pdof").get<std::vector<int>>(), limbs);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("skeleton JSON missing or mistyped field: ") + e.what());
    }
}

std::string skeleton_to_json_text(const SkeletonSpec& spec) {
    nlohmann::json j;
    j["name"] = spec.name();
    j["joint_names"] = spec.joint_names();
    j["parents"] = spec.parent();
    j["pdof"] = spec.pdof();
    auto limbs = nlohmann::json::array();
    for (const Limb& l : spec.limbs()) limbs.push_back({l.one, l.two, l.three});
    j["limbs"] = limbs;
    j["root"] = spec.root_index();
    return j.dump(2);
}

SkeletonSpec load_skeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open skeleton file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return skeleton_from_json_text(ss.str());
}

void save_skeleton(const std::string& path, const SkeletonSpec& spec) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write skeleton file: " + path);
    out << skeleton_to_json_text(spec) << "\n";
}

}  // namespace htnet
