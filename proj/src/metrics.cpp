#include "htnet/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

namespace htnet {

namespace {

void check_pose_pair(std::span<const Mat> pred, std::span<const Mat> gt, const char* op) {
    if (pred.size() != gt.size())
        throw std::invalid_argument(std::string(op) + ": " + std::to_string(pred.size()) +
                                    " predicted frames vs " + std::to_string(gt.size()) + " ground truth");
    for (std::size_t f = 0; f < pred.size(); ++f) {
        if (!pred[f].same_shape(gt[f]) || pred[f].cols != 3)
            throw std::invalid_argument(std::string(op) + ": frame " + std::to_string(f) + " shapes " +
                                        shape_str(pred[f].rows, pred[f].cols) + " vs " +
                                        shape_str(gt[f].rows, gt[f].cols));
    }
}

double joint_error(const Mat& a, const Mat& b, int j) {
    const double dx = a(j, 0) - b(j, 0);
    const double dy = a(j, 1) - b(j, 1);
    const double dz = a(j, 2) - b(j, 2);
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
    return out;
}

}  // namespace

double mpjpe(std::span<const Mat> pred, std::span<const Mat> gt) {
    check_pose_pair(pred, gt, "mpjpe");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        for (int j = 0; j < pred[f].rows; ++j) sum += joint_error(pred[f], gt[f], j);
        count += static_cast<std::size_t>(pred[f].rows);
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

Mat procrustes_align(const Mat& pred, const Mat& gt) {
    if (!pred.same_shape(gt) || pred.cols != 3)
        throw std::invalid_argument("procrustes_align: shapes " + shape_str(pred.rows, pred.cols) +
                                    " vs " + shape_str(gt.rows, gt.cols));
    const int n = pred.rows;
    if (n < 3) throw std::invalid_argument("procrustes_align: needs at least 3 points");

    Eigen::MatrixXd x = to_eigen(pred);
    Eigen::MatrixXd y = to_eigen(gt);
    const Eigen::RowVector3d xc = x.colwise().mean();
    const Eigen::RowVector3d yc = y.colwise().mean();
    x.rowwise() -= xc;
    y.rowwise() -= yc;

    const double x_ss = x.squaredNorm();
    const double y_ss = y.squaredNorm();

    // H = sum_i x_i y_i^T; a point set of rank < 2 leaves the rotation
    // underdetermined
    const Eigen::Matrix3d h = x.transpose() * y;
    Eigen::JacobiSVD<Eigen::MatrixXd> rank_x(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::JacobiSVD<Eigen::MatrixXd> rank_y(y, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double tol_x = 1e-9 * std::sqrt(std::max(x_ss, 1e-300));
    const double tol_y = 1e-9 * std::sqrt(std::max(y_ss, 1e-300));
    if (rank_x.singularValues()(1) <= tol_x || rank_y.singularValues()(1) <= tol_y)
        throw std::invalid_argument("procrustes_align: degenerate point set (rank < 2)");

    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU();
    const Eigen::Matrix3d v = svd.matrixV();
    Eigen::Vector3d d = Eigen::Vector3d::Ones();
    if ((v * u.transpose()).determinant() < 0.0) d(2) = -1.0;
    const Eigen::Matrix3d r = v * d.asDiagonal() * u.transpose();
    const double s = svd.singularValues().dot(d) / x_ss;

    Eigen::MatrixXd aligned = s * x * r.transpose();
    aligned.rowwise() += yc;

    Mat out(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) out(i, j) = aligned(i, j);
    return out;
}

double p_mpjpe(std::span<const Mat> pred, std::span<const Mat> gt) {
    check_pose_pair(pred, gt, "p_mpjpe");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        const Mat aligned = procrustes_align(pred[f], gt[f]);
        for (int j = 0; j < aligned.rows; ++j) sum += joint_error(aligned, gt[f], j);
        count += static_cast<std::size_t>(aligned.rows);
    }
    return count ? sum / static_cast<double>(count) : 0.0;
}

double pck(std::span<const Mat> pred, std::span<const Mat> gt, double threshold_mm) {
    check_pose_pair(pred, gt, "pck");
    std::size_t hits = 0, count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f)
        for (int j = 0; j < pred[f].rows; ++j) {
            if (joint_error(pred[f], gt[f], j) <= threshold_mm) ++hits;
            ++count;
        }
    return count ? 100.0 * static_cast<double>(hits) / static_cast<double>(count) : 0.0;
}

double auc(std::span<const Mat> pred, std::span<const Mat> gt) {
    check_pose_pair(pred, gt, "auc");
    double acc = 0.0;
    int samples = 0;
    for (int t = 0; t <= 150; t += 5) {
        acc += pck(pred, gt, static_cast<double>(t));
        ++samples;
    }
    return acc / samples;
}

std::array<double, 4> pdof_breakdown(std::span<const Mat> pred, std::span<const Mat> gt,
                                     const SkeletonSpec& spec) {
    check_pose_pair(pred, gt, "pdof_breakdown");
    std::array<double, 4> sum{};
    std::array<std::size_t, 4> count{};
    for (std::size_t f = 0; f < pred.size(); ++f) {
        if (pred[f].rows != spec.joint_count())
            throw std::invalid_argument("pdof_breakdown: frame has " + std::to_string(pred[f].rows) +
                                        " joints but skeleton has " + std::to_string(spec.joint_count()));
        for (int j = 0; j < pred[f].rows; ++j) {
            const int c = spec.pdof()[static_cast<size_t>(j)];
            sum[static_cast<size_t>(c)] += joint_error(pred[f], gt[f], j);
            ++count[static_cast<size_t>(c)];
        }
    }
    std::array<double, 4> out{};
    for (std::size_t c = 0; c < 4; ++c)
        out[c] = count[c] ? sum[c] / static_cast<double>(count[c]) : 0.0;
    return out;
}

MetricsReport evaluate_poses(std::span<const Mat> pred, std::span<const Mat> gt,
                             const SkeletonSpec& spec) {
    MetricsReport r;
    r.mpjpe = mpjpe(pred, gt);
    r.p_mpjpe = p_mpjpe(pred, gt);
    r.pck = pck(pred, gt);
    r.auc = auc(pred, gt);
    r.per_pdof_mpjpe = pdof_breakdown(pred, gt, spec);
    r.per_joint_mpjpe.assign(static_cast<size_t>(spec.joint_count()), 0.0);
    if (!pred.empty()) {
        for (std::size_t f = 0; f < pred.size(); ++f)
            for (int j = 0; j < spec.joint_count(); ++j)
                r.per_joint_mpjpe[static_cast<size_t>(j)] += joint_error(pred[f], gt[f], j);
        for (double& v : r.per_joint_mpjpe) v /= static_cast<double>(pred.size());
    }
    return r;
}

std::string MetricsReport::to_json_text() const {
    nlohmann::json j;
    j["mpjpe"] = mpjpe;
    j["p_mpjpe"] = p_mpjpe;
    j["pck"] = pck;
    j["auc"] = auc;
    j["per_pdof_mpjpe"] = {{"0", per_pdof_mpjpe[0]},
                           {"1", per_pdof_mpjpe[1]},
                           {"2", per_pdof_mpjpe[2]},
                           {"3", per_pdof_mpjpe[3]}};
    j["per_joint_mpjpe"] = per_joint_mpjpe;
    return j.dump(2);
}

std::string MetricsReport::csv_header() {
    return "mpjpe,p_mpjpe,pck,auc,pdof0_mpjpe,pdof1_mpjpe,pdof2_mpjpe,pdof3_mpjpe";
}

std::string MetricsReport::to_csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", mpjpe, p_mpjpe, pck,
                  auc, per_pdof_mpjpe[0], per_pdof_mpjpe[1], per_pdof_mpjpe[2], per_pdof_mpjpe[3]);
    return buf;
}

}  // namespace htnet
