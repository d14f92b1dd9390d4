#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "lipcert/conic.hpp"

namespace lipcert::detail {

/// One coefficient of a constraint row inside a PSD block: the row
/// contributes v * X_block[r][c] to tr(A X) (symmetry implied).
struct StdEntry {
    int block = 0;
    int row = 0;
    int col = 0;
    double v = 0.0;
};

struct StdRow {
    std::vector<StdEntry> psd;
    std::vector<std::pair<int, double>> lp;  ///< (position, coefficient)
    double rhs = 0.0;
};

/// Block-diagonal standard-form SDP: minimize sum tr(C_b X_b) + c_lp . x_lp
/// subject to the rows holding with equality, X_b PSD and x_lp >= 0.
struct StandardSdp {
    std::vector<int> psd_dims;
    int lp_dim = 0;
    std::vector<Eigen::MatrixXd> c_psd;
    Eigen::VectorXd c_lp;
    std::vector<StdRow> rows;
};

struct IpmResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    std::vector<Eigen::MatrixXd> X;
    Eigen::VectorXd x_lp;
    Eigen::VectorXd lambda;
    double pobj = 0.0;
    double dobj = 0.0;
    int iterations = 0;
    double rel_p = 0.0;
    double rel_d = 0.0;
    double rel_gap = 0.0;
};

IpmResult ipm_solve(const StandardSdp& sdp, const SolverSettings& settings);

}  // namespace lipcert::detail
