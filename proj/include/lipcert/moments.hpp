#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lipcert/polynomial.hpp"

namespace lipcert {

/// Sparse linear form over moment variables: sum of coef * y_idx with indices
/// strictly increasing.
using LinearForm = std::vector<std::pair<int, double>>;

/// Sorts by index and merges duplicates, dropping exact zeros.
LinearForm normalize_form(LinearForm form);

double eval_form(const LinearForm& form, const std::vector<double>& y);

/// All monomials in the given variables of total degree <= degree, in
/// graded-lex order starting with 1.
std::vector<Monomial> monomial_basis(const std::vector<int>& vars, int degree);

/// Assigns a dense index to every distinct monomial encountered. The constant
/// monomial always gets index 0, so y_0 is the mass of the represented
/// measure. Registration order is deterministic.
class MomentIndex {
public:
    MomentIndex();

    int index_of(const Monomial& m);            ///< registers if unseen
    int lookup(const Monomial& m) const;        ///< -1 if unseen
    const Monomial& monomial(int idx) const;
    int size() const { return static_cast<int>(monomials_.size()); }

    /// Linear form of the expectation of a polynomial, registering any new
    /// monomials it contains.
    LinearForm riesz(const Polynomial& p);

private:
    std::unordered_map<Monomial, int, Monomial::Hash> map_;
    std::vector<Monomial> monomials_;
};

enum class BlockSense { PSD, Zero };

/// Symmetric matrix whose entries are linear forms over moment variables;
/// only the upper triangle (row <= col) is stored.
struct SymbolicBlock {
    int dim = 0;
    BlockSense sense = BlockSense::PSD;
    std::string label;
    std::vector<Monomial> row_basis;          ///< empty for ad-hoc blocks
    std::vector<std::vector<LinearForm>> entries;  ///< entries[r][c-r] for c >= r

    const LinearForm& at(int r, int c) const;
};

/// Moment matrix M_d(y, vars): entry (a,b) is y_{basis_a * basis_b}.
SymbolicBlock moment_matrix(const std::vector<int>& vars, int degree, MomentIndex& index);

/// Localizing matrix M_d(g y, vars): entry (a,b) is L_y(g * basis_a * basis_b).
/// PSD sense encodes g >= 0, Zero sense encodes g = 0.
SymbolicBlock localizing_matrix(const Polynomial& g, const std::vector<int>& vars,
                                int degree, MomentIndex& index, BlockSense sense);

/// 3x3 block with rows [1, t, u1*u2] supplying the cubic moment
/// L_y(t u1 u2) and the quartic L_y(u1^2 u2^2) for one index triple.
SymbolicBlock triple_moment_block(int t_var, int u1_var, int u2_var, MomentIndex& index);

/// Aggregated block with rows [1, t_0..t_{p0-1}, u1_0*u2k .. u1_{p1-1}*u2k]
/// covering all cubic moments that involve one second-layer unit u2k.
SymbolicBlock aggregated_moment_block(const std::vector<int>& t_vars,
                                      const std::vector<int>& u1_vars, int u2_var,
                                      MomentIndex& index);

}  // namespace lipcert
