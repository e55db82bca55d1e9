#pragma once

#include <vector>

#include "rholab/errors.hpp"
#include "rholab/multi_index.hpp"
#include "rholab/path_grid.hpp"

namespace rholab {

/// All words over the observation alphabet {1..d2} of length exactly k,
/// ordered lexicographically (base-d2 digit order).
std::vector<MultiIndex> observation_words(int k, int d2);

/// Index of a length-k observation word within observation_words(k, d2).
int word_index(const MultiIndex& w, int d2);

/// Table of left-point iterated Ito integrals q^w_{s,t_k} of the observation
/// path, anchored at grid index s_idx, for all observation words of length
/// <= depth and all grid indices k >= s_idx.  Built by the forward recursion
///   q^{(w',i)}_{s,t_{k+1}} = q^{(w',i)}_{s,t_k} + q^{w'}_{s,t_k} dY^i_k.
class IteratedIntegralTable {
public:
    IteratedIntegralTable(const PathGrid& grid, int s_idx, int depth);

    /// q^w_{s, t_k}; the empty word gives 1.
    double value(const MultiIndex& w, int k_idx) const;
    /// Fast access: level = |w|, widx = word_index(w).
    double value_at(int level, int widx, int k_idx) const {
        return levels_[level][widx][k_idx - s_idx_];
    }

    int depth() const { return depth_; }
    int s_index() const { return s_idx_; }
    int t_max() const { return s_idx_ + n_values_ - 1; }
    int d2() const { return d2_; }

private:
    int s_idx_ = 0;
    int depth_ = 0;
    int d2_ = 0;
    int n_values_ = 0;
    // levels_[k][word][time offset]
    std::vector<std::vector<std::vector<double>>> levels_;
};

/// Single iterated integral q^w_{s,t} by the same recursion (O(|w| (t-s))).
double iterated_ito(const PathGrid& grid, const MultiIndex& word, int s_idx, int t_idx);

/// Overload taking times; they must sit on the grid (errors otherwise).
double iterated_ito_at(const PathGrid& grid, const MultiIndex& word, double s, double t);

/// Truncated level series with coefficients in a declared algebra: level k
/// holds one coefficient per length-k observation word.  Multiplication is
/// the truncated Chen (graded convolution) product.
template <class Alg>
struct LevelSeries {
    int d2 = 1;
    int depth = 0;
    std::vector<std::vector<Alg>> level; // level[k].size() == d2^k

    static LevelSeries unit(int d2, int depth, const Alg& one, const Alg& zero) {
        LevelSeries s;
        s.d2 = d2;
        s.depth = depth;
        s.level.resize(depth + 1);
        s.level[0] = {one};
        std::size_t count = 1;
        for (int k = 1; k <= depth; ++k) {
            count *= d2;
            s.level[k].assign(count, zero);
        }
        return s;
    }
};

/// Truncated Chen product: (ab)_w = sum_{w = uv} a_u b_v, levels <= depth.
template <class Alg>
LevelSeries<Alg> chen_product(const LevelSeries<Alg>& a, const LevelSeries<Alg>& b) {
    if (a.d2 != b.d2 || a.depth != b.depth)
        throw ValidationError("chen_product: shape mismatch");
    LevelSeries<Alg> out = a; // copy shape; overwrite below
    for (int k = 0; k <= a.depth; ++k) {
        const std::size_t n_words = a.level[k].size();
        for (std::size_t w = 0; w < n_words; ++w) {
            // Split w (base-d2, big-endian) into prefix u (length j) and
            // suffix v (length k-j): u = leading digits, v = trailing.
            std::size_t pow_suffix = 1;
            Alg acc = a.level[k][w] * b.level[0][0]; // j = k term
            for (int j = k - 1; j >= 0; --j) {
                pow_suffix *= a.d2;
                const std::size_t u = w / pow_suffix;
                const std::size_t v = w % pow_suffix;
                acc = acc + a.level[j][u] * b.level[k - j][v];
            }
            out.level[k][w] = acc;
        }
    }
    return out;
}

/// The grid signature over [s_idx, t_idx] as a scalar level series (levels
/// 0..depth of left-point iterated sums).
LevelSeries<double> signature_series(const PathGrid& grid, int s_idx, int t_idx, int depth);

struct ChenReport {
    double max_violation = 0.0;
    MultiIndex worst_word;
};

/// Max over words |w| <= k of |q^w_{s,t} - sum_{w=uv} q^u_{s,u'} q^v_{u',t}|.
/// Exact (up to roundoff) for left-point sums on a shared grid.
ChenReport chen_check(const PathGrid& grid, int k, int s_idx, int u_idx, int t_idx);

/// |q^(i) q^(j) - q^(i,j) - q^(j,i) - sum_k dY^i_k dY^j_k| over [s,t]:
/// the discrete shuffle identity with its quadratic-covariation correction.
double shuffle_pair_residual(const PathGrid& grid, int ch_i, int ch_j, int s_idx, int t_idx);

struct HolderFitReport {
    double c_hat = 0.0;
    double gamma = 0.0;
    double theta = 0.0;    // the series constant used in the denominator
    int k_max = 0;
    bool recheck_ok = false; // post-fit exhaustive bound verification
};

/// Smallest c such that |q^w_{s,t}| <= (c |t-s|)^{k gamma} / (theta (k gamma)!)
/// over all dyadic (s,t) pairs at scales >= 4 steps and words |w| <= k_max.
/// theta = theta_constant(1/gamma).
HolderFitReport holder_constant_fit(const PathGrid& grid, double gamma, int k_max);

enum class RefinementSchedule { dyadic, thirds };

struct ExtensionReport {
    LevelSeries<double> series; // levels 0..n with level n reconstructed
    int refinements = 0;        // partition refinement rounds used
    double last_change = 0.0;   // word-sup change at the final refinement
    bool holder_ok = true;      // level-n bound with the supplied constants
    double holder_margin = 0.0; // min over words of bound - |value|
};

/// Reconstructs level n of the signature from levels 0..n-1 as a limit of
/// partition products over [s_idx, t_idx].  The input series is checked to
/// satisfy the Chen identity (<= 1e-10) at the midpoint before extending.
/// Refinement stops when successive word-sup changes fall below 1e-10;
/// non-convergence within depth 16 raises NumericalGuardError.  If c > 0 is
/// supplied, the level-n values are checked against the Hölder bound with
/// the same c and theta = theta_constant(1/gamma).
ExtensionReport extend_multiplicative(const PathGrid& grid, int target_level, int s_idx,
                                      int t_idx, RefinementSchedule schedule,
                                      double c = -1.0, double gamma = 0.4);

} // namespace rholab
