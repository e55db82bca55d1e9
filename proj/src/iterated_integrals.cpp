#include "rholab/iterated_integrals.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "rholab/special_functions.hpp"

namespace rholab {

namespace {

void check_observation_word(const MultiIndex& w, int d2) {
    for (int c : w) {
        if (c < 1 || c > d2)
            throw ValidationError("observation word letter " + std::to_string(c) +
                                  " outside alphabet {1.." + std::to_string(d2) + "}");
    }
}

void check_range(const PathGrid& grid, int s_idx, int t_idx) {
    if (s_idx < 0 || t_idx > grid.M || s_idx > t_idx)
        throw ValidationError("iterated integral range [" + std::to_string(s_idx) + ", " +
                              std::to_string(t_idx) + "] invalid for M=" + std::to_string(grid.M));
}

MultiIndex word_from_index(int level, std::size_t idx, int d2) {
    MultiIndex w(level);
    for (int j = level - 1; j >= 0; --j) {
        w[j] = static_cast<int>(idx % d2) + 1;
        idx /= d2;
    }
    return w;
}

} // namespace

std::vector<MultiIndex> observation_words(int k, int d2) {
    if (k < 0 || d2 < 1) throw ValidationError("observation_words: need k >= 0, d2 >= 1");
    std::size_t count = 1;
    for (int j = 0; j < k; ++j) count *= d2;
    std::vector<MultiIndex> words;
    words.reserve(count);
    for (std::size_t idx = 0; idx < count; ++idx) words.push_back(word_from_index(k, idx, d2));
    return words;
}

int word_index(const MultiIndex& w, int d2) {
    check_observation_word(w, d2);
    int idx = 0;
    for (int c : w) idx = idx * d2 + (c - 1);
    return idx;
}

IteratedIntegralTable::IteratedIntegralTable(const PathGrid& grid, int s_idx, int depth)
    : s_idx_(s_idx), depth_(depth), d2_(grid.d2()) {
    if (depth < 0) throw ValidationError("IteratedIntegralTable: depth must be >= 0");
    check_range(grid, s_idx, grid.M);
    n_values_ = grid.M - s_idx + 1;

    levels_.resize(depth + 1);
    std::size_t n_words = 1;
    for (int k = 0; k <= depth; ++k) {
        if (k > 0) n_words *= d2_;
        levels_[k].assign(n_words, std::vector<double>(n_values_, 0.0));
    }
    for (int off = 0; off < n_values_; ++off) levels_[0][0][off] = 1.0;

    for (int off = 0; off + 1 < n_values_; ++off) {
        const int k_idx = s_idx + off;
        for (int lev = depth; lev >= 1; --lev) {
            auto& cur = levels_[lev];
            const auto& prev = levels_[lev - 1];
            const std::size_t words = cur.size();
            for (std::size_t w = 0; w < words; ++w) {
                const int last = static_cast<int>(w % d2_); // dY column of the final letter
                cur[w][off + 1] = cur[w][off] + prev[w / d2_][off] * grid.dY(k_idx, last);
            }
        }
    }
}

double IteratedIntegralTable::value(const MultiIndex& w, int k_idx) const {
    const int lev = static_cast<int>(w.size());
    if (lev > depth_) throw ValidationError("IteratedIntegralTable: word longer than table depth");
    if (k_idx < s_idx_ || k_idx - s_idx_ >= n_values_)
        throw ValidationError("IteratedIntegralTable: time index outside table");
    return levels_[lev][static_cast<std::size_t>(word_index(w, d2_))][k_idx - s_idx_];
}

double iterated_ito(const PathGrid& grid, const MultiIndex& word, int s_idx, int t_idx) {
    check_observation_word(word, grid.d2());
    check_range(grid, s_idx, t_idx);
    const int len = static_cast<int>(word.size());
    if (len == 0) return 1.0;

    // vals[j] carries q^{(word_1..word_j)}_{s, t_k} as k advances.
    std::vector<double> vals(len + 1, 0.0);
    vals[0] = 1.0;
    for (int k = s_idx; k < t_idx; ++k)
        for (int j = len; j >= 1; --j) vals[j] += vals[j - 1] * grid.dY(k, word[j - 1] - 1);
    return vals[len];
}

double iterated_ito_at(const PathGrid& grid, const MultiIndex& word, double s, double t) {
    const double dt = grid.dt();
    const auto to_index = [&](double u, const char* name) {
        const double raw = u / dt;
        const int idx = static_cast<int>(std::lround(raw));
        if (std::abs(raw - idx) > 1e-9 * std::max(1.0, grid.T / dt))
            throw ValidationError(std::string(name) + " does not lie on the time grid");
        return idx;
    };
    return iterated_ito(grid, word, to_index(s, "s"), to_index(t, "t"));
}

LevelSeries<double> signature_series(const PathGrid& grid, int s_idx, int t_idx, int depth) {
    if (depth < 0) throw ValidationError("signature_series: depth must be >= 0");
    check_range(grid, s_idx, t_idx);
    const int d2 = grid.d2();
    auto s = LevelSeries<double>::unit(d2, depth, 1.0, 0.0);
    for (int k = s_idx; k < t_idx; ++k) {
        for (int lev = depth; lev >= 1; --lev) {
            auto& cur = s.level[lev];
            const auto& prev = s.level[lev - 1];
            const std::size_t words = cur.size();
            for (std::size_t w = 0; w < words; ++w)
                cur[w] += prev[w / d2] * grid.dY(k, static_cast<int>(w % d2));
        }
    }
    return s;
}

ChenReport chen_check(const PathGrid& grid, int k, int s_idx, int u_idx, int t_idx) {
    if (k < 0) throw ValidationError("chen_check: depth must be >= 0");
    if (u_idx < s_idx || u_idx > t_idx) throw ValidationError("chen_check: need s <= u <= t");
    const auto left = signature_series(grid, s_idx, u_idx, k);
    const auto right = signature_series(grid, u_idx, t_idx, k);
    const auto whole = signature_series(grid, s_idx, t_idx, k);
    const auto prod = chen_product(left, right);

    ChenReport rep;
    for (int lev = 0; lev <= k; ++lev) {
        for (std::size_t w = 0; w < whole.level[lev].size(); ++w) {
            const double viol = std::abs(whole.level[lev][w] - prod.level[lev][w]);
            if (viol > rep.max_violation) {
                rep.max_violation = viol;
                rep.worst_word = word_from_index(lev, w, grid.d2());
            }
        }
    }
    return rep;
}

double shuffle_pair_residual(const PathGrid& grid, int ch_i, int ch_j, int s_idx, int t_idx) {
    const double qi = iterated_ito(grid, {ch_i}, s_idx, t_idx);
    const double qj = iterated_ito(grid, {ch_j}, s_idx, t_idx);
    const double qij = iterated_ito(grid, {ch_i, ch_j}, s_idx, t_idx);
    const double qji = iterated_ito(grid, {ch_j, ch_i}, s_idx, t_idx);
    double bracket = 0.0; // discrete quadratic covariation of Y^i and Y^j
    for (int k = s_idx; k < t_idx; ++k) bracket += grid.dY(k, ch_i - 1) * grid.dY(k, ch_j - 1);
    return std::abs(qi * qj - qij - qji - bracket);
}

HolderFitReport holder_constant_fit(const PathGrid& grid, double gamma, int k_max) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ValidationError("holder_constant_fit: gamma must lie in (0, 1)");
    if (k_max < 1) throw ValidationError("holder_constant_fit: k_max must be >= 1");

    HolderFitReport rep;
    rep.gamma = gamma;
    rep.theta = theta_constant(1.0 / gamma);
    rep.k_max = k_max;

    const double dt = grid.dt();
    // Dyadic windows: lengths M, M/2, M/4, ... down to 4 steps.
    double c_hat = 0.0;
    for (int len = grid.M; len >= 4; len /= 2) {
        for (int a = 0; a + len <= grid.M; a += len) {
            const auto sig = signature_series(grid, a, a + len, k_max);
            const double span = len * dt;
            for (int k = 1; k <= k_max; ++k) {
                const double kg = k * gamma;
                const double denom = rep.theta * fractional_factorial(kg);
                for (double q : sig.level[k]) {
                    const double aq = std::abs(q);
                    if (aq == 0.0) continue;
                    const double cand = std::pow(aq * denom, 1.0 / kg) / span;
                    c_hat = std::max(c_hat, cand);
                }
            }
        }
    }
    rep.c_hat = c_hat * (1.0 + 1e-12); // guard against roundoff in the re-check

    // Exhaustive re-verification of the fitted bound on the same windows.
    rep.recheck_ok = true;
    for (int len = grid.M; len >= 4; len /= 2) {
        for (int a = 0; a + len <= grid.M; a += len) {
            const auto sig = signature_series(grid, a, a + len, k_max);
            const double span = len * dt;
            for (int k = 1; k <= k_max; ++k) {
                const double kg = k * gamma;
                const double bound =
                    std::pow(rep.c_hat * span, kg) / (rep.theta * fractional_factorial(kg));
                for (double q : sig.level[k])
                    if (std::abs(q) > bound * (1.0 + 1e-10)) rep.recheck_ok = false;
            }
        }
    }
    return rep;
}

namespace {

/// Partition product over the breakpoints, with level `target` of each local
/// series suppressed: the resulting level-`target` entry is the partition
/// approximation of the extension.
LevelSeries<double> partition_product(const PathGrid& grid, const std::vector<int>& breaks,
                                      int target) {
    auto acc = LevelSeries<double>::unit(grid.d2(), target, 1.0, 0.0);
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        auto local = signature_series(grid, breaks[p], breaks[p + 1], target);
        std::fill(local.level[target].begin(), local.level[target].end(), 0.0);
        acc = chen_product(acc, local);
    }
    return acc;
}

std::vector<int> refined_breaks(int s_idx, int t_idx, long long pieces) {
    std::vector<int> breaks;
    breaks.reserve(static_cast<std::size_t>(std::min<long long>(pieces, t_idx - s_idx)) + 1);
    const double len = static_cast<double>(t_idx - s_idx);
    int prev = s_idx - 1;
    for (long long j = 0; j <= pieces; ++j) {
        const int b = s_idx + static_cast<int>(std::lround(len * static_cast<double>(j) /
                                                           static_cast<double>(pieces)));
        if (b > prev) {
            breaks.push_back(b);
            prev = b;
        }
    }
    return breaks;
}

} // namespace

ExtensionReport extend_multiplicative(const PathGrid& grid, int target_level, int s_idx,
                                      int t_idx, RefinementSchedule schedule, double c,
                                      double gamma) {
    if (target_level < 2)
        throw ValidationError("extend_multiplicative: target level must be >= 2");
    check_range(grid, s_idx, t_idx);

    ExtensionReport rep;
    if (s_idx == t_idx) {
        rep.series = LevelSeries<double>::unit(grid.d2(), target_level, 1.0, 0.0);
        return rep;
    }

    // The known levels must be multiplicative before we extend them.
    const int mid = s_idx + (t_idx - s_idx) / 2;
    const auto chen = chen_check(grid, target_level - 1, s_idx, mid, t_idx);
    if (chen.max_violation > 1e-10)
        throw ValidationError("extend_multiplicative: input levels violate the Chen identity");

    const long long base = schedule == RefinementSchedule::dyadic ? 2 : 3;
    constexpr int kMaxDepth = 16;
    constexpr double kTol = 1e-10;

    LevelSeries<double> prev_series;
    bool have_prev = false;
    bool converged = false;
    long long pieces = 1;
    for (int round = 0; round <= kMaxDepth; ++round) {
        const auto breaks = refined_breaks(s_idx, t_idx, pieces);
        auto cur = partition_product(grid, breaks, target_level);
        if (have_prev) {
            double change = 0.0;
            for (std::size_t w = 0; w < cur.level[target_level].size(); ++w)
                change = std::max(change, std::abs(cur.level[target_level][w] -
                                                   prev_series.level[target_level][w]));
            rep.last_change = change;
            if (change < kTol) {
                rep.series = std::move(cur);
                rep.refinements = round;
                converged = true;
                break;
            }
        }
        prev_series = std::move(cur);
        have_prev = true;
        pieces *= base;
    }
    if (!converged)
        throw NumericalGuardError("extend_multiplicative: partition products did not settle "
                                  "within 16 refinement rounds");

    if (c > 0.0) {
        if (!(gamma > 0.0 && gamma < 1.0))
            throw ValidationError("extend_multiplicative: gamma must lie in (0, 1)");
        const double theta = theta_constant(1.0 / gamma);
        const double kg = target_level * gamma;
        const double span = (t_idx - s_idx) * grid.dt();
        const double bound = std::pow(c * span, kg) / (theta * fractional_factorial(kg));
        double max_abs = 0.0;
        for (double q : rep.series.level[target_level]) max_abs = std::max(max_abs, std::abs(q));
        rep.holder_margin = bound - max_abs;
        rep.holder_ok = rep.holder_margin >= 0.0;
    }
    return rep;
}

} // namespace rholab
