#pragma once

#include <string>
#include <vector>

namespace rholab {

/// A word over the alphabet {0,1,...,d1}.  The empty word is the identity
/// element for concatenation.  The degree of a word counts its letters plus
/// one extra unit for every zero letter, so time-like letters weigh double.
using MultiIndex = std::vector<int>;

/// degree(a) = length(a) + #{j : a_j = 0}.  Entries must be non-negative.
int degree(const MultiIndex& a);

/// (a_1..a_k) * (b_1..b_l) = (a_1..a_k, b_1..b_l).
MultiIndex concat(const MultiIndex& a, const MultiIndex& b);

/// Shortlex order: compare by length first, then lexicographically.
/// This is the deterministic iteration order used by every enumeration.
bool shortlex_less(const MultiIndex& a, const MultiIndex& b);

/// All words over {0..d1}, excluding the empty word and (0), with degree <= j,
/// in shortlex order.  Throws ValidationError if j < 1 (the set is empty).
std::vector<MultiIndex> enumerate_A1(int j, int d1);

/// As enumerate_A1 but with the empty word prepended (the index set used by
/// the bracket-Sobolev norm; the empty word stands for the identity operator).
std::vector<MultiIndex> enumerate_A0(int j, int d1);

/// Render as "(1,0,2)"; the empty word renders as "()".
std::string to_string(const MultiIndex& a);

} // namespace rholab
