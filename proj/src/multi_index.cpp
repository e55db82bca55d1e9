#include "rholab/multi_index.hpp"

#include <algorithm>

#include "rholab/errors.hpp"

namespace rholab {

int degree(const MultiIndex& a) {
    int deg = static_cast<int>(a.size());
    for (int entry : a) {
        if (entry < 0) throw ValidationError("multi-index entries must be non-negative");
        if (entry == 0) ++deg;
    }
    return deg;
}

MultiIndex concat(const MultiIndex& a, const MultiIndex& b) {
    MultiIndex out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

bool shortlex_less(const MultiIndex& a, const MultiIndex& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

namespace {

// All words over {0..d1} of length 1..max_len with degree <= j, excluding (0).
void collect_words(int j, int d1, std::vector<MultiIndex>& out) {
    // degree >= length, so words longer than j can never qualify.
    MultiIndex word;
    // Iterative depth-first enumeration.
    auto rec = [&](auto&& self, int cur_degree) -> void {
        if (!word.empty()) {
            if (cur_degree <= j && !(word.size() == 1 && word[0] == 0))
                out.push_back(word);
        }
        if (static_cast<int>(word.size()) >= j) return;
        for (int letter = 0; letter <= d1; ++letter) {
            int add = (letter == 0) ? 2 : 1;
            if (cur_degree + add > j) continue;
            word.push_back(letter);
            self(self, cur_degree + add);
            word.pop_back();
        }
    };
    rec(rec, 0);
}

} // namespace

std::vector<MultiIndex> enumerate_A1(int j, int d1) {
    if (j < 1) throw ValidationError("enumerate_A1: degree bound j must be >= 1 (set is empty)");
    if (d1 < 1) throw ValidationError("enumerate_A1: need at least one diffusion letter (d1 >= 1)");
    std::vector<MultiIndex> out;
    collect_words(j, d1, out);
    std::sort(out.begin(), out.end(), shortlex_less);
    return out;
}

std::vector<MultiIndex> enumerate_A0(int j, int d1) {
    std::vector<MultiIndex> out = enumerate_A1(j, d1);
    out.insert(out.begin(), MultiIndex{});
    return out;
}

std::string to_string(const MultiIndex& a) {
    std::string s = "(";
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(a[i]);
    }
    s += ')';
    return s;
}

} // namespace rholab
