#include "rholab/robust.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

#include "rholab/errors.hpp"
#include "rholab/iterated_integrals.hpp"

namespace rholab {

namespace {

Vec elementwise_power(const Vec& h, int p) {
    Vec out = Vec::Ones(h.size());
    for (int j = 0; j < p; ++j) out = out.cwiseProduct(h);
    return out;
}

std::vector<IbpTerm> make_level1() {
    return {
        {1, +1.0, {1}, {}, 1, "L1T01"},
        {1, -1.0, {}, {IbpStage{{1}, 1, 0}}, 0, "L1T02"},
    };
}

std::vector<IbpTerm> make_level2() {
    return {
        {2, +1.0, {2}, {}, 2, "L2T01"},
        {2, -1.0, {}, {IbpStage{{2}, 2, 0}}, 0, "L2T02"},
        {2, -1.0, {1}, {IbpStage{{1}, 1, 0}}, 1, "L2T03"},
        {2, +1.0, {}, {IbpStage{{1, 1}, 1, 1}}, 0, "L2T04"},
        {2, +1.0, {}, {IbpStage{{1}, 1, 0}, IbpStage{{1}, 1, 0}}, 0, "L2T05"},
    };
}

std::vector<IbpTerm> make_level3() {
    return {
        {3, +1.0, {3}, {}, 3, "L3T01"},
        {3, -1.0, {}, {IbpStage{{3}, 3, 0}}, 0, "L3T02"},
        {3, -1.0, {1}, {IbpStage{{2}, 2, 0}}, 1, "L3T03"},
        {3, +1.0, {}, {IbpStage{{1, 2}, 2, 1}}, 0, "L3T04"},
        {3, +1.0, {}, {IbpStage{{2}, 2, 0}, IbpStage{{1}, 1, 0}}, 0, "L3T05"},
        {3, -1.0, {2}, {IbpStage{{1}, 1, 0}}, 2, "L3T06"},
        {3, +1.0, {}, {IbpStage{{2, 1}, 1, 2}}, 0, "L3T07"},
        {3, +1.0, {}, {IbpStage{{1}, 1, 0}, IbpStage{{2}, 2, 0}}, 0, "L3T08"},
        {3, +1.0, {1}, {IbpStage{{1, 1}, 1, 1}}, 1, "L3T09"},
        {3, -1.0, {}, {IbpStage{{1, 1, 1}, 1, 2}}, 0, "L3T10"},
        {3, -1.0, {}, {IbpStage{{1, 1}, 1, 1}, IbpStage{{1}, 1, 0}}, 0, "L3T11"},
        {3, +1.0, {1}, {IbpStage{{1}, 1, 0}, IbpStage{{1}, 1, 0}}, 1, "L3T12"},
        {3, -1.0, {}, {IbpStage{{1}, 1, 0}, IbpStage{{1, 1}, 1, 1}}, 0, "L3T13"},
        {3, -1.0, {}, {IbpStage{{1}, 1, 0}, IbpStage{{1}, 1, 0}, IbpStage{{1}, 1, 0}}, 0,
         "L3T14"},
    };
}

struct TermShape {
    int max_q = 1;    // deepest iterated-integral level needed
    int max_psi = 1;  // largest commutator power needed
    int max_h = 0;    // largest plain sensor power needed
};

TermShape audit_shape(const IbpTerm& term) {
    TermShape shape;
    if (term.level < 1) throw ValidationError("pathwise term: level must be >= 1");
    if (term.terminal_h < 0) throw ValidationError("pathwise term: negative sensor power");
    shape.max_h = term.terminal_h;
    for (int w : term.outer_q) {
        if (w < 1) throw ValidationError("pathwise term: q weights must be >= 1");
        shape.max_q = std::max(shape.max_q, w);
    }
    for (const IbpStage& stage : term.stages) {
        if (stage.psi_k < 1)
            throw ValidationError("pathwise term: commutator power must be >= 1");
        if (stage.h_inside < 0)
            throw ValidationError("pathwise term: negative sensor power");
        if (stage.q_weights.empty())
            throw ValidationError("pathwise term: stage without an integrand coefficient");
        for (int w : stage.q_weights) {
            if (w < 1) throw ValidationError("pathwise term: q weights must be >= 1");
            shape.max_q = std::max(shape.max_q, w);
        }
        shape.max_psi = std::max(shape.max_psi, stage.psi_k);
        shape.max_h = std::max(shape.max_h, stage.h_inside);
    }
    return shape;
}

TermShape merge(const TermShape& a, const TermShape& b) {
    return {std::max(a.max_q, b.max_q), std::max(a.max_psi, b.max_psi),
            std::max(a.max_h, b.max_h)};
}

void check_ibp_args(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
                    const Vec& phi, int s_idx, int t_idx) {
    grid.validate();
    if (grid.d2() != 1)
        throw ValidationError(
            "pathwise representation requires a single observation channel");
    if (s_idx < 0 || t_idx > grid.M || s_idx >= t_idx)
        throw ValidationError("pathwise representation: need 0 <= s_idx < t_idx <= M");
    if (phi.size() != sg.grid().size() || h_grid.size() != sg.grid().size())
        throw ValidationError("pathwise representation: grid size mismatch");
}

struct EvalContext {
    const GridSemigroup& sg;
    const IteratedIntegralTable& table;
    const std::vector<Vec>& h_powers;  // indexed by sensor power
    const std::vector<SpMat>& psis;    // indexed by commutator power; [0] unused
    double dt = 0.0;
    int s_idx = 0;
    int t_idx = 0;
};

/// value = sign * prod_a q^{outer_a}_{s,t} * G_1(s) where the innermost tail
/// is the backward flow of h^{terminal} phi and every stage wraps its tail in
/// the running trapezoid integral  S(u) = int_u^t b(r) P_{r-u}(O G(r)) dr,
/// swept backwards one step at a time:
///   S(t_k) = P_dt [ S(t_{k+1}) + (dt/2) b_{k+1} (O G)_{k+1} ] + (dt/2) b_k (O G)_k.
Vec eval_term(const IbpTerm& term, const EvalContext& ctx, const Vec& phi) {
    const int len = ctx.t_idx - ctx.s_idx;
    std::vector<Vec> g(static_cast<std::size_t>(len) + 1);
    g[len] = ctx.h_powers[term.terminal_h].cwiseProduct(phi);
    for (int k = len - 1; k >= 0; --k) g[k] = ctx.sg.apply(ctx.dt, g[k + 1]);

    // Peel stages innermost-first so each sweep consumes the tail produced by
    // the previous one.
    for (auto it = term.stages.rbegin(); it != term.stages.rend(); ++it) {
        const IbpStage& stage = *it;
        std::vector<double> b(static_cast<std::size_t>(len) + 1, 1.0);
        for (int k = 0; k <= len; ++k)
            for (int w : stage.q_weights) b[k] *= ctx.table.value_at(w, 0, ctx.s_idx + k);
        std::vector<Vec> og(static_cast<std::size_t>(len) + 1);
        for (int k = 0; k <= len; ++k) {
            if (stage.h_inside > 0)
                og[k] = ctx.psis[stage.psi_k] *
                        ctx.h_powers[stage.h_inside].cwiseProduct(g[k]);
            else
                og[k] = ctx.psis[stage.psi_k] * g[k];
        }
        std::vector<Vec> s_arr(static_cast<std::size_t>(len) + 1);
        s_arr[len] = Vec::Zero(phi.size());
        const double half = 0.5 * ctx.dt;
        for (int k = len - 1; k >= 0; --k)
            s_arr[k] = ctx.sg.apply(ctx.dt, s_arr[k + 1] + half * b[k + 1] * og[k + 1]) +
                       half * b[k] * og[k];
        g = std::move(s_arr);
    }

    double coeff = term.sign;
    for (int w : term.outer_q) coeff *= ctx.table.value_at(w, 0, ctx.t_idx);
    return coeff * g[0];
}

std::vector<Vec> sensor_powers(const Vec& h_grid, int max_h) {
    std::vector<Vec> powers;
    powers.reserve(static_cast<std::size_t>(max_h) + 1);
    for (int p = 0; p <= max_h; ++p) powers.push_back(elementwise_power(h_grid, p));
    return powers;
}

std::vector<SpMat> commutator_powers(const SpMat& generator, const Vec& h_grid,
                                     int max_psi) {
    std::vector<SpMat> psis(static_cast<std::size_t>(max_psi) + 1);
    for (int k = 1; k <= max_psi; ++k) psis[k] = psi_commutator(generator, h_grid, k);
    return psis;
}

} // namespace

SpMat psi_commutator(const SpMat& generator, const Vec& h_grid, int k) {
    if (k < 1) throw ValidationError("psi_commutator: power must be >= 1");
    if (h_grid.size() != generator.rows())
        throw ValidationError("psi_commutator: sensor grid size mismatch");
    const Vec hk = elementwise_power(h_grid, k);
    const SpMat left = generator * hk.asDiagonal();
    const SpMat right = hk.asDiagonal() * generator;
    return SpMat((left - right).pruned());
}

Vec psi_operator(const SdeModel& model, const GridSemigroup& sg, const MultiIndex& word,
                 const Vec& phi) {
    const SpatialGrid& grid = sg.grid();
    if (word.empty()) throw ValidationError("psi_operator: empty sensor word");
    for (int letter : word)
        if (letter < 1 || letter > model.d2)
            throw ValidationError("psi_operator: word letter outside 1..d2");
    if (phi.size() != grid.size()) throw ValidationError("psi_operator: phi size mismatch");

    Vec h_w = grid.discretize(model.h[static_cast<std::size_t>(word[0]) - 1].value);
    for (std::size_t j = 1; j < word.size(); ++j)
        h_w = h_w.cwiseProduct(
            grid.discretize(model.h[static_cast<std::size_t>(word[j]) - 1].value));

    Vec out = (sg.generator() * h_w).cwiseProduct(phi);
    for (int i = 1; i <= model.d1; ++i) {
        const Vec vh = apply_first_order(model.V[static_cast<std::size_t>(i)], h_w, grid);
        const Vec vphi = apply_first_order(model.V[static_cast<std::size_t>(i)], phi, grid);
        out += vh.cwiseProduct(vphi);
    }
    return out;
}

const std::vector<IbpTerm>& ibp_terms(int level) {
    static const std::vector<IbpTerm> level1 = make_level1();
    static const std::vector<IbpTerm> level2 = make_level2();
    static const std::vector<IbpTerm> level3 = make_level3();
    switch (level) {
        case 1: return level1;
        case 2: return level2;
        case 3: return level3;
        default:
            throw ValidationError("pathwise representation: term lists cover levels 1..3");
    }
}

bool degree_audit(const std::vector<IbpTerm>& terms) {
    for (const IbpTerm& term : terms) {
        int deg = 0;
        for (int w : term.outer_q) deg += w;
        for (const IbpStage& stage : term.stages)
            for (int w : stage.q_weights) deg += w;
        if (deg != term.level) return false;
    }
    return true;
}

std::string ibp_term_label(const IbpTerm& term) {
    std::ostringstream os;
    os << (term.sign >= 0.0 ? "+" : "-");
    for (int w : term.outer_q) os << " q" << w << "(s,t)";
    for (const IbpStage& stage : term.stages) {
        os << " INT[";
        for (std::size_t j = 0; j < stage.q_weights.size(); ++j)
            os << (j ? " " : "") << "q" << stage.q_weights[j];
        os << "] P Psi" << stage.psi_k;
        if (stage.h_inside > 0) os << " h^" << stage.h_inside;
    }
    os << " P ";
    if (term.terminal_h > 0)
        os << "(h^" << term.terminal_h << " phi)";
    else
        os << "phi";
    return os.str();
}

Vec ibp_term_value(const IbpTerm& term, const GridSemigroup& sg, const Vec& h_grid,
                   const PathGrid& grid, const Vec& phi, int s_idx, int t_idx) {
    check_ibp_args(sg, h_grid, grid, phi, s_idx, t_idx);
    const TermShape shape = audit_shape(term);
    const IteratedIntegralTable table(grid, s_idx, shape.max_q);
    const std::vector<Vec> h_powers = sensor_powers(h_grid, shape.max_h);
    const std::vector<SpMat> psis = commutator_powers(sg.generator(), h_grid, shape.max_psi);
    const EvalContext ctx{sg, table, h_powers, psis, grid.dt(), s_idx, t_idx};
    return eval_term(term, ctx, phi);
}

std::vector<Vec> ibp_term_values(const GridSemigroup& sg, const Vec& h_grid,
                                 const PathGrid& grid, const Vec& phi, int level,
                                 int s_idx, int t_idx) {
    check_ibp_args(sg, h_grid, grid, phi, s_idx, t_idx);
    const std::vector<IbpTerm>& terms = ibp_terms(level);
    TermShape shape;
    for (const IbpTerm& term : terms) shape = merge(shape, audit_shape(term));
    const IteratedIntegralTable table(grid, s_idx, shape.max_q);
    const std::vector<Vec> h_powers = sensor_powers(h_grid, shape.max_h);
    const std::vector<SpMat> psis = commutator_powers(sg.generator(), h_grid, shape.max_psi);
    const EvalContext ctx{sg, table, h_powers, psis, grid.dt(), s_idx, t_idx};
    std::vector<Vec> out;
    out.reserve(terms.size());
    for (const IbpTerm& term : terms) out.push_back(eval_term(term, ctx, phi));
    return out;
}

Vec ibp_level_value(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
                    const Vec& phi, int level, int s_idx, int t_idx) {
    const std::vector<Vec> parts = ibp_term_values(sg, h_grid, grid, phi, level, s_idx, t_idx);
    Vec out = Vec::Zero(phi.size());
    for (const Vec& part : parts) out += part;
    return out;
}

Vec ibp_level1(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx) {
    return ibp_level_value(sg, h_grid, grid, phi, 1, s_idx, t_idx);
}

Vec ibp_level2(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx) {
    return ibp_level_value(sg, h_grid, grid, phi, 2, s_idx, t_idx);
}

Vec ibp_level3(const GridSemigroup& sg, const Vec& h_grid, const PathGrid& grid,
               const Vec& phi, int s_idx, int t_idx) {
    return ibp_level_value(sg, h_grid, grid, phi, 3, s_idx, t_idx);
}

} // namespace rholab
