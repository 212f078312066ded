#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "imexglm/common.hpp"
#include "imexglm/rational.hpp"

namespace imexglm {

// ---------------------------------------------------------------------------
// Generic small dense storage. The double instantiation is mirrored into
// Eigen for numerical work; the Rational instantiation certifies the order
// conditions in exact arithmetic.
// ---------------------------------------------------------------------------

template <typename T>
struct DenseMat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;  // row-major

    DenseMat() = default;
    DenseMat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, T(0)) {}

    T& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const T& operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    std::vector<T> col(int j) const {
        std::vector<T> v(rows);
        for (int i = 0; i < rows; ++i) v[i] = (*this)(i, j);
        return v;
    }

    std::vector<T> operator*(const std::vector<T>& v) const {
        std::vector<T> out(rows, T(0));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) out[i] += (*this)(i, j) * v[j];
        return out;
    }
};

inline Eigen::MatrixXd to_eigen(const DenseMat<double>& m) {
    Eigen::MatrixXd out(m.rows, m.cols);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(i, j) = m(i, j);
    return out;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ---------------------------------------------------------------------------
// Tableau types
// ---------------------------------------------------------------------------

enum class SharingMode { Additive, Component };

/// One GLM component: coefficients (A, U, B, V), abscissae c, the r x (p+1)
/// matrix W of Nordsieck weights [w_0 ... w_p], and the declared orders.
template <typename T>
struct BasicTableau {
    int s = 0;  // internal stages
    int r = 0;  // external stages
    int p = 0;  // order
    int q_declared = 0;
    bool is_explicit = false;
    std::vector<T> c;
    DenseMat<T> A, U, B, V, W;
};

using GlmTableau = BasicTableau<double>;

/// Explicit/implicit pair. In Additive mode U, V are shared and W columns 0
/// agree; Component mode may carry distinct U, V (and even distinct c, which
/// the class validator then reports as internally inconsistent).
template <typename T>
struct BasicImexPair {
    std::string name;
    SharingMode mode = SharingMode::Additive;
    bool rational_source = false;
    BasicTableau<T> expl;
    BasicTableau<T> impl;

    bool internally_consistent() const {
        if (expl.s != impl.s) return false;
        for (int i = 0; i < expl.s; ++i)
            if (!(expl.c[i] == impl.c[i])) return false;
        return true;
    }
};

using ImexGlmPair = BasicImexPair<double>;
using ExactImexPair = BasicImexPair<Rational>;

// ---------------------------------------------------------------------------
// Order conditions.
//
// Preconsistency:  U w0 = 1,  V w0 = w0.
// Stage order (k = 1..q):    c^k/k! - A c^(k-1)/(k-1)! - U w_k = 0
// External order (k = 1..p): sum_{l=0..k} w_{k-l}/l! - B c^(k-1)/(k-1)! - V w_k = 0
//
// Residuals of the stage conditions are evaluated for k = 1..p so the
// effective stage order can be recomputed instead of trusting the file.
// ---------------------------------------------------------------------------

template <typename T>
struct BasicOrderReport {
    T precon_U{};
    T precon_V{};
    std::vector<T> stage;     // index k-1 holds condition k, k = 1..p
    std::vector<T> external;  // likewise
};

using OrderConditionReport = BasicOrderReport<double>;

namespace detail {

template <typename T>
T abs_of(const T& x) {
    return x.abs();
}
inline double abs_of(const double& x) { return std::abs(x); }

template <typename T>
T max_abs(const std::vector<T>& v) {
    T m(0);
    for (const auto& x : v) {
        T a = abs_of(x);
        if (m < a) m = a;
    }
    return m;
}

template <typename T>
T factorial(int k) {
    T f(1);
    for (int i = 2; i <= k; ++i) f *= T(i);
    return f;
}

template <typename T>
std::vector<T> cpow(const std::vector<T>& c, int k) {
    std::vector<T> out(c.size(), T(1));
    for (std::size_t i = 0; i < c.size(); ++i) {
        T v(1);
        for (int j = 0; j < k; ++j) v *= c[i];
        out[i] = v;
    }
    return out;
}

}  // namespace detail

template <typename T>
BasicOrderReport<T> order_condition_residuals(const BasicTableau<T>& t) {
    using detail::cpow;
    using detail::factorial;
    using detail::max_abs;

    BasicOrderReport<T> rep;
    const auto w0 = t.W.col(0);

    // U w0 - 1
    auto uw0 = t.U * w0;
    for (auto& x : uw0) x -= T(1);
    rep.precon_U = max_abs(uw0);

    // V w0 - w0
    auto vw0 = t.V * w0;
    for (int i = 0; i < t.r; ++i) vw0[i] -= w0[i];
    rep.precon_V = max_abs(vw0);

    for (int k = 1; k <= t.p; ++k) {
        const T inv_k = T(1) / factorial<T>(k);
        const T inv_km1 = T(1) / factorial<T>(k - 1);
        const auto wk = t.W.col(k);

        // stage condition k
        auto ck = cpow(t.c, k);
        auto ck1 = cpow(t.c, k - 1);
        auto Ac = t.A * ck1;
        auto Uw = t.U * wk;
        std::vector<T> res_a(t.s);
        for (int i = 0; i < t.s; ++i) res_a[i] = ck[i] * inv_k - Ac[i] * inv_km1 - Uw[i];
        rep.stage.push_back(max_abs(res_a));

        // external condition k
        auto Bc = t.B * ck1;
        auto Vw = t.V * wk;
        std::vector<T> res_b(t.r, T(0));
        for (int l = 0; l <= k; ++l) {
            const T inv_l = T(1) / factorial<T>(l);
            const auto wkl = t.W.col(k - l);
            for (int i = 0; i < t.r; ++i) res_b[i] += wkl[i] * inv_l;
        }
        for (int i = 0; i < t.r; ++i) res_b[i] -= Bc[i] * inv_km1 + Vw[i];
        rep.external.push_back(max_abs(res_b));
    }
    return rep;
}

/// Largest k such that stage conditions 1..k all hold within tol (0 if none).
inline int effective_stage_order(const OrderConditionReport& rep, double tol = 1e-10) {
    int q = 0;
    for (std::size_t k = 0; k < rep.stage.size(); ++k) {
        if (rep.stage[k] <= tol)
            q = static_cast<int>(k) + 1;
        else
            break;
    }
    return q;
}

inline double max_residual(const OrderConditionReport& rep, int q) {
    double m = std::max(rep.precon_U, rep.precon_V);
    for (int k = 0; k < q && k < static_cast<int>(rep.stage.size()); ++k)
        m = std::max(m, rep.stage[k]);
    for (double v : rep.external) m = std::max(m, v);
    return m;
}

// ---------------------------------------------------------------------------
// Stability matrices.
//
// M(z) = V + z B (I - zA)^{-1} U. (The resolvent sign follows the method's
// stiff limit M(inf) = V - B A^{-1} U; the alternative printed convention
// V + zB(I + zA)^{-1}U is inconsistent with that limit.)
// ---------------------------------------------------------------------------

inline double spectral_radius(const Eigen::MatrixXcd& m) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double spectral_radius(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Eigen::MatrixXcd stability_matrix(const GlmTableau& t, std::complex<double> z) {
    const Eigen::MatrixXd A = to_eigen(t.A);
    const Eigen::MatrixXd U = to_eigen(t.U);
    const Eigen::MatrixXd B = to_eigen(t.B);
    const Eigen::MatrixXd V = to_eigen(t.V);

    Eigen::MatrixXcd res = Eigen::MatrixXcd::Identity(t.s, t.s) - z * A.cast<std::complex<double>>();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(res);
    const Eigen::VectorXcd diag = lu.matrixLU().diagonal();
    const double max_piv = diag.cwiseAbs().maxCoeff();
    const double min_piv = diag.cwiseAbs().minCoeff();
    if (min_piv <= 1e-14 * std::max(1.0, max_piv))
        throw SingularResolventError("resolvent I - zA singular at z = (" + std::to_string(z.real()) +
                                     ", " + std::to_string(z.imag()) + ")");
    Eigen::MatrixXcd X = lu.solve(U.cast<std::complex<double>>());
    return V.cast<std::complex<double>>() + z * B.cast<std::complex<double>>() * X;
}

inline Eigen::MatrixXd stability_matrix_at_infinity(const GlmTableau& t) {
    const Eigen::MatrixXd A = to_eigen(t.A);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
    const double min_eig = es.eigenvalues().cwiseAbs().minCoeff();
    const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
    if (min_eig <= 1e-12 * std::max(1.0, max_eig))
        throw NumericalError("A is singular: smallest eigenvalue magnitude " + std::to_string(min_eig));
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    return to_eigen(t.V) - to_eigen(t.B) * lu.solve(to_eigen(t.U));
}

// ---------------------------------------------------------------------------
// Class validation: internal consistency, stage orders in {p-1, p}, real
// positive spectrum of A^I, and rho(M^I(inf)) < 1.
// ---------------------------------------------------------------------------

struct ClassTolerances {
    double residual_tol = 1e-10;  // order-condition acceptance
    double eig_imag_tol = 1e-10;  // |Im| <= eig_imag_tol * (1 + |Re|)
    double eig_re_min = 1e-10;    // Re >= eig_re_min
    double rho_margin = 1e-8;     // rho <= 1 - rho_margin
};

struct ClassReport {
    bool internally_consistent = false;
    int effective_q_explicit = 0;
    int effective_q_implicit = 0;
    bool stage_orders_ok = false;
    std::vector<std::complex<double>> implicit_A_eigs;
    bool eigs_positive = false;
    double rho_M_infinity = std::numeric_limits<double>::infinity();
    bool rho_lt_one = false;
    bool overall = false;
};

inline ClassReport validate_class_of_interest(const ImexGlmPair& pair, const ClassTolerances& tol = {}) {
    ClassReport rep;
    rep.internally_consistent = pair.internally_consistent();

    const auto rep_e = order_condition_residuals(pair.expl);
    const auto rep_i = order_condition_residuals(pair.impl);
    rep.effective_q_explicit = effective_stage_order(rep_e, tol.residual_tol);
    rep.effective_q_implicit = effective_stage_order(rep_i, tol.residual_tol);

    auto order_ok = [&](const OrderConditionReport& r, int p, int q_eff) {
        if (r.precon_U > tol.residual_tol || r.precon_V > tol.residual_tol) return false;
        for (int k = 0; k < p; ++k)
            if (r.external[k] > tol.residual_tol) return false;
        return q_eff >= p - 1;
    };
    rep.stage_orders_ok = order_ok(rep_e, pair.expl.p, rep.effective_q_explicit) &&
                          order_ok(rep_i, pair.impl.p, rep.effective_q_implicit);

    Eigen::EigenSolver<Eigen::MatrixXd> es(to_eigen(pair.impl.A));
    rep.eigs_positive = true;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const std::complex<double> lam = es.eigenvalues()(i);
        rep.implicit_A_eigs.push_back(lam);
        if (std::abs(lam.imag()) > tol.eig_imag_tol * (1.0 + std::abs(lam.real())) ||
            lam.real() < tol.eig_re_min)
            rep.eigs_positive = false;
    }

    try {
        rep.rho_M_infinity = spectral_radius(stability_matrix_at_infinity(pair.impl));
        rep.rho_lt_one = rep.rho_M_infinity <= 1.0 - tol.rho_margin;
    } catch (const NumericalError&) {
        rep.rho_lt_one = false;  // singular A^I: no stiff limit
    }

    rep.overall = rep.internally_consistent && rep.stage_orders_ok && rep.eigs_positive && rep.rho_lt_one;
    return rep;
}

// ---------------------------------------------------------------------------
// JSON tableau files.
// ---------------------------------------------------------------------------

namespace detail {

inline double entry_to_double(const nlohmann::json& v, bool rational, const std::string& field) {
    if (rational) {
        if (!v.is_string()) throw ParseError("field '" + field + "': rational files use \"num/den\" strings");
        return Rational::from_string(v.get<std::string>()).to_double();
    }
    if (!v.is_number()) throw ParseError("field '" + field + "': expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError("field '" + field + "': non-finite entry");
    return d;
}

inline Rational entry_to_rational(const nlohmann::json& v, const std::string& field) {
    if (!v.is_string()) throw ParseError("field '" + field + "': rational files use \"num/den\" strings");
    return Rational::from_string(v.get<std::string>());
}

template <typename T, typename Conv>
DenseMat<T> read_matrix(const nlohmann::json& j, const std::string& field, int rows, int cols, Conv conv) {
    if (!j.contains(field)) throw ParseError("missing field '" + field + "'");
    const auto& m = j.at(field);
    if (!m.is_array() || static_cast<int>(m.size()) != rows)
        throw ParseError("field '" + field + "': expected " + std::to_string(rows) + " rows");
    DenseMat<T> out(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const auto& row = m.at(i);
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ParseError("field '" + field + "': row " + std::to_string(i) + " expected " +
                             std::to_string(cols) + " columns");
        for (int jj = 0; jj < cols; ++jj) out(i, jj) = conv(row.at(jj), field);
    }
    return out;
}

template <typename T, typename Conv>
std::vector<T> read_vector(const nlohmann::json& j, const std::string& field, int n, Conv conv) {
    if (!j.contains(field)) throw ParseError("missing field '" + field + "'");
    const auto& v = j.at(field);
    if (!v.is_array() || static_cast<int>(v.size()) != n)
        throw ParseError("field '" + field + "': expected length " + std::to_string(n));
    std::vector<T> out(n);
    for (int i = 0; i < n; ++i) out[i] = conv(v.at(i), field);
    return out;
}

inline int read_int(const nlohmann::json& j, const std::string& field, int min_value) {
    if (!j.contains(field)) throw ParseError("missing field '" + field + "'");
    if (!j.at(field).is_number_integer()) throw ParseError("field '" + field + "': expected an integer");
    const int v = j.at(field).get<int>();
    if (v < min_value) throw ParseError("field '" + field + "': must be >= " + std::to_string(min_value));
    return v;
}

template <typename T, typename Conv>
BasicImexPair<T> parse_pair(const nlohmann::json& j, bool rational, Conv conv) {
    BasicImexPair<T> pair;
    pair.rational_source = rational;
    if (!j.contains("name") || !j.at("name").is_string()) throw ParseError("missing field 'name'");
    pair.name = j.at("name").get<std::string>();

    if (!j.contains("mode") || !j.at("mode").is_string()) throw ParseError("missing field 'mode'");
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "additive")
        pair.mode = SharingMode::Additive;
    else if (mode == "component")
        pair.mode = SharingMode::Component;
    else
        throw ParseError("field 'mode': expected \"additive\" or \"component\"");

    const int s = read_int(j, "s", 1);
    const int r = read_int(j, "r", 1);
    const int p = read_int(j, "p", 1);
    const int qe = read_int(j, "q_explicit", 0);
    const int qi = read_int(j, "q_implicit", 0);

    for (auto* t : {&pair.expl, &pair.impl}) {
        t->s = s;
        t->r = r;
        t->p = p;
    }
    pair.expl.q_declared = qe;
    pair.impl.q_declared = qi;
    pair.expl.is_explicit = true;

    const auto c_shared = j.contains("c") ? read_vector<T>(j, "c", s, conv) : std::vector<T>{};
    auto component_c = [&](const char* field) {
        if (j.contains(field)) return read_vector<T>(j, field, s, conv);
        if (c_shared.empty()) throw ParseError(std::string("missing field 'c' (or '") + field + "')");
        return c_shared;
    };
    pair.expl.c = component_c("c_explicit");
    pair.impl.c = component_c("c_implicit");

    pair.expl.A = read_matrix<T>(j, "A_explicit", s, s, conv);
    pair.impl.A = read_matrix<T>(j, "A_implicit", s, s, conv);
    pair.expl.B = read_matrix<T>(j, "B_explicit", r, s, conv);
    pair.impl.B = read_matrix<T>(j, "B_implicit", r, s, conv);
    pair.expl.W = read_matrix<T>(j, "W_explicit", r, p + 1, conv);
    pair.impl.W = read_matrix<T>(j, "W_implicit", r, p + 1, conv);

    auto shared_or_split = [&](const char* shared, const char* ef, const char* inf, int rows, int cols,
                               DenseMat<T>& e_out, DenseMat<T>& i_out) {
        const bool has_split = j.contains(ef) || j.contains(inf);
        if (pair.mode == SharingMode::Additive) {
            if (has_split)
                throw ParseError(std::string("additive mode shares '") + shared + "'; per-component '" + ef +
                                 "'/'" + inf + "' are not allowed");
            e_out = read_matrix<T>(j, shared, rows, cols, conv);
            i_out = e_out;
        } else if (has_split) {
            e_out = read_matrix<T>(j, ef, rows, cols, conv);
            i_out = read_matrix<T>(j, inf, rows, cols, conv);
        } else {
            e_out = read_matrix<T>(j, shared, rows, cols, conv);
            i_out = e_out;
        }
    };
    shared_or_split("U", "U_explicit", "U_implicit", s, r, pair.expl.U, pair.impl.U);
    shared_or_split("V", "V_explicit", "V_implicit", r, r, pair.expl.V, pair.impl.V);

    // structural invariants
    for (int i = 0; i < s; ++i)
        for (int jj = i; jj < s; ++jj)
            if (!(pair.expl.A(i, jj) == T(0)))
                throw ParseError("field 'A_explicit': entry (" + std::to_string(i) + "," + std::to_string(jj) +
                                 ") must be zero (strictly lower triangular)");
    if (pair.mode == SharingMode::Additive) {
        for (int i = 0; i < r; ++i)
            if (!(pair.expl.W(i, 0) == pair.impl.W(i, 0)))
                throw ParseError("field 'W_implicit': additive mode requires W_explicit and W_implicit to share column w_0");
    }
    return pair;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline ImexGlmPair parse_tableau(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    const bool rational = j.value("rational", false);
    return detail::parse_pair<double>(j, rational, [rational](const nlohmann::json& v, const std::string& f) {
        return detail::entry_to_double(v, rational, f);
    });
}

/// Exact parse; requires "rational": true in the document.
inline ExactImexPair parse_tableau_exact(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
    if (!j.value("rational", false))
        throw UsageError("exact-arithmetic validation needs a tableau file with \"rational\": true");
    return detail::parse_pair<Rational>(j, true, [](const nlohmann::json& v, const std::string& f) {
        return detail::entry_to_rational(v, f);
    });
}

namespace detail {

template <typename T, typename Fmt>
nlohmann::json matrix_to_json(const DenseMat<T>& m, Fmt fmt) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols; ++j) row.push_back(fmt(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

template <typename T, typename Fmt>
nlohmann::json pair_to_json(const BasicImexPair<T>& pair, Fmt fmt, bool rational_entries) {
    nlohmann::json j;
    j["name"] = pair.name;
    j["mode"] = pair.mode == SharingMode::Additive ? "additive" : "component";
    if (rational_entries) j["rational"] = true;
    j["s"] = pair.expl.s;
    j["r"] = pair.expl.r;
    j["p"] = pair.expl.p;
    j["q_explicit"] = pair.expl.q_declared;
    j["q_implicit"] = pair.impl.q_declared;

    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : pair.expl.c) c.push_back(fmt(x));
    const bool same_c = pair.internally_consistent();
    if (same_c) {
        j["c"] = c;
    } else {
        j["c_explicit"] = c;
        nlohmann::json ci = nlohmann::json::array();
        for (const auto& x : pair.impl.c) ci.push_back(fmt(x));
        j["c_implicit"] = ci;
    }

    j["A_explicit"] = matrix_to_json(pair.expl.A, fmt);
    j["A_implicit"] = matrix_to_json(pair.impl.A, fmt);
    j["B_explicit"] = matrix_to_json(pair.expl.B, fmt);
    j["B_implicit"] = matrix_to_json(pair.impl.B, fmt);
    j["W_explicit"] = matrix_to_json(pair.expl.W, fmt);
    j["W_implicit"] = matrix_to_json(pair.impl.W, fmt);

    auto same = [](const DenseMat<T>& a, const DenseMat<T>& b) {
        if (a.rows != b.rows || a.cols != b.cols) return false;
        for (std::size_t i = 0; i < a.a.size(); ++i)
            if (!(a.a[i] == b.a[i])) return false;
        return true;
    };
    if (pair.mode == SharingMode::Additive || same(pair.expl.U, pair.impl.U)) {
        j["U"] = matrix_to_json(pair.expl.U, fmt);
    } else {
        j["U_explicit"] = matrix_to_json(pair.expl.U, fmt);
        j["U_implicit"] = matrix_to_json(pair.impl.U, fmt);
    }
    if (pair.mode == SharingMode::Additive || same(pair.expl.V, pair.impl.V)) {
        j["V"] = matrix_to_json(pair.expl.V, fmt);
    } else {
        j["V_explicit"] = matrix_to_json(pair.expl.V, fmt);
        j["V_implicit"] = matrix_to_json(pair.impl.V, fmt);
    }
    return j;
}

}  // namespace detail

inline std::string serialize_tableau(const ImexGlmPair& pair) {
    return detail::pair_to_json(pair, [](double v) { return nlohmann::json(v); }, false).dump(2);
}

inline std::string serialize_tableau(const ExactImexPair& pair) {
    return detail::pair_to_json(pair, [](const Rational& v) { return nlohmann::json(v.to_string()); }, true)
        .dump(2);
}

/// Double view of an exact pair (every shipped coefficient is dyadic, so this
/// conversion is lossless for the bundled methods).
inline ImexGlmPair to_double_pair(const ExactImexPair& src) {
    ImexGlmPair out;
    out.name = src.name;
    out.mode = src.mode;
    out.rational_source = true;
    auto conv = [](const BasicTableau<Rational>& t) {
        GlmTableau d;
        d.s = t.s;
        d.r = t.r;
        d.p = t.p;
        d.q_declared = t.q_declared;
        d.is_explicit = t.is_explicit;
        d.c.resize(t.c.size());
        for (std::size_t i = 0; i < t.c.size(); ++i) d.c[i] = t.c[i].to_double();
        auto cm = [](const DenseMat<Rational>& m) {
            DenseMat<double> o(m.rows, m.cols);
            for (std::size_t i = 0; i < m.a.size(); ++i) o.a[i] = m.a[i].to_double();
            return o;
        };
        d.A = cm(t.A);
        d.U = cm(t.U);
        d.B = cm(t.B);
        d.V = cm(t.V);
        d.W = cm(t.W);
        return d;
    };
    out.expl = conv(src.expl);
    out.impl = conv(src.impl);
    return out;
}

}  // namespace imexglm
