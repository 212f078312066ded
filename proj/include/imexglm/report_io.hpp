#pragma once

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>

#include "imexglm/analysis.hpp"
#include "imexglm/tableau.hpp"

namespace imexglm {

/// Full round-trip decimal formatting ('.' decimal point, 17 significant digits).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep) {
    os << "h,error_x,error_z,n_steps,newton_avg\n";
    for (const auto& r : rep.ladder) {
        os << fmt17(r.h) << ',' << fmt17(r.error_x) << ',';
        if (rep.has_z) os << fmt17(r.error_z);
        os << ',' << r.n_steps << ',' << fmt17(r.newton_avg) << '\n';
    }
}

inline std::string convergence_summary(const ConvergenceReport& rep) {
    std::ostringstream os;
    if (rep.degenerate) {
        os << "degenerate ladder (errors at rounding floor); no order fit\n";
        return os.str();
    }
    auto line = [&](const char* label, double fitted) {
        os << "fitted order " << label << ": " << fmt17(fitted) << " (theoretical " << rep.theoretical_order
           << ", tol " << rep.tolerance
           << "): " << (std::abs(fitted - rep.theoretical_order) <= rep.tolerance ? "PASS" : "FAIL") << '\n';
    };
    line(rep.has_z ? "x" : "y", rep.fitted_order_x);
    if (rep.has_z) line("z", rep.fitted_order_z);
    os << "reference: "
       << (rep.reference_kind == ConvergenceReport::ReferenceKind::Exact ? "exact" : "self-refined") << '\n';
    if (rep.floor_flag) os << "note: some rungs near the rounding floor were excluded from the fit\n";
    os << "result: " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return os.str();
}

inline void write_stiffness_csv(std::ostream& os, const StiffnessSweepReport& rep) {
    os << "lambda,h_lambda,error,unstable,at_floor\n";
    for (const auto& r : rep.rungs)
        os << fmt17(r.lambda) << ',' << fmt17(r.h_lambda) << ',' << fmt17(r.error) << ','
           << (r.unstable ? 1 : 0) << ',' << (r.at_floor ? 1 : 0) << '\n';
}

inline std::string stiffness_summary(const StiffnessSweepReport& rep) {
    std::ostringstream os;
    os << "stiff-rung error ratio (|h*lambda| >= 10): " << fmt17(rep.ratio) << " (limit 2)\n";
    for (const auto& r : rep.rungs)
        if (r.unstable) os << "unstable at lambda = " << fmt17(r.lambda) << '\n';
    os << "result: " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return os.str();
}

inline void write_eps_sweep_csv(std::ostream& os, const EpsSweepReport& rep) {
    os << "eps,h,error_x,error_z,n_steps,newton_avg\n";
    for (const auto& col : rep.columns)
        for (const auto& r : col.report.ladder)
            os << fmt17(col.eps) << ',' << fmt17(r.h) << ',' << fmt17(r.error_x) << ',' << fmt17(r.error_z)
               << ',' << r.n_steps << ',' << fmt17(r.newton_avg) << '\n';
}

inline std::string eps_sweep_summary(const EpsSweepReport& rep) {
    std::ostringstream os;
    for (const auto& col : rep.columns)
        os << "eps = " << fmt17(col.eps) << ": fitted x " << fmt17(col.report.fitted_order_x) << ", z "
           << fmt17(col.report.fitted_order_z) << '\n';
    os << "min fitted order: " << fmt17(rep.min_order) << '\n';
    os << "result: " << (rep.pass ? "PASS" : "FAIL") << '\n';
    return os.str();
}

inline void write_recurrence_csv(std::ostream& os, const RecurrenceResult& res) {
    os << "h,final_norm\n";
    for (std::size_t i = 0; i < res.hs.size(); ++i)
        os << fmt17(res.hs[i]) << ',' << fmt17(res.norms[i]) << '\n';
}

inline std::string order_report_text(const OrderConditionReport& rep, int p, int q_declared) {
    std::ostringstream os;
    os << "preconsistency: |U w0 - 1| = " << fmt17(rep.precon_U) << ", |V w0 - w0| = " << fmt17(rep.precon_V)
       << '\n';
    for (int k = 1; k <= p; ++k) {
        os << "k=" << k << ": stage residual " << fmt17(rep.stage[k - 1]);
        if (k > q_declared) os << " (beyond declared q)";
        os << ", external residual " << fmt17(rep.external[k - 1]) << '\n';
    }
    return os.str();
}

}  // namespace imexglm
