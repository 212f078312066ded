// glm: command-line front end for the IMEX GLM library.
//
// Subcommands: validate, stability, integrate, converge, sweep-eps,
// sweep-stiff, recurrence. Exit codes: 0 success / all checks pass,
// 1 numerical failure or a failed acceptance check, 2 usage or parse error.

#include <CLI11.hpp>

#include <complex>
#include <fstream>
#include <iostream>
#include <sstream>

#include "imexglm/imexglm.hpp"

namespace {

using namespace imexglm;

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ImexGlmPair load_pair(const std::string& path) { return parse_tableau(slurp(path)); }

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
    std::map<std::string, double> out;
    for (const auto& kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("bad --param '" + kv + "', expected key=value");
        try {
            out[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("bad --param value in '" + kv + "'");
        }
    }
    return out;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write file '" + path + "'");
    return out;
}

Mat parse_matrix_spec(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::stringstream byrow(text);
    std::string row;
    while (std::getline(byrow, row, ';')) {
        std::vector<double> vals;
        std::stringstream bycol(row);
        std::string tok;
        while (std::getline(bycol, tok, ',')) {
            if (tok.find_first_not_of(" \t") == std::string::npos) continue;
            try {
                vals.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw UsageError("bad matrix entry '" + tok + "'");
            }
        }
        if (!vals.empty()) rows.push_back(vals);
    }
    if (rows.empty()) throw UsageError("empty --matrix");
    const std::size_t d = rows.size();
    Mat M(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        if (rows[i].size() != d) throw UsageError("--matrix must be square (rows separated by ';')");
        for (std::size_t j = 0; j < d; ++j) M(i, j) = rows[i][j];
    }
    return M;
}

int cmd_validate(const std::string& path) {
    const std::string text = slurp(path);
    const ImexGlmPair pair = parse_tableau(text);
    std::cout << "tableau: " << pair.name << " (s=" << pair.expl.s << ", r=" << pair.expl.r
              << ", p=" << pair.expl.p << ")\n";

    std::cout << "\nexplicit component:\n"
              << order_report_text(order_condition_residuals(pair.expl), pair.expl.p, pair.expl.q_declared);
    std::cout << "implicit component:\n"
              << order_report_text(order_condition_residuals(pair.impl), pair.impl.p, pair.impl.q_declared);

    bool exact_certified = false;
    if (pair.rational_source) {
        const auto exact = parse_tableau_exact(text);
        auto all_zero = [](const BasicOrderReport<Rational>& r, int q, int p) {
            bool ok = r.precon_U.is_zero() && r.precon_V.is_zero();
            for (int k = 0; k < q; ++k) ok = ok && r.stage[k].is_zero();
            for (int k = 0; k < p; ++k) ok = ok && r.external[k].is_zero();
            return ok;
        };
        exact_certified =
            all_zero(order_condition_residuals(exact.expl), exact.expl.q_declared, exact.expl.p) &&
            all_zero(order_condition_residuals(exact.impl), exact.impl.q_declared, exact.impl.p);
        std::cout << "exact-arithmetic certification: "
                  << (exact_certified ? "all declared conditions exactly zero" : "NONZERO residuals") << '\n';
    }

    const ClassReport rep = validate_class_of_interest(pair);
    std::cout << "\nclass of interest:\n";
    std::cout << "  internal consistency (c_E = c_I): " << (rep.internally_consistent ? "ok" : "FAIL") << '\n';
    std::cout << "  stage orders (effective q_E = " << rep.effective_q_explicit
              << ", q_I = " << rep.effective_q_implicit << ", need >= p-1): "
              << (rep.stage_orders_ok ? "ok" : "FAIL") << '\n';
    std::cout << "  eigenvalues of A_implicit:";
    for (const auto& l : rep.implicit_A_eigs) std::cout << " (" << l.real() << (l.imag() < 0 ? "" : "+") << l.imag() << "i)";
    std::cout << " -> " << (rep.eigs_positive ? "real positive" : "FAIL") << '\n';
    std::cout << "  rho(M_implicit(inf)) = " << fmt17(rep.rho_M_infinity) << " -> "
              << (rep.rho_lt_one ? "< 1" : "FAIL") << '\n';
    std::cout << "overall: " << (rep.overall ? "PASS" : "FAIL") << '\n';
    return rep.overall ? 0 : 1;
}

int cmd_stability(const std::string& path, double re_min, double re_max, double im_min, double im_max,
                  int n_re, int n_im, const std::string& out_path, double slab_D, double slab_alpha) {
    if (n_re < 1 || n_im < 1 || re_min > re_max || im_min > im_max)
        throw UsageError("bad grid spec (need re_min <= re_max, im_min <= im_max, n_re/n_im >= 1)");
    const ImexGlmPair pair = load_pair(path);
    auto out = open_out(out_path);
    out << "re_z,im_z,rho_explicit,rho_implicit\n";
    double slab_max = 0;
    bool slab_seen = false;
    for (int i = 0; i < n_re; ++i) {
        const double re = n_re == 1 ? re_min : re_min + (re_max - re_min) * i / (n_re - 1);
        for (int j = 0; j < n_im; ++j) {
            const double im = n_im == 1 ? im_min : im_min + (im_max - im_min) * j / (n_im - 1);
            const std::complex<double> z(re, im);
            double rho_e = std::numeric_limits<double>::quiet_NaN();
            double rho_i = std::numeric_limits<double>::quiet_NaN();
            try {
                rho_e = spectral_radius(stability_matrix(pair.expl, z));
            } catch (const SingularResolventError&) {
            }
            try {
                rho_i = spectral_radius(stability_matrix(pair.impl, z));
            } catch (const SingularResolventError&) {
            }
            out << fmt17(re) << ',' << fmt17(im) << ',' << fmt17(rho_e) << ',' << fmt17(rho_i) << '\n';
            if (re <= -slab_D && std::isfinite(rho_i)) {
                slab_seen = true;
                slab_max = std::max(slab_max, rho_i);
            }
        }
    }
    try {
        std::cout << "rho(M_implicit(inf)) = " << fmt17(spectral_radius(stability_matrix_at_infinity(pair.impl)))
                  << '\n';
    } catch (const NumericalError& e) {
        std::cout << "M_implicit(inf): " << e.what() << '\n';
    }
    if (slab_seen) {
        const bool ok = slab_max <= slab_alpha;
        std::cout << "slab Re z <= " << -slab_D << ": max rho_implicit = " << fmt17(slab_max)
                  << (ok ? " <= " : " > ") << slab_alpha << ": " << (ok ? "PASS" : "FAIL") << '\n';
        return ok ? 0 : 1;
    }
    std::cout << "slab Re z <= " << -slab_D << ": no grid points sampled\n";
    return 0;
}

PartitionedProblem problem_from_flags(const std::string& name, const std::vector<std::string>& params,
                                      double eps, bool eps_set) {
    auto p = parse_params(params);
    if (eps_set) p["eps"] = eps;
    return builtin(name, p);
}

int cmd_integrate(const std::string& method, const std::string& problem_name,
                  const std::vector<std::string>& params, double eps, bool eps_set, double h, double tf,
                  int stride, const std::string& out_path) {
    const ImexGlmPair pair = load_pair(method);
    const PartitionedProblem prob = problem_from_flags(problem_name, params, eps, eps_set);
    if (h <= 0) throw UsageError("--h must be positive");
    const double steps = tf / h;
    if (steps < 1 || std::abs(steps - std::lround(steps)) > 1e-9 * std::max(1.0, steps))
        throw UsageError("(tf - t0)/h must be a positive integer");
    ExternalState st0 = make_start(pair, prob, h);
    IntegrateOptions io;
    io.record_stride = stride;
    const Trajectory traj = integrate(pair, prob, st0, tf, io);
    auto out = open_out(out_path);
    const bool additive = prob.mode == PartitionMode::Additive;
    out << "t";
    const long ncomp = additive ? traj.states[0].y.size() : traj.states[0].x.size();
    for (long i = 0; i < ncomp; ++i) out << (additive ? ",y" : ",x") << i;
    if (!additive)
        for (long i = 0; i < ncomp; ++i) out << ",z" << i;
    out << '\n';
    for (const auto& st : traj.states) {
        out << fmt17(st.t);
        const Vec& a = additive ? st.y : st.x;
        for (long i = 0; i < a.size(); ++i) out << ',' << fmt17(a(i));
        if (!additive)
            for (long i = 0; i < st.z.size(); ++i) out << ',' << fmt17(st.z(i));
        out << '\n';
    }
    std::cout << "steps: " << traj.total_steps << ", max newton iterations: " << traj.max_newton
              << ", max stage residual: " << fmt17(traj.max_residual) << '\n';
    return 0;
}

int cmd_converge(const std::string& method, const std::string& problem_name,
                 const std::vector<std::string>& params, double eps, bool eps_set, double h0, int rungs,
                 double tf, double order, double tol, const std::string& out_path) {
    const ImexGlmPair pair = load_pair(method);
    const PartitionedProblem prob = problem_from_flags(problem_name, params, eps, eps_set);
    StudyOptions opt;
    opt.tolerance = tol;
    opt.theoretical_order = order;
    const ConvergenceReport rep = run_convergence_study(pair, prob, h0, rungs, tf, opt);
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_convergence_csv(out, rep);
    }
    std::cout << "method: " << pair.name << ", problem: " << prob.name << '\n'
              << convergence_summary(rep);
    if (prob.stiff_split) {
        // informational step-size comfort bound from the Lipschitz estimates
        const Eigen::MatrixXd AE = to_eigen(pair.expl.A), AI = to_eigen(pair.impl.A);
        const double denom = AE.cwiseAbs().rowwise().sum().maxCoeff() * prob.stiff_split->lipschitz_E +
                             AI.cwiseAbs().rowwise().sum().maxCoeff() * prob.stiff_split->lipschitz_I;
        if (denom > 0)
            std::cout << "nonstiff-Lipschitz step bound estimate: h < " << fmt17(1.0 / denom) << '\n';
    }
    return rep.pass ? 0 : 1;
}

int cmd_sweep_stiff(const std::string& method, const std::string& problem_name,
                    const std::vector<std::string>& params, const std::vector<double>& lambdas, double h,
                    double tf, const std::string& out_path) {
    const ImexGlmPair pair = load_pair(method);
    if (problem_name != "split-dahlquist")
        throw UsageError("sweep-stiff currently sweeps the split-dahlquist family");
    auto base = parse_params(params);
    auto family = [base](double lam) {
        auto p = base;
        p["lambda_i"] = lam;
        return builtin("split-dahlquist", p);
    };
    const StiffnessSweepReport rep = stiffness_sweep(pair, family, lambdas, h, tf);
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_stiffness_csv(out, rep);
    }
    std::cout << stiffness_summary(rep);
    return rep.pass ? 0 : 1;
}

int cmd_sweep_eps(const std::string& method, const std::string& problem_name,
                  const std::vector<std::string>& params, const std::vector<double>& eps_values, double h0,
                  int rungs, double tf, double D, const std::string& out_path) {
    const ImexGlmPair pair = load_pair(method);
    auto base = parse_params(params);
    auto family = [base, problem_name](double eps) {
        auto p = base;
        p["eps"] = eps;
        return builtin(problem_name, p);
    };
    const EpsSweepReport rep = epsilon_sweep(pair, family, eps_values, h0, rungs, tf, D);
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_eps_sweep_csv(out, rep);
    }
    std::cout << eps_sweep_summary(rep);
    return rep.pass ? 0 : 1;
}

int cmd_recurrence(const std::string& matrix, double nu, bool constant, bool smooth, bool rough, double T,
                   double h0, int rungs, const std::string& out_path) {
    RecurrenceSpec spec;
    spec.M = parse_matrix_spec(matrix);
    spec.nu = nu;
    spec.T = T;
    const int chosen = (constant ? 1 : 0) + (smooth ? 1 : 0) + (rough ? 1 : 0);
    if (chosen > 1) throw UsageError("choose one of --constant/--smooth/--rough");
    spec.noise = constant ? RecurrenceSpec::Noise::Constant
                          : rough ? RecurrenceSpec::Noise::Rough : RecurrenceSpec::Noise::Smooth;
    spec.h_ladder.clear();
    for (int k = 0; k < rungs; ++k) spec.h_ladder.push_back(h0 * std::pow(0.5, k));
    const RecurrenceResult res = simulate_error_recurrence(spec);
    if (!out_path.empty()) {
        auto out = open_out(out_path);
        write_recurrence_csv(out, res);
    }
    const char* noise_name = constant ? "constant" : rough ? "rough" : "smooth";
    std::cout << "fitted exponent: " << fmt17(res.exponent) << " (nu = " << nu << ", noise " << noise_name
              << ")\n";
    return std::isfinite(res.exponent) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-step IMEX general linear method toolkit"};
    app.require_subcommand(1);
    // long-only help so the step-size flags --h/--h0 stay available
    app.set_help_flag("--help", "print help");

    // validate
    std::string v_path;
    auto* validate = app.add_subcommand("validate", "check order conditions and class membership");
    validate->set_help_flag("--help", "print help");
    validate->add_option("tableau", v_path, "tableau JSON file")->required();

    // stability
    std::string s_path, s_out = "stability.csv";
    double s_remin = -20, s_remax = 1, s_immin = -10, s_immax = 10, s_D = 10, s_alpha = 0.99;
    int s_nre = 43, s_nim = 41;
    auto* stability = app.add_subcommand("stability", "sample rho(M(z)) on a complex grid");
    stability->set_help_flag("--help", "print help");
    stability->add_option("tableau", s_path)->required();
    stability->add_option("--re-min", s_remin);
    stability->add_option("--re-max", s_remax);
    stability->add_option("--im-min", s_immin);
    stability->add_option("--im-max", s_immax);
    stability->add_option("--n-re", s_nre);
    stability->add_option("--n-im", s_nim);
    stability->add_option("--slab-D", s_D, "slab check: Re z <= -D");
    stability->add_option("--slab-alpha", s_alpha, "slab check: require rho <= alpha");
    stability->add_option("-o,--output", s_out);

    // integrate
    std::string i_method, i_problem = "split-dahlquist", i_out = "trajectory.csv";
    std::vector<std::string> i_params;
    double i_eps = 0, i_h = 0.1, i_tf = 1.0;
    int i_stride = 1;
    auto* integ = app.add_subcommand("integrate", "fixed-step integration, trajectory to CSV");
    integ->set_help_flag("--help", "print help");
    integ->add_option("--method", i_method)->required();
    integ->add_option("--problem", i_problem);
    integ->add_option("--param", i_params, "problem parameter key=value (repeatable)");
    auto* i_eps_opt = integ->add_option("--eps", i_eps, "problem stiffness parameter");
    integ->add_option("--h", i_h)->required();
    integ->add_option("--tf", i_tf)->required();
    integ->add_option("--stride", i_stride);
    integ->add_option("-o,--output", i_out);

    // converge
    std::string c_method, c_problem, c_out;
    std::vector<std::string> c_params;
    double c_eps = 0, c_h0 = 0.0625, c_tf = 1.0, c_order = 0, c_tol = 0.3;
    int c_rungs = 5;
    auto* conv = app.add_subcommand("converge", "refinement study and order fit");
    conv->set_help_flag("--help", "print help");
    conv->add_option("--method", c_method)->required();
    conv->add_option("--problem", c_problem)->required();
    conv->add_option("--param", c_params);
    auto* c_eps_opt = conv->add_option("--eps", c_eps);
    conv->add_option("--h0", c_h0);
    conv->add_option("--rungs", c_rungs);
    conv->add_option("--tf", c_tf);
    conv->add_option("--order", c_order, "theoretical order (default: tableau p)");
    conv->add_option("--tol", c_tol, "acceptance band on the fitted order");
    conv->add_option("-o,--output", c_out);

    // sweep-stiff
    std::string ss_method, ss_problem = "split-dahlquist", ss_out;
    std::vector<std::string> ss_params;
    std::vector<double> ss_lambdas{0.0, -1e2, -1e4, -1e6, -1e8};
    double ss_h = 0.01, ss_tf = 2.0;
    auto* sstiff = app.add_subcommand("sweep-stiff", "error vs stiffness at fixed h");
    sstiff->set_help_flag("--help", "print help");
    sstiff->alias("sweep_stiff");
    sstiff->add_option("--method", ss_method)->required();
    sstiff->add_option("--problem", ss_problem);
    sstiff->add_option("--param", ss_params);
    sstiff->add_option("--lambdas", ss_lambdas)->delimiter(',');
    sstiff->add_option("--h", ss_h);
    sstiff->add_option("--tf", ss_tf);
    sstiff->add_option("-o,--output", ss_out);

    // sweep-eps
    std::string se_method, se_problem = "kaps", se_out;
    std::vector<std::string> se_params;
    std::vector<double> se_eps{1e-3, 1e-4, 1e-5, 1e-6};
    double se_h0 = 0.0625, se_tf = 1.0, se_D = 1.0;
    int se_rungs = 6;
    auto* seps = app.add_subcommand("sweep-eps", "uniform-in-eps convergence sweep");
    seps->set_help_flag("--help", "print help");
    seps->alias("sweep_eps");
    seps->add_option("--method", se_method)->required();
    seps->add_option("--problem", se_problem);
    seps->add_option("--param", se_params);
    seps->add_option("--eps", se_eps)->delimiter(',');
    seps->add_option("--h0", se_h0);
    seps->add_option("--rungs", se_rungs);
    seps->add_option("--tf", se_tf);
    seps->add_option("--D", se_D, "require eps <= D*h on every rung");
    seps->add_option("-o,--output", se_out);

    // recurrence
    std::string r_matrix = "0.5", r_out;
    double r_nu = 1, r_T = 1.0, r_h0 = 0.0625;
    int r_rungs = 7;
    bool r_const = false, r_smooth = false, r_rough = false;
    auto* rec = app.add_subcommand("recurrence", "error-accumulation recurrence simulator");
    rec->set_help_flag("--help", "print help");
    rec->add_option("--matrix", r_matrix, "iteration matrix, e.g. \"0.5,0;0,-1\"");
    rec->add_option("--nu", r_nu)->required();
    rec->add_flag("--constant", r_const);
    rec->add_flag("--smooth", r_smooth);
    rec->add_flag("--rough", r_rough);
    rec->add_option("--T", r_T);
    rec->add_option("--h0", r_h0);
    rec->add_option("--rungs", r_rungs);
    rec->add_option("-o,--output", r_out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 2;
    }

    try {
        if (validate->parsed()) return cmd_validate(v_path);
        if (stability->parsed())
            return cmd_stability(s_path, s_remin, s_remax, s_immin, s_immax, s_nre, s_nim, s_out, s_D,
                                 s_alpha);
        if (integ->parsed())
            return cmd_integrate(i_method, i_problem, i_params, i_eps, i_eps_opt->count() > 0, i_h, i_tf,
                                 i_stride, i_out);
        if (conv->parsed())
            return cmd_converge(c_method, c_problem, c_params, c_eps, c_eps_opt->count() > 0, c_h0, c_rungs,
                                c_tf, c_order, c_tol, c_out);
        if (sstiff->parsed())
            return cmd_sweep_stiff(ss_method, ss_problem, ss_params, ss_lambdas, ss_h, ss_tf, ss_out);
        if (seps->parsed())
            return cmd_sweep_eps(se_method, se_problem, se_params, se_eps, se_h0, se_rungs, se_tf, se_D,
                                 se_out);
        if (rec->parsed())
            return cmd_recurrence(r_matrix, r_nu, r_const, r_smooth, r_rough, r_T, r_h0, r_rungs, r_out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
