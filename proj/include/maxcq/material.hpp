#ifndef MAXCQ_MATERIAL_HPP
#define MAXCQ_MATERIAL_HPP

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace maxcq {

using Complex = std::complex<double>;

struct PhysicalConstants {
    double eps0 = 8.8541878128e-12;  // F/m
    double mu0 = 4.0e-7 * 3.14159265358979323846;  // H/m

    double light_speed() const { return 1.0 / std::sqrt(eps0 * mu0); }
};

/// One first-order relaxation term delta_eps / (1 + s*tau_relax).
struct DebyePole {
    double delta_eps = 0.0;   // static minus high-frequency susceptibility, dimensionless
    double tau_relax = 0.0;   // relaxation time, seconds
};

/// Multipole Debye medium. chi_hat(s) = sum_i delta_eps_i / (1 + s tau_i).
/// Poles are summed in listed order; keep them sorted ascending in tau_relax
/// for deterministic round-off across runs.
struct MaterialModel {
    std::string name;
    double eps_inf_prime = 0.0;  // eps_inf = 1 + eps_inf_prime
    std::vector<DebyePole> poles;

    double eps_inf() const { return 1.0 + eps_inf_prime; }
    bool dispersive() const { return !poles.empty(); }
};

/// Builds a material, converting corner angular frequencies (rad/s) to
/// relaxation times via tau = 1/omega_corner when given, and dropping
/// degenerate poles with delta_eps below 1e-30.
inline MaterialModel make_material(std::string name, double eps_inf_prime,
                                   std::vector<DebyePole> poles) {
    MaterialModel m;
    m.name = std::move(name);
    m.eps_inf_prime = eps_inf_prime;
    for (const DebyePole& p : poles) {
        if (p.delta_eps >= 1e-30) m.poles.push_back(p);
    }
    return m;
}

inline DebyePole pole_from_corner(double delta_eps, double omega_corner) {
    return DebyePole{delta_eps, 1.0 / omega_corner};
}

/// chi_hat_i(s) for a single pole. Throws when s is numerically at the
/// transfer-function pole -1/tau_relax.
inline Complex chi_hat_pole(const DebyePole& pole, Complex s) {
    const Complex st = s * pole.tau_relax;
    const Complex den = 1.0 + st;
    if (std::abs(den) < 1e-14 * (1.0 + std::abs(st))) {
        throw std::domain_error("chi_hat_pole: s at transfer-function pole -1/tau_relax");
    }
    return pole.delta_eps / den;
}

/// chi_hat(s) = sum over poles in listed order. Empty pole list gives 0.
inline Complex chi_hat(const MaterialModel& model, Complex s) {
    Complex acc(0.0, 0.0);
    for (const DebyePole& p : model.poles) acc += chi_hat_pole(p, s);
    return acc;
}

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> issues;
    double eps_inf = 1.0;
    double chi_static = 0.0;  // chi_hat(0)
};

inline ValidationReport validate_model(const MaterialModel& model) {
    ValidationReport r;
    if (model.eps_inf_prime < 0.0) {
        r.valid = false;
        r.issues.push_back("eps_inf_prime must be non-negative");
    }
    for (std::size_t i = 0; i < model.poles.size(); ++i) {
        const DebyePole& p = model.poles[i];
        if (!(p.delta_eps > 0.0)) {
            r.valid = false;
            r.issues.push_back("pole " + std::to_string(i) + ": delta_eps must be positive");
        }
        if (!(p.tau_relax > 0.0)) {
            r.valid = false;
            r.issues.push_back("pole " + std::to_string(i) + ": tau_relax must be positive");
        }
    }
    r.eps_inf = model.eps_inf();
    if (r.valid) {
        for (const DebyePole& p : model.poles) r.chi_static += p.delta_eps;
    }
    return r;
}

/// Five-pole Debye model for human tissue plus eps_inf_prime = 3.3,
/// corner frequencies in rad/s.
inline MaterialModel tissue_material() {
    const double pi = 3.14159265358979323846;
    return make_material("tissue", 3.3,
                         {pole_from_corner(45.8, 40e9 * pi),
                          pole_from_corner(32.0, 460e6 * pi),
                          pole_from_corner(1.19e3, 1.34e6 * pi),
                          pole_from_corner(8.19e3, 86e3 * pi),
                          pole_from_corner(8.5e5, 138.0 * pi)});
}

inline MaterialModel vacuum_material() { return make_material("air", 0.0, {}); }

}  // namespace maxcq

#endif
