#ifndef MAXCQ_CQ_WEIGHTS_HPP
#define MAXCQ_CQ_WEIGHTS_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxcq/material.hpp"

namespace maxcq {

/// Convolution weights omega_0..omega_N of the trapezoidal CQ symbol
/// s(xi) = 2(1-xi)/(tau(1+xi)) applied to eps0*chi_hat. The weights carry
/// the eps0 factor, so p^n = sum_k omega_{n-k} e^k in raw field units.
struct WeightTable {
    double tau_step = 0.0;
    std::string material_name;
    Eigen::ArrayXd weights;

    Eigen::Index size() const { return weights.size(); }
};

struct ContourParams {
    Eigen::Index fft_length = 0;  // 0: smallest power of two >= max(2(N+1), 512)
    double radius = 0.0;          // 0: eps_machine^(1/(2N))
};

inline ContourParams default_contour_params(Eigen::Index n_weights) {
    ContourParams p;
    const double eps = std::numeric_limits<double>::epsilon();
    const Eigen::Index n = std::max<Eigen::Index>(n_weights - 1, 1);
    p.radius = std::pow(eps, 1.0 / (2.0 * static_cast<double>(n)));
    Eigen::Index len = 512;
    while (len < 2 * n_weights) len *= 2;
    p.fft_length = len;
    return p;
}

/// Weights by sampling eps0*chi_hat on the circle |xi| = rho and an FFT.
/// Accuracy per entry: O(rho^L/(rho^n(1-rho^L))) aliasing plus
/// rho^{-n} * eps_machine round-off contamination.
inline WeightTable weights_fft(const MaterialModel& model, const PhysicalConstants& constants,
                               double tau_step, Eigen::Index n_weights,
                               ContourParams params = {}) {
    if (!(tau_step > 0.0)) throw std::invalid_argument("weights_fft: tau_step must be positive");
    if (n_weights < 1) throw std::invalid_argument("weights_fft: need at least one weight");
    if (params.fft_length == 0 || params.radius == 0.0) {
        const ContourParams d = default_contour_params(n_weights);
        if (params.fft_length == 0) params.fft_length = d.fft_length;
        if (params.radius == 0.0) params.radius = d.radius;
    }
    const Eigen::Index L = params.fft_length;
    const double rho = params.radius;
    if (L < n_weights) throw std::invalid_argument("weights_fft: fft_length < n_weights");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("weights_fft: radius must be in (0,1)");

    const double pi = 3.14159265358979323846;
    std::vector<Complex> samples(static_cast<std::size_t>(L));
    for (Eigen::Index l = 0; l < L; ++l) {
        const double phi = 2.0 * pi * static_cast<double>(l) / static_cast<double>(L);
        const Complex xi = rho * Complex(std::cos(phi), std::sin(phi));
        const Complex s = (2.0 / tau_step) * (1.0 - xi) / (1.0 + xi);
        samples[static_cast<std::size_t>(l)] = constants.eps0 * chi_hat(model, s);
    }
    // Enforce conjugate symmetry so the inverse transform is exactly real.
    double asym = 0.0, scale = 0.0;
    for (Eigen::Index l = 1; l < L / 2; ++l) {
        Complex& a = samples[static_cast<std::size_t>(l)];
        Complex& b = samples[static_cast<std::size_t>(L - l)];
        asym = std::max(asym, std::abs(a - std::conj(b)));
        scale = std::max(scale, std::abs(a));
        const Complex sym = 0.5 * (a + std::conj(b));
        a = sym;
        b = std::conj(sym);
    }
    if (asym > 1e-10 * std::max(scale, 1e-300)) {
        throw std::runtime_error("weights_fft: conjugate-symmetry check failed (non-convergent contour)");
    }

    Eigen::FFT<double> fft;
    std::vector<Complex> spectrum;
    fft.fwd(spectrum, samples);  // sum_l samples[l] exp(-2 pi i n l / L)

    // The spectrum should be real up to FFT round-off; the rho^{-n} descaling
    // below amplifies that noise, so the check lives at spectrum level.
    double spec_abs = 0.0, spec_imag = 0.0;
    for (const Complex& v : spectrum) {
        spec_abs = std::max(spec_abs, std::abs(v));
    }
    for (Eigen::Index n = 0; n < n_weights; ++n) {
        spec_imag = std::max(spec_imag, std::abs(spectrum[static_cast<std::size_t>(n)].imag()));
    }
    if (spec_imag > 1e-10 * std::max(spec_abs, 1e-300)) {
        throw std::runtime_error("weights_fft: imaginary-part check failed");
    }

    WeightTable table;
    table.tau_step = tau_step;
    table.material_name = model.name;
    table.weights.resize(n_weights);
    double rho_pow = 1.0;
    for (Eigen::Index n = 0; n < n_weights; ++n) {
        table.weights[n] =
            spectrum[static_cast<std::size_t>(n)].real() / (static_cast<double>(L) * rho_pow);
        rho_pow *= rho;
    }
    return table;
}

/// Closed-form weights for a single Debye pole: substituting the symbol into
/// delta_eps/(1+s tau_relax) gives a degree-1 rational function of xi whose
/// power series is geometric after the first term.
inline WeightTable weights_debye_recurrence(const DebyePole& pole,
                                            const PhysicalConstants& constants,
                                            double tau_step, Eigen::Index n_weights) {
    if (!(tau_step > 0.0)) {
        throw std::invalid_argument("weights_debye_recurrence: tau_step must be positive");
    }
    const double r = pole.tau_relax / tau_step;
    const double a = 1.0 + 2.0 * r;
    const double b = 1.0 - 2.0 * r;
    WeightTable table;
    table.tau_step = tau_step;
    table.weights = Eigen::ArrayXd::Zero(n_weights);
    table.weights[0] = constants.eps0 * pole.delta_eps / a;
    if (n_weights > 1) table.weights[1] = constants.eps0 * pole.delta_eps * 4.0 * r / (a * a);
    const double ratio = -b / a;
    for (Eigen::Index n = 2; n < n_weights; ++n) {
        table.weights[n] = ratio * table.weights[n - 1];
    }
    return table;
}

/// Entrywise sum of per-pole recurrence tables, poles in listed order.
inline WeightTable weights_debye_model(const MaterialModel& model,
                                       const PhysicalConstants& constants,
                                       double tau_step, Eigen::Index n_weights) {
    WeightTable table;
    table.tau_step = tau_step;
    table.material_name = model.name;
    table.weights = Eigen::ArrayXd::Zero(n_weights);
    for (const DebyePole& p : model.poles) {
        table.weights += weights_debye_recurrence(p, constants, tau_step, n_weights).weights;
    }
    return table;
}

enum class WeightMethod { Recurrence, Fft };

/// One table per distinct material referenced by name.
inline std::map<std::string, WeightTable> weights_for_materials(
    const std::vector<MaterialModel>& materials, const PhysicalConstants& constants,
    double tau_step, Eigen::Index n_weights, WeightMethod method = WeightMethod::Recurrence,
    ContourParams params = {}) {
    std::map<std::string, WeightTable> out;
    for (const MaterialModel& m : materials) {
        if (out.count(m.name)) continue;
        out[m.name] = (method == WeightMethod::Recurrence)
                          ? weights_debye_model(m, constants, tau_step, n_weights)
                          : weights_fft(m, constants, tau_step, n_weights, params);
    }
    return out;
}

}  // namespace maxcq

#endif
