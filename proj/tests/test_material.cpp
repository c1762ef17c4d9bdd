#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "maxcq/material.hpp"

using namespace maxcq;

TEST_CASE("physical constants") {
    PhysicalConstants k;
    CHECK(k.light_speed() == doctest::Approx(299792458.0).epsilon(1e-9));
}

TEST_CASE("chi_hat of a single pole") {
    const DebyePole p{2.5, 1e-9};
    CHECK(chi_hat_pole(p, Complex(0.0, 0.0)).real() == doctest::Approx(2.5));
    // half-power point s = i/tau
    const Complex v = chi_hat_pole(p, Complex(0.0, 1e9));
    CHECK(std::abs(v) == doctest::Approx(2.5 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(chi_hat_pole(p, Complex(-1e9, 0.0)), std::domain_error);
}

TEST_CASE("chi_hat sums poles in listed order and handles empty models") {
    MaterialModel m = make_material("two", 0.0, {{1.0, 1e-9}, {3.0, 1e-6}});
    const Complex s(2e8, 5e7);
    const Complex expect = chi_hat_pole(m.poles[0], s) + chi_hat_pole(m.poles[1], s);
    CHECK(chi_hat(m, s) == expect);
    CHECK(chi_hat(vacuum_material(), s) == Complex(0.0, 0.0));
}

TEST_CASE("make_material drops degenerate poles") {
    MaterialModel m = make_material("x", 1.0, {{1e-31, 1e-9}, {2.0, 1e-9}});
    REQUIRE(m.poles.size() == 1);
    CHECK(m.poles[0].delta_eps == 2.0);
}

TEST_CASE("pole_from_corner inverts the corner frequency") {
    const DebyePole p = pole_from_corner(4.0, 2e9);
    CHECK(p.tau_relax == doctest::Approx(5e-10).epsilon(1e-15));
}

TEST_CASE("tissue model matches the published parameters") {
    const MaterialModel m = tissue_material();
    const double pi = 3.14159265358979323846;
    CHECK(m.eps_inf() == doctest::Approx(4.3));
    REQUIRE(m.poles.size() == 5);
    // listed ascending in relaxation time
    for (std::size_t i = 1; i < m.poles.size(); ++i) {
        CHECK(m.poles[i].tau_relax > m.poles[i - 1].tau_relax);
    }
    const ValidationReport r = validate_model(m);
    CHECK(r.valid);
    CHECK(r.chi_static == doctest::Approx(859457.8).epsilon(1e-12));
    CHECK(m.poles[4].tau_relax == doctest::Approx(1.0 / (138.0 * pi)).epsilon(1e-14));
    CHECK(m.poles[0].tau_relax == doctest::Approx(1.0 / (40e9 * pi)).epsilon(1e-14));
}

TEST_CASE("validation flags bad poles") {
    MaterialModel m;
    m.name = "bad";
    m.eps_inf_prime = -0.5;
    m.poles.push_back({-1.0, 0.0});
    const ValidationReport r = validate_model(m);
    CHECK_FALSE(r.valid);
    CHECK(r.issues.size() == 3);
}

TEST_CASE("static susceptibility limit: chi_hat(s) -> sum delta_eps as s -> 0") {
    const MaterialModel m = tissue_material();
    const Complex v = chi_hat(m, Complex(1e-6, 0.0));
    CHECK(v.real() == doctest::Approx(859457.8).epsilon(1e-8));
    CHECK(std::abs(v.imag()) < 1e-3);
}
