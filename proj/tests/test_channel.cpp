#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "vlpc/scenario.hpp"

#include <cmath>
#include <random>

using namespace vlpc;

namespace {

// single PD straight under the test: offsets chosen so PD 0 sits at mu
Scenario pd_at_mu(const Vec3& mu) {
    Scenario s;
    s.mu_position = mu;
    s.pd_offsets = {Vec3(0, 0, 0), Vec3(0.05, 0, 0), Vec3(0, 0.05, 0)};
    return s;
}

Vec3 fd_gradient(const Scenario& s, int pd, const Vec3& mu, double step) {
    Vec3 g;
    for (int a = 0; a < 3; ++a) {
        Vec3 lo = mu, hi = mu;
        lo[a] -= step;
        hi[a] += step;
        g[a] = (los_gain(s, pd, hi) - los_gain(s, pd, lo)) / (2 * step);
    }
    return g;
}

}  // namespace

TEST_CASE("lambertian order") {
    CHECK(lambertian_order(60.0) == doctest::Approx(1.0).epsilon(1e-14));
    // independent evaluation of -ln2/ln(cos 30 deg)
    const double expect = -std::log(2.0) / std::log(std::cos(30.0 * M_PI / 180.0));
    CHECK(lambertian_order(30.0) == doctest::Approx(expect).epsilon(1e-14));
    CHECK(lambertian_order(30.0) == doctest::Approx(4.8187).epsilon(1e-4));
    CHECK_THROWS_AS(lambertian_order(0.0), std::domain_error);
    CHECK_THROWS_AS(lambertian_order(90.0), std::domain_error);
    CHECK_THROWS_AS(lambertian_order(-5.0), std::domain_error);
}

TEST_CASE("alpha constant") {
    ChannelParams p;  // Table-III defaults: m = 1, A = 1e-4, g = T_f = 1
    CHECK(alpha_const(p) == doctest::Approx(1e-4 / M_PI).epsilon(1e-12));
    CHECK(alpha_const(p) == doctest::Approx(3.18310e-5).epsilon(1e-5));

    ChannelParams dbl = p;
    dbl.a_pd *= 2;
    CHECK(alpha_const(dbl) == doctest::Approx(2 * alpha_const(p)).epsilon(1e-14));

    // (m+1) scaling against the definition for another half-angle
    ChannelParams narrow = p;
    narrow.theta_half_deg = 30.0;
    const double m = lambertian_order(30.0);
    CHECK(alpha_const(narrow) ==
          doctest::Approx((m + 1) * 1e-4 / (2 * M_PI)).epsilon(1e-14));
}

TEST_CASE("los gain closed-form values") {
    Scenario s = pd_at_mu(Vec3(2.5, 2.5, 1.0));
    const double alpha = alpha_const(s.channel);
    // nadir PD, d = 2, m = 1: h = alpha * 4 / 16
    CHECK(los_gain(s, 0, s.mu_position) == doctest::Approx(alpha / 4).epsilon(1e-12));
    CHECK(los_gain(s, 0, s.mu_position) == doctest::Approx(7.9577e-6).epsilon(1e-4));

    Scenario off = pd_at_mu(Vec3(4.5, 2.5, 1.0));
    CHECK(los_gain(off, 0, off.mu_position) == doctest::Approx(alpha * 4 / 64).epsilon(1e-12));
    CHECK(los_gain(off, 0, off.mu_position) == doctest::Approx(1.9894e-6).epsilon(1e-4));

    Scenario at_plane = pd_at_mu(Vec3(2.5, 2.5, 3.0));
    CHECK(los_gain(at_plane, 0, at_plane.mu_position) == 0.0);
}

TEST_CASE("FoV clipping") {
    Scenario s = pd_at_mu(Vec3(2.5, 2.5, 1.0));
    s.channel.fov_deg = 30.0;
    CHECK(los_gain(s, 0, s.mu_position) > 0.0);  // nadir: 0 deg incidence
    // far to the side: incidence well beyond 30 deg
    Scenario far = pd_at_mu(Vec3(0.1, 2.5, 1.0));
    far.channel.fov_deg = 30.0;
    CHECK(los_gain(far, 0, far.mu_position) == 0.0);
    CHECK_THROWS_AS(los_gain_gradient(far, 0, far.mu_position), std::domain_error);
}

TEST_CASE("gradient at the nadir point") {
    Scenario s = pd_at_mu(Vec3(2.5, 2.5, 1.0));
    const Vec3 g = los_gain_gradient(s, 0, s.mu_position);
    CHECK(g.x() == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(g.y() == doctest::Approx(0.0).epsilon(1e-18));
    // m = 1 reduction: dh/dz = 2 h / d at the symmetric point
    const double h = los_gain(s, 0, s.mu_position);
    CHECK(g.z() == doctest::Approx(2 * h / 2.0).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    Scenario s;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ux(0.8, 4.2), uz(0.5, 2.2);
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
        const Vec3 mu(ux(rng), ux(rng), uz(rng));
        for (int pd = 0; pd < 3; ++pd) {
            const Vec3 an = los_gain_gradient(s, pd, mu);
            const Vec3 fd = fd_gradient(s, pd, mu, 1e-6);
            for (int a = 0; a < 3; ++a) {
                const double rel = std::abs(fd[a] - an[a]) / std::max(std::abs(an[a]), 1e-3 * an.norm());
                worst = std::max(worst, rel);
            }
        }
    }
    CHECK(worst <= 1e-5);
}

TEST_CASE("gain monotone in horizontal distance and linear in A_pd") {
    Scenario s;
    double prev = los_gain(s, 0, Vec3(2.5, 2.5, 1.5));
    for (int k = 1; k <= 15; ++k) {
        const double h = los_gain(s, 0, Vec3(2.5 + 0.15 * k, 2.5, 1.5));
        CHECK(h < prev);
        prev = h;
    }

    Scenario scaled = s;
    scaled.channel.a_pd *= 3.0;
    const Vec3 mu(1.7, 3.1, 1.2);
    for (int pd = 0; pd < 3; ++pd) {
        CHECK(los_gain(scaled, pd, mu) == doctest::Approx(3 * los_gain(s, pd, mu)).epsilon(1e-14));
        const Vec3 g1 = los_gain_gradient(s, pd, mu), g3 = los_gain_gradient(scaled, pd, mu);
        for (int a = 0; a < 3; ++a) CHECK(g3[a] == doctest::Approx(3 * g1[a]).epsilon(1e-13));
    }
}

TEST_CASE("scenario validation is exhaustive") {
    Scenario s;
    s.bandwidth_hz = -1;
    s.channel.theta_half_deg = 95;
    s.pd_offsets = {Vec3(0, 0, 0), Vec3(0.1, 0, 0), Vec3(0.2, 0, 0)};  // collinear
    try {
        s.validate();
        CHECK(false);
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bandwidth_hz") != std::string::npos);
        CHECK(msg.find("theta_half_deg") != std::string::npos);
        CHECK(msg.find("collinear") != std::string::npos);
    }
    CHECK_NOTHROW(Scenario{}.validate());
}

TEST_CASE("equilateral offsets have side L and zero centroid") {
    const auto v = equilateral_pd_offsets(0.1);
    REQUIRE(v.size() == 3);
    CHECK((v[0] - v[1]).norm() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK((v[1] - v[2]).norm() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK((v[0] - v[2]).norm() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK((v[0] + v[1] + v[2]).norm() == doctest::Approx(0.0).epsilon(1e-15));
}
