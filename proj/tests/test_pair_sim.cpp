#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "paircorr/pair_sim.hpp"

using namespace paircorr;

namespace {

SimConfig base_config(std::uint64_t trials)
{
    SimConfig c;
    c.schedule.trial_count = trials;
    c.rates = {0.01, 0.011, 0.011, 1e-3, 0.3, 0.3};
    c.seed = 99;
    return c;
}

double chi2_critical(double dof, double p = 1e-4)
{
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), p));
}

}  // namespace

TEST_CASE("same seed gives the same record for any worker count")
{
    auto cfg = base_config(20000);
    cfg.rates.p1_uncorr = 0.3;
    auto one = simulate(cfg, 1);
    CHECK(!one.events().empty());
    for (unsigned w : {2u, 3u, 7u})
        CHECK(simulate(cfg, w) == one);
    cfg.seed = 100;
    CHECK_FALSE(simulate(cfg, 1) == one);
}

TEST_CASE("any trial can be regenerated on its own")
{
    auto cfg = base_config(500);
    cfg.rates.p1_uncorr = 1.0;
    cfg.rates.p2_uncorr = 1.0;
    auto full = simulate(cfg, 1);
    for (std::uint64_t j : {0u, 17u, 499u}) {
        auto alone = simulate_trials(cfg, j, j + 1);
        std::vector<DetectionEvent> slice;
        for (auto const& ev : full.events())
            if (ev.trial == j)
                slice.push_back(ev);
        CHECK(alone == slice);
    }
}

TEST_CASE("trial streams are uncorrelated")
{
    // adjacent trial streams: first outputs should look independent
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    int const n = 20000;
    for (int j = 0; j < n; ++j) {
        TrialRng a(5, j), b(5, j + 1);
        double x = std::ldexp(static_cast<double>(a() >> 11), -53);
        double y = std::ldexp(static_cast<double>(b() >> 11), -53);
        sx += x, sy += y, sxy += x * y, sxx += x * x, syy += y * y;
    }
    double cov = sxy / n - (sx / n) * (sy / n);
    double corr = cov / std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    CHECK(std::abs(corr) < 4 / std::sqrt(double(n)));
}

TEST_CASE("every simulated event lies inside its window")
{
    auto cfg = base_config(5000);
    cfg.rates = {0.5, 3, 3, 0.5, 1, 1};
    auto rec = simulate(cfg);
    for (auto const& ev : rec.events()) {
        CHECK(ev.time_ps >= 0);
        CHECK(ev.time_ps < ps_from_ns(cfg.schedule.window_ns));
    }
}

TEST_CASE("uncorrelated photon numbers are Poisson")
{
    auto cfg = base_config(40000);
    cfg.rates = {0, 2.0, 0, 0, 1.0, 1.0};
    auto rec = simulate(cfg);
    std::vector<int> per_trial(cfg.schedule.trial_count, 0);
    for (auto const& ev : rec.events())
        ++per_trial[ev.trial];

    int const top = 8;  // last bin is ">= top"
    std::vector<double> observed(top + 1, 0);
    for (int n : per_trial)
        ++observed[std::min(n, top)];
    boost::math::poisson_distribution<double> pois(2.0);
    double chi2 = 0;
    for (int k = 0; k <= top; ++k) {
        double p = k < top ? boost::math::pdf(pois, k) : boost::math::cdf(complement(pois, top - 1));
        double e = p * static_cast<double>(cfg.schedule.trial_count);
        chi2 += (observed[k] - e) * (observed[k] - e) / e;
    }
    CHECK(chi2 < chi2_critical(top));
}

TEST_CASE("a silent source records nothing")
{
    auto cfg = base_config(10000);
    cfg.rates = {0, 0, 0, 0, 0.3, 0.3};
    CHECK(simulate(cfg).events().empty());
}

TEST_CASE("dark counts are Poisson with mean four per window rate")
{
    auto cfg = base_config(100000);
    double const d = 0.05;
    cfg.rates = {0, 0, 0, d, 0.3, 0.3};
    auto rec = simulate(cfg);
    std::vector<int> per_trial(cfg.schedule.trial_count, 0);
    for (auto const& ev : rec.events())
        ++per_trial[ev.trial];

    int const top = 3;
    std::vector<double> observed(top + 1, 0);
    for (int n : per_trial)
        ++observed[std::min(n, top)];
    boost::math::poisson_distribution<double> pois(4 * d);
    double chi2 = 0;
    for (int k = 0; k <= top; ++k) {
        double p = k < top ? boost::math::pdf(pois, k) : boost::math::cdf(complement(pois, top - 1));
        double e = p * static_cast<double>(cfg.schedule.trial_count);
        chi2 += (observed[k] - e) * (observed[k] - e) / e;
    }
    boost::math::chi_squared dist(top);
    CHECK(chi2 < boost::math::quantile(boost::math::complement(dist, 0.01)));
}

TEST_CASE("detection efficiency thins and splits photons evenly")
{
    auto cfg = base_config(40000);
    cfg.rates = {0, 1.0, 0, 0, 0.3, 0.3};
    auto rec = simulate(cfg);
    double a = 0, b = 0;
    for (auto const& ev : rec.events())
        (ev.channel.arm == Arm::A ? a : b) += 1;
    double mean = (a + b) / 40000;
    CHECK(mean == doctest::Approx(0.3).epsilon(4 * std::sqrt(0.3 / 40000) / 0.3));
    CHECK(std::abs(a - b) < 4 * std::sqrt(a + b));
}

TEST_CASE("accepted pair times follow the model density")
{
    // Binned (t1, t2) draws against the density integrated over the same cells.
    TrialSchedule s;
    s.delta_t_ns = 50;
    PairDensity density(CoherenceModel{}, {}, s);
    PairSampler sampler(density);
    std::mt19937_64 rng(2024);

    int const nb = 10;
    double const w1 = s.write_duration_ns / nb;
    double const g0 = density.read_gate_begin_ns();
    double const w2 = (density.read_gate_end_ns() - g0) / nb;
    std::vector<double> obs(nb * nb, 0);
    int const draws = 400000;
    int accepted = 0;
    for (int i = 0; i < draws; ++i) {
        auto d = sampler(rng);
        if (!d.t2_ns)
            continue;
        ++accepted;
        int b1 = std::min(nb - 1, static_cast<int>(d.t1_ns / w1));
        int b2 = std::min(nb - 1, static_cast<int>((*d.t2_ns - g0) / w2));
        ++obs[b1 * nb + b2];
    }

    // fraction accepted equals the total integral of the density
    double const total = density.integrate(0.25);
    double const frac = double(accepted) / draws;
    CHECK(std::abs(frac - total) < 4 * std::sqrt(total * (1 - total) / draws));

    double chi2 = 0;
    int dof = -1;
    double rest_o = 0, rest_e = 0;
    for (int b1 = 0; b1 < nb; ++b1) {
        for (int b2 = 0; b2 < nb; ++b2) {
            double e = 0;
            int const sub = 40;
            for (int i = 0; i < sub; ++i)
                for (int j = 0; j < sub; ++j)
                    e += density((b1 + (i + 0.5) / sub) * w1, g0 + (b2 + (j + 0.5) / sub) * w2);
            e *= w1 * w2 / (sub * sub) / total * accepted;
            double o = obs[b1 * nb + b2];
            if (e < 5) {
                rest_o += o;
                rest_e += e;
                continue;
            }
            chi2 += (o - e) * (o - e) / e;
            ++dof;
        }
    }
    if (rest_e > 0) {
        chi2 += (rest_o - rest_e) * (rest_o - rest_e) / rest_e;
        ++dof;
    }
    CHECK(dof > 30);
    CHECK(chi2 < chi2_critical(dof));
}

TEST_CASE("mean storage time matches the model")
{
    TrialSchedule s;
    s.delta_t_ns = 100;
    CoherenceModel unpol;
    PairDensity density(unpol, {}, s);
    PairSampler sampler(density);
    TrialRng rng(3, 0);

    double sum = 0, sum2 = 0;
    int n = 0;
    for (int i = 0; i < 300000; ++i) {
        auto d = sampler(rng);
        if (!d.t2_ns)
            continue;
        double T = *d.t2_ns - d.t1_ns;
        sum += T;
        sum2 += T * T;
        ++n;
    }
    double mean = sum / n;
    double sd = std::sqrt(sum2 / n - mean * mean);

    double num = 0, den = 0;
    double const h = 0.25;
    for (double t1 = h / 2; t1 < s.write_duration_ns; t1 += h)
        for (double t2 = density.read_gate_begin_ns() + h / 2; t2 < density.read_gate_end_ns(); t2 += h) {
            double f = density(t1, t2);
            num += (t2 - t1) * f;
            den += f;
        }
    CHECK(std::abs(mean - num / den) < 4 * sd / std::sqrt(double(n)));
}

TEST_CASE("without dephasing the mean delay is the model's")
{
    TrialSchedule s;
    s.delta_t_ns = 50;
    CoherenceModel homogeneous(ZeemanScheme::unpolarized(), {0.0});
    PairDensity density(homogeneous, {}, s);
    PairSampler sampler(density);
    TrialRng rng(11, 0);

    double sum = 0;
    int n = 0;
    for (int i = 0; i < 1000000; ++i) {
        auto d = sampler(rng);
        if (!d.t2_ns)
            continue;
        sum += *d.t2_ns - d.t1_ns;
        ++n;
    }

    double num = 0, den = 0;
    double const h = 0.25;
    for (double t1 = h / 2; t1 < s.write_duration_ns; t1 += h)
        for (double t2 = density.read_gate_begin_ns() + h / 2; t2 < density.read_gate_end_ns(); t2 += h) {
            double f = density(t1, t2);
            num += (t2 - t1) * f;
            den += f;
        }
    CHECK(std::abs(sum / n - num / den) < 0.5);
}

TEST_CASE("field-1 singles do not depend on the read delay")
{
    auto cfg = base_config(200000);
    cfg.rates.p_pair = 0.2;
    auto singles = [&](double dt, std::uint64_t seed) {
        cfg.schedule.delta_t_ns = dt;
        cfg.seed = seed;
        std::vector<char> hit(cfg.schedule.trial_count, 0);
        for (auto const& ev : simulate(cfg).events())
            if (ev.channel.field == Field::Field1)
                hit[ev.trial] = 1;
        double s = 0;
        for (char h : hit)
            s += h;
        return s / static_cast<double>(cfg.schedule.trial_count);
    };
    double a = singles(30, 1), b = singles(400, 2);
    double se = std::sqrt(a * (1 - a) / 200000 + b * (1 - b) / 200000);
    CHECK(std::abs(a - b) < 4 * se);
}

TEST_CASE("configuration validation")
{
    auto cfg = base_config(10);
    cfg.dead_time_ns = 5;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = base_config(10);
    cfg.rates.eta1 = 1.5;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = base_config(10);
    cfg.rates.p1_uncorr = -1;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = base_config(0);
    CHECK(simulate(cfg).events().empty());
}

TEST_CASE("simulated records describe their configuration")
{
    auto cfg = base_config(3);
    auto rec = simulate(cfg);
    CHECK(rec.metadata().at("seed") == "99");
    CHECK(rec.metadata().at("rates.p1_uncorr") == "0.011");
    CHECK(rec.metadata().at("coherence.polarization") == "unpolarized");
}
