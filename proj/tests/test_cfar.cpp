#include "nompcfar/cfar.hpp"
#include "nompcfar/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>

using namespace nompcfar;

namespace {

std::set<std::size_t> as_set_1d(const std::vector<GridIndex>& cells) {
    std::set<std::size_t> out;
    for (const auto& c : cells)
        out.insert(c[0]);
    return out;
}

ComplexTensor constant_spectrum_tensor(const Dims& dims, std::size_t cut, Complex cut_value, Complex other) {
    // Build y so that dft_spectrum(y) has the requested values: inverse of a
    // unitary DFT, done by brute force through the conjugate trick.
    std::size_t n = 1;
    for (auto d : dims)
        n *= d;
    CVector spec(n, other);
    spec[cut] = cut_value;
    CVector conj_spec(n);
    for (std::size_t i = 0; i < n; ++i)
        conj_spec[i] = std::conj(spec[i]);
    CVector y = oracle::brute_dft(conj_spec, dims);
    for (auto& v : y)
        v = std::conj(v);
    return ComplexTensor(dims, y);
}

/// Fraction of H0 trials on which the peak detector fires.
double h0_firing_rate(std::size_t n, const CfarConfig& cfg, std::size_t snapshots, long trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const ReferenceWindow window({n}, cfg.n_guard);
    std::vector<double> power(n);
    long fires = 0;
    for (long t = 0; t < trials; ++t) {
        std::fill(power.begin(), power.end(), 0.0);
        for (std::size_t s = 0; s < snapshots; ++s) {
            const ComplexTensor spec = dft_spectrum(oracle::random_tensor({n}, rng));
            for (std::size_t i = 0; i < n; ++i)
                power[i] += std::norm(spec[i]) / static_cast<double>(snapshots);
        }
        fires += cfar_delta_power(power, {n}, cfg, window, {}).fires() ? 1 : 0;
    }
    return static_cast<double>(fires) / static_cast<double>(trials);
}

void check_within_3_sigma(double measured, double p, long trials) {
    const double sd = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    INFO("analytic " << p << ", measured " << measured << ", z = " << (measured - p) / sd);
    CHECK(std::fabs(measured - p) <= 3.0 * sd);
}

} // namespace

TEST_SUITE("geometry") {
    TEST_CASE("reference cells wrap around the CUT") {
        CfarConfig cfg;
        cfg.n_ref = 4;
        cfg.n_guard = 1;
        CHECK(as_set_1d(reference_cells({0}, {16}, cfg)) == std::set<std::size_t>{2, 3, 13, 14});

        cfg.exclusion_radius = 0;
        const std::vector<GridIndex> excluded{{14}};
        CHECK(as_set_1d(reference_cells({0}, {16}, cfg, excluded)) == std::set<std::size_t>{2, 3, 4, 13});
    }

    TEST_CASE("2-D windows avoid guards and exclusions and grow outward") {
        std::mt19937_64 rng(8);
        const Dims dims{8, 8};
        std::uniform_int_distribution<std::size_t> cell(0, 63);
        for (int rep = 0; rep < 200; ++rep) {
            CfarConfig cfg;
            cfg.n_guard = rep % 3;
            cfg.n_ref = 1 + rep % 20;
            cfg.exclusion_radius = rep % 2;
            const std::size_t cut = cell(rng);
            std::vector<GridIndex> excluded;
            for (int e = 0; e < rep % 4; ++e)
                excluded.push_back(grid_index(cell(rng), dims));

            auto eligible = [&](std::size_t c) {
                if (oracle::cheb(c, cut, dims) <= cfg.n_guard)
                    return false;
                for (const auto& x : excluded)
                    if (oracle::cheb(c, linear_index(x, dims), dims) <= cfg.exclusion())
                        return false;
                return true;
            };
            std::size_t available = 0;
            for (std::size_t c = 0; c < 64; ++c)
                available += eligible(c) ? 1 : 0;

            if (available == 0) {
                CHECK_THROWS_AS(reference_cells(grid_index(cut, dims), dims, cfg, excluded), DegenerateWindow);
                continue;
            }
            const auto cells = reference_cells(grid_index(cut, dims), dims, cfg, excluded);
            CHECK(cells.size() == std::min(cfg.n_ref, available));
            std::set<std::size_t> chosen;
            std::size_t farthest = 0;
            for (const auto& c : cells) {
                const std::size_t lin = linear_index(c, dims);
                CHECK(eligible(lin));
                chosen.insert(lin);
                farthest = std::max(farthest, oracle::cheb(lin, cut, dims));
            }
            CHECK(chosen.size() == cells.size());
            // Nothing closer was skipped.
            for (std::size_t c = 0; c < 64; ++c)
                if (eligible(c) && !chosen.count(c))
                    CHECK(oracle::cheb(c, cut, dims) >= farthest);
        }
    }

    TEST_CASE("window that cannot collect a single cell") {
        CfarConfig cfg;
        cfg.n_ref = 4;
        cfg.n_guard = 3;
        CHECK_THROWS_AS(reference_cells({0}, {7}, cfg), DegenerateWindow);
    }

    TEST_CASE("exclusion mask covers the Chebyshev ball with wrap") {
        const std::vector<GridIndex> ex{{0, 0}};
        const auto mask = exclusion_mask({6, 6}, ex, 1);
        std::size_t count = 0;
        for (std::size_t i = 0; i < 36; ++i) {
            const bool expect = oracle::cheb(i, 0, {6, 6}) <= 1;
            CHECK(static_cast<bool>(mask[i]) == expect);
            count += mask[i];
        }
        CHECK(count == 9);
    }
}

TEST_SUITE("detector") {
    TEST_CASE("noise floor") {
        CfarConfig cfg;
        cfg.n_ref = 6;
        cfg.n_guard = 1;
        const Dims dims{16};
        const ComplexTensor twos = constant_spectrum_tensor(dims, 0, Complex(5.0, 0.0), Complex(0.0, 2.0));
        CHECK(noise_floor(dft_spectrum(twos), {0}, cfg) == doctest::Approx(4.0).epsilon(1e-10));

        CVector zeros(16);
        zeros[0] = Complex(3.0, 0.0);
        CHECK(noise_floor(ComplexTensor(dims, zeros), {0}, cfg) == 0.0);

        std::mt19937_64 rng(4);
        for (int rep = 0; rep < 20; ++rep) {
            const ComplexTensor spec = dft_spectrum(oracle::random_tensor(dims, rng));
            const GridIndex cut{static_cast<std::size_t>(rep % 16)};
            const auto cells = reference_cells(cut, dims, cfg);
            double mean = 0.0;
            for (const auto& c : cells)
                mean += std::norm(spec.at(c));
            mean /= static_cast<double>(cells.size());
            CHECK(noise_floor(spec, cut, cfg) == doctest::Approx(mean).epsilon(1e-12));
        }
    }

    TEST_CASE("soft decision") {
        std::mt19937_64 rng(12);
        CfarConfig cfg;
        cfg.n_ref = 12;
        cfg.n_guard = 2;
        cfg.alpha = 1e6;
        const ComplexTensor noise = oracle::random_tensor({32}, rng);
        const DeltaReport r = cfar_delta(noise, cfg);
        CHECK(r.delta_db < 0.0);
        CHECK(r.threshold == doctest::Approx(cfg.alpha * r.noise_floor));
        CHECK(r.delta_db == doctest::Approx(10.0 * std::log10(r.peak_power / r.threshold)));
        CHECK(r.n_ref_used == 12);

        // Peak exactly alpha times the floor.
        cfg.alpha = 6.25;
        const ComplexTensor edge = constant_spectrum_tensor({16}, 3, Complex(0.0, 5.0), Complex(2.0, 0.0));
        cfg.n_ref = 4;
        cfg.n_guard = 1;
        const DeltaReport e = cfar_delta(edge, cfg);
        CHECK(e.peak == GridIndex{3});
        CHECK(std::fabs(e.delta_db) < 1e-9);
        CHECK(e.fires());

        CVector spike(16);
        spike[0] = 1.0;
        const DeltaReport z = cfar_delta(dft_spectrum(ComplexTensor({16}, spike)), cfg);
        CHECK(z.zero_noise_floor);
        CHECK(std::isinf(z.delta_db));
        CHECK(z.delta_db > 0.0);
    }

    TEST_CASE("margin is invariant to data scaling") {
        std::mt19937_64 rng(31);
        CfarConfig cfg;
        cfg.n_ref = 20;
        cfg.n_guard = 2;
        cfg.alpha = 5.0;
        for (int rep = 0; rep < 10; ++rep) {
            const ComplexTensor y = oracle::random_tensor({16, 8}, rng);
            const DeltaReport a = cfar_delta(y, cfg);
            for (Complex c : {Complex(3.0, -1.0), Complex(0.0, 1e-3), Complex(-250.0, 0.0)}) {
                const DeltaReport b = cfar_delta(c * y, cfg);
                CHECK(b.peak == a.peak);
                CHECK(b.delta_db == doctest::Approx(a.delta_db).epsilon(1e-10));
            }
        }
    }

    TEST_CASE("order statistic threshold") {
        const std::vector<double> w{4.0, 1.0, 9.0};
        CHECK(os_threshold(w, 2, 2.0) == doctest::Approx(8.0));
        CHECK(os_threshold(w, 3, 1.5) == doctest::Approx(13.5));
        CHECK_THROWS_AS(os_threshold(std::vector<double>{}, 1, 1.0), DegenerateWindow);

        std::mt19937_64 rng(6);
        std::exponential_distribution<double> ex(1.0);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> v(1 + rep % 17);
            for (auto& x : v)
                x = ex(rng);
            std::vector<double> sorted = v;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t r = 1 + static_cast<std::size_t>(rep) % v.size();
            CHECK(os_threshold(v, r, 3.0) == doctest::Approx(3.0 * sorted[r - 1]));
        }
    }

    TEST_CASE("config validation") {
        CfarConfig cfg;
        cfg.n_ref = 0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg.n_ref = 10;
        cfg.alpha = -1.0;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg.alpha = 1.0;
        cfg.variant = CfarVariant::OS;
        cfg.os_rank = 11;
        CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
        cfg.os_rank = 7;
        CHECK_NOTHROW(cfg.validate());
        CHECK(parse_variant("OS") == CfarVariant::OS);
        CHECK(parse_variant("ca") == CfarVariant::CA);
        CHECK_THROWS_AS(parse_variant("goca"), InvalidArgument);
    }
}

TEST_SUITE("false alarm design") {
    TEST_CASE("quoted threshold values") {
        using clock = std::chrono::steady_clock;
        auto timed = [](auto f) {
            const auto t0 = clock::now();
            const double v = f();
            CHECK(std::chrono::duration<double>(clock::now() - t0).count() < 1.0);
            return v;
        };
        CHECK(timed([] { return alpha_from_pfa({1e-2, 256, 50, 1}); }) == doctest::Approx(11.22).epsilon(0.05 / 11.22));
        CHECK(timed([] { return alpha_from_pfa({1e-2, 256, 50, 10}); }) == doctest::Approx(2.81).epsilon(0.05 / 2.81));
        CHECK(timed([] { return alpha_from_pfa({1e-2, 256, 50, 50}); }) == doctest::Approx(1.67).epsilon(0.05 / 1.67));
        CHECK(alpha_nomp(1e-2, 256) == doctest::Approx(10.15).epsilon(0.01 / 10.15));
        CHECK(alpha_from_pfa_approx(1e-2, 256, 50) == doctest::Approx(11.25).epsilon(0.05 / 11.25));
        CHECK(pfa_from_alpha(11.22, 256, 50) == doctest::Approx(1e-2).epsilon(0.05));
        CHECK(pfa_from_alpha_mmv(2.81, 256, 50, 10) == doctest::Approx(1e-2).epsilon(0.05));
    }

    TEST_CASE("limits and monotonicity") {
        CHECK(pfa_from_alpha(1e-9, 64, 10) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(pfa_from_alpha_os(1e-9, 16, 8, 6) == doctest::Approx(1.0).epsilon(1e-6));
        double prev = 1.0;
        for (double a = 2.0; a < 40.0; a *= 1.3) {
            const double p = pfa_from_alpha(a, 128, 24);
            CHECK(p < prev);
            CHECK(p >= 0.0);
            CHECK(pfa_from_alpha(a, 256, 24) > p);
            prev = p;
        }
        prev = 1.0;
        for (double a = 0.5; a < 40.0; a *= 1.3) {
            const double p = pfa_from_alpha_os(a, 64, 16, 12);
            CHECK(p < prev);
            prev = p;
        }
    }

    TEST_CASE("series and quadrature agree") {
        CHECK(std::fabs(pfa_from_alpha_series(5.0, 16, 8) - pfa_from_alpha(5.0, 16, 8)) < 1e-6);
        CHECK(std::fabs(pfa_from_alpha_series(11.22, 32, 50) - pfa_from_alpha(11.22, 32, 50)) < 1e-6);
        // Wherever the guard lets the series through, it must agree.
        int evaluated = 0;
        for (std::size_t n : {1, 2, 8, 24, 40, 64})
            for (double a : {0.3, 2.0, 7.5, 15.0}) {
                double series = 0.0;
                try {
                    series = pfa_from_alpha_series(a, n, 12);
                } catch (const DomainError&) {
                    continue;
                }
                ++evaluated;
                CHECK(std::fabs(series - pfa_from_alpha(a, n, 12)) < 1e-6);
            }
        CHECK(evaluated >= 12);
        CHECK_THROWS_AS(pfa_from_alpha_series(5.0, 65, 8), DomainError);
    }

    TEST_CASE("multi-snapshot formula reduces to a single snapshot") {
        for (double a : {2.0, 11.22, 20.0})
            CHECK(std::fabs(pfa_from_alpha_mmv(a, 256, 50, 1) - pfa_from_alpha(a, 256, 50)) < 1e-8);
    }

    TEST_CASE("small-probability approximation") {
        const double a = alpha_from_pfa({1e-2, 256, 50, 1});
        const double gap = std::fabs(pfa_approx(a, 256, 50) - pfa_from_alpha(a, 256, 50)) / 1e-2;
        CHECK(gap < 0.05);
        CHECK(pfa_approx(7.0, 100, 1000000) == doctest::Approx(100.0 * std::exp(-7.0)).epsilon(1e-4));
    }

    TEST_CASE("threshold inversion round trip") {
        for (double p : {0.3, 0.1, 0.01}) {
            CHECK(pfa_from_alpha(alpha_from_pfa({p, 256, 50, 1}), 256, 50) == doctest::Approx(p).epsilon(1e-4));
            CHECK(pfa_from_alpha_mmv(alpha_from_pfa({p, 64, 20, 4}), 64, 20, 4) == doctest::Approx(p).epsilon(1e-4));
            CHECK(pfa_from_alpha_os(alpha_from_pfa_os(p, 64, 20, 15), 64, 20, 15) == doctest::Approx(p).epsilon(1e-4));
        }
        CHECK_THROWS_AS(alpha_from_pfa({0.0, 256, 50, 1}), InvalidArgument);
        CHECK_THROWS_AS(alpha_from_pfa({1.0, 256, 50, 1}), InvalidArgument);
    }

    TEST_CASE("known-noise threshold") {
        CHECK(alpha_nomp(0.5, 1) == doctest::Approx(0.693147).epsilon(1e-5));
        const double exact = alpha_from_pfa({1e-2, 256, 100000, 1});
        CHECK(std::fabs(exact - alpha_nomp(1e-2, 256)) < 1e-2);
        double gap_prev = 1e9;
        for (std::size_t nr : {10, 50, 500, 5000}) {
            const double gap = alpha_from_pfa({1e-2, 256, nr, 1}) - alpha_nomp(1e-2, 256);
            CHECK(gap > 0.0);
            CHECK(gap < gap_prev);
            gap_prev = gap;
        }
    }

    TEST_CASE("order statistic design versus cell averaging") {
        // With r = N_r the OS floor is the window maximum, so a smaller
        // multiplier suffices for the same nominal rate.
        const double ca = alpha_from_pfa({1e-2, 64, 32, 1});
        const double os = alpha_from_pfa_os(1e-2, 64, 32, 32);
        CHECK(os <= ca);
        CHECK(pfa_from_alpha_os(7.5218, 16, 8, 6) == doctest::Approx(0.05).epsilon(1e-3));
    }

    TEST_CASE("per-cell design") {
        const double a = alpha_cell_ca(1e-4, 20);
        CHECK(std::pow(a / 20.0 + 1.0, -20.0) == doctest::Approx(1e-4).epsilon(1e-9));
        CHECK(cell_pfa_ca(a, 20) == doctest::Approx(1e-4).epsilon(1e-9));
        const double b = alpha_cell_os(1e-4, 20, 15);
        CHECK(cell_pfa_os(b, 20, 15) == doctest::Approx(1e-4).epsilon(1e-6));
    }
}

// H0 Monte Carlo of the peak detector against the analytic expressions.
TEST_SUITE("h0_monte_carlo") {
    TEST_CASE("cell averaging, N=32, Nr=12") {
        CfarConfig cfg;
        cfg.n_ref = 12;
        cfg.n_guard = 2;
        cfg.alpha = alpha_from_pfa({0.05, 32, 12, 1});
        const long trials = 200000;
        check_within_3_sigma(h0_firing_rate(32, cfg, 1, trials, 100), 0.05, trials);
    }

    TEST_CASE("cell averaging, N=32, Nr=8") {
        CfarConfig cfg;
        cfg.n_ref = 8;
        cfg.n_guard = 2;
        cfg.alpha = alpha_from_pfa({0.05, 32, 8, 1});
        const long trials = 200000;
        check_within_3_sigma(h0_firing_rate(32, cfg, 1, trials, 101), pfa_from_alpha(cfg.alpha, 32, 8), trials);
    }

    TEST_CASE("multiple snapshots, N=16, Nr=4, S=2") {
        CfarConfig cfg;
        cfg.n_ref = 4;
        cfg.n_guard = 1;
        cfg.alpha = alpha_from_pfa({0.05, 16, 4, 2});
        const long trials = 200000;
        check_within_3_sigma(h0_firing_rate(16, cfg, 2, trials, 103), pfa_from_alpha_mmv(cfg.alpha, 16, 4, 2), trials);
    }

    TEST_CASE("order statistic, N=16, Nr=8, r=6") {
        CfarConfig cfg;
        cfg.variant = CfarVariant::OS;
        cfg.n_ref = 8;
        cfg.os_rank = 6;
        cfg.n_guard = 1;
        cfg.alpha = alpha_from_pfa_os(0.05, 16, 8, 6);
        const long trials = 200000;
        check_within_3_sigma(h0_firing_rate(16, cfg, 1, trials, 102), pfa_from_alpha_os(cfg.alpha, 16, 8, 6), trials);
    }
}
