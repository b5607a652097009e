#include "nompcfar/analysis.hpp"
#include "nompcfar/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>

using namespace nompcfar;

namespace {

constexpr double kTau = 2.0 * oracle::kPi;

void check_3_sigma(double measured, double p, long trials) {
    const double sd = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(trials));
    INFO("analytic " << p << ", measured " << measured);
    CHECK(std::fabs(measured - p) <= 3.0 * sd);
}

/// Normalized (per-bin, max over dimensions) wrap distance.
double bin_dist(const FrequencyVector& a, const FrequencyVector& b, const Dims& dims) {
    double m = 0.0;
    for (std::size_t d = 0; d < dims.size(); ++d)
        m = std::max(m, oracle::circ(a[d], b[d]) * static_cast<double>(dims[d]) / kTau);
    return m;
}

} // namespace

TEST_SUITE("marcum") {
    TEST_CASE("closed forms") {
        CHECK(marcum_q1(0.0, 2.0) == doctest::Approx(0.1353352832).epsilon(1e-9));
        CHECK(marcum_q1(3.7, 0.0) == 1.0);
        CHECK(marcum_q1(0.0, 0.0) == 1.0);
        CHECK_THROWS_AS(marcum_q1(-1.0, 1.0), InvalidArgument);
    }

    TEST_CASE("series oracle") {
        // Q1(a,b) = exp(-(a^2+b^2)/2) sum_{k>=0} (a/b)^k I_k(ab), with I_k
        // from its own power series.
        auto bessel_i = [](int k, double x) {
            double term = std::pow(x / 2.0, k) / std::tgamma(k + 1.0);
            double sum = term;
            for (int m = 1; m < 200; ++m) {
                term *= (x / 2.0) * (x / 2.0) / (m * static_cast<double>(m + k));
                sum += term;
            }
            return sum;
        };
        for (double a : {0.5, 1.5, 3.0})
            for (double b : {0.7, 2.0, 4.0}) {
                double s = 0.0;
                for (int k = 0; k < 120; ++k)
                    s += std::pow(a / b, k) * bessel_i(k, a * b);
                const double q = std::exp(-(a * a + b * b) / 2.0) * s;
                CHECK(std::fabs(marcum_q1(a, b) - q) < 1e-10);
            }
    }

    TEST_CASE("Monte Carlo tail") {
        std::mt19937_64 rng(80);
        std::normal_distribution<double> g(0.0, 1.0);
        const double a = 1.5;
        const double b = 2.0;
        const long trials = 10000000;
        long hits = 0;
        for (long t = 0; t < trials; ++t) {
            const double x = a + g(rng);
            const double y = g(rng);
            hits += x * x + y * y >= b * b ? 1 : 0;
        }
        check_3_sigma(static_cast<double>(hits) / trials, marcum_q1(a, b), trials);
    }

    TEST_CASE("monotone in the threshold") {
        for (double a : {0.0, 0.8, 2.5})
            for (double b = 0.0; b < 6.0; b += 0.25)
                CHECK(marcum_q1(a, b) >= marcum_q1(a, b + 0.25));
    }
}

TEST_SUITE("detection probability") {
    TEST_CASE("limits") {
        for (std::size_t nr : {10, 50}) {
            const double alpha = 9.0;
            CHECK(pd_single(0.0, alpha, nr, 1) == doctest::Approx(std::pow(alpha / nr + 1.0, -static_cast<double>(nr))).epsilon(1e-8));
        }
        CHECK(pd_single(1e7, 11.22, 50, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(pd_single(std::numeric_limits<double>::infinity(), 11.22, 50, 2) == 1.0);
    }

    TEST_CASE("monotonicity") {
        for (std::size_t d : {1, 2}) {
            double prev = -1.0;
            for (double snr_db = 0.0; snr_db <= 30.0; snr_db += 1.0) {
                const double p = pd_single(std::pow(10.0, snr_db / 10.0), 11.22, 50, d);
                CHECK(p >= prev);
                prev = p;
            }
            for (double alpha = 4.0; alpha < 20.0; alpha += 2.0)
                CHECK(pd_single(30.0, alpha, 50, d) >= pd_single(30.0, alpha + 2.0, 50, d));
        }
    }

    TEST_CASE("Monte Carlo of the on-grid detector") {
        std::mt19937_64 rng(81);
        const double snr = std::pow(10.0, 1.5);
        const double alpha = 11.22;
        const std::size_t nr = 50;
        const Complex mean = 0.88 * std::sqrt(snr);
        std::exponential_distribution<double> ex(1.0);
        const long trials = 100000;
        long fires = 0;
        for (long t = 0; t < trials; ++t) {
            const Complex cut = mean + oracle::cn(rng);
            double floor = 0.0;
            for (std::size_t i = 0; i < nr; ++i)
                floor += ex(rng);
            floor /= static_cast<double>(nr);
            fires += std::norm(cut) >= alpha * floor ? 1 : 0;
        }
        check_3_sigma(static_cast<double>(fires) / trials, pd_single(snr, alpha, nr, 1), trials);
    }

    TEST_CASE("all-target bound") {
        const double p1 = pd_single(20.0, 11.22, 50, 1);
        const std::vector<double> one{20.0};
        CHECK(pd_all_upper(one, 11.22, 50, 1) == doctest::Approx(p1));
        const std::vector<double> mix{20.0, 35.0, 0.0};
        CHECK(pd_all_upper(mix, 11.22, 50, 1) ==
              doctest::Approx(p1 * pd_single(35.0, 11.22, 50, 1) * pd_single(0.0, 11.22, 50, 1)));
        CHECK(pd_all_upper(mix, 11.22, 50, 1) <= std::min({p1, pd_single(35.0, 11.22, 50, 1), pd_single(0.0, 11.22, 50, 1)}));
        CHECK_THROWS_AS(pd_all_upper(std::vector<double>{}, 11.22, 50, 1), InvalidArgument);
    }
}

TEST_SUITE("bound") {
    TEST_CASE("structure") {
        CHECK(crb_single_freq(64, 200.0) == doctest::Approx(crb_single_freq(64, 100.0) / 2.0));
        // Fixed per-sample SNR: integrated SNR grows with N, bound falls as N^-3.
        const double per_sample = 0.5;
        for (std::size_t n : {64, 128}) {
            const double r = crb_single_freq(n, per_sample * n) / crb_single_freq(2 * n, per_sample * 2 * n);
            CHECK(r == doctest::Approx(8.0).epsilon(0.02));
        }
        CHECK(crb_single_freq(256, 100.0) < crb_single_freq(128, 100.0));
        CHECK_THROWS_AS(crb_single_freq(1, 10.0), InvalidArgument);
    }

    TEST_CASE("single-target estimator reaches the bound") {
        std::mt19937_64 rng(82);
        std::uniform_real_distribution<double> u(0.0, kTau);
        const std::size_t n = 256;
        const double snr = 100.0;
        const int trials = 500;
        double sq = 0.0;
        for (int t = 0; t < trials; ++t) {
            const double w = u(rng);
            ComplexTensor y = synthesize({n}, std::vector{SinusoidComponent{std::polar(std::sqrt(snr / n), u(rng)), FrequencyVector{w}}});
            y += oracle::random_tensor({n}, rng);
            const CandidateSet est = nomp_topk(y, 1);
            const double e = wrap_dist(est.components[0].freq[0], w);
            sq += e * e;
        }
        const double mse = sq / trials;
        const double crb = crb_single_freq(n, snr);
        INFO("mse / crb = " << mse / crb);
        CHECK(mse <= 2.0 * crb);
        CHECK(mse >= 0.5 * crb);
    }
}

TEST_SUITE("scoring") {
    TEST_CASE("rule arithmetic") {
        const Dims dims{64};
        const double bin = kTau / 64.0;
        const CandidateSet truth{dims, {{Complex(1.0, 0.0), FrequencyVector{10.0 * bin}}}};

        const ScoreResult exact = score(truth, truth, dims);
        CHECK(exact.n_detected_true == 1);
        CHECK(exact.n_false == 0);
        CHECK(exact.all_detected);
        CHECK(exact.order_correct);
        CHECK(exact.freq_sq_error == 0.0);
        CHECK(exact.freq_mse() == 0.0);
        CHECK(exact.nmse == doctest::Approx(0.0));

        const CandidateSet off{dims, {{Complex(1.0, 0.0), FrequencyVector{10.6 * bin}}}};
        const ScoreResult miss = score(truth, off, dims);
        CHECK(miss.n_detected_true == 0);
        CHECK(miss.n_false == 1);
        CHECK(!miss.all_detected);

        const CandidateSet near{dims, {{Complex(1.0, 0.0), FrequencyVector{10.4 * bin}}}};
        const ScoreResult hit = score(truth, near, dims);
        CHECK(hit.n_detected_true == 1);
        CHECK(hit.n_false == 0);
        CHECK(hit.freq_mse() == doctest::Approx(std::pow(0.4 * bin, 2)));

        const ScoreResult empty = score(truth, CandidateSet{dims, {}}, dims);
        CHECK(empty.n_detected_true == 0);
        CHECK(!empty.order_correct);
        CHECK(std::isnan(empty.freq_mse()));
        CHECK(empty.nmse == doctest::Approx(1.0));

        const ScoreResult none = score(CandidateSet{dims, {}}, near, dims);
        CHECK(none.n_false == 1);
        CHECK(std::isnan(none.nmse));
    }

    TEST_CASE("agrees with an exhaustive pairwise matcher") {
        std::mt19937_64 rng(83);
        std::uniform_real_distribution<double> u(0.0, kTau);
        std::normal_distribution<double> jitter(0.0, 0.3);
        for (const Dims& dims : {Dims{128}, Dims{32, 16}}) {
            for (int rep = 0; rep < 200; ++rep) {
                // Truths at least 2.5 bins apart; estimates scattered near truths and at random.
                CandidateSet truth{dims, {}};
                while (truth.size() < 1 + static_cast<std::size_t>(rep % 6)) {
                    std::vector<double> w(dims.size());
                    for (auto& x : w)
                        x = u(rng);
                    const FrequencyVector f(w);
                    bool ok = true;
                    for (const auto& t : truth.components)
                        ok = ok && bin_dist(t.freq, f, dims) >= 2.5;
                    if (ok)
                        truth.components.push_back({oracle::cn(rng), f});
                }
                CandidateSet est{dims, {}};
                for (const auto& t : truth.components) {
                    if (rng() % 4 == 0)
                        continue;
                    std::vector<double> w;
                    for (std::size_t d = 0; d < dims.size(); ++d)
                        w.push_back(t.freq[d] + jitter(rng) * kTau / static_cast<double>(dims[d]));
                    est.components.push_back({t.amplitude, FrequencyVector(w)});
                }
                for (int extra = 0; extra < rep % 3; ++extra) {
                    std::vector<double> w(dims.size());
                    for (auto& x : w)
                        x = u(rng);
                    est.components.push_back({oracle::cn(rng), FrequencyVector(w)});
                }

                std::size_t detected = 0;
                double sq = 0.0;
                for (const auto& t : truth.components) {
                    double best = 1e300;
                    const SinusoidComponent* match = nullptr;
                    for (const auto& e : est.components) {
                        const double d = bin_dist(t.freq, e.freq, dims);
                        if (d < best) {
                            best = d;
                            match = &e;
                        }
                    }
                    if (match && best <= 0.5) {
                        ++detected;
                        for (std::size_t d = 0; d < dims.size(); ++d)
                            sq += std::pow(oracle::circ(t.freq[d], match->freq[d]), 2);
                    }
                }
                std::size_t false_alarms = 0;
                for (const auto& e : est.components) {
                    double best = 1e300;
                    for (const auto& t : truth.components)
                        best = std::min(best, bin_dist(t.freq, e.freq, dims));
                    false_alarms += best >= 0.5 ? 1 : 0;
                }

                const ScoreResult s = score(truth, est, dims);
                CHECK(s.n_true == truth.size());
                CHECK(s.n_detected_true == detected);
                CHECK(s.n_false == false_alarms);
                CHECK(s.all_detected == (detected == truth.size()));
                CHECK(s.freq_sq_error == doctest::Approx(sq).epsilon(1e-12));

                // Permuting either list changes nothing.
                CandidateSet t2 = truth;
                CandidateSet e2 = est;
                std::shuffle(t2.components.begin(), t2.components.end(), rng);
                std::shuffle(e2.components.begin(), e2.components.end(), rng);
                const ScoreResult p = score(t2, e2, dims);
                CHECK(p.n_detected_true == s.n_detected_true);
                CHECK(p.n_false == s.n_false);
                CHECK(p.freq_sq_error == doctest::Approx(s.freq_sq_error).epsilon(1e-12));
                CHECK(p.nmse == doctest::Approx(s.nmse).epsilon(1e-9));
            }
        }
    }

    TEST_CASE("normalized reconstruction error") {
        const Dims dims{16};
        const CandidateSet truth{dims, {{Complex(2.0, 0.0), FrequencyVector{1.0}}}};
        const CandidateSet half{dims, {{Complex(1.0, 0.0), FrequencyVector{1.0}}}};
        CHECK(score(truth, half, dims).nmse == doctest::Approx(0.25));
    }
}
