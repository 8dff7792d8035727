#include <catch2/catch_amalgamated.hpp>

#include <ws/signal.hpp>
#include <ws/rng.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <vector>

using ws::signal::PeakParams;
using ws::signal::Series;
using ws::signal::detect_peaks;
using ws::signal::fourier_lowpass;
using ws::signal::kPi;
using ws::signal::magnitude;

namespace {

Series make_sine(double freq_hz, double fs, size_t n, double amp = 1.0) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
        v[i] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / fs);
    }
    return Series(std::move(v), fs);
}

double energy(const Series& s) {
    return std::inner_product(s.values.begin(), s.values.end(), s.values.begin(), 0.0);
}

// Textbook O(n^2) DFT, used as an independent oracle for the transform
// inside fourier_lowpass.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) /
                               static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

// Reference low-pass built entirely on the naive DFT: zero bins strictly
// above the cutoff (DC kept), invert with an O(n^2) sum.
std::vector<double> naive_lowpass(const std::vector<double>& x, double fs, double cutoff) {
    auto spec = naive_dft(x);
    const size_t n = x.size();
    for (size_t k = 1; k < n; ++k) {
        const size_t kk = std::min(k, n - k);
        const double freq = static_cast<double>(kk) * fs / static_cast<double>(n);
        if (freq > cutoff * (1.0 + 1e-12)) spec[k] = 0.0;
    }
    std::vector<double> out(n);
    for (size_t t = 0; t < n; ++t) {
        std::complex<double> acc{0.0, 0.0};
        for (size_t k = 0; k < n; ++k) {
            const double ang = 2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) /
                               static_cast<double>(n);
            acc += spec[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[t] = acc.real() / static_cast<double>(n);
    }
    return out;
}

// Independent peak oracle: strict local maxima above the normalized level,
// then a repeated max-scan — pick the tallest remaining candidate (ties:
// lowest index), discard everything within min_distance of it.
std::vector<int> oracle_peaks(const std::vector<double>& v, double thres, int min_dist) {
    const int n = static_cast<int>(v.size());
    if (n < 3) return {};
    double mn = v[0], mx = v[0];
    for (double x : v) {
        mn = std::min(mn, x);
        mx = std::max(mx, x);
    }
    const double level = thres * (mx - mn) + mn;
    std::vector<int> cand;
    for (int i = 1; i + 1 < n; ++i) {
        if (v[i - 1] < v[i] && v[i] > v[i + 1] && v[i] > level) cand.push_back(i);
    }
    std::vector<int> kept;
    std::vector<bool> alive(cand.size(), true);
    for (;;) {
        int best = -1;
        for (size_t j = 0; j < cand.size(); ++j) {
            if (!alive[j]) continue;
            if (best < 0 || v[cand[j]] > v[cand[best]]) best = static_cast<int>(j);
        }
        if (best < 0) break;
        kept.push_back(cand[best]);
        for (size_t j = 0; j < cand.size(); ++j) {
            if (alive[j] && std::abs(cand[j] - cand[best]) <= min_dist) alive[j] = false;
        }
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

}  // namespace

TEST_CASE("magnitude combines axes with the Euclidean norm") {
    SECTION("3-4-0 triple gives 5 at every index") {
        Series x({3.0, 3.0, 3.0}, 20.0);
        Series y({4.0, 4.0, 4.0}, 20.0);
        Series z({0.0, 0.0, 0.0}, 20.0);
        auto m = magnitude(x, y, z);
        REQUIRE(m.size() == 3);
        for (double v : m.values) CHECK(v == 5.0);
        CHECK(m.sampling_rate == 20.0);
    }

    SECTION("all-zero axes give an all-zero series") {
        Series zero(std::vector<double>(16, 0.0), 20.0);
        auto m = magnitude(zero, zero, zero);
        for (double v : m.values) CHECK(v == 0.0);
    }

    SECTION("random 100-sample triple matches a scalar-loop oracle") {
        ws::Rng rng(42);
        std::vector<double> xs(100), ys(100), zs(100);
        for (size_t i = 0; i < 100; ++i) {
            xs[i] = rng.uniform(-5.0, 5.0);
            ys[i] = rng.uniform(-5.0, 5.0);
            zs[i] = rng.uniform(-5.0, 5.0);
        }
        auto m = magnitude(Series(xs, 20.0), Series(ys, 20.0), Series(zs, 20.0));
        for (size_t i = 0; i < 100; ++i) {
            const double expect = std::sqrt(xs[i] * xs[i] + ys[i] * ys[i] + zs[i] * zs[i]);
            CHECK(m.values[i] == expect);
        }
    }

    SECTION("length mismatch is rejected") {
        Series a({1.0, 2.0}, 20.0);
        Series b({1.0, 2.0, 3.0}, 20.0);
        CHECK_THROWS_AS(magnitude(a, b, a), std::invalid_argument);
    }

    SECTION("sampling-rate mismatch is rejected") {
        Series a({1.0, 2.0}, 20.0);
        Series b({1.0, 2.0}, 25.0);
        CHECK_THROWS_AS(magnitude(a, a, b), std::invalid_argument);
    }
}

TEST_CASE("Series validation") {
    CHECK_THROWS_AS(Series({}, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(Series({1.0}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(Series({1.0}, -3.0), std::invalid_argument);
    CHECK_THROWS_AS(Series({std::nan("")}, 20.0), std::invalid_argument);
    CHECK_THROWS_AS(Series({std::numeric_limits<double>::infinity()}, 20.0),
                    std::invalid_argument);
}

TEST_CASE("fourier_lowpass passes tones below the cutoff untouched") {
    auto s = make_sine(1.0, 20.0, 400);
    auto out = fourier_lowpass(s, 2.5);
    REQUIRE(out.size() == s.size());
    for (size_t i = 0; i < s.size(); ++i) {
        CHECK(std::abs(out.values[i] - s.values[i]) < 1e-9);
    }
}

TEST_CASE("fourier_lowpass removes a tone above the cutoff") {
    const double fs = 20.0;
    const size_t n = 400;
    auto low = make_sine(1.0, fs, n);
    std::vector<double> mixed(n);
    for (size_t i = 0; i < n; ++i) {
        mixed[i] = low.values[i] +
                   std::sin(2.0 * kPi * 8.0 * static_cast<double>(i) / fs);
    }
    auto out = fourier_lowpass(Series(mixed, fs), 2.5);
    for (size_t i = 0; i < n; ++i) {
        CHECK(std::abs(out.values[i] - low.values[i]) < 1e-9);
    }
}

TEST_CASE("fourier_lowpass keeps constant series exactly") {
    for (double c : {0.0, -3.25, 7.5}) {
        Series s(std::vector<double>(123, c), 20.0);
        auto out = fourier_lowpass(s, 1.0);
        for (double v : out.values) CHECK(std::abs(v - c) < 1e-9);
    }
}

TEST_CASE("fourier_lowpass validates the cutoff") {
    Series s({1.0, 2.0, 3.0, 4.0}, 20.0);
    CHECK_THROWS_AS(fourier_lowpass(s, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(fourier_lowpass(s, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(fourier_lowpass(s, 10.5), std::invalid_argument);
    CHECK_NOTHROW(fourier_lowpass(s, 10.0));  // exactly Nyquist is allowed
}

TEST_CASE("fourier_lowpass is idempotent") {
    ws::Rng rng(7);
    for (size_t n : {64u, 100u, 37u}) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-2.0, 2.0);
        Series s(v, 20.0);
        auto once = fourier_lowpass(s, 3.0);
        auto twice = fourier_lowpass(once, 3.0);
        for (size_t i = 0; i < n; ++i) {
            CHECK(std::abs(once.values[i] - twice.values[i]) <= 1e-9);
        }
    }
}

TEST_CASE("fourier_lowpass never adds energy") {
    ws::Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const size_t n = 16 + rng.below(201);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-3.0, 3.0);
        Series s(v, 20.0);
        const double cutoff = rng.uniform(0.5, 10.0);
        auto out = fourier_lowpass(s, cutoff);
        CHECK(energy(out) <= energy(s) * (1.0 + 1e-9));
    }
}

TEST_CASE("fourier_lowpass matches a naive DFT oracle on assorted lengths") {
    ws::Rng rng(23);
    // Power-of-two, odd, prime, and even-composite lengths.
    for (size_t n : {64u, 37u, 101u, 50u, 12u}) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-4.0, 4.0);
        const double cutoff = rng.uniform(1.0, 9.0);
        auto got = fourier_lowpass(Series(v, 20.0), cutoff);
        auto expect = naive_lowpass(v, 20.0, cutoff);
        for (size_t i = 0; i < n; ++i) {
            CHECK(std::abs(got.values[i] - expect[i]) < 1e-8);
        }
    }
}

TEST_CASE("detect_peaks on the documented small examples") {
    Series twin({0.0, 1.0, 0.0, 1.0, 0.0}, 20.0);

    SECTION("two isolated maxima with min_distance 1") {
        auto idx = detect_peaks(twin, {0.5, 1});
        CHECK(idx == std::vector<int>{1, 3});
    }

    SECTION("min_distance 2 forces one survivor; equal heights keep the lower index") {
        auto idx = detect_peaks(twin, {0.5, 2});
        CHECK(idx == std::vector<int>{1});
    }

    SECTION("monotone ramp has no interior maximum") {
        std::vector<double> ramp(10);
        std::iota(ramp.begin(), ramp.end(), 0.0);
        CHECK(detect_peaks(Series(ramp, 20.0), {0.1, 1}).empty());
    }

    SECTION("plateaus are not strict maxima") {
        Series plat({0.0, 1.0, 1.0, 0.0, 2.0, 0.0}, 20.0);
        auto idx = detect_peaks(plat, {0.0, 1});
        CHECK(idx == std::vector<int>{4});
    }

    SECTION("series shorter than 3 samples yields no peaks") {
        CHECK(detect_peaks(Series({1.0, 5.0}, 20.0), {0.5, 1}).empty());
    }

    SECTION("parameter validation") {
        CHECK_THROWS_AS(detect_peaks(twin, {-0.1, 1}), std::invalid_argument);
        CHECK_THROWS_AS(detect_peaks(twin, {1.5, 1}), std::invalid_argument);
        CHECK_THROWS_AS(detect_peaks(twin, {0.5, 0}), std::invalid_argument);
    }
}

TEST_CASE("detect_peaks agrees with a brute-force oracle on 1000 random series") {
    ws::Rng rng(123456);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const size_t n = 3 + rng.below(198);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-10.0, 10.0);
        PeakParams p;
        p.threshold = rng.uniform(0.0, 1.0);
        p.min_distance = 1 + static_cast<int>(rng.below(20));
        auto got = detect_peaks(Series(v, 20.0), p);
        auto expect = oracle_peaks(v, p.threshold, p.min_distance);
        if (got != expect) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("detect_peaks output obeys the documented contract") {
    ws::Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 3 + rng.below(198);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        PeakParams p;
        p.threshold = rng.uniform(0.0, 1.0);
        p.min_distance = 1 + static_cast<int>(rng.below(10));
        auto idx = detect_peaks(Series(v, 20.0), p);

        const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
        const double level = p.threshold * (*mx - *mn) + *mn;
        for (size_t j = 0; j < idx.size(); ++j) {
            const int i = idx[j];
            REQUIRE(i >= 1);
            REQUIRE(i + 1 < static_cast<int>(n));
            CHECK(v[i - 1] < v[i]);
            CHECK(v[i] > v[i + 1]);
            CHECK(v[i] > level);
            if (j > 0) CHECK(idx[j] - idx[j - 1] > p.min_distance);
        }
        CHECK(std::is_sorted(idx.begin(), idx.end()));
    }
}
