#include "bdf/stat_tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "bdf/error.hpp"

namespace bdf {

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw Error(ErrorKind::Domain, "normal quantile outside (0,1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

namespace {

// c[0] + c[1] x + c[2] x^2 + ...
template <std::size_t N>
double poly(const double (&c)[N], double x) {
    double v = 0.0;
    for (std::size_t i = N; i-- > 0;) v = v * x + c[i];
    return v;
}

constexpr double kC1[] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
constexpr double kC2[] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
constexpr double kC3[] = {0.5440, -0.39978, 0.025054, -6.714e-4};
constexpr double kC4[] = {1.3822, -0.77857, 0.062767, -0.0020322};
constexpr double kC5[] = {-1.5861, -0.31082, -0.083751, 0.0038915};
constexpr double kC6[] = {-0.4803, -0.082676, 0.0030302};
constexpr double kG[] = {-2.273, 0.459};

// Shapiro-Wilk weights for the lower half of a sorted sample of size n.
std::vector<double> sw_coefficients(std::size_t n) {
    const std::size_t half = n / 2;
    std::vector<double> a(half);
    if (n == 3) {
        a[0] = std::numbers::sqrt2 / 2.0;
        return a;
    }
    const double an = static_cast<double>(n);
    const double an25 = an + 0.25;
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
        m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / an25);
        summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly(kC1, rsn) - m[0] / ssumm2;
    std::size_t first_scaled;
    double fac;
    if (n > 5) {
        const double a2 = -m[1] / ssumm2 + poly(kC2, rsn);
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
        a[0] = a1;
        a[1] = a2;
        first_scaled = 2;
    } else {
        fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
        a[0] = a1;
        first_scaled = 1;
    }
    for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
    return a;
}

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TestResult shapiro_wilk(std::span<const double> sample) {
    if (sample.size() < 3) throw Error(ErrorKind::SampleTooSmall, "Shapiro-Wilk needs at least 3 values");
    std::vector<double> x(sample.begin(), sample.end());
    for (double v : x) {
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "Shapiro-Wilk sample has non-finite values");
    }
    std::sort(x.begin(), x.end());
    if (x.size() > kShapiroWilkMaxN) {
        const std::size_t stride = (x.size() + kShapiroWilkMaxN - 1) / kShapiroWilkMaxN;
        std::vector<double> thinned;
        for (std::size_t i = 0; i < x.size(); i += stride) thinned.push_back(x[i]);
        x = std::move(thinned);
    }
    const std::size_t n = x.size();
    const double range = x.back() - x.front();
    if (!(range > 0.0)) throw Error(ErrorKind::DegenerateSample, "Shapiro-Wilk sample has zero range");

    const auto a = sw_coefficients(n);
    // Range-scaled values keep the sums well conditioned.
    double mean = 0.0;
    for (double& v : x) {
        v /= range;
        mean += v;
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    double ax = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) ax += a[i] * (x[n - 1 - i] - x[i]);
    // The full weight vector has unit norm, so 1 - W = 1 - corr^2.
    const double root = std::sqrt(ss);
    const double w1 = std::max(0.0, (root - ax) * (root + ax) / ss);
    TestResult r;
    r.n_a = n;
    r.statistic = 1.0 - w1;

    const double an = static_cast<double>(n);
    if (n == 3) {
        const double pi6 = 6.0 / std::numbers::pi;
        const double stqr = std::numbers::pi / 3.0;
        r.p_value = std::clamp(pi6 * (std::asin(std::sqrt(r.statistic)) - stqr), 0.0, 1.0);
        return r;
    }
    if (w1 <= 0.0) {
        r.p_value = 1.0;
        return r;
    }
    double y = std::log(w1);
    const double lx = std::log(an);
    double m, s;
    if (n <= 11) {
        const double gamma = poly(kG, an);
        if (y >= gamma) {
            r.p_value = 1e-99;
            return r;
        }
        y = -std::log(gamma - y);
        m = poly(kC3, an);
        s = std::exp(poly(kC4, an));
    } else {
        m = poly(kC5, lx);
        s = std::exp(poly(kC6, lx));
    }
    r.p_value = std::clamp(normal_upper_tail((y - m) / s), 0.0, 1.0);
    return r;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
    if (!std::isfinite(t)) return 0.0;
    const double x = df / (df + t * t);
    return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

TestResult t_test(std::span<const double> a, std::span<const double> b, bool welch) {
    if (a.size() < 2 || b.size() < 2) throw Error(ErrorKind::SampleTooSmall, "t-test needs at least 2 values per sample");
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
    TestResult r;
    r.n_a = a.size();
    r.n_b = b.size();
    double se2;
    if (welch) {
        se2 = va / na + vb / nb;
        const double num = se2 * se2;
        const double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
        r.df = den > 0.0 ? num / den : na + nb - 2.0;
    } else {
        r.df = na + nb - 2.0;
        const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / r.df;
        se2 = pooled * (1.0 / na + 1.0 / nb);
    }
    const double diff = ma - mb;
    if (!(se2 > 0.0)) {
        if (diff == 0.0) {
            r.statistic = 0.0;
            r.p_value = 1.0;
            return r;
        }
        throw Error(ErrorKind::DegenerateSample, "zero pooled variance with unequal means");
    }
    r.statistic = diff / std::sqrt(se2);
    r.p_value = student_t_two_sided(r.statistic, r.df);
    return r;
}

}  // namespace bdf
