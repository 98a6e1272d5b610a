#ifndef NETFORM_DISTRIBUTIONS_HPP
#define NETFORM_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "error.hpp"

namespace netform {

enum class Family { logistic, probit };

inline std::string to_string(Family f) { return f == Family::logistic ? "logistic" : "probit"; }

inline Family family_from_string(const std::string& s)
{
    if (s == "logistic" || s == "logit") return Family::logistic;
    if (s == "probit" || s == "normal") return Family::probit;
    throw DomainError("unknown noise family '" + s + "'");
}

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// phi(z)/Phi(z), usable far into the lower tail
inline double norm_mills(double z)
{
    if (z > -30.0) return norm_pdf(z) / norm_cdf(z);
    double u = 1.0 / (z * z);
    return -z / (1.0 - u + 3.0 * u * u - 15.0 * u * u * u + 105.0 * u * u * u * u);
}

inline double norm_logcdf(double z)
{
    if (z > 5.0) return std::log1p(-norm_cdf(-z));
    if (z > -30.0) return std::log(norm_cdf(z));
    return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(norm_mills(z));
}

// Acklam's rational approximation, polished with one Halley step
inline double norm_quantile(double p)
{
    if (p <= 0.0) return -INFINITY;
    if (p >= 1.0) return INFINITY;
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - 0.02425) {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double e = norm_cdf(x) - p;
    double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

inline double logistic_cdf(double z)
{
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double link_cdf(double z, Family f) { return f == Family::logistic ? logistic_cdf(z) : norm_cdf(z); }

inline double link_quantile(double p, Family f)
{
    if (f == Family::logistic) return std::log(p / (1.0 - p));
    return norm_quantile(p);
}

// log F(z) and log(1 - F(z)) without cancellation
inline double link_logcdf(double z, Family f)
{
    if (f == Family::probit) return norm_logcdf(z);
    return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double link_logccdf(double z, Family f) { return link_logcdf(-z, f); }

inline double sup_density(Family f) { return f == Family::logistic ? 0.25 : 1.0 / std::sqrt(2.0 * std::numbers::pi); }

// Per-dyad link derivatives. h = f/(F(1-F)) is the score weight; omega = h*f the
// expected information.
struct LinkTerms {
    double p = 0.5;
    double q = 0.5;
    double dp = 0;
    double d2p = 0;
    double h = 0;
    double dh = 0;
    double omega = 0;
};

inline LinkTerms link_terms(double z, Family f)
{
    LinkTerms t;
    if (f == Family::logistic) {
        t.p = logistic_cdf(z);
        t.q = logistic_cdf(-z);
        t.dp = t.p * t.q;
        t.d2p = t.dp * (t.q - t.p);
        t.h = 1.0;
        t.dh = 0.0;
        t.omega = t.dp;
        return t;
    }
    t.dp = norm_pdf(z);
    t.d2p = -z * t.dp;
    if (z < 0) {
        t.p = norm_cdf(z);
        t.q = 1.0 - t.p;
    } else {
        t.q = norm_cdf(-z);
        t.p = 1.0 - t.q;
    }
    // phi/(Phi(1-Phi)); Mills ratios keep the far tails finite
    if (std::abs(z) < 30.0)
        t.h = t.dp / (t.p * t.q);
    else if (z < 0)
        t.h = norm_mills(z) / t.q;
    else
        t.h = norm_mills(-z) / t.p;
    t.dh = -z * t.h - t.h * t.h * (t.q - t.p);
    t.omega = t.h * t.dp;
    return t;
}

// Bivariate normal lower orthant P(X <= x, Y <= y), corr r. Genz's BVNU algorithm.
inline double bvn_upper(double dh, double dk, double r)
{
    if (std::isinf(dh) && dh > 0) return 0.0;
    if (std::isinf(dk) && dk > 0) return 0.0;
    if (std::isinf(dh) && dh < 0) return (std::isinf(dk) && dk < 0) ? 1.0 : norm_cdf(-dk);
    if (std::isinf(dk) && dk < 0) return norm_cdf(-dh);
    if (r == 0.0) return norm_cdf(-dh) * norm_cdf(-dk);

    static const double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
    static const double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
    static const double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                 0.2031674267230659, 0.2334925365383547, 0.2491470458134029};
    static const double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                 0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
    static const double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                 0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                                 0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                                 0.1527533871307259};
    static const double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                 0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                 0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                 0.07652652113349733};
    const double* wg;
    const double* xg;
    int lg;
    if (std::abs(r) < 0.3) {
        wg = w6; xg = x6; lg = 3;
    } else if (std::abs(r) < 0.75) {
        wg = w12; xg = x12; lg = 6;
    } else {
        wg = w20; xg = x20; lg = 10;
    }
    const double tp = 2.0 * std::numbers::pi;
    double h = dh, k = dk, hk = h * k, bvn = 0.0;
    if (std::abs(r) < 0.925) {
        double hs = (h * h + k * k) / 2.0, asr = std::asin(r) / 2.0;
        for (int i = 0; i < lg; ++i) {
            for (double s : {-1.0, 1.0}) {
                double sn = std::sin(asr * (1.0 + s * xg[i]));
                bvn += wg[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
    } else {
        if (r < 0) {
            k = -k;
            hk = -hk;
        }
        if (std::abs(r) < 1.0) {
            double as = 1.0 - r * r, a = std::sqrt(as), bs = (h - k) * (h - k);
            double c = (4.0 - hk) / 8.0, d = (12.0 - hk) / 80.0;
            double asr = -(bs / as + hk) / 2.0;
            if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            if (hk > -100.0) {
                double b = std::sqrt(bs);
                double sp = std::sqrt(tp) * norm_cdf(-b / a);
                bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a /= 2.0;
            double sum = 0.0;
            for (int i = 0; i < lg; ++i) {
                for (double s : {-1.0, 1.0}) {
                    double xs = a * (1.0 + s * xg[i]);
                    xs *= xs;
                    double asr2 = -(bs / xs + hk) / 2.0;
                    if (asr2 > -100.0) {
                        double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        double rs = std::sqrt(1.0 - xs);
                        double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                        sum += wg[i] * std::exp(asr2) * (sp - ep);
                    }
                }
            }
            bvn = (a * sum - bvn) / tp;
        }
        if (r > 0) {
            bvn += norm_cdf(-std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            double L = h < 0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
            bvn = L - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

inline double bvn_cdf(double x, double y, double r) { return bvn_upper(-x, -y, r); }

// standard bivariate normal density
inline double bvn_pdf(double x, double y, double r)
{
    double s2 = 1.0 - r * r;
    return std::exp(-(x * x - 2.0 * r * x * y + y * y) / (2.0 * s2)) / (2.0 * std::numbers::pi * std::sqrt(s2));
}

template <class Rng>
double draw_shock(Rng& rng, Family f)
{
    if (f == Family::probit) return std::normal_distribution<double>(0.0, 1.0)(rng);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    while (u <= 0.0) u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return std::log(u / (1.0 - u));
}

} // namespace netform

#endif
