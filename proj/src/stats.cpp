#include "agenteval/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "agenteval/errors.hpp"

namespace agenteval::stats {

namespace {

constexpr std::size_t kChunk = 4096;

// Deterministic parallel reduction: per-chunk partials accumulated in index
// order within the chunk (OpenMP across chunks), combined serially in chunk
// order. The result is identical for any thread count. K accumulators run in
// one pass so fused kernels read their input once.
template <std::size_t K, typename F>
std::array<double, K> chunked_sums(std::size_t n, F&& term) {
    std::array<double, K> total{};
    if (n == 0) return total;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<std::array<double, K>> partial(chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(chunks); ++c) {
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t end = std::min(begin + kChunk, n);
        std::array<double, K> acc{};
        for (std::size_t i = begin; i < end; ++i) term(i, acc);
        partial[static_cast<std::size_t>(c)] = acc;
    }
    for (const auto& p : partial) {
        for (std::size_t k = 0; k < K; ++k) total[k] += p[k];
    }
    return total;
}

template <typename F>
double chunked_sum(std::size_t n, F&& term) {
    return chunked_sums<1>(n, [&](std::size_t i, std::array<double, 1>& acc) {
        acc[0] += term(i);
    })[0];
}

void require_paired(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorKind::precondition, "rating vectors must be non-empty");
    }
    if (a.size() != b.size()) {
        throw Error(ErrorKind::precondition,
                    "rating vectors must have equal length: " + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()));
    }
}

} // namespace

double rmse(std::span<const double> human, std::span<const double> candidate) {
    require_paired(human, candidate);
    const double sum = chunked_sum(human.size(), [&](std::size_t i) {
        const double d = human[i] - candidate[i];
        return d * d;
    });
    return std::sqrt(sum / static_cast<double>(human.size()));
}

double mae(std::span<const double> human, std::span<const double> candidate) {
    require_paired(human, candidate);
    const double sum = chunked_sum(human.size(), [&](std::size_t i) {
        return std::abs(human[i] - candidate[i]);
    });
    return sum / static_cast<double>(human.size());
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
    require_paired(x, y);
    const std::size_t n = x.size();
    if (n < 2) throw Error(ErrorKind::precondition, "pearson requires n >= 2");

    const auto sums = chunked_sums<2>(n, [&](std::size_t i, std::array<double, 2>& acc) {
        acc[0] += x[i];
        acc[1] += y[i];
    });
    const double mean_x = sums[0] / static_cast<double>(n);
    const double mean_y = sums[1] / static_cast<double>(n);

    const auto moments = chunked_sums<3>(n, [&](std::size_t i, std::array<double, 3>& acc) {
        const double dx = x[i] - mean_x;
        const double dy = y[i] - mean_y;
        acc[0] += dx * dx;
        acc[1] += dy * dy;
        acc[2] += dx * dy;
    });
    const double sxx = moments[0], syy = moments[1], sxy = moments[2];
    if (sxx == 0.0 || syy == 0.0) {
        throw Error(ErrorKind::stats, "pearson undefined: zero variance input");
    }

    CorrelationResult result;
    result.r = sxy / std::sqrt(sxx * syy);
    result.n = static_cast<int>(n);
    return result;
}

AnovaResult anova_one_way(std::span<const std::vector<double>> groups) {
    if (groups.size() < 2) {
        throw Error(ErrorKind::precondition, "anova requires >= 2 groups");
    }
    std::size_t total_n = 0;
    for (const auto& g : groups) {
        if (g.size() < 2) {
            throw Error(ErrorKind::precondition, "anova requires every group n >= 2");
        }
        total_n += g.size();
    }

    std::vector<double> group_means(groups.size());
    double grand_sum = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& values = groups[g];
        const double sum = chunked_sum(values.size(), [&](std::size_t i) { return values[i]; });
        group_means[g] = sum / static_cast<double>(values.size());
        grand_sum += sum;
    }
    const double grand_mean = grand_sum / static_cast<double>(total_n);

    AnovaResult result;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& values = groups[g];
        const double mean = group_means[g];
        const double dev = mean - grand_mean;
        result.ss_between += static_cast<double>(values.size()) * dev * dev;
        result.ss_within += chunked_sum(values.size(), [&](std::size_t i) {
            return (values[i] - mean) * (values[i] - mean);
        });
    }
    result.df_between = static_cast<int>(groups.size()) - 1;
    result.df_within = static_cast<int>(total_n - groups.size());
    result.ms_between = result.ss_between / result.df_between;
    result.ms_within = result.ss_within / result.df_within;

    if (result.ms_within == 0.0) {
        if (result.ss_between > 0.0) {
            result.f_value = std::numeric_limits<double>::infinity();
            result.p_value = 0.0;
            result.degenerate = true;
        } else {
            result.f_value = 0.0; // all values identical
            result.p_value = 1.0;
        }
        return result;
    }
    result.f_value = result.ms_between / result.ms_within;
    result.p_value = f_upper_tail(result.f_value, result.df_between, result.df_within);
    return result;
}

PearsonCi aggregate_pearson_ci(std::span<const double> rs, double level) {
    if (rs.size() < 2) {
        throw Error(ErrorKind::stats, "CI aggregation requires >= 2 correlations");
    }
    if (level <= 0.0 || level >= 1.0) {
        throw Error(ErrorKind::precondition, "confidence level must lie in (0,1)");
    }
    std::vector<double> zs;
    zs.reserve(rs.size());
    for (double r : rs) {
        if (!(std::abs(r) < 1.0)) {
            throw Error(ErrorKind::stats,
                        "Fisher transform overflows at |r| = 1 (r = " + std::to_string(r) + ")");
        }
        zs.push_back(std::atanh(r));
    }
    const double n = static_cast<double>(zs.size());
    const double mean_z = std::accumulate(zs.begin(), zs.end(), 0.0) / n;
    double ss = 0.0;
    for (double z : zs) ss += (z - mean_z) * (z - mean_z);
    const double sd = std::sqrt(ss / (n - 1.0)); // sample sd across agents

    // the conventional critical value at the default level
    const double z_crit =
        std::abs(level - 0.95) < 1e-12 ? 1.96 : normal_quantile(0.5 * (1.0 + level));
    const double lo = mean_z - z_crit * sd / std::sqrt(n);
    const double hi = mean_z + z_crit * sd / std::sqrt(n);

    PearsonCi ci;
    ci.mean_r = std::tanh(mean_z);
    ci.half_width = (std::tanh(hi) - std::tanh(lo)) / 2.0;
    ci.n = static_cast<int>(zs.size());
    return ci;
}

OneHotDesign one_hot_profiles(std::span<const PersonaProfile> profiles) {
    if (profiles.empty()) {
        throw Error(ErrorKind::precondition, "one_hot_profiles requires >= 1 profile");
    }
    // canonical form -> display spelling (smallest observed, order-invariant)
    std::map<std::string, std::string> jobs, traits;
    for (const auto& p : profiles) {
        auto& job = jobs[canonical_trait(p.job)];
        if (job.empty() || p.job < job) job = p.job;
        for (const auto& t : p.traits) {
            auto& trait = traits[canonical_trait(t)];
            if (trait.empty() || t < trait) trait = t;
        }
    }

    OneHotDesign design;
    design.feature_names = {"age", "experience"};
    for (const auto& [_, display] : jobs) design.feature_names.push_back("job:" + display);
    for (const auto& [_, display] : traits) design.feature_names.push_back("trait:" + display);

    for (const auto& p : profiles) {
        std::vector<double> row(design.feature_names.size(), 0.0);
        row[0] = static_cast<double>(p.age);
        row[1] = static_cast<double>(p.experience);
        std::size_t col = 2;
        for (const auto& [canon, _] : jobs) {
            if (canon == canonical_trait(p.job)) row[col] = 1.0;
            ++col;
        }
        for (const auto& [canon, _] : traits) {
            for (const auto& t : p.traits) {
                if (canon == canonical_trait(t)) row[col] = 1.0;
            }
            ++col;
        }
        design.rows.push_back(std::move(row));
    }
    return design;
}

FeatureWeights feature_importance(std::span<const PersonaProfile> profiles,
                                  std::span<const double> mean_ratings,
                                  Dimension dimension) {
    if (profiles.size() < 2) {
        throw Error(ErrorKind::precondition, "feature_importance requires >= 2 raters");
    }
    if (profiles.size() != mean_ratings.size()) {
        throw Error(ErrorKind::precondition, "one target value per rater required");
    }
    OneHotDesign design = one_hot_profiles(profiles);
    const std::size_t rows = design.rows.size();
    const std::size_t cols = design.feature_names.size();

    // Mean-center features and targets so the intercept absorbs constant
    // shifts; solve the centered system in the minimum-norm sense.
    std::vector<double> col_mean(cols, 0.0);
    for (const auto& row : design.rows) {
        for (std::size_t j = 0; j < cols; ++j) col_mean[j] += row[j];
    }
    for (auto& m : col_mean) m /= static_cast<double>(rows);
    const double y_mean =
        std::accumulate(mean_ratings.begin(), mean_ratings.end(), 0.0) /
        static_cast<double>(rows);

    std::vector<std::vector<double>> centered = design.rows;
    for (auto& row : centered) {
        for (std::size_t j = 0; j < cols; ++j) row[j] -= col_mean[j];
    }
    std::vector<double> centered_y(mean_ratings.begin(), mean_ratings.end());
    for (auto& y : centered_y) y -= y_mean;

    std::vector<double> w = min_norm_least_squares(centered, centered_y);

    FeatureWeights result;
    result.dimension = dimension;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        result.weights[design.feature_names[j]] = w[j];
        dot += w[j] * col_mean[j];
    }
    result.intercept = y_mean - dot;

    result.ranking = design.feature_names;
    std::sort(result.ranking.begin(), result.ranking.end(),
              [&](const std::string& a, const std::string& b) {
                  const double wa = std::abs(result.weights.at(a));
                  const double wb = std::abs(result.weights.at(b));
                  if (wa != wb) return wa > wb;
                  return a < b; // ties break lexicographically
              });
    return result;
}

int positional_alignment(std::span<const std::string> ranked_a,
                         std::span<const std::string> ranked_b, int top_k) {
    if (top_k < 0) throw Error(ErrorKind::precondition, "top_k must be >= 0");
    if (ranked_a.size() < static_cast<std::size_t>(top_k) ||
        ranked_b.size() < static_cast<std::size_t>(top_k)) {
        throw Error(ErrorKind::precondition, "ranked lists shorter than top_k");
    }
    int matches = 0;
    for (int i = 0; i < top_k; ++i) {
        if (ranked_a[static_cast<std::size_t>(i)] == ranked_b[static_cast<std::size_t>(i)]) {
            ++matches;
        }
    }
    return matches;
}

// --- special functions ---------------------------------------------------

namespace {

// Lentz's continued fraction for the incomplete beta, as in the classic
// numerical recipes formulation.
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
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
        if (std::abs(del - 1.0) < kEps) return h;
    }
    throw Error(ErrorKind::stats, "incomplete beta did not converge");
}

} // namespace

double betainc_reg(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) {
        throw Error(ErrorKind::precondition, "betainc requires a, b > 0");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double f_upper_tail(double f, int d1, int d2) {
    if (d1 < 1 || d2 < 1) throw Error(ErrorKind::precondition, "F needs df >= 1");
    if (f <= 0.0) return 1.0;
    if (std::isinf(f)) return 0.0;
    const double x = static_cast<double>(d2) / (static_cast<double>(d2) + d1 * f);
    return betainc_reg(0.5 * d2, 0.5 * d1, x);
}

double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) {
        throw Error(ErrorKind::precondition, "normal quantile requires p in (0,1)");
    }
    // Acklam's rational approximation...
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // ...refined with one Halley step against erfc
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

// --- minimum-norm least squares --------------------------------------------

namespace {

// One-sided Jacobi SVD of an m x n matrix with m >= n: returns U (m x n,
// orthonormal columns), singular values, and V (n x n) with A = U S V^T.
struct Svd {
    std::vector<std::vector<double>> u;
    std::vector<double> sigma;
    std::vector<std::vector<double>> v;
};

Svd jacobi_svd_tall(std::vector<std::vector<double>> a) {
    const std::size_t m = a.size();
    const std::size_t n = a.empty() ? 0 : a[0].size();
    std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

    constexpr int kMaxSweeps = 60;
    constexpr double kTol = 1e-14;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += a[i][p] * a[i][p];
                    beta += a[i][q] * a[i][q];
                    gamma += a[i][p] * a[i][q];
                }
                off = std::max(off, std::abs(gamma) / std::max(std::sqrt(alpha * beta), 1e-300));
                if (std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double ap = a[i][p];
                    a[i][p] = cs * ap - sn * a[i][q];
                    a[i][q] = sn * ap + cs * a[i][q];
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v[i][p];
                    v[i][p] = cs * vp - sn * v[i][q];
                    v[i][q] = sn * vp + cs * v[i][q];
                }
            }
        }
        if (off < kTol) break;
    }

    Svd out;
    out.sigma.assign(n, 0.0);
    out.u.assign(m, std::vector<double>(n, 0.0));
    out.v = std::move(v);
    for (std::size_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < m; ++i) norm += a[i][j] * a[i][j];
        norm = std::sqrt(norm);
        out.sigma[j] = norm;
        if (norm > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.u[i][j] = a[i][j] / norm;
        }
    }
    return out;
}

} // namespace

std::vector<double> min_norm_least_squares(const std::vector<std::vector<double>>& a,
                                           std::span<const double> y) {
    const std::size_t m = a.size();
    if (m == 0) throw Error(ErrorKind::precondition, "empty design matrix");
    const std::size_t n = a[0].size();
    if (y.size() != m) throw Error(ErrorKind::precondition, "target length mismatch");
    for (const auto& row : a) {
        if (row.size() != n) throw Error(ErrorKind::precondition, "ragged design matrix");
    }

    // w = V S^+ U^T y, computed on A when tall, on A^T when wide.
    const bool tall = m >= n;
    std::vector<std::vector<double>> work;
    if (tall) {
        work = a;
    } else {
        work.assign(n, std::vector<double>(m, 0.0));
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) work[j][i] = a[i][j];
        }
    }
    Svd svd = jacobi_svd_tall(std::move(work));

    const double sigma_max =
        svd.sigma.empty() ? 0.0 : *std::max_element(svd.sigma.begin(), svd.sigma.end());
    const double cutoff = sigma_max * static_cast<double>(std::max(m, n)) *
                          std::numeric_limits<double>::epsilon();

    std::vector<double> w(n, 0.0);
    const std::size_t k = svd.sigma.size();
    if (tall) {
        // A = U S V^T: w = V S^+ U^T y
        for (std::size_t j = 0; j < k; ++j) {
            if (svd.sigma[j] <= cutoff || svd.sigma[j] == 0.0) continue;
            double uty = 0.0;
            for (std::size_t i = 0; i < m; ++i) uty += svd.u[i][j] * y[i];
            const double scale = uty / svd.sigma[j];
            for (std::size_t i = 0; i < n; ++i) w[i] += svd.v[i][j] * scale;
        }
    } else {
        // A^T = U S V^T so A = V S U^T: w = U S^+ V^T y
        for (std::size_t j = 0; j < k; ++j) {
            if (svd.sigma[j] <= cutoff || svd.sigma[j] == 0.0) continue;
            double vty = 0.0;
            for (std::size_t i = 0; i < m; ++i) vty += svd.v[i][j] * y[i];
            const double scale = vty / svd.sigma[j];
            for (std::size_t i = 0; i < n; ++i) w[i] += svd.u[i][j] * scale;
        }
    }
    return w;
}

} // namespace agenteval::stats
