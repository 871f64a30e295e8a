#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "agenteval/domain.hpp"

namespace agenteval::stats {

// Data-parallel kernels with a fixed-chunk reduction: partial sums are formed
// per 4096-element chunk (OpenMP across chunks) and combined in chunk order,
// so results are identical for any thread count. A naive serial reference
// lives under tests/support and the bench target compares the two.

double rmse(std::span<const double> human, std::span<const double> candidate);
double mae(std::span<const double> human, std::span<const double> candidate);

struct CorrelationResult {
    double r = 0.0;
    int n = 0;
};

// Throws ErrorKind::stats when either vector has zero variance.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

struct AnovaResult {
    double ss_between = 0.0;
    double ss_within = 0.0;
    double ms_between = 0.0;
    double ms_within = 0.0;
    double f_value = 0.0;
    double p_value = 1.0;
    int df_between = 0;
    int df_within = 0;
    bool degenerate = false; // ms_within == 0 with ss_between > 0
};

AnovaResult anova_one_way(std::span<const std::vector<double>> groups);

struct PearsonCi {
    double mean_r = 0.0;
    double half_width = 0.0;
    int n = 0;
};

// Fisher z each r, mean and normal-approximation CI of the mean z, bounds
// back-transformed; half_width = (upper - lower) / 2 in r space. The 0.95
// level uses the conventional 1.96 critical value.
PearsonCi aggregate_pearson_ci(std::span<const double> rs, double level = 0.95);

struct OneHotDesign {
    std::vector<std::string> feature_names;          // age, experience, job:*, trait:*
    std::vector<std::vector<double>> rows;           // one per profile
};

// Numeric columns first, then one column per observed job, then per observed
// trait, jobs and traits each in lexicographic order of their canonical form.
OneHotDesign one_hot_profiles(std::span<const PersonaProfile> profiles);

struct FeatureWeights {
    Dimension dimension = Dimension::Coherence;
    double intercept = 0.0;
    std::map<std::string, double> weights;
    std::vector<std::string> ranking; // by |weight| desc, ties lexicographic
};

// Least squares of one target value per rater against the one-hot design.
// Features and targets are mean-centered so the intercept absorbs shifts;
// the weight vector is the minimum-norm solution when the design is
// rank-deficient (one-hot designs always are).
FeatureWeights feature_importance(std::span<const PersonaProfile> profiles,
                                  std::span<const double> mean_ratings,
                                  Dimension dimension);

// Number of indices i < top_k with ranked_a[i] == ranked_b[i].
int positional_alignment(std::span<const std::string> ranked_a,
                         std::span<const std::string> ranked_b, int top_k);

// --- special functions -------------------------------------------------------

// Regularized incomplete beta I_x(a,b) by Lentz continued fraction,
// relative tolerance 1e-10.
double betainc_reg(double a, double b, double x);

// Upper tail of the F(d1, d2) distribution at f.
double f_upper_tail(double f, int d1, int d2);

// Standard normal quantile (Acklam's approximation refined with one
// Halley step on erfc).
double normal_quantile(double p);

// --- minimum-norm least squares ----------------------------------------------

// Solves min ||w|| over argmin ||A w - y|| via a one-sided Jacobi SVD.
// A is row-major, rows x cols.
std::vector<double> min_norm_least_squares(const std::vector<std::vector<double>>& a,
                                           std::span<const double> y);

} // namespace agenteval::stats
