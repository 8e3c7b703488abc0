#pragma once

// Paired per-dataset tests and their combination across datasets.

#include "mdwm/evaluation.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mdwm {

enum class Alternative { greater, less, two_sided };

std::string to_string(Alternative alt);

// Per-subject scores of two methods on one dataset, averaged over repetitions.
struct PairedScores {
    std::string dataset;
    std::vector<std::string> subjects;
    std::vector<double> method_a;
    std::vector<double> method_b;

    std::vector<double> differences() const;  // a - b
};

// Exact enumeration is used up to this many nonzero differences.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

// Differences with |d| <= this are dropped as zeros; absolute values within
// this (relative) distance of each other share an averaged rank.
inline constexpr double kWilcoxonTieTolerance = 1e-12;

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped,
/// tied |d| get averaged ranks, and the statistic is W+ (sum of ranks of the
/// positive differences); "greater" tests P(W+ >= observed). With at most
/// kWilcoxonExactLimit nonzero differences the null distribution over all
/// 2^n sign vectors is counted exactly; above that a tie-corrected normal
/// approximation with continuity correction is used. Throws
/// UndefinedStatisticError with fewer than 2 nonzero differences.
double wilcoxon_signed_rank(std::span<const double> differences, Alternative alt = Alternative::greater);
double wilcoxon_signed_rank(const PairedScores& pairs, Alternative alt = Alternative::greater);

// The two paths, callable regardless of n.
double wilcoxon_exact(std::span<const double> differences, Alternative alt);
double wilcoxon_normal(std::span<const double> differences, Alternative alt);

// Paired Cohen's d: mean(d) / sd(d), sample sd with n - 1.
double standardized_mean_difference(std::span<const double> differences);
double standardized_mean_difference(const PairedScores& pairs);

double normal_cdf(double z);
double normal_quantile(double p);

// z_i = Phi^-1(1 - p_i), z = sum w_i z_i / sqrt(sum w_i^2), returns 1 - Phi(z).
double stouffer_combine(std::span<const double> p_values, std::span<const double> weights);

// "***" below 0.001, "**" below 0.01, "*" below 0.05, else "".
std::string star_grade(double p);

struct CellSelector {
    int n_train = 0;
    double lambda = 0.0;
};

struct DatasetMeta {
    std::string dataset;
    std::size_t n_subjects = 0;
    double smd = 0.0;
    double p_value = 1.0;
    std::string stars;
};

struct MetaResult {
    std::string method_a;
    std::string method_b;
    CellSelector cell;
    Alternative alternative = Alternative::greater;
    std::vector<DatasetMeta> datasets;  // sorted by dataset name
    double combined_smd = 0.0;          // sqrt(n)-weighted mean of the SMDs
    double combined_p = 1.0;            // Stouffer with sqrt(n) weights
    std::string stars;
};

// Pairs method_a against method_b at one (n, lambda) cell of every dataset.
std::vector<PairedScores> collect_paired_scores(std::span<const ScoreTable> tables, const std::string& method_a,
                                                const std::string& method_b, const CellSelector& cell);

MetaResult run_meta_analysis(std::span<const ScoreTable> tables, const std::string& method_a,
                             const std::string& method_b, const CellSelector& cell,
                             Alternative alt = Alternative::greater);

void write_meta_report(std::ostream& out, const MetaResult& result);

inline constexpr const char* kMetaSummaryHeader = "dataset,n_subjects,smd,p_value,stars";

// One line per dataset plus a final "combined" line.
void write_meta_summary(std::ostream& out, const MetaResult& result);

}  // namespace mdwm
