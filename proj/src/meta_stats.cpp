#include "mdwm/meta_stats.hpp"

#include "mdwm/errors.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mdwm {

namespace {

// Nonzero differences ranked by magnitude, with averaged ranks doubled so
// they stay integral.
struct SignedRanks {
    std::vector<long> doubled_ranks;
    std::vector<bool> positive;
    std::vector<std::size_t> tie_sizes;

    std::size_t size() const { return doubled_ranks.size(); }

    long doubled_w_plus() const {
        long sum = 0;
        for (std::size_t i = 0; i < size(); ++i) {
            if (positive[i]) sum += doubled_ranks[i];
        }
        return sum;
    }
};

SignedRanks rank_differences(std::span<const double> differences) {
    std::vector<double> nonzero;
    for (double d : differences) {
        if (!std::isfinite(d)) throw ValidationError("wilcoxon: non-finite difference");
        if (std::abs(d) > kWilcoxonTieTolerance) nonzero.push_back(d);
    }
    if (nonzero.size() < 2) {
        throw UndefinedStatisticError("wilcoxon: " + std::to_string(nonzero.size()) +
                                      " nonzero difference(s) after dropping zeros; the test needs at least 2");
    }
    std::sort(nonzero.begin(), nonzero.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    SignedRanks out;
    out.doubled_ranks.resize(nonzero.size());
    out.positive.resize(nonzero.size());
    std::size_t start = 0;
    while (start < nonzero.size()) {
        std::size_t end = start + 1;
        const double base = std::abs(nonzero[start]);
        while (end < nonzero.size() && std::abs(nonzero[end]) - base <= kWilcoxonTieTolerance * std::max(base, 1.0)) {
            ++end;
        }
        // positions start+1 .. end (1-based) share rank (start + 1 + end) / 2
        const long doubled = static_cast<long>(start + 1 + end);
        for (std::size_t i = start; i < end; ++i) {
            out.doubled_ranks[i] = doubled;
            out.positive[i] = nonzero[i] > 0.0;
        }
        out.tie_sizes.push_back(end - start);
        start = end;
    }
    return out;
}

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

std::string format_g6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

}  // namespace

std::string to_string(Alternative alt) {
    switch (alt) {
        case Alternative::greater: return "greater";
        case Alternative::less: return "less";
        case Alternative::two_sided: return "two-sided";
    }
    return "greater";
}

std::vector<double> PairedScores::differences() const {
    if (method_a.size() != method_b.size()) throw ValidationError("paired scores: unequal lengths");
    std::vector<double> out(method_a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = method_a[i] - method_b[i];
    return out;
}

double wilcoxon_exact(std::span<const double> differences, Alternative alt) {
    const auto ranks = rank_differences(differences);
    const long total = std::accumulate(ranks.doubled_ranks.begin(), ranks.doubled_ranks.end(), 0L);
    // counts[s]: number of sign vectors whose doubled W+ equals s
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long reach = 0;
    for (long r : ranks.doubled_ranks) {
        for (long s = reach; s >= 0; --s) {
            counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        }
        reach += r;
    }
    const long observed = ranks.doubled_w_plus();
    double upper = 0.0;
    double lower = 0.0;
    for (long s = 0; s <= total; ++s) {
        if (s >= observed) upper += counts[static_cast<std::size_t>(s)];
        if (s <= observed) lower += counts[static_cast<std::size_t>(s)];
    }
    const double scale = std::ldexp(1.0, -static_cast<int>(ranks.size()));
    switch (alt) {
        case Alternative::greater: return clamp_probability(upper * scale);
        case Alternative::less: return clamp_probability(lower * scale);
        case Alternative::two_sided: return clamp_probability(2.0 * std::min(upper, lower) * scale);
    }
    return 1.0;
}

double wilcoxon_normal(std::span<const double> differences, Alternative alt) {
    const auto ranks = rank_differences(differences);
    const double n = static_cast<double>(ranks.size());
    const double w_plus = 0.5 * static_cast<double>(ranks.doubled_w_plus());
    const double mean = n * (n + 1.0) / 4.0;
    double variance = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
    for (std::size_t t : ranks.tie_sizes) {
        const double td = static_cast<double>(t);
        variance -= (td * td * td - td) / 48.0;
    }
    const double sd = std::sqrt(variance);
    switch (alt) {
        case Alternative::greater: return normal_cdf(-(w_plus - mean - 0.5) / sd);
        case Alternative::less: return normal_cdf((w_plus - mean + 0.5) / sd);
        case Alternative::two_sided: {
            const double z = std::max(std::abs(w_plus - mean) - 0.5, 0.0) / sd;
            return std::min(1.0, 2.0 * normal_cdf(-z));
        }
    }
    return 1.0;
}

double wilcoxon_signed_rank(std::span<const double> differences, Alternative alt) {
    std::size_t nonzero = 0;
    for (double d : differences) nonzero += std::abs(d) > kWilcoxonTieTolerance ? 1 : 0;
    return nonzero <= kWilcoxonExactLimit ? wilcoxon_exact(differences, alt) : wilcoxon_normal(differences, alt);
}

double wilcoxon_signed_rank(const PairedScores& pairs, Alternative alt) {
    const auto d = pairs.differences();
    return wilcoxon_signed_rank(d, alt);
}

double standardized_mean_difference(std::span<const double> differences) {
    if (differences.size() < 2) {
        throw ValidationError("SMD needs at least 2 pairs, got " + std::to_string(differences.size()));
    }
    const double n = static_cast<double>(differences.size());
    const double mean = std::accumulate(differences.begin(), differences.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : differences) ss += (d - mean) * (d - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 1e-12)) {
        std::ostringstream msg;
        msg << "SMD undefined: the paired differences have zero variance (mean difference " << mean << ")";
        throw UndefinedStatisticError(msg.str());
    }
    return mean / sd;
}

double standardized_mean_difference(const PairedScores& pairs) {
    const auto d = pairs.differences();
    return standardized_mean_difference(d);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double stouffer_combine(std::span<const double> p_values, std::span<const double> weights) {
    if (p_values.empty()) throw ValidationError("stouffer: no p-values");
    if (p_values.size() != weights.size()) {
        throw ValidationError("stouffer: " + std::to_string(p_values.size()) + " p-values but " +
                              std::to_string(weights.size()) + " weights");
    }
    double numerator = 0.0;
    double squares = 0.0;
    for (std::size_t i = 0; i < p_values.size(); ++i) {
        const double p = p_values[i];
        const double w = weights[i];
        if (!(p > 0.0 && p < 1.0)) {
            throw ValidationError("stouffer: p-value " + format_g6(p) + " is outside (0, 1); its z-score is infinite");
        }
        if (!(w > 0.0) || !std::isfinite(w)) throw ValidationError("stouffer: weights must be positive");
        numerator += w * -normal_quantile(p);  // Phi^-1(1 - p)
        squares += w * w;
    }
    const double z = numerator / std::sqrt(squares);
    return normal_cdf(-z);
}

std::string star_grade(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

std::vector<PairedScores> collect_paired_scores(std::span<const ScoreTable> tables, const std::string& method_a,
                                                const std::string& method_b, const CellSelector& cell) {
    if (method_a == method_b) throw ValidationError("meta-analysis: method A and method B are both '" + method_a + "'");
    // dataset -> subject -> method -> repetition -> score
    std::map<std::string, std::map<std::string, std::map<std::string, std::map<int, double>>>> grouped;
    for (const auto& table : tables) {
        for (const auto& row : table.rows) {
            if (row.n_train != cell.n_train || std::abs(row.lambda - cell.lambda) > 1e-9) continue;
            if (row.pipeline != method_a && row.pipeline != method_b) continue;
            auto& reps = grouped[row.dataset][row.subject][row.pipeline];
            if (!reps.emplace(row.repetition, row.balanced_accuracy).second) {
                throw ValidationError("meta-analysis: duplicate row for dataset " + row.dataset + ", subject " +
                                      row.subject + ", pipeline " + row.pipeline + ", repetition " +
                                      std::to_string(row.repetition));
            }
        }
    }
    const auto cell_name = [&](const std::string& method) {
        return "(" + method + ", n=" + std::to_string(cell.n_train) + ", lambda=" + format_g6(cell.lambda) + ")";
    };
    if (grouped.empty()) {
        throw ValidationError("meta-analysis: no rows for " + cell_name(method_a) + " or " + cell_name(method_b));
    }
    std::vector<PairedScores> out;
    for (const auto& [dataset, subjects] : grouped) {
        PairedScores pairs{dataset, {}, {}, {}};
        for (const auto& [subject, methods] : subjects) {
            for (const auto* method : {&method_a, &method_b}) {
                if (!methods.contains(*method)) {
                    throw ValidationError("meta-analysis: dataset " + dataset + ", subject " + subject +
                                          " has no scores for " + cell_name(*method));
                }
            }
            const auto average = [](const std::map<int, double>& reps) {
                double sum = 0.0;
                for (const auto& entry : reps) sum += entry.second;
                return sum / static_cast<double>(reps.size());
            };
            pairs.subjects.push_back(subject);
            pairs.method_a.push_back(average(methods.at(method_a)));
            pairs.method_b.push_back(average(methods.at(method_b)));
        }
        if (pairs.subjects.size() < 2) {
            throw ValidationError("meta-analysis: dataset " + dataset + " has fewer than 2 subjects at " +
                                  cell_name(method_a));
        }
        out.push_back(std::move(pairs));
    }
    return out;
}

MetaResult run_meta_analysis(std::span<const ScoreTable> tables, const std::string& method_a,
                             const std::string& method_b, const CellSelector& cell, Alternative alt) {
    const auto paired = collect_paired_scores(tables, method_a, method_b, cell);
    MetaResult result{method_a, method_b, cell, alt, {}, 0.0, 1.0, ""};
    std::vector<std::string> failures;
    for (const auto& pairs : paired) {
        DatasetMeta meta{pairs.dataset, pairs.subjects.size(), 0.0, 1.0, ""};
        try {
            meta.smd = standardized_mean_difference(pairs);
            meta.p_value = wilcoxon_signed_rank(pairs, alt);
            meta.stars = star_grade(meta.p_value);
        } catch (const NumericalError& e) {
            failures.push_back("dataset " + pairs.dataset + ": " + e.what());
            continue;
        }
        result.datasets.push_back(std::move(meta));
    }
    if (!failures.empty()) {
        std::string msg = "meta-analysis failed for " + std::to_string(failures.size()) + " dataset(s):";
        for (const auto& f : failures) msg += "\n  " + f;
        throw UndefinedStatisticError(msg);
    }

    std::vector<double> p_values;
    std::vector<double> weights;
    double weighted_smd = 0.0;
    for (const auto& d : result.datasets) {
        const double w = std::sqrt(static_cast<double>(d.n_subjects));
        // A p of exactly 1 has an infinite z; nudge it inside (0, 1).
        p_values.push_back(std::min(d.p_value, std::nextafter(1.0, 0.0)));
        weights.push_back(w);
        weighted_smd += w * d.smd;
    }
    result.combined_smd = weighted_smd / std::accumulate(weights.begin(), weights.end(), 0.0);
    result.combined_p =
        result.datasets.size() == 1 ? result.datasets.front().p_value : stouffer_combine(p_values, weights);
    result.stars = star_grade(result.combined_p);
    return result;
}

void write_meta_report(std::ostream& out, const MetaResult& result) {
    out << "Meta-analysis: " << result.method_a << " vs " << result.method_b << " at n_train=" << result.cell.n_train
        << ", lambda=" << format_g6(result.cell.lambda) << " (Wilcoxon signed-rank, " << to_string(result.alternative)
        << "; Stouffer with sqrt(n) weights)\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %10s %12s %14s  %s\n", "dataset", "subjects", "SMD", "p-value", "");
    out << line;
    std::size_t total = 0;
    for (const auto& d : result.datasets) {
        std::snprintf(line, sizeof(line), "%-28s %10zu %12.4f %14.6g  %s\n", d.dataset.c_str(), d.n_subjects, d.smd,
                      d.p_value, d.stars.c_str());
        out << line;
        total += d.n_subjects;
    }
    std::snprintf(line, sizeof(line), "%-28s %10zu %12.4f %14.6g  %s\n", "combined", total, result.combined_smd,
                  result.combined_p, result.stars.c_str());
    out << line;
}

void write_meta_summary(std::ostream& out, const MetaResult& result) {
    out << kMetaSummaryHeader << "\n";
    std::size_t total = 0;
    for (const auto& d : result.datasets) {
        out << d.dataset << ',' << d.n_subjects << ',' << format_g6(d.smd) << ',' << format_g6(d.p_value) << ','
            << d.stars << "\n";
        total += d.n_subjects;
    }
    out << "combined," << total << ',' << format_g6(result.combined_smd) << ',' << format_g6(result.combined_p) << ','
        << result.stars << "\n";
    if (!out) throw IoError("meta summary: write failed");
}

}  // namespace mdwm
