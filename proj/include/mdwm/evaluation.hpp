#pragma once

// Leave-one-subject-out transfer evaluation.

#include "mdwm/classifiers.hpp"
#include "mdwm/datasets.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mdwm {

inline constexpr const char* kPipelineMdwm = "mdwm";
inline constexpr const char* kPipelineTargetOnly = "mdm-target-only";

struct EvalConfig {
    std::vector<int> n_train = {5, 30, 55};
    std::vector<double> lambdas = {0.0, 0.1, 0.3, 0.7};
    int repetitions = 10;
    std::uint64_t seed = 42;
    // "mdwm" and/or "mdm-target-only". The target-only baseline ignores lambda
    // but still emits one row per lambda so that every cell has both methods.
    std::vector<std::string> pipelines = {kPipelineMdwm, kPipelineTargetOnly};
    FeatureConfig features;
    int jobs = 1;
    // When false, source means are refitted for every (n, lambda, repetition)
    // cell instead of once per target subject. Scores must not change.
    bool cache_source_means = true;

    void validate() const;
};

struct ScoreRow {
    std::string dataset;
    std::string subject;
    std::string pipeline;
    int n_train = 0;
    double lambda = 0.0;
    int repetition = 0;
    double balanced_accuracy = 0.0;
    double train_seconds = 0.0;
    double test_seconds = 0.0;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
};

// Orders rows by (dataset, subject, pipeline, n_train, lambda, repetition).
void sort_rows(ScoreTable& table);

// Mean per-class recall over the classes present in `truth`.
double balanced_accuracy(std::span<const std::string> truth, std::span<const std::string> predicted);

struct TransferSplit {
    std::vector<std::size_t> train;  // trial indices, ascending
    std::vector<std::size_t> test;
};

// Seed of repetition `rep` for one subject:
// derive_seed(master, fnv1a64(subject_id), rep).
std::uint64_t repetition_seed(std::uint64_t master_seed, const std::string& subject_id, int repetition);

// Per-class training quota for n trials over `classes` classes: n / K each,
// the remainder going to the first classes in label order.
std::vector<std::size_t> stratified_quota(int n, std::size_t classes);

/// Class-stratified random draw of n calibration trials; the rest is test.
/// Each class (in sorted label order) is shuffled with one Random stream
/// seeded by `seed`, and its quota taken from the front, so for a fixed seed
/// the training sets are nested in n. Requires n >= K and at least one test
/// trial left in every class.
TransferSplit transfer_split(const SubjectRecord& subject, int n, std::uint64_t seed);

// Largest n for which transfer_split succeeds on this subject (0 if none).
int max_feasible_n(const SubjectRecord& subject);

// The extractor used when subject `target` is the transfer target. For the
// erp_prototype paradigm the prototype averages source-subject trials only.
FeatureExtractor make_extractor(const Dataset& ds, const FeatureConfig& features, std::size_t target);

// Source class means for target subject `target`: uniform-weight pool of
// every other subject.
ClassMeans compute_source_means(const Dataset& ds, std::size_t target, const FeatureConfig& features);

ScoreTable run_transfer_evaluation(const Dataset& ds, const EvalConfig& config);

inline constexpr const char* kScoreTableHeader =
    "dataset,subject,pipeline,n_train,lambda,repetition,balanced_accuracy,train_seconds,test_seconds";

// Scores, lambdas and timings use 6 significant digits. With
// include_timing = false the timing columns are written as 0 so that reruns
// are byte-identical.
void write_score_table(std::ostream& out, const ScoreTable& table, bool include_timing = false);
ScoreTable read_score_table(std::istream& in);

}  // namespace mdwm
