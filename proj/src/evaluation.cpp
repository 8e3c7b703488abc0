#include "mdwm/evaluation.hpp"

#include "mdwm/errors.hpp"
#include "mdwm/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace mdwm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Rethrows the current exception with `context` prefixed, keeping its category.
[[noreturn]] void rethrow_with_context(const std::string& context) {
    try {
        throw;
    } catch (const UndefinedStatisticError& e) {
        throw UndefinedStatisticError(context + e.what());
    } catch (const RegularizationNeededError& e) {
        throw RegularizationNeededError(context + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(context + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(context + e.what());
    } catch (const IoError& e) {
        throw IoError(context + e.what());
    } catch (const std::exception& e) {
        throw Error(context + e.what());
    }
}

// Runs body(i) for i in [0, count) on up to `jobs` threads. If any call
// throws, the exception of the lowest failing index is rethrown.
template <typename Body>
void parallel_for(std::size_t count, int jobs, Body&& body) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || count <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, count); ++w) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::vector<std::string> sorted_labels(const SubjectRecord& subject) {
    std::set<std::string> labels;
    for (const auto& t : subject.trials) labels.insert(t.label);
    return {labels.begin(), labels.end()};
}

std::string format_g6(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string feasibility_report(const Dataset& ds, int n) {
    std::ostringstream msg;
    msg << "n_train = " << n << " is infeasible:";
    for (const auto& subject : ds.subjects) {
        const auto counts = class_counts(subject, ds.labels);
        const auto quota = stratified_quota(n, ds.labels.size());
        bool ok = n >= static_cast<int>(ds.labels.size());
        for (std::size_t k = 0; k < counts.size(); ++k) ok = ok && quota[k] + 1 <= counts[k];
        if (ok) continue;
        msg << "\n  subject " << subject.subject_id << ": trials per class {";
        for (std::size_t k = 0; k < counts.size(); ++k) msg << (k ? ", " : "") << ds.labels[k] << ": " << counts[k];
        msg << "}, feasible n in [" << ds.labels.size() << ", " << max_feasible_n(subject) << "]";
    }
    return msg.str();
}

struct SubjectContext {
    std::vector<LabeledSpd> target_features;       // all trials of the target subject
    std::optional<ClassMeans> source_means;        // cached source model
    std::vector<SubjectFeatures> source_features;  // kept only when not caching
};

}  // namespace

void EvalConfig::validate() const {
    if (n_train.empty()) throw ValidationError("evaluation: n_train grid is empty");
    for (int n : n_train) {
        if (n <= 0) throw ValidationError("evaluation: n_train values must be positive, got " + std::to_string(n));
    }
    if (lambdas.empty()) throw ValidationError("evaluation: lambda grid is empty");
    for (double l : lambdas) TransferParams{l, {}}.validate();
    if (repetitions < 1) throw ValidationError("evaluation: repetitions must be >= 1");
    if (pipelines.empty()) throw ValidationError("evaluation: no pipelines selected");
    for (const auto& p : pipelines) {
        if (p != kPipelineMdwm && p != kPipelineTargetOnly) {
            throw ValidationError("evaluation: unknown pipeline '" + p + "' (expected " + kPipelineMdwm + " or " +
                                  kPipelineTargetOnly + ")");
        }
    }
    if (jobs < 1) throw ValidationError("evaluation: jobs must be >= 1");
    features.validate();
}

void sort_rows(ScoreTable& table) {
    std::sort(table.rows.begin(), table.rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
        return std::tie(a.dataset, a.subject, a.pipeline, a.n_train, a.lambda, a.repetition) <
               std::tie(b.dataset, b.subject, b.pipeline, b.n_train, b.lambda, b.repetition);
    });
}

double balanced_accuracy(std::span<const std::string> truth, std::span<const std::string> predicted) {
    if (truth.empty()) throw ValidationError("balanced_accuracy: empty input");
    if (truth.size() != predicted.size()) {
        throw ValidationError("balanced_accuracy: " + std::to_string(truth.size()) + " labels vs " +
                              std::to_string(predicted.size()) + " predictions");
    }
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_class;  // hits, total
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& [hits, total] = per_class[truth[i]];
        ++total;
        if (predicted[i] == truth[i]) ++hits;
    }
    double sum = 0.0;
    for (const auto& [label, counts] : per_class) {
        sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
    }
    return sum / static_cast<double>(per_class.size());
}

std::uint64_t repetition_seed(std::uint64_t master_seed, const std::string& subject_id, int repetition) {
    return derive_seed(master_seed, fnv1a64(subject_id), static_cast<std::uint64_t>(repetition));
}

std::vector<std::size_t> stratified_quota(int n, std::size_t classes) {
    std::vector<std::size_t> quota(classes, 0);
    if (classes == 0 || n <= 0) return quota;
    const auto total = static_cast<std::size_t>(n);
    for (std::size_t k = 0; k < classes; ++k) quota[k] = total / classes + (k < total % classes ? 1 : 0);
    return quota;
}

int max_feasible_n(const SubjectRecord& subject) {
    const auto labels = sorted_labels(subject);
    const auto counts = class_counts(subject, labels);
    int best = 0;
    for (int n = static_cast<int>(labels.size()); n < static_cast<int>(subject.trials.size()); ++n) {
        const auto quota = stratified_quota(n, labels.size());
        bool ok = true;
        for (std::size_t k = 0; k < labels.size(); ++k) ok = ok && quota[k] + 1 <= counts[k];
        if (ok) best = n;
    }
    return best;
}

TransferSplit transfer_split(const SubjectRecord& subject, int n, std::uint64_t seed) {
    const auto labels = sorted_labels(subject);
    if (labels.empty()) throw ValidationError("transfer_split: subject '" + subject.subject_id + "' has no trials");
    if (n < static_cast<int>(labels.size())) {
        throw ValidationError("transfer_split: n = " + std::to_string(n) + " cannot cover " +
                              std::to_string(labels.size()) + " classes for subject '" + subject.subject_id + "'");
    }
    if (static_cast<std::size_t>(n) >= subject.trials.size()) {
        throw ValidationError("transfer_split: n = " + std::to_string(n) + " leaves no test trials for subject '" +
                              subject.subject_id + "' (" + std::to_string(subject.trials.size()) + " trials)");
    }
    std::vector<std::vector<std::size_t>> by_class(labels.size());
    for (std::size_t i = 0; i < subject.trials.size(); ++i) {
        const auto it = std::lower_bound(labels.begin(), labels.end(), subject.trials[i].label);
        by_class[static_cast<std::size_t>(it - labels.begin())].push_back(i);
    }
    const auto quota = stratified_quota(n, labels.size());
    Random rng(seed);
    TransferSplit split;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        auto& indices = by_class[k];
        if (quota[k] + 1 > indices.size()) {
            throw ValidationError("transfer_split: class '" + labels[k] + "' of subject '" + subject.subject_id +
                                  "' has " + std::to_string(indices.size()) + " trials; " + std::to_string(quota[k]) +
                                  " are needed for training plus 1 for testing (n = " + std::to_string(n) + ")");
        }
        rng.shuffle(indices);
        split.train.insert(split.train.end(), indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(quota[k]));
        split.test.insert(split.test.end(), indices.begin() + static_cast<std::ptrdiff_t>(quota[k]), indices.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

FeatureExtractor make_extractor(const Dataset& ds, const FeatureConfig& features, std::size_t target) {
    if (features.paradigm.kind != ParadigmKind::erp_prototype) return FeatureExtractor(features);
    std::vector<Trial> source_trials;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
        if (s == target) continue;
        for (const auto& t : ds.subjects[s].trials) {
            if (t.label == features.paradigm.prototype_label) source_trials.push_back(t);
        }
    }
    return FeatureExtractor(features, class_prototype(source_trials, features.paradigm.prototype_label));
}

namespace {

std::vector<SubjectFeatures> source_pool_features(const Dataset& ds, std::size_t target,
                                                  const FeatureExtractor& extractor) {
    std::vector<SubjectFeatures> pool;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
        if (s == target) continue;
        SubjectFeatures sf{ds.subjects[s].subject_id, {}};
        for (const auto& t : ds.subjects[s].trials) sf.features.push_back({extractor(t), t.label});
        pool.push_back(std::move(sf));
    }
    return pool;
}

}  // namespace

ClassMeans compute_source_means(const Dataset& ds, std::size_t target, const FeatureConfig& features) {
    if (target >= ds.subjects.size()) throw ValidationError("compute_source_means: target index out of range");
    const auto extractor = make_extractor(ds, features, target);
    return fit_source_means(source_pool_features(ds, target, extractor));
}

ScoreTable run_transfer_evaluation(const Dataset& ds, const EvalConfig& config) {
    validate_for_transfer(ds);
    config.validate();
    for (int n : config.n_train) {
        for (const auto& subject : ds.subjects) {
            if (n < static_cast<int>(ds.labels.size()) || n > max_feasible_n(subject)) {
                throw ValidationError(feasibility_report(ds, n));
            }
        }
    }

    const bool run_mdwm = std::ranges::find(config.pipelines, kPipelineMdwm) != config.pipelines.end();
    const bool run_target_only =
        std::find(config.pipelines.begin(), config.pipelines.end(), kPipelineTargetOnly) != config.pipelines.end();

    // Features only depend on the target when a prototype is involved.
    const bool shared_features = config.features.paradigm.kind != ParadigmKind::erp_prototype;
    std::vector<std::vector<LabeledSpd>> shared(ds.subjects.size());
    if (shared_features) {
        const FeatureExtractor extractor(config.features);
        parallel_for(ds.subjects.size(), config.jobs, [&](std::size_t s) {
            try {
                for (const auto& t : ds.subjects[s].trials) shared[s].push_back({extractor(t), t.label});
            } catch (...) {
                rethrow_with_context("subject " + ds.subjects[s].subject_id + ": ");
            }
        });
    }

    std::vector<SubjectContext> contexts(ds.subjects.size());
    parallel_for(ds.subjects.size(), config.jobs, [&](std::size_t target) {
        try {
            auto& ctx = contexts[target];
            std::vector<SubjectFeatures> pool;
            if (shared_features) {
                ctx.target_features = shared[target];
                for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
                    if (s != target) pool.push_back({ds.subjects[s].subject_id, shared[s]});
                }
            } else {
                const auto extractor = make_extractor(ds, config.features, target);
                for (const auto& t : ds.subjects[target].trials) ctx.target_features.push_back({extractor(t), t.label});
                pool = source_pool_features(ds, target, extractor);
            }
            if (config.cache_source_means) {
                ctx.source_means = fit_source_means(pool);
            } else {
                ctx.source_features = std::move(pool);
            }
        } catch (...) {
            rethrow_with_context("target subject " + ds.subjects[target].subject_id + ": ");
        }
    });

    const auto reps = static_cast<std::size_t>(config.repetitions);
    std::vector<std::vector<ScoreRow>> cell_rows(ds.subjects.size() * reps);
    parallel_for(cell_rows.size(), config.jobs, [&](std::size_t cell) {
        const std::size_t target = cell / reps;
        const int rep = static_cast<int>(cell % reps);
        const auto& subject = ds.subjects[target];
        const auto& ctx = contexts[target];
        auto& rows = cell_rows[cell];
        const std::uint64_t seed = repetition_seed(config.seed, subject.subject_id, rep);

        for (int n : config.n_train) {
            double lambda_now = 0.0;
            try {
                const auto split = transfer_split(subject, n, seed);
                std::vector<LabeledSpd> train;
                for (std::size_t i : split.train) train.push_back(ctx.target_features[i]);
                std::vector<std::string> truth;
                for (std::size_t i : split.test) truth.push_back(subject.trials[i].label);

                auto score = [&](const ClassMeans& means, double& test_seconds) {
                    const auto start = Clock::now();
                    const MdmClassifier classifier(means);
                    std::vector<std::string> predicted;
                    predicted.reserve(split.test.size());
                    for (std::size_t i : split.test) {
                        predicted.push_back(classifier.predict_label(ctx.target_features[i].features));
                    }
                    test_seconds = seconds_since(start);
                    return balanced_accuracy(truth, predicted);
                };

                auto start = Clock::now();
                const ClassMeans target_means = fit_mdm(train);
                const double target_fit_seconds = seconds_since(start);

                double target_only_test = 0.0;
                double target_only_score = 0.0;
                if (run_target_only) target_only_score = score(target_means, target_only_test);

                for (double lambda : config.lambdas) {
                    lambda_now = lambda;
                    if (run_target_only) {
                        rows.push_back({ds.name, subject.subject_id, kPipelineTargetOnly, n, lambda, rep,
                                        target_only_score, target_fit_seconds, target_only_test});
                    }
                    if (!run_mdwm) continue;
                    start = Clock::now();
                    ClassMeans combined = [&] {
                        if (config.cache_source_means) return combine_mdwm(target_means, *ctx.source_means, lambda);
                        const ClassMeans fresh_source = fit_source_means(ctx.source_features);
                        return fit_mdwm(train, fresh_source, TransferParams{lambda, {}});
                    }();
                    const double train_seconds = target_fit_seconds + seconds_since(start);
                    double test_seconds = 0.0;
                    const double accuracy = score(combined, test_seconds);
                    rows.push_back({ds.name, subject.subject_id, kPipelineMdwm, n, lambda, rep, accuracy, train_seconds,
                                    test_seconds});
                }
            } catch (...) {
                std::ostringstream ctx_msg;
                ctx_msg << "subject " << subject.subject_id << ", n " << n << ", lambda " << lambda_now
                        << ", repetition " << rep << ": ";
                rethrow_with_context(ctx_msg.str());
            }
        }
    });

    ScoreTable table;
    for (auto& rows : cell_rows) {
        for (auto& row : rows) table.rows.push_back(std::move(row));
    }
    sort_rows(table);
    return table;
}

void write_score_table(std::ostream& out, const ScoreTable& table, bool include_timing) {
    out << kScoreTableHeader << "\n";
    for (const auto& r : table.rows) {
        out << r.dataset << ',' << r.subject << ',' << r.pipeline << ',' << r.n_train << ',' << format_g6(r.lambda)
            << ',' << r.repetition << ',' << format_g6(r.balanced_accuracy) << ','
            << (include_timing ? format_g6(r.train_seconds) : "0") << ','
            << (include_timing ? format_g6(r.test_seconds) : "0") << "\n";
    }
    if (!out) throw IoError("score table: write failed");
}

ScoreTable read_score_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("score table: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kScoreTableHeader) {
        throw FormatError("score table: unexpected header '" + line + "' (expected '" + kScoreTableHeader + "')");
    }
    ScoreTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) {
            throw FormatError("score table line " + std::to_string(line_no) + ": expected 9 fields, got " +
                              std::to_string(cells.size()));
        }
        try {
            ScoreRow row;
            row.dataset = cells[0];
            row.subject = cells[1];
            row.pipeline = cells[2];
            row.n_train = std::stoi(cells[3]);
            row.lambda = std::stod(cells[4]);
            row.repetition = std::stoi(cells[5]);
            row.balanced_accuracy = std::stod(cells[6]);
            row.train_seconds = std::stod(cells[7]);
            row.test_seconds = std::stod(cells[8]);
            if (!(row.balanced_accuracy >= 0.0 && row.balanced_accuracy <= 1.0)) {
                throw FormatError("balanced accuracy outside [0, 1]");
            }
            table.rows.push_back(std::move(row));
        } catch (const FormatError& e) {
            throw FormatError("score table line " + std::to_string(line_no) + ": " + e.what());
        } catch (const std::exception&) {
            throw FormatError("score table line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return table;
}

}  // namespace mdwm
