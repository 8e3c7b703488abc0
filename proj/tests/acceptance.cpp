// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include "mdwm/classifiers.hpp"
#include "mdwm/cli.hpp"
#include "mdwm/datasets.hpp"
#include "mdwm/evaluation.hpp"
#include "mdwm/meta_stats.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

using namespace mdwm;
using namespace mdwm::testing;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

// Collects the first few violations of one criterion.
struct Check {
    int failures = 0;
    std::string first;

    void expect(bool ok, const std::string& what) {
        if (ok) return;
        if (failures++ == 0) first = what;
    }
    template <typename... Args>
    void expectf(bool ok, const char* fmt, Args... args) {
        if (ok) return;
        char buf[512];
        std::snprintf(buf, sizeof(buf), fmt, args...);
        expect(false, buf);
    }
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Criterion 1.
std::string manifold_suite(Check& c) {
    const auto start = Clock::now();
    Random rng(1001);
    for (Index dim : {2, 3, 4, 8}) {
        for (int pair = 0; pair < 200; ++pair) {
            const SpdMatrix a = random_spd(rng, dim);
            const SpdMatrix b = random_spd(rng, dim);
            const Matrix g = random_invertible(rng, dim);
            const double d = riemann_distance(a, b);
            const double dg = riemann_distance(congruence(g, a), congruence(g, b));
            c.expectf(std::abs(dg - d) <= 1e-8 * d, "congruence dim %ld: %.3g vs %.3g", long(dim), dg, d);
            const double di = riemann_distance(spd_power(a, -1), spd_power(b, -1));
            c.expectf(std::abs(di - d) <= 1e-8 * d, "inversion dim %ld: %.3g vs %.3g", long(dim), di, d);
            c.expect(geodesic(a, b, 0.0).matrix() == a.matrix() && geodesic(a, b, 1.0).matrix() == b.matrix(),
                     "geodesic endpoints");
            for (double lambda : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const SpdMatrix p = geodesic(a, b, lambda);
                const double along = riemann_distance(a, p);
                c.expectf(std::abs(along - lambda * d) <= 1e-8 * d, "geodesic-metric dim %ld lambda %.2f",
                          long(dim), lambda);
                const double sym = relative_difference(p.matrix(), geodesic(b, a, 1.0 - lambda).matrix());
                c.expectf(sym <= 1e-9, "geodesic symmetry dim %ld lambda %.2f: %.3g", long(dim), lambda, sym);
            }
        }
    }
    const double elapsed = seconds_since(start);
    c.expectf(elapsed < 10.0, "runtime %.2f s", elapsed);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "800 pairs in %.2f s", elapsed);
    return buf;
}

// Criterion 2.
std::string frechet_suite(Check& c) {
    Random rng(1002);
    double worst = 0.0;
    for (int set = 0; set < 100; ++set) {
        std::vector<SpdMatrix> mats;
        std::vector<double> weights;
        double total = 0.0;
        for (int i = 0; i < 20; ++i) {
            mats.push_back(random_spd(rng, 8));
            weights.push_back(0.05 + rng.uniform());
            total += weights.back();
        }
        for (double& w : weights) w /= total;
        const SpdMatrix m = frechet_mean(mats, weights);
        const double grad = frechet_gradient_norm(mats, weights, m);
        worst = std::max(worst, grad);
        c.expectf(grad <= 1e-9, "set %d gradient norm %.3g", set, grad);

        if (set % 5 == 0) {
            const Matrix g = random_invertible(rng, 8);
            std::vector<SpdMatrix> moved;
            for (const auto& a : mats) moved.push_back(congruence(g, a));
            const double eq = relative_difference(frechet_mean(moved, weights).matrix(), congruence(g, m).matrix());
            c.expectf(eq <= 1e-7, "equivariance set %d: %.3g", set, eq);
        }
    }
    for (int set = 0; set < 20; ++set) {
        const Matrix q = Eigen::HouseholderQR<Matrix>(random_invertible(rng, 8)).householderQ();
        std::vector<SpdMatrix> mats;
        Vector log_mean = Vector::Zero(8);
        for (int i = 0; i < 20; ++i) {
            Vector spectrum(8);
            for (Index k = 0; k < 8; ++k) spectrum(k) = std::exp(rng.normal());
            mats.push_back(SpdMatrix(symmetrize(q * spectrum.asDiagonal() * q.transpose())));
            log_mean += spectrum.array().log().matrix() / 20.0;
        }
        const Matrix closed = q * log_mean.array().exp().matrix().asDiagonal() * q.transpose();
        const double err = relative_difference(frechet_mean(mats).matrix(), closed);
        c.expectf(err <= 1e-9, "commuting closed form set %d: %.3g", set, err);
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst gradient norm %.2g", worst);
    return buf;
}

// Criterion 3.
std::string endpoint_suite(Check& c) {
    const Dataset ds = generate_synthetic(SynthConfig{});
    const FeatureExtractor extractor(FeatureConfig{});
    int compared = 0;
    for (std::size_t target = 0; target < ds.subjects.size(); ++target) {
        const ClassMeans source = compute_source_means(ds, target, FeatureConfig{});
        const SubjectRecord& subject = ds.subjects[target];
        const auto split = transfer_split(subject, 8, repetition_seed(5, subject.subject_id, 0));
        std::vector<LabeledSpd> train;
        for (std::size_t i : split.train) {
            const Trial& t = subject.trials[i];
            train.push_back({extractor(t), t.label});
        }
        const ClassMeans at0 = fit_mdwm(train, source, {0.0, {}});
        const ClassMeans mdm = fit_mdm(train);
        const ClassMeans at1 = fit_mdwm({}, source, {1.0, {}});
        for (const auto& label : ds.labels) {
            const double e0 = relative_difference(at0.at(label).matrix(), mdm.at(label).matrix());
            const double e1 = relative_difference(at1.at(label).matrix(), source.at(label).matrix());
            c.expectf(e0 <= 1e-12, "lambda 0, subject %zu class %s: %.3g", target, label.c_str(), e0);
            c.expectf(e1 <= 1e-12, "lambda 1, subject %zu class %s: %.3g", target, label.c_str(), e1);
            compared += 2;
        }
    }
    return std::to_string(compared) + " class means compared";
}

double mean_score(const ScoreTable& t, const std::string& pipeline, int n, double lambda) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : t.rows) {
        if (r.pipeline == pipeline && r.n_train == n && std::abs(r.lambda - lambda) < 1e-9) {
            sum += r.balanced_accuracy;
            ++count;
        }
    }
    return count ? sum / count : NAN;
}

// Criteria 4 and 5 share one run on the default synthetic dataset.
struct DefaultRun {
    ScoreTable table;
    double seconds = 0.0;
    int classes = 0;
};

DefaultRun default_run() {
    const auto start = Clock::now();
    const SynthConfig synth;
    const Dataset ds = generate_synthetic(synth);
    EvalConfig e;
    const int k = synth.classes;
    e.n_train = {k, 2 * k, 4 * k};
    e.lambdas = {0.0, 0.7};
    e.repetitions = 10;
    e.jobs = 1;
    DefaultRun run{run_transfer_evaluation(ds, e), 0.0, k};
    run.seconds = seconds_since(start);
    return run;
}

std::string transfer_benefit(Check& c, const DefaultRun& run) {
    const int n = 2 * run.classes;
    const double baseline = mean_score(run.table, kPipelineTargetOnly, n, 0.7);
    c.expectf(baseline >= 0.55 && baseline <= 0.75, "target-only at n=%d scores %.3f, outside [0.55, 0.75]", n,
              baseline);

    // Paired over subject x repetition.
    std::map<std::pair<std::string, int>, double> at0;
    std::map<std::pair<std::string, int>, double> at7;
    for (const auto& r : run.table.rows) {
        if (r.pipeline != kPipelineMdwm || r.n_train != n) continue;
        (r.lambda == 0.0 ? at0 : at7)[{r.subject, r.repetition}] = r.balanced_accuracy;
    }
    double diff = 0.0;
    for (const auto& [key, v] : at7) diff += v - at0.at(key);
    diff /= static_cast<double>(at7.size());
    c.expectf(at7.size() == 80, "%zu pairs instead of 80", at7.size());
    c.expectf(diff >= 0.05, "mean paired difference %.4f < 0.05", diff);

    const std::vector<ScoreTable> tables{run.table};
    const MetaResult meta = run_meta_analysis(tables, kPipelineMdwm, kPipelineTargetOnly, {n, 0.7});
    c.expectf(meta.combined_p < 0.05, "one-sided Wilcoxon p = %.4g", meta.combined_p);
    c.expectf(run.seconds < 120.0, "runtime %.1f s", run.seconds);

    char buf[200];
    std::snprintf(buf, sizeof(buf), "target-only %.3f, mean diff %+.4f, p = %.4g, SMD %.2f, eval %.1f s", baseline,
                  diff, meta.combined_p, meta.combined_smd, run.seconds);
    return buf;
}

std::string sample_size_trend(Check& c, const DefaultRun& run) {
    std::string detail;
    for (const auto& [pipeline, lambda] :
         std::vector<std::pair<std::string, double>>{{kPipelineMdwm, 0.7}, {kPipelineTargetOnly, 0.7}}) {
        double previous = -1.0;
        if (!detail.empty()) detail += "; ";
        detail += pipeline + ":";
        for (int n : {run.classes, 2 * run.classes, 4 * run.classes}) {
            const double m = mean_score(run.table, pipeline, n, lambda);
            c.expectf(m >= previous - 0.02, "%s drops to %.3f at n=%d", pipeline.c_str(), m, n);
            previous = m;
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %.3f", m);
            detail += buf;
        }
    }
    return detail;
}

// Criterion 6.
std::string statistics_oracles(Check& c) {
    Random rng(1006);
    for (int v = 0; v < 100; ++v) {
        const std::size_t n = 2 + static_cast<std::size_t>(v % 11);
        std::vector<double> d(n);
        for (double& x : d) x = std::round((rng.normal() + 0.2) * 4.0) / 4.0;
        std::size_t nonzero = 0;
        for (double x : d) nonzero += x != 0.0;
        if (nonzero < 2) d = {0.5, -1.25};
        const double exact = wilcoxon_exact(d, Alternative::greater);
        const double oracle = brute_force_wilcoxon_greater(d);
        c.expectf(std::abs(exact - oracle) <= 1e-12, "vector %d: %.17g vs %.17g", v, exact, oracle);
    }
    const double worked = wilcoxon_signed_rank(std::vector<double>{1, 2, 3, 4, 5});
    c.expectf(std::abs(worked - 0.03125) <= 1e-15, "{1..5} p = %.17g", worked);
    const double st = stouffer_combine(std::vector<double>{0.05, 0.05}, std::vector<double>{1, 1});
    c.expectf(std::abs(st - 0.01000) <= 1e-4, "Stouffer = %.6g", st);
    const double smd = standardized_mean_difference(std::vector<double>{2, 0, 1, 1});
    c.expectf(std::abs(smd - 1.22474) <= 1e-5, "SMD = %.6g", smd);
    c.expect(star_grade(0.05).empty() && star_grade(0.0499) == "*" && star_grade(0.01) == "*" &&
                 star_grade(0.0099) == "**" && star_grade(0.001) == "**" && star_grade(0.00099) == "***",
             "star thresholds");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "p{1..5} = %.5f, Stouffer %.5f, SMD %.5f", worked, st, smd);
    return buf;
}

// Criterion 7: the full CLI pipeline in-process.
std::string pipeline_determinism(Check& c) {
    const fs::path root = fs::temp_directory_path() / "mdwm_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    std::ostringstream sink;
    const auto cli = [&](std::vector<std::string> args) {
        const int code = cli::run(args, sink, sink);
        c.expectf(code == 0, "exit %d from %s", code, args.front().c_str());
    };
    std::vector<std::string> outputs;
    int index = 0;
    for (int jobs : {1, 1, 8}) {
        const fs::path dir = root / ("run" + std::to_string(index++));
        cli({"generate", "--seed", "7", "--out", (dir / "ds").string()});
        cli({"eval", "--data", (dir / "ds").string(), "--n", "8", "--lambda", "0", "--lambda", "0.7", "--reps",
             "10", "--seed", "42", "--jobs", std::to_string(jobs), "--out", (dir / "scores.csv").string()});
        cli({"meta", "--table", (dir / "scores.csv").string(), "--out", (dir / "meta.csv").string()});
        outputs.push_back(slurp(dir / "scores.csv") + "\n--\n" + slurp(dir / "meta.csv"));
    }
    c.expect(!outputs[0].empty() && outputs[0] == outputs[1], "rerun with 1 worker differs");
    c.expect(outputs[0] == outputs[2], "8 workers differ from 1 worker");
    fs::remove_all(root);
    return "3 runs (jobs 1, 1, 8), " + std::to_string(outputs[0].size()) + " bytes each";
}

// Criterion 8.
std::string leakage_guard(Check& c) {
    const Dataset ds = generate_synthetic(SynthConfig{});
    for (std::size_t target = 0; target < ds.subjects.size(); ++target) {
        Dataset poisoned = ds;
        for (auto& trial : poisoned.subjects[target].trials) {
            trial.signal.row(0).setConstant(1e9);
            trial.signal(0, 0) = -1e9;
        }
        const ClassMeans clean = compute_source_means(ds, target, FeatureConfig{});
        const ClassMeans dirty = compute_source_means(poisoned, target, FeatureConfig{});
        for (const auto& label : ds.labels) {
            c.expectf(clean.at(label).matrix() == dirty.at(label).matrix(), "subject %zu class %s changed", target,
                      label.c_str());
        }
    }
    return std::to_string(ds.subjects.size()) + " targets poisoned";
}

// Criterion 9.
std::string chance_level(Check& c) {
    SynthConfig synth;
    synth.class_separation = 0.0;
    EvalConfig e;
    e.n_train = {2 * synth.classes};
    e.lambdas = {0.7};
    e.repetitions = 10;
    const ScoreTable t = run_transfer_evaluation(generate_synthetic(synth), e);
    const double chance = 1.0 / synth.classes;
    const double mdwm = mean_score(t, kPipelineMdwm, e.n_train[0], 0.7);
    const double target_only = mean_score(t, kPipelineTargetOnly, e.n_train[0], 0.7);
    c.expectf(std::abs(mdwm - chance) <= 0.1, "mdwm %.3f", mdwm);
    c.expectf(std::abs(target_only - chance) <= 0.1, "target-only %.3f", target_only);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "mdwm %.3f, target-only %.3f, chance %.3f", mdwm, target_only, chance);
    return buf;
}

}  // namespace

int main() {
    int failed = 0;
    const auto report = [&](int id, const char* name, const std::function<std::string(Check&)>& body) {
        Check c;
        std::string detail;
        try {
            detail = body(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        const bool ok = c.failures == 0;
        failed += ok ? 0 : 1;
        std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
        if (!ok) std::printf("       %d violation(s); first: %s\n", c.failures, c.first.c_str());
        std::fflush(stdout);
    };

    report(1, "manifold suite", manifold_suite);
    report(2, "frechet mean", frechet_suite);
    report(3, "mdwm endpoints", endpoint_suite);
    const DefaultRun run = default_run();
    report(4, "transfer benefit", [&](Check& c) { return transfer_benefit(c, run); });
    report(5, "sample-size trend", [&](Check& c) { return sample_size_trend(c, run); });
    report(6, "statistics oracles", statistics_oracles);
    report(7, "pipeline determinism", pipeline_determinism);
    report(8, "leakage guard", leakage_guard);
    report(9, "chance level", chance_level);

    std::printf("%s: %d of 9 criteria failed\n", failed ? "FAILED" : "PASSED", failed);
    return failed ? 1 : 0;
}
