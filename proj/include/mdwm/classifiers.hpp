#pragma once

// Minimum distance to mean (MDM) and its transfer variant, minimum distance
// to weighted mean (MDWM).

#include "mdwm/datasets.hpp"
#include "mdwm/spd.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace mdwm {

struct LabeledSpd {
    SpdMatrix features;
    std::string label;
};

/// Class label -> mean SPD matrix, ordered by label. At least two classes,
/// all of one dimension.
class ClassMeans {
public:
    explicit ClassMeans(std::map<std::string, SpdMatrix> means);

    const std::map<std::string, SpdMatrix>& means() const { return means_; }
    const SpdMatrix& at(const std::string& label) const;
    std::vector<std::string> labels() const;
    std::size_t size() const { return means_.size(); }
    Index dim() const { return means_.begin()->second.dim(); }

private:
    std::map<std::string, SpdMatrix> means_;
};

struct TransferParams {
    double lambda = 0.7;
    // One weight per source subject; empty means uniform.
    std::vector<double> source_subject_weights;

    void validate() const;
};

struct Prediction {
    std::string label;
    std::vector<double> distances;  // in ClassMeans label order
};

// Per-class uniform Frechet mean.
ClassMeans fit_mdm(std::span<const LabeledSpd> features);

// Nearest class mean; ties go to the first label in order.
Prediction predict_mdm(const ClassMeans& means, const SpdMatrix& query);

/// MDM decision rule with the per-class whitening factors precomputed.
class MdmClassifier {
public:
    explicit MdmClassifier(ClassMeans means);

    Prediction predict(const SpdMatrix& query) const;
    std::string predict_label(const SpdMatrix& query) const { return predict(query).label; }
    const ClassMeans& means() const { return means_; }

private:
    ClassMeans means_;
    std::vector<std::string> labels_;
    std::vector<DistanceFrom> distances_;
};

// A_k = S_k #_lambda D_k for every class.
ClassMeans combine_mdwm(const ClassMeans& target, const ClassMeans& source, double lambda);

struct SubjectFeatures {
    std::string subject_id;
    std::vector<LabeledSpd> features;
};

// Pooled weighted Frechet mean per class; a trial of subject s in class k
// weighs w_s / n_{s,k}, so subjects rather than trials carry the weights.
// Empty weights mean uniform.
ClassMeans fit_source_means(std::span<const SubjectFeatures> subjects, std::span<const double> weights = {});

ClassMeans fit_source_means(std::span<const SubjectRecord> subjects, std::span<const double> weights,
                            const FeatureExtractor& extractor);

// fit_mdm on the target trials, then combine_mdwm with the source means.
// lambda = 1 ignores the target trials, which may then be empty.
ClassMeans fit_mdwm(std::span<const LabeledSpd> target, const ClassMeans& source_means, const TransferParams& params);

}  // namespace mdwm
