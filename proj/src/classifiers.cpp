#include "mdwm/classifiers.hpp"

#include "mdwm/errors.hpp"

#include <cmath>
#include <sstream>

namespace mdwm {

namespace {

std::string join_labels(const std::vector<std::string>& labels) {
    std::string out;
    for (const auto& l : labels) {
        if (!out.empty()) out += ", ";
        out += l;
    }
    return out;
}

}  // namespace

ClassMeans::ClassMeans(std::map<std::string, SpdMatrix> means) : means_(std::move(means)) {
    if (means_.size() < 2) {
        throw ValidationError("ClassMeans: need at least 2 classes, got " + std::to_string(means_.size()));
    }
    const Index d = means_.begin()->second.dim();
    for (const auto& [label, mean] : means_) {
        if (mean.dim() != d) {
            throw ValidationError("ClassMeans: class '" + label + "' has dimension " + std::to_string(mean.dim()) +
                                  ", expected " + std::to_string(d));
        }
    }
}

const SpdMatrix& ClassMeans::at(const std::string& label) const {
    const auto it = means_.find(label);
    if (it == means_.end()) throw ValidationError("ClassMeans: unknown class '" + label + "'");
    return it->second;
}

std::vector<std::string> ClassMeans::labels() const {
    std::vector<std::string> out;
    out.reserve(means_.size());
    for (const auto& entry : means_) out.push_back(entry.first);
    return out;
}

void TransferParams::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ValidationError("lambda must lie in [0, 1], got " + std::to_string(lambda));
    }
    if (source_subject_weights.empty()) return;
    double total = 0.0;
    for (double w : source_subject_weights) {
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("source subject weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ValidationError("source subject weights sum to " + std::to_string(total) + ", expected 1");
    }
}

ClassMeans fit_mdm(std::span<const LabeledSpd> features) {
    std::map<std::string, std::vector<SpdMatrix>> grouped;
    for (const auto& f : features) grouped[f.label].push_back(f.features);
    std::map<std::string, SpdMatrix> means;
    for (const auto& [label, mats] : grouped) means.emplace(label, frechet_mean(mats));
    return ClassMeans(std::move(means));
}

MdmClassifier::MdmClassifier(ClassMeans means) : means_(std::move(means)) {
    for (const auto& [label, mean] : means_.means()) {
        labels_.push_back(label);
        distances_.emplace_back(mean);
    }
}

Prediction MdmClassifier::predict(const SpdMatrix& query) const {
    if (query.dim() != means_.dim()) {
        throw ValidationError("predict_mdm: query dimension " + std::to_string(query.dim()) +
                              " does not match model dimension " + std::to_string(means_.dim()));
    }
    Prediction out;
    out.distances.reserve(labels_.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < labels_.size(); ++k) {
        out.distances.push_back(distances_[k](query));
        // Strict comparison keeps the earliest label on ties.
        if (out.distances[k] < out.distances[best]) best = k;
    }
    out.label = labels_[best];
    return out;
}

Prediction predict_mdm(const ClassMeans& means, const SpdMatrix& query) {
    return MdmClassifier(means).predict(query);
}

ClassMeans combine_mdwm(const ClassMeans& target, const ClassMeans& source, double lambda) {
    if (target.labels() != source.labels()) {
        throw ValidationError("combine_mdwm: target classes {" + join_labels(target.labels()) +
                              "} differ from source classes {" + join_labels(source.labels()) + "}");
    }
    if (target.dim() != source.dim()) {
        throw ValidationError("combine_mdwm: target dimension " + std::to_string(target.dim()) +
                              " differs from source dimension " + std::to_string(source.dim()));
    }
    std::map<std::string, SpdMatrix> combined;
    for (const auto& [label, s] : target.means()) combined.emplace(label, geodesic(s, source.at(label), lambda));
    return ClassMeans(std::move(combined));
}

ClassMeans fit_source_means(std::span<const SubjectFeatures> subjects, std::span<const double> weights) {
    if (subjects.empty()) throw ValidationError("fit_source_means: empty source pool");
    std::vector<double> subject_weights(weights.begin(), weights.end());
    if (subject_weights.empty()) subject_weights.assign(subjects.size(), 1.0 / static_cast<double>(subjects.size()));
    if (subject_weights.size() != subjects.size()) {
        throw ValidationError("fit_source_means: " + std::to_string(subject_weights.size()) + " weights for " +
                              std::to_string(subjects.size()) + " source subjects");
    }
    TransferParams{0.0, subject_weights}.validate();

    // Classes present anywhere in the pool; every subject must cover all of them.
    std::map<std::string, std::vector<std::size_t>> counts;
    for (std::size_t s = 0; s < subjects.size(); ++s) {
        for (const auto& f : subjects[s].features) {
            auto& per_subject = counts[f.label];
            per_subject.resize(subjects.size(), 0);
            ++per_subject[s];
        }
    }
    for (auto& [label, per_subject] : counts) {
        per_subject.resize(subjects.size(), 0);
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            if (per_subject[s] == 0) {
                throw ValidationError("fit_source_means: source subject '" + subjects[s].subject_id +
                                      "' has no trials of class '" + label + "'");
            }
        }
    }

    std::map<std::string, SpdMatrix> means;
    for (const auto& [label, per_subject] : counts) {
        std::vector<SpdMatrix> mats;
        std::vector<double> trial_weights;
        double total = 0.0;
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            const double w = subject_weights[s] / static_cast<double>(per_subject[s]);
            for (const auto& f : subjects[s].features) {
                if (f.label != label) continue;
                mats.push_back(f.features);
                trial_weights.push_back(w);
                total += w;
            }
        }
        for (double& w : trial_weights) w /= total;
        means.emplace(label, frechet_mean(mats, trial_weights));
    }
    return ClassMeans(std::move(means));
}

ClassMeans fit_source_means(std::span<const SubjectRecord> subjects, std::span<const double> weights,
                            const FeatureExtractor& extractor) {
    std::vector<SubjectFeatures> features;
    features.reserve(subjects.size());
    for (const auto& subject : subjects) {
        SubjectFeatures sf{subject.subject_id, {}};
        sf.features.reserve(subject.trials.size());
        for (const auto& trial : subject.trials) sf.features.push_back({extractor(trial), trial.label});
        features.push_back(std::move(sf));
    }
    return fit_source_means(features, weights);
}

ClassMeans fit_mdwm(std::span<const LabeledSpd> target, const ClassMeans& source_means, const TransferParams& params) {
    params.validate();
    if (params.lambda == 1.0) return source_means;
    std::map<std::string, std::vector<SpdMatrix>> grouped;
    for (const auto& f : target) grouped[f.label].push_back(f.features);
    for (const auto& label : source_means.labels()) {
        if (!grouped.contains(label)) {
            std::ostringstream msg;
            msg << "fit_mdwm: no target trials of class '" << label << "' at lambda " << params.lambda
                << " (only lambda = 1 may run without target data)";
            throw ValidationError(msg.str());
        }
    }
    return combine_mdwm(fit_mdm(target), source_means, params.lambda);
}

}  // namespace mdwm
