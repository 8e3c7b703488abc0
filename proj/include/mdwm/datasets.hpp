#pragma once

// Multi-subject trial containers, the on-disk directory format, and the
// seeded synthetic generator.

#include "mdwm/features.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mdwm {

struct SubjectRecord {
    std::string subject_id;
    std::vector<Trial> trials;
};

struct Dataset {
    std::string name;
    ParadigmKind paradigm = ParadigmKind::plain;
    double sampling_rate_hz = 0.0;
    std::vector<std::string> labels;  // canonical (sorted) class order
    std::vector<SubjectRecord> subjects;

    Index channels() const;
    Index samples() const;
};

// Identifiers end up in CSV cells and whitespace-separated files: non-empty,
// printable ASCII without whitespace, commas or quotes.
void validate_identifier(const std::string& text, const char* what);

// Structural checks: at least one subject, unique ids, non-empty subjects with
// uniform trial shapes, labels sorted and unique, every trial label known,
// every subject covering every class. Transfer evaluation additionally needs
// two subjects; see validate_for_transfer.
void validate_dataset(const Dataset& ds);
void validate_for_transfer(const Dataset& ds);

// Per-class trial counts for one subject, in the dataset's label order.
std::vector<std::size_t> class_counts(const SubjectRecord& subject, const std::vector<std::string>& labels);

struct SynthConfig {
    std::uint64_t seed = 7;
    int subjects = 8;
    int classes = 4;
    int channels = 8;
    int samples = 256;
    int trials_per_class = 40;
    double sampling_rate_hz = 128.0;
    double class_separation = 0.25;    // tangent-space scale of the class centers
    double subject_variability = 0.5;  // tangent-space perturbation per subject
    double trial_noise = 0.8;          // tangent-space perturbation per trial

    void validate() const;
};

// Class labels used by the generator: "c0", "c1", ... zero-padded to a common
// width so lexicographic order matches numeric order.
std::vector<std::string> synthetic_labels(int classes);

/// Deterministic in config.seed. Class centers M_k = exp(sigma_class * W),
/// subject centers M_{k,s} = M_k^{1/2} exp(sigma_subj * W_s) M_k^{1/2} with one
/// W_s per subject shared by all its classes, and each trial draws T zero-mean
/// Gaussian samples with covariance M_{k,s}^{1/2} exp(sigma_trial * W) M_{k,s}^{1/2}.
/// Every W is a fresh symmetric Gaussian matrix (see Random::symmetric_gaussian),
/// so sigma_class = 0 makes the classes indistinguishable.
///
/// Streams: centers from derive_seed(seed, 0); subject s perturbations from
/// derive_seed(seed, 1, s); trial j of subject s from derive_seed(seed, 2, s, j).
/// Trials within a subject cycle through the classes (trial j has class j mod K).
Dataset generate_synthetic(const SynthConfig& config);

// Global class centers only (same stream as generate_synthetic).
std::vector<SpdMatrix> synthetic_class_centers(const SynthConfig& config);

inline constexpr const char* kDatasetFormatVersion = "1";

/// Directory layout:
///   metadata.json         format_version "1", name, paradigm, sampling_rate_hz,
///                         labels, channels, samples, subjects[{id, trials,
///                         signal_file, label_file}]
///   <subject>.f64         little-endian IEEE-754 binary64 samples in
///                         (trial, channel, time) order
///   <subject>.labels      one class index (into labels) per line, per trial
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mdwm
