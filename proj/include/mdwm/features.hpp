#pragma once

// Covariance features from multichannel trials.

#include "mdwm/spd.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mdwm {

/// One multichannel segment (channels x samples) with its class label.
struct Trial {
    Matrix signal;
    std::string label;

    Index channels() const { return signal.rows(); }
    Index samples() const { return signal.cols(); }
};

// Throws ValidationError on an empty or non-finite signal.
void validate_trial(const Trial& trial);

enum class ParadigmKind { plain, erp_prototype, filter_bank };

std::string to_string(ParadigmKind kind);
ParadigmKind parse_paradigm_kind(const std::string& text);

struct FrequencyBand {
    double low_hz = 0.0;
    double high_hz = 0.0;

    bool operator==(const FrequencyBand&) const = default;
};

struct ParadigmConfig {
    ParadigmKind kind = ParadigmKind::plain;
    std::string prototype_label;       // erp_prototype only
    std::vector<FrequencyBand> bands;  // filter_bank only
    double sampling_rate_hz = 0.0;     // filter_bank only

    // filter_bank: non-empty bands with 0 <= low < high < rate / 2.
    // erp_prototype: non-empty prototype label.
    void validate() const;

    bool operator==(const ParadigmConfig&) const = default;
};

struct FeatureConfig {
    ParadigmConfig paradigm;
    double shrinkage = 0.05;
    bool center = true;  // subtract per-channel means before the outer product

    void validate() const;
    bool operator==(const FeatureConfig&) const = default;
};

// (1/T) X X^T, with X optionally mean-centered per channel. Not regularized,
// so the result may be singular.
Matrix empirical_covariance(const Trial& trial, bool center = true);

// (1 - g) S + g (trace(S) / C) I with S = empirical_covariance(trial, center).
// Throws RegularizationNeededError when the result is singular.
SpdMatrix sample_covariance(const Trial& trial, double regularization, bool center = true);

// Stacks the prototype rows above the trial rows (2C x T).
Trial erp_augment(const Trial& trial, const Matrix& prototype);

// Zero-phase band-pass by frequency-domain masking with a raised-cosine
// transition 1 Hz wide centered on each band edge. A band starting at 0 Hz
// has no lower transition.
Matrix bandpass(const Matrix& signal, double sampling_rate_hz, const FrequencyBand& band);

// Stacks one band-passed copy of the signal per band, in band order (FC x T).
Trial filter_bank_augment(const Trial& trial, const ParadigmConfig& config);

// Arithmetic mean of the signals of the trials carrying `label`.
Matrix class_prototype(std::span<const Trial> trials, const std::string& label);

/// Maps trials to SPD features under one paradigm. The erp_prototype paradigm
/// needs the prototype signal up front so that every trial, source or target,
/// is augmented with the same waveform.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig config, std::optional<Matrix> prototype = std::nullopt);

    SpdMatrix operator()(const Trial& trial) const;
    Trial augment(const Trial& trial) const;

    const FeatureConfig& config() const { return config_; }

private:
    FeatureConfig config_;
    std::optional<Matrix> prototype_;
};

}  // namespace mdwm
