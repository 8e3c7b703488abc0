#include "mdwm/features.hpp"

#include "mdwm/errors.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

namespace mdwm {

namespace {

constexpr double kTransitionWidthHz = 1.0;

// 0 below `start`, 1 above `start + width`, raised cosine in between.
double rising_edge(double f, double start, double width) {
    if (f <= start) return 0.0;
    if (f >= start + width) return 1.0;
    return 0.5 * (1.0 - std::cos(std::numbers::pi * (f - start) / width));
}

double band_gain(double f, const FrequencyBand& band) {
    const double half = 0.5 * kTransitionWidthHz;
    const double lower = band.low_hz <= 0.0 ? 1.0 : rising_edge(f, band.low_hz - half, kTransitionWidthHz);
    const double upper = 1.0 - rising_edge(f, band.high_hz - half, kTransitionWidthHz);
    return lower * upper;
}

}  // namespace

void validate_trial(const Trial& trial) {
    if (trial.channels() == 0 || trial.samples() == 0) throw ValidationError("trial has an empty signal");
    if (!trial.signal.allFinite()) throw ValidationError("trial signal contains non-finite values");
}

std::string to_string(ParadigmKind kind) {
    switch (kind) {
        case ParadigmKind::plain: return "plain";
        case ParadigmKind::erp_prototype: return "erp_prototype";
        case ParadigmKind::filter_bank: return "filter_bank";
    }
    return "plain";
}

ParadigmKind parse_paradigm_kind(const std::string& text) {
    if (text == "plain") return ParadigmKind::plain;
    if (text == "erp_prototype") return ParadigmKind::erp_prototype;
    if (text == "filter_bank") return ParadigmKind::filter_bank;
    throw ValidationError("unknown paradigm '" + text + "' (expected plain, erp_prototype or filter_bank)");
}

void ParadigmConfig::validate() const {
    if (kind == ParadigmKind::erp_prototype && prototype_label.empty()) {
        throw ValidationError("erp_prototype paradigm needs a prototype class label");
    }
    if (kind != ParadigmKind::filter_bank) return;
    if (bands.empty()) throw ValidationError("filter_bank paradigm needs at least one band");
    if (!(sampling_rate_hz > 0.0)) throw ValidationError("filter_bank paradigm needs a positive sampling rate");
    const double nyquist = 0.5 * sampling_rate_hz;
    for (const auto& band : bands) {
        if (!(band.low_hz >= 0.0 && band.low_hz < band.high_hz && band.high_hz < nyquist)) {
            std::ostringstream msg;
            msg << "invalid band [" << band.low_hz << ", " << band.high_hz << "] Hz; need 0 <= low < high < "
                << nyquist << " Hz";
            throw ValidationError(msg.str());
        }
    }
}

void FeatureConfig::validate() const {
    paradigm.validate();
    if (!(shrinkage >= 0.0 && shrinkage < 1.0)) {
        throw ValidationError("shrinkage must lie in [0, 1), got " + std::to_string(shrinkage));
    }
}

Matrix empirical_covariance(const Trial& trial, bool center) {
    validate_trial(trial);
    if (trial.samples() < 2) throw ValidationError("covariance needs at least 2 samples");
    Matrix x = trial.signal;
    if (center) x.colwise() -= x.rowwise().mean();
    return symmetrize(x * x.transpose() / static_cast<double>(trial.samples()));
}

SpdMatrix sample_covariance(const Trial& trial, double regularization, bool center) {
    if (!(regularization >= 0.0 && regularization < 1.0)) {
        throw ValidationError("regularization must lie in [0, 1), got " + std::to_string(regularization));
    }
    const Matrix s = empirical_covariance(trial, center);
    const double dim = static_cast<double>(s.rows());
    const double mu = s.trace() / dim;
    Matrix shrunk = (1.0 - regularization) * s;
    shrunk.diagonal().array() += regularization * mu;
    try {
        return SpdMatrix(shrunk);
    } catch (const NumericalError& e) {
        throw RegularizationNeededError(std::string("degenerate trial covariance at shrinkage ") +
                                        std::to_string(regularization) + "; increase regularization (" + e.what() +
                                        ")");
    }
}

Trial erp_augment(const Trial& trial, const Matrix& prototype) {
    validate_trial(trial);
    if (prototype.rows() != trial.channels() || prototype.cols() != trial.samples()) {
        std::ostringstream msg;
        msg << "erp_augment: prototype is " << prototype.rows() << "x" << prototype.cols() << ", trial is "
            << trial.channels() << "x" << trial.samples();
        throw ValidationError(msg.str());
    }
    Trial out{Matrix(2 * trial.channels(), trial.samples()), trial.label};
    out.signal.topRows(trial.channels()) = prototype;
    out.signal.bottomRows(trial.channels()) = trial.signal;
    return out;
}

Matrix bandpass(const Matrix& signal, double sampling_rate_hz, const FrequencyBand& band) {
    const Index n = signal.cols();
    Eigen::FFT<double> fft;
    std::vector<double> gains(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        const double f = static_cast<double>(std::min(k, n - k)) * sampling_rate_hz / static_cast<double>(n);
        gains[static_cast<std::size_t>(k)] = band_gain(f, band);
    }
    Matrix out(signal.rows(), n);
    std::vector<double> time(static_cast<std::size_t>(n));
    std::vector<std::complex<double>> spectrum;
    for (Index ch = 0; ch < signal.rows(); ++ch) {
        for (Index t = 0; t < n; ++t) time[static_cast<std::size_t>(t)] = signal(ch, t);
        fft.fwd(spectrum, time);
        for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= gains[k];
        fft.inv(time, spectrum);
        for (Index t = 0; t < n; ++t) out(ch, t) = time[static_cast<std::size_t>(t)];
    }
    return out;
}

Trial filter_bank_augment(const Trial& trial, const ParadigmConfig& config) {
    validate_trial(trial);
    if (config.kind != ParadigmKind::filter_bank) {
        throw ValidationError("filter_bank_augment needs a filter_bank config");
    }
    config.validate();
    const Index channels = trial.channels();
    Trial out{Matrix(channels * static_cast<Index>(config.bands.size()), trial.samples()), trial.label};
    for (std::size_t b = 0; b < config.bands.size(); ++b) {
        out.signal.middleRows(static_cast<Index>(b) * channels, channels) =
            bandpass(trial.signal, config.sampling_rate_hz, config.bands[b]);
    }
    return out;
}

Matrix class_prototype(std::span<const Trial> trials, const std::string& label) {
    Matrix sum;
    std::size_t count = 0;
    for (const auto& trial : trials) {
        if (trial.label != label) continue;
        if (count == 0) {
            sum = trial.signal;
        } else {
            if (trial.signal.rows() != sum.rows() || trial.signal.cols() != sum.cols()) {
                throw ValidationError("class_prototype: trials have non-uniform shapes");
            }
            sum += trial.signal;
        }
        ++count;
    }
    if (count == 0) throw ValidationError("class_prototype: no trials with label '" + label + "'");
    return sum / static_cast<double>(count);
}

FeatureExtractor::FeatureExtractor(FeatureConfig config, std::optional<Matrix> prototype)
    : config_(std::move(config)), prototype_(std::move(prototype)) {
    config_.validate();
    if (config_.paradigm.kind == ParadigmKind::erp_prototype && !prototype_) {
        throw ValidationError("erp_prototype features need a prototype signal");
    }
}

Trial FeatureExtractor::augment(const Trial& trial) const {
    switch (config_.paradigm.kind) {
        case ParadigmKind::plain: return trial;
        case ParadigmKind::erp_prototype: return erp_augment(trial, *prototype_);
        case ParadigmKind::filter_bank: return filter_bank_augment(trial, config_.paradigm);
    }
    return trial;
}

SpdMatrix FeatureExtractor::operator()(const Trial& trial) const {
    const Trial augmented = augment(trial);
    if (augmented.samples() < augmented.channels()) {
        throw ValidationError("trial has " + std::to_string(augmented.samples()) + " samples for " +
                              std::to_string(augmented.channels()) + " (augmented) channels; need T >= C");
    }
    return sample_covariance(augmented, config_.shrinkage, config_.center);
}

}  // namespace mdwm
