#include "mdwm/datasets.hpp"

#include "mdwm/errors.hpp"
#include "mdwm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace mdwm {

namespace {

using json = nlohmann::json;

std::string zero_padded(int value, int width) {
    std::string digits = std::to_string(value);
    if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
    return digits;
}

int decimal_width(int max_value) { return static_cast<int>(std::to_string(std::max(max_value, 0)).size()); }

std::uint64_t to_little_endian(std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::little) {
        return bits;
    } else {
        std::uint64_t out = 0;
        for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xffU) << (8 * (7 - i));
        return out;
    }
}

std::string signal_file_name(std::size_t index) {
    return "subject_" + zero_padded(static_cast<int>(index), 3) + ".f64";
}
std::string label_file_name(std::size_t index) {
    return "subject_" + zero_padded(static_cast<int>(index), 3) + ".labels";
}

template <typename T>
T required(const json& node, const char* key) {
    if (!node.is_object() || !node.contains(key)) {
        throw FormatError(std::string("dataset metadata: missing field '") + key + "'");
    }
    try {
        return node.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string("dataset metadata: field '") + key + "' has the wrong type");
    }
}

}  // namespace

Index Dataset::channels() const {
    if (subjects.empty() || subjects.front().trials.empty()) return 0;
    return subjects.front().trials.front().channels();
}

Index Dataset::samples() const {
    if (subjects.empty() || subjects.front().trials.empty()) return 0;
    return subjects.front().trials.front().samples();
}

void validate_identifier(const std::string& text, const char* what) {
    if (text.empty()) throw ValidationError(std::string(what) + " must not be empty");
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u >= 0x7f || c == ',' || c == '"' || c == '\'') {
            throw ValidationError(std::string(what) + " '" + text +
                                  "' must be printable ASCII without whitespace, commas or quotes");
        }
    }
}

std::vector<std::size_t> class_counts(const SubjectRecord& subject, const std::vector<std::string>& labels) {
    std::vector<std::size_t> counts(labels.size(), 0);
    for (const auto& trial : subject.trials) {
        const auto it = std::lower_bound(labels.begin(), labels.end(), trial.label);
        if (it == labels.end() || *it != trial.label) {
            throw ValidationError("subject '" + subject.subject_id + "' has a trial with unknown label '" +
                                  trial.label + "'");
        }
        ++counts[static_cast<std::size_t>(it - labels.begin())];
    }
    return counts;
}

void validate_dataset(const Dataset& ds) {
    validate_identifier(ds.name, "dataset name");
    if (ds.subjects.empty()) throw ValidationError("dataset '" + ds.name + "' has no subjects");
    if (ds.labels.size() < 2) throw ValidationError("dataset '" + ds.name + "' needs at least 2 class labels");
    for (const auto& label : ds.labels) validate_identifier(label, "class label");
    if (!std::is_sorted(ds.labels.begin(), ds.labels.end()) ||
        std::adjacent_find(ds.labels.begin(), ds.labels.end()) != ds.labels.end()) {
        throw ValidationError("dataset labels must be sorted and unique");
    }
    std::set<std::string> ids;
    const Index channels = ds.channels();
    const Index samples = ds.samples();
    for (const auto& subject : ds.subjects) {
        validate_identifier(subject.subject_id, "subject id");
        if (!ids.insert(subject.subject_id).second) {
            throw ValidationError("duplicate subject id '" + subject.subject_id + "'");
        }
        if (subject.trials.empty()) throw ValidationError("subject '" + subject.subject_id + "' has no trials");
        for (const auto& trial : subject.trials) {
            validate_trial(trial);
            if (trial.channels() != channels || trial.samples() != samples) {
                std::ostringstream msg;
                msg << "subject '" << subject.subject_id << "' has a " << trial.channels() << "x" << trial.samples()
                    << " trial; dataset trials are " << channels << "x" << samples;
                throw ValidationError(msg.str());
            }
        }
        const auto counts = class_counts(subject, ds.labels);
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (counts[k] == 0) {
                throw ValidationError("subject '" + subject.subject_id + "' has no trials of class '" +
                                      ds.labels[k] + "'");
            }
        }
    }
}

void validate_for_transfer(const Dataset& ds) {
    validate_dataset(ds);
    if (ds.subjects.size() < 2) {
        throw ValidationError("transfer evaluation needs at least 2 subjects; dataset '" + ds.name + "' has " +
                              std::to_string(ds.subjects.size()));
    }
}

void SynthConfig::validate() const {
    if (subjects < 1 || classes < 1 || channels < 1 || samples < 1 || trials_per_class < 1) {
        throw ValidationError("synthetic config: all counts must be positive");
    }
    if (classes < 2) throw ValidationError("synthetic config: need at least 2 classes, got " + std::to_string(classes));
    if (samples < channels) throw ValidationError("synthetic config: samples per trial must be >= channels");
    if (!(sampling_rate_hz > 0.0)) throw ValidationError("synthetic config: sampling rate must be positive");
    if (!(class_separation >= 0.0) || !(subject_variability >= 0.0) || !(trial_noise >= 0.0)) {
        throw ValidationError("synthetic config: scales must be nonnegative");
    }
}

std::vector<std::string> synthetic_labels(int classes) {
    std::vector<std::string> labels;
    const int width = decimal_width(classes - 1);
    for (int k = 0; k < classes; ++k) labels.push_back("c" + zero_padded(k, width));
    return labels;
}

std::vector<SpdMatrix> synthetic_class_centers(const SynthConfig& config) {
    config.validate();
    Random rng(derive_seed(config.seed, 0));
    std::vector<SpdMatrix> centers;
    for (int k = 0; k < config.classes; ++k) {
        centers.push_back(spd_exp(rng.symmetric_gaussian(config.channels, config.class_separation)));
    }
    return centers;
}

Dataset generate_synthetic(const SynthConfig& config) {
    config.validate();
    const auto centers = synthetic_class_centers(config);
    std::vector<Matrix> center_sqrts;
    for (const auto& c : centers) center_sqrts.push_back(spd_sqrt(c));

    Dataset ds;
    ds.name = "synthetic-seed" + std::to_string(config.seed);
    ds.paradigm = ParadigmKind::plain;
    ds.sampling_rate_hz = config.sampling_rate_hz;
    ds.labels = synthetic_labels(config.classes);

    const int id_width = decimal_width(config.subjects);
    const Index c = config.channels;
    const Index t = config.samples;
    for (int s = 0; s < config.subjects; ++s) {
        Random subject_rng(derive_seed(config.seed, 1, static_cast<std::uint64_t>(s)));
        const Matrix shift = spd_exp(subject_rng.symmetric_gaussian(c, config.subject_variability)).matrix();
        std::vector<Matrix> subject_sqrts;
        for (int k = 0; k < config.classes; ++k) {
            const Matrix perturbed =
                center_sqrts[static_cast<std::size_t>(k)] * shift * center_sqrts[static_cast<std::size_t>(k)];
            subject_sqrts.push_back(spd_sqrt(SpdMatrix(symmetrize(perturbed))));
        }

        SubjectRecord subject{"S" + zero_padded(s + 1, std::max(id_width, 2)), {}};
        const int n_trials = config.classes * config.trials_per_class;
        subject.trials.reserve(static_cast<std::size_t>(n_trials));
        for (int j = 0; j < n_trials; ++j) {
            const int k = j % config.classes;
            Random trial_rng(derive_seed(config.seed, 2, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(j)));
            const Matrix& base = subject_sqrts[static_cast<std::size_t>(k)];
            const Matrix noise = spd_exp(trial_rng.symmetric_gaussian(c, config.trial_noise)).matrix();
            const Matrix cov = symmetrize(base * noise * base);
            const Matrix mixing = spd_sqrt(SpdMatrix(cov));
            Matrix z(c, t);
            for (Index col = 0; col < t; ++col) {
                for (Index row = 0; row < c; ++row) z(row, col) = trial_rng.normal();
            }
            subject.trials.push_back({mixing * z, ds.labels[static_cast<std::size_t>(k)]});
        }
        ds.subjects.push_back(std::move(subject));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    validate_dataset(ds);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

    json meta;
    meta["format_version"] = kDatasetFormatVersion;
    meta["name"] = ds.name;
    meta["paradigm"] = to_string(ds.paradigm);
    meta["sampling_rate_hz"] = ds.sampling_rate_hz;
    meta["labels"] = ds.labels;
    meta["channels"] = ds.channels();
    meta["samples"] = ds.samples();
    meta["subjects"] = json::array();

    for (std::size_t i = 0; i < ds.subjects.size(); ++i) {
        const auto& subject = ds.subjects[i];
        const std::string signal_name = signal_file_name(i);
        const std::string label_name = label_file_name(i);
        meta["subjects"].push_back({{"id", subject.subject_id},
                                    {"trials", subject.trials.size()},
                                    {"channels", ds.channels()},
                                    {"samples", ds.samples()},
                                    {"signal_file", signal_name},
                                    {"label_file", label_name}});

        std::ofstream signal_out(dir / signal_name, std::ios::binary);
        if (!signal_out) throw IoError("cannot open '" + (dir / signal_name).string() + "' for writing");
        std::vector<char> buffer;
        buffer.reserve(static_cast<std::size_t>(ds.channels() * ds.samples()) * 8);
        for (const auto& trial : subject.trials) {
            buffer.clear();
            for (Index ch = 0; ch < trial.channels(); ++ch) {
                for (Index t = 0; t < trial.samples(); ++t) {
                    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(trial.signal(ch, t)));
                    char bytes[8];
                    std::memcpy(bytes, &bits, 8);
                    buffer.insert(buffer.end(), bytes, bytes + 8);
                }
            }
            signal_out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        }
        if (!signal_out) throw IoError("write failed for '" + (dir / signal_name).string() + "'");

        std::ofstream label_out(dir / label_name);
        if (!label_out) throw IoError("cannot open '" + (dir / label_name).string() + "' for writing");
        for (const auto& trial : subject.trials) {
            const auto it = std::lower_bound(ds.labels.begin(), ds.labels.end(), trial.label);
            label_out << (it - ds.labels.begin()) << "\n";
        }
        if (!label_out) throw IoError("write failed for '" + (dir / label_name).string() + "'");
    }

    std::ofstream meta_out(dir / "metadata.json");
    if (!meta_out) throw IoError("cannot open '" + (dir / "metadata.json").string() + "' for writing");
    meta_out << meta.dump(2) << "\n";
    if (!meta_out) throw IoError("write failed for '" + (dir / "metadata.json").string() + "'");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    const auto meta_path = dir / "metadata.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw IoError("cannot open '" + meta_path.string() + "' (is this a dataset directory?)");
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::parse_error& e) {
        throw FormatError("dataset metadata '" + meta_path.string() + "' is not valid JSON: " + e.what());
    }
    if (!meta.is_object()) throw FormatError("dataset metadata must be a JSON object");
    if (!meta.contains("format_version")) throw FormatError("dataset metadata: missing field 'format_version'");
    const json& version_node = meta.at("format_version");
    const std::string version = version_node.is_string() ? version_node.get<std::string>() : version_node.dump();
    if (version != kDatasetFormatVersion) {
        throw UnsupportedVersionError("dataset format version '" + version + "' is not supported (this build reads '" +
                                      kDatasetFormatVersion + "')");
    }

    Dataset ds;
    ds.name = required<std::string>(meta, "name");
    ds.paradigm = parse_paradigm_kind(required<std::string>(meta, "paradigm"));
    ds.sampling_rate_hz = required<double>(meta, "sampling_rate_hz");
    ds.labels = required<std::vector<std::string>>(meta, "labels");
    const auto channels = required<Index>(meta, "channels");
    const auto samples = required<Index>(meta, "samples");
    const auto subjects = required<json>(meta, "subjects");
    if (!subjects.is_array()) throw FormatError("dataset metadata: 'subjects' must be an array");
    if (channels <= 0 || samples <= 0) {
        throw DimensionMismatchError("dataset metadata: channels and samples must be positive");
    }

    for (const auto& entry : subjects) {
        SubjectRecord subject;
        subject.subject_id = required<std::string>(entry, "id");
        const auto trials = required<std::size_t>(entry, "trials");
        const auto subject_channels = required<Index>(entry, "channels");
        const auto subject_samples = required<Index>(entry, "samples");
        if (subject_channels != channels || subject_samples != samples) {
            std::ostringstream msg;
            msg << "subject '" << subject.subject_id << "' declares " << subject_channels << "x" << subject_samples
                << " trials but the dataset header says " << channels << "x" << samples;
            throw DimensionMismatchError(msg.str());
        }
        const auto signal_path = dir / required<std::string>(entry, "signal_file");
        const auto label_path = dir / required<std::string>(entry, "label_file");

        std::ifstream signal_in(signal_path, std::ios::binary);
        if (!signal_in) throw IoError("cannot open '" + signal_path.string() + "'");
        const std::size_t values_per_trial = static_cast<std::size_t>(channels * samples);
        const std::uintmax_t expected = static_cast<std::uintmax_t>(trials) * values_per_trial * 8;
        std::error_code ec;
        const auto actual = std::filesystem::file_size(signal_path, ec);
        if (ec) throw IoError("cannot stat '" + signal_path.string() + "': " + ec.message());
        if (actual != expected) {
            std::ostringstream msg;
            msg << "'" << signal_path.string() << "' holds " << actual << " bytes; header implies " << trials
                << " trials x " << channels << " channels x " << samples << " samples x 8 = " << expected;
            throw DimensionMismatchError(msg.str());
        }

        std::ifstream label_in(label_path);
        if (!label_in) throw IoError("cannot open '" + label_path.string() + "'");
        std::vector<std::size_t> label_indices;
        std::string line;
        while (std::getline(label_in, line)) {
            if (line.empty()) continue;
            std::size_t used = 0;
            unsigned long idx = 0;
            try {
                idx = std::stoul(line, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != line.size()) {
                throw FormatError("'" + label_path.string() + "': malformed label index '" + line + "'");
            }
            if (idx >= ds.labels.size()) {
                throw FormatError("'" + label_path.string() + "': label index " + line + " out of range");
            }
            label_indices.push_back(idx);
        }
        if (label_indices.size() != trials) {
            throw DimensionMismatchError("'" + label_path.string() + "' lists " + std::to_string(label_indices.size()) +
                                         " labels for " + std::to_string(trials) + " trials");
        }

        std::vector<char> buffer(values_per_trial * 8);
        subject.trials.reserve(trials);
        for (std::size_t i = 0; i < trials; ++i) {
            signal_in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
            if (!signal_in) throw IoError("short read in '" + signal_path.string() + "'");
            Trial trial{Matrix(channels, samples), ds.labels[label_indices[i]]};
            std::size_t offset = 0;
            for (Index ch = 0; ch < channels; ++ch) {
                for (Index t = 0; t < samples; ++t) {
                    std::uint64_t bits = 0;
                    std::memcpy(&bits, buffer.data() + offset, 8);
                    offset += 8;
                    trial.signal(ch, t) = std::bit_cast<double>(to_little_endian(bits));
                }
            }
            subject.trials.push_back(std::move(trial));
        }
        ds.subjects.push_back(std::move(subject));
    }
    validate_dataset(ds);
    return ds;
}

}  // namespace mdwm
