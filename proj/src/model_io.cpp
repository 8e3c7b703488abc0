#include "mdwm/model_io.hpp"

#include "mdwm/errors.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace mdwm {

namespace {

double parse_double(const std::string& token) {
    double value = 0.0;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end) throw FormatError("model: malformed number '" + token + "'");
    return value;
}

std::string expect_key(std::istream& in, const std::string& key) {
    std::string found;
    std::string value;
    if (!(in >> found >> value) || found != key) {
        throw FormatError("model: expected '" + key + "' entry" + (found.empty() ? "" : ", found '" + found + "'"));
    }
    return value;
}

long parse_count(const std::string& token, const char* what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(token, &used);
        if (used != token.size() || v <= 0) throw std::invalid_argument(token);
        return v;
    } catch (const std::exception&) {
        throw FormatError(std::string("model: malformed ") + what + " '" + token + "'");
    }
}

}  // namespace

std::string format_exact(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw Error("format_exact: conversion failed");
    return std::string(buf, ptr);
}

void write_model(std::ostream& out, const StoredModel& model) {
    const auto& means = model.means;
    out << "mdwm-model\n";
    out << "format_version " << kModelFormatVersion << "\n";
    out << "dimension " << means.dim() << "\n";
    out << "lambda " << format_exact(model.lambda) << "\n";
    out << "classes " << means.size() << "\n";
    for (const auto& [label, mean] : means.means()) {
        for (char c : label) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                throw ValidationError("model: class label '" + label + "' contains whitespace");
            }
        }
        out << "class " << label << "\n";
        for (Index i = 0; i < mean.dim(); ++i) {
            for (Index j = 0; j < mean.dim(); ++j) out << (j ? " " : "") << format_exact(mean(i, j));
            out << "\n";
        }
    }
    if (!out) throw IoError("model: write failed");
}

StoredModel read_model(std::istream& in) {
    std::string magic;
    if (!(in >> magic) || magic != "mdwm-model") throw FormatError("model: missing 'mdwm-model' header");
    const std::string version = expect_key(in, "format_version");
    if (version != std::to_string(kModelFormatVersion)) {
        throw UnsupportedVersionError("model: unsupported format version '" + version +
                                      "' (this build reads version " + std::to_string(kModelFormatVersion) + ")");
    }
    const long dim = parse_count(expect_key(in, "dimension"), "dimension");
    const double lambda = parse_double(expect_key(in, "lambda"));
    const long classes = parse_count(expect_key(in, "classes"), "class count");
    std::map<std::string, SpdMatrix> means;
    for (long k = 0; k < classes; ++k) {
        const std::string label = expect_key(in, "class");
        Matrix values(dim, dim);
        for (long i = 0; i < dim; ++i) {
            for (long j = 0; j < dim; ++j) {
                std::string token;
                if (!(in >> token)) throw FormatError("model: truncated matrix for class '" + label + "'");
                values(i, j) = parse_double(token);
            }
        }
        if (!means.emplace(label, SpdMatrix(values)).second) {
            throw FormatError("model: duplicate class '" + label + "'");
        }
    }
    return {ClassMeans(std::move(means)), lambda};
}

void save_model(const StoredModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    write_model(out, model);
}

StoredModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return read_model(in);
}

}  // namespace mdwm
