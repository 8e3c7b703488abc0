#pragma once

// Text container for trained class means.
//
//   mdwm-model
//   format_version 1
//   dimension <C>
//   lambda <value>
//   classes <K>
//   class <label>
//   <C lines of C row-major values>
//   ... repeated per class, in label order
//
// Numbers use the shortest decimal form that parses back to the same double,
// so a save/load round trip is exact.

#include "mdwm/classifiers.hpp"

#include <filesystem>
#include <iosfwd>

namespace mdwm {

inline constexpr int kModelFormatVersion = 1;

struct StoredModel {
    ClassMeans means;
    double lambda = 0.0;
};

void write_model(std::ostream& out, const StoredModel& model);
StoredModel read_model(std::istream& in);

void save_model(const StoredModel& model, const std::filesystem::path& path);
StoredModel load_model(const std::filesystem::path& path);

// Shortest round-trip decimal rendering of a double.
std::string format_exact(double value);

}  // namespace mdwm
