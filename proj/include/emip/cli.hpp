#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "emip/projection.hpp"
#include "emip/weaklabel.hpp"

namespace emip::cli {

/// Every tunable the pipeline reads, with defaults. A `--config` file may set
/// any of these by key (see config_schema()).
struct PipelineConfig {
    WeakLabelConfig weak{};
    EmipOptions emip{};
    double w_nuclei = 1.0;
    double w_marker = 1.0;
    /// Marker level above which a cell's EMIP composite calls its nucleus positive.
    double marker_threshold = 0.1;
    double radius = 6.0;
    double link_radius = 5.0;
    double tau = 0.1;
    std::uint64_t seed = 0;
};

/// Human-readable list of config keys, types and defaults.
std::string config_schema();

/// Applies key=value overrides on top of `base`. Unknown keys and malformed
/// values raise InvalidArgument naming the key.
PipelineConfig apply_config(const std::map<std::string, std::string>& values, PipelineConfig base = {});

/// Canonical (key, value) listing in key order; the manifest config hash is
/// FNV-1a over "key=value\n" lines of this listing.
std::vector<std::pair<std::string, std::string>> config_entries(const PipelineConfig& config);
std::uint64_t config_hash(const PipelineConfig& config);

/// Entry point behind the `emip` executable. Returns 0 on success, 1 for
/// usage and validation errors, 2 for internal errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace emip::cli
