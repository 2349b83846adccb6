#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "purcell/budget.hpp"
#include "purcell/dynamics.hpp"
#include "purcell/netmodel.hpp"
#include "purcell/spectra.hpp"

namespace purcell::io {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Parses a file; missing files and syntax errors raise UsageError.
json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames it over `path`, so a
/// failed run never leaves a partial output behind.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// `%.11e`: scientific notation, 12 significant digits.
std::string sci(double x);

// Strict readers: every document carries "schema_version" and unknown keys
// are rejected with UsageError.
NetworkSpec network_from_json(const json& j);
json to_json(const NetworkSpec& net);

DeviceParams device_from_json(const json& j);
json to_json(const DeviceParams& device);

ReadoutStats stats_from_json(const json& j);
json to_json(const ReadoutStats& stats);
/// Two columns `name,value`, one row per ReadoutStats field.
ReadoutStats stats_from_csv(const std::string& text);
/// Dispatches on the file extension (.json or .csv).
ReadoutStats load_stats(const std::filesystem::path& path);

PulseSequence sequence_from_json(const json& j);

json to_json(const FitResult& fit, const std::string& mode);
json to_json(const ErrorModel& model);
json to_json(const BudgetReport& report);
json to_json(const Discrimination& d);

/// `freq_hz,re,im`
ComplexTrace trace_from_csv(const std::string& text);
std::string trace_csv(const ComplexTrace& trace);

/// `freq_hz,value`
std::string series_csv(const std::vector<double>& x, const std::vector<double>& y);

/// `time_s,p_g,p_e,p_f,p_h,re_alpha,im_alpha`; missing levels print as 0.
std::string sim_result_csv(const SimResult& result);

/// `bin_center,count_g,count_e`
std::string histogram_csv(const Discrimination& d);

/// `duration_s,residual`
std::string reset_csv(const ResetCurve& curve);

/// `duration_s,population`
std::string rabi_csv(const RabiResult& rabi);

/// "start:stop:count" into an inclusive linear grid.
std::vector<double> parse_grid(const std::string& spec);
/// "lo:hi" into two numbers.
std::pair<double, double> parse_band(const std::string& spec);

}  // namespace purcell::io
