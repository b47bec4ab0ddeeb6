#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gpecg {

/// Thrown for malformed inputs and violated preconditions across the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniformly sampled multi-lead ECG in physical units (mV).
struct EcgRecord {
  std::string name;
  double fs = 0.0;
  std::vector<std::vector<double>> leads;
  std::vector<std::string> warnings;

  std::size_t n_leads() const { return leads.size(); }
  std::size_t n_samples() const { return leads.empty() ? 0 : leads.front().size(); }

  /// Throws if leads are ragged, empty or fs is not positive.
  void validate() const;
};

struct LeadCalibration {
  double gain = 200.0;    // ADC units per mV
  double baseline = 0.0;  // ADC units
  std::string description;
  bool gain_defaulted = false;
};

struct RecordHeader {
  std::string name;
  std::size_t n_leads = 0;
  double fs = 0.0;
  std::size_t n_samples = 0;
  std::string dat_file;
  std::size_t byte_offset = 0;  // prolog bytes before the first sample ("212+N")
  std::vector<LeadCalibration> leads;
};

// ---------------------------------------------------------------------------
// WFDB format 212

/// Parses a WFDB .hea header. Only format 212 with all signals in one file is accepted.
RecordHeader parse_wfdb_header(std::string_view header_text);

/// Unpacks format-212 bytes into signed 12-bit samples. A trailing two-byte
/// group holds a single sample.
std::vector<std::int16_t> decode_212(std::span<const std::uint8_t> bytes);

/// Packs signed 12-bit samples (range [-2048, 2047]) into format 212.
std::vector<std::uint8_t> encode_212(std::span<const std::int16_t> samples);

std::array<std::int16_t, 2> unpack_212_pair(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2);
std::array<std::uint8_t, 3> pack_212_pair(std::int16_t s0, std::int16_t s1);

EcgRecord read_wfdb_record(std::string_view header_text, std::span<const std::uint8_t> dat_bytes);

/// Reads `<base>.hea` and the .dat file it names (resolved next to the header).
EcgRecord load_wfdb_record(const std::string& base_path);

// ---------------------------------------------------------------------------
// CSV

/// One column per lead, one row per sample. With `has_header` the first row
/// is skipped (and used for nothing else).
EcgRecord read_csv_record(std::string_view text, double fs, bool has_header = false);

std::string write_csv_record(const EcgRecord& record);

EcgRecord load_csv_record(const std::string& path, double fs, bool has_header = false);

// ---------------------------------------------------------------------------
// Reports

struct SnrResult {
  std::string record;
  std::size_t lead = 0;
  double level_db = 0.0;
  std::size_t repetition = 0;
  std::string method;
  double input_snr_db = 0.0;
  double output_snr_db = 0.0;
  double improvement_db = 0.0;
  /// Extension point for per-row metrics (e.g. estimated noise variance).
  std::map<std::string, double> metrics;
};

struct SkippedTask {
  std::string record;
  std::size_t lead = 0;
  double level_db = 0.0;
  std::size_t repetition = 0;
  std::string reason;
};

/// Mean and population standard deviation of the improvement over all rows
/// sharing (method, level).
struct LevelAggregate {
  std::string method;
  double level_db = 0.0;
  std::size_t count = 0;
  double mean_improvement_db = 0.0;
  double std_improvement_db = 0.0;
};

struct ReportConfig {
  std::vector<double> levels_db;
  std::size_t repetitions = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  std::vector<std::size_t> leads;
  std::vector<std::string> records;
  std::map<std::string, std::string> extra;
};

struct ReportDocument {
  ReportConfig config;
  std::vector<SnrResult> rows;
  std::vector<LevelAggregate> aggregates;
  std::vector<SkippedTask> skipped;
};

enum class ReportFormat { kJson, kCsv };

std::string write_report(const ReportDocument& report, ReportFormat format);

/// Inverse of write_report(kJson).
ReportDocument read_report_json(std::string_view text);

/// Inverse of write_report(kCsv) for the result rows (config and aggregates
/// are not carried by the CSV form).
std::vector<SnrResult> read_report_csv_rows(std::string_view text);

std::string read_text_file(const std::string& path);
std::vector<std::uint8_t> read_binary_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

}  // namespace gpecg
