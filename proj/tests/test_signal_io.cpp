#include <doctest.h>

#include <cstdint>
#include <string>
#include <vector>

#include "gpecg/signal_io.hpp"
#include "support/testkit.hpp"

using namespace gpecg;

TEST_CASE("212 pair unpacking sign-extends 12-bit samples") {
  CHECK(unpack_212_pair(0x01, 0x00, 0x00) == std::array<std::int16_t, 2>{1, 0});
  CHECK(unpack_212_pair(0x00, 0x08, 0x00) == std::array<std::int16_t, 2>{-2048, 0});
  CHECK(unpack_212_pair(0xff, 0x0f, 0x00) == std::array<std::int16_t, 2>{-1, 0});
  CHECK(unpack_212_pair(0x00, 0x70, 0xff) == std::array<std::int16_t, 2>{0, 2047});
}

TEST_CASE("212 encode rejects out-of-range samples") {
  CHECK_THROWS_AS(pack_212_pair(2048, 0), Error);
  CHECK_THROWS_AS(pack_212_pair(0, -2049), Error);
}

TEST_CASE("212 odd sample count uses a trailing two-byte group") {
  const std::vector<std::int16_t> s = {5, -7, 100};
  const auto bytes = encode_212(s);
  CHECK(bytes.size() == 5);
  CHECK(decode_212(bytes) == s);
}

namespace {

std::string header(const std::string& sig_fields, std::size_t n_samples = 4) {
  return "rec 1 250 " + std::to_string(n_samples) + "\nrec.dat " + sig_fields + "\n";
}

}  // namespace

TEST_CASE("WFDB calibration converts ADC units to mV") {
  const std::vector<std::int16_t> raw = {200, 0, -200, 400};
  const auto bytes = encode_212(raw);
  const auto rec = read_wfdb_record(header("212 200 12 0 0 0 0 MLII"), bytes);
  REQUIRE(rec.n_leads() == 1);
  CHECK(rec.leads[0] == std::vector<double>{1.0, 0.0, -1.0, 2.0});
  CHECK(rec.fs == 250.0);
  CHECK(rec.warnings.empty());
}

TEST_CASE("WFDB header gain with baseline and units") {
  const auto h = parse_wfdb_header("r 2 360 10\nr.dat 212 100(24)/mV 11 1024 0 0 0 V1\nr.dat 212 200 11 1024 0 0 0 V2\n");
  REQUIRE(h.leads.size() == 2);
  CHECK(h.fs == 360.0);
  CHECK(h.leads[0].gain == 100.0);
  CHECK(h.leads[0].baseline == 24.0);
  CHECK(h.leads[0].description == "V1");
  CHECK(h.leads[1].baseline == 0.0);
}

TEST_CASE("WFDB interleaves multiple leads") {
  const std::vector<std::int16_t> raw = {1, 10, 2, 20, 3, 30};
  const auto rec = read_wfdb_record("r 2 250 3\nr.dat 212 1\nr.dat 212 1\n", encode_212(raw));
  CHECK(rec.leads[0] == std::vector<double>{1, 2, 3});
  CHECK(rec.leads[1] == std::vector<double>{10, 20, 30});
}

TEST_CASE("WFDB missing gain defaults with a warning") {
  const auto rec = read_wfdb_record(header("212"), encode_212(std::vector<std::int16_t>{200, 0, 0, 0}));
  CHECK(rec.leads[0][0] == 1.0);
  CHECK(rec.warnings.size() == 1);
}

TEST_CASE("WFDB defaults to 250 Hz and infers the sample count") {
  const auto rec = read_wfdb_record("r 1\nr.dat 212 200\n", encode_212(std::vector<std::int16_t>{1, 2, 3, 4}));
  CHECK(rec.fs == 250.0);
  CHECK(rec.n_samples() == 4);
}

TEST_CASE("WFDB byte offset skips the prolog") {
  auto bytes = encode_212(std::vector<std::int16_t>{200, 400});
  bytes.insert(bytes.begin(), {0xaa, 0xbb});
  const auto rec = read_wfdb_record("r 1 250 2\nr.dat 212+2 200\n", bytes);
  CHECK(rec.leads[0] == std::vector<double>{1.0, 2.0});
}

TEST_CASE("WFDB rejects unsupported layouts and truncated data") {
  const auto ok = encode_212(std::vector<std::int16_t>{1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(read_wfdb_record(header("16 200"), ok), doctest::Contains("unsupported WFDB format"), Error);
  CHECK_THROWS_AS(read_wfdb_record("r/2 1 250 4\nr.dat 212\n", ok), Error);
  CHECK_THROWS_AS(read_wfdb_record("r 2 250 4\na.dat 212\nb.dat 212\n", ok), Error);
  CHECK_THROWS_AS(read_wfdb_record("r 2 250 4\na.dat 212\n", ok), Error);
  CHECK_THROWS_AS(read_wfdb_record("", ok), Error);
  CHECK_THROWS_WITH_AS(read_wfdb_record(header("212", 10), ok), doctest::Contains("truncated"), Error);
}

TEST_CASE("CSV parses columns as leads") {
  const auto rec = read_csv_record("0.1,0.2\n0.3,0.4\n", 250.0);
  REQUIRE(rec.n_leads() == 2);
  CHECK(rec.leads[0] == std::vector<double>{0.1, 0.3});
  CHECK(rec.leads[1] == std::vector<double>{0.2, 0.4});
}

TEST_CASE("CSV header row is skipped") {
  const auto rec = read_csv_record("I,II\n1,2\n", 500.0, true);
  CHECK(rec.n_samples() == 1);
  CHECK(rec.fs == 500.0);
}

TEST_CASE("CSV errors") {
  CHECK_THROWS_WITH_AS(read_csv_record("0.1,abc\n", 250.0), doctest::Contains("non-numeric"), Error);
  CHECK_THROWS_WITH_AS(read_csv_record("1,2\n3\n", 250.0), doctest::Contains("ragged"), Error);
  CHECK_THROWS_AS(read_csv_record("", 250.0), Error);
  CHECK_THROWS_AS(read_csv_record("1\n", 0.0), Error);
}

TEST_CASE("CSV write/read round trip on random records") {
  testkit::Gen gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    EcgRecord rec;
    rec.name = "r";
    rec.fs = 250.0;
    rec.leads.assign(gen.index(1, 3), {});
    const auto n = gen.index(1, 50);
    for (auto& lead : rec.leads) lead = gen.normals(n, 1e3 * gen.uniform(1e-6, 1.0));
    const auto back = read_csv_record(write_csv_record(rec), rec.fs);
    CHECK(back.leads == rec.leads);
  }
}

namespace {

ReportDocument sample_report() {
  ReportDocument r;
  r.config.levels_db = {0.0, 5.0};
  r.config.repetitions = 1;
  r.config.seed = 42;
  r.config.methods = {"gp-posterior"};
  r.config.leads = {0};
  r.config.records = {"synth"};
  SnrResult row{"synth", 0, 0.0, 0, "gp-posterior", 0.01, 10.25, 10.24, {{"noise_var_est", 0.03125}}};
  r.rows.push_back(row);
  r.aggregates.push_back({"gp-posterior", 0.0, 1, 10.24, 0.0});
  r.skipped.push_back({"bad", 0, 5.0, 0, "too short"});
  return r;
}

}  // namespace

TEST_CASE("report with zero rows still has a valid schema") {
  ReportDocument empty;
  const auto json = write_report(empty, ReportFormat::kJson);
  CHECK(json.find("gpecg-snr-report/1") != std::string::npos);
  const auto back = read_report_json(json);
  CHECK(back.rows.empty());
  const auto csv = write_report(empty, ReportFormat::kCsv);
  CHECK(csv.rfind("record,lead,level_db", 0) == 0);
  CHECK(read_report_csv_rows(csv).empty());
}

TEST_CASE("report JSON round trip") {
  const auto r = sample_report();
  const auto back = read_report_json(write_report(r, ReportFormat::kJson));
  REQUIRE(back.rows.size() == 1);
  CHECK(back.rows[0].improvement_db == r.rows[0].improvement_db);
  CHECK(back.rows[0].metrics == r.rows[0].metrics);
  CHECK(back.aggregates.size() == 1);
  CHECK(back.skipped.size() == 1);
  CHECK(back.config.seed == 42);
  CHECK(write_report(back, ReportFormat::kJson) == write_report(r, ReportFormat::kJson));
}

TEST_CASE("report CSV round trip of rows") {
  const auto r = sample_report();
  const auto rows = read_report_csv_rows(write_report(r, ReportFormat::kCsv));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].record == "synth");
  CHECK(rows[0].output_snr_db == 10.25);
  CHECK(rows[0].metrics.at("noise_var_est") == 0.03125);
}

TEST_CASE("report serialisation is deterministic") {
  const auto r = sample_report();
  CHECK(write_report(r, ReportFormat::kJson) == write_report(r, ReportFormat::kJson));
  CHECK(write_report(r, ReportFormat::kCsv) == write_report(r, ReportFormat::kCsv));
}
