#include "gpecg/signal_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

namespace gpecg {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::int16_t sign_extend_12(unsigned v) {
  return static_cast<std::int16_t>(v & 0x800 ? static_cast<int>(v) - 0x1000 : static_cast<int>(v));
}

}  // namespace

void EcgRecord::validate() const {
  if (!(fs > 0.0)) throw Error("record '" + name + "': sampling frequency must be positive");
  if (leads.empty()) throw Error("record '" + name + "': no leads");
  const auto n = leads.front().size();
  if (n == 0) throw Error("record '" + name + "': leads are empty");
  for (const auto& lead : leads) {
    if (lead.size() != n) throw Error("record '" + name + "': leads have unequal lengths");
  }
}

// ---------------------------------------------------------------------------
// Format 212

std::array<std::int16_t, 2> unpack_212_pair(std::uint8_t b0, std::uint8_t b1, std::uint8_t b2) {
  const unsigned s0 = static_cast<unsigned>(b0) | ((static_cast<unsigned>(b1) & 0x0Fu) << 8);
  const unsigned s1 = static_cast<unsigned>(b2) | ((static_cast<unsigned>(b1) & 0xF0u) << 4);
  return {sign_extend_12(s0), sign_extend_12(s1)};
}

std::array<std::uint8_t, 3> pack_212_pair(std::int16_t s0, std::int16_t s1) {
  if (s0 < -2048 || s0 > 2047 || s1 < -2048 || s1 > 2047) {
    throw Error("format 212 sample out of 12-bit range");
  }
  const auto u0 = static_cast<unsigned>(s0) & 0xFFFu;
  const auto u1 = static_cast<unsigned>(s1) & 0xFFFu;
  return {static_cast<std::uint8_t>(u0 & 0xFFu),
          static_cast<std::uint8_t>(((u0 >> 8) & 0x0Fu) | ((u1 >> 4) & 0xF0u)),
          static_cast<std::uint8_t>(u1 & 0xFFu)};
}

std::vector<std::int16_t> decode_212(std::span<const std::uint8_t> bytes) {
  std::vector<std::int16_t> out;
  out.reserve(bytes.size() * 2 / 3 + 1);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const auto pair = unpack_212_pair(bytes[i], bytes[i + 1], bytes[i + 2]);
    out.push_back(pair[0]);
    out.push_back(pair[1]);
  }
  if (bytes.size() - i == 2) {
    out.push_back(unpack_212_pair(bytes[i], bytes[i + 1], 0)[0]);
  }
  return out;
}

std::vector<std::uint8_t> encode_212(std::span<const std::int16_t> samples) {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * 3 / 2 + 2);
  std::size_t i = 0;
  for (; i + 2 <= samples.size(); i += 2) {
    const auto b = pack_212_pair(samples[i], samples[i + 1]);
    out.insert(out.end(), b.begin(), b.end());
  }
  if (i < samples.size()) {
    const auto b = pack_212_pair(samples[i], 0);
    out.push_back(b[0]);
    out.push_back(b[1]);
  }
  return out;
}

RecordHeader parse_wfdb_header(std::string_view header_text) {
  std::vector<std::string_view> content;
  for (auto line : lines_of(header_text)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    content.push_back(line);
  }
  if (content.empty()) throw Error("malformed header: no record line");

  RecordHeader h;
  const auto rec = split_ws(content.front());
  if (rec.size() < 2) throw Error("malformed header: record line needs a name and signal count");
  if (rec[0].find('/') != std::string_view::npos) {
    throw Error("malformed header: multi-segment records are not supported");
  }
  h.name = std::string(rec[0]);
  if (!parse_int(rec[1], h.n_leads) || h.n_leads == 0) {
    throw Error("malformed header: invalid signal count '" + std::string(rec[1]) + "'");
  }
  h.fs = 250.0;
  if (rec.size() > 2) {
    auto fs_field = rec[2];
    fs_field = fs_field.substr(0, fs_field.find_first_of("/("));
    if (!parse_double(fs_field, h.fs) || !(h.fs > 0.0)) {
      throw Error("malformed header: invalid sampling frequency '" + std::string(rec[2]) + "'");
    }
  }
  if (rec.size() > 3 && !parse_int(rec[3], h.n_samples)) {
    throw Error("malformed header: invalid sample count '" + std::string(rec[3]) + "'");
  }

  if (content.size() < 1 + h.n_leads) {
    throw Error("malformed header: expected " + std::to_string(h.n_leads) + " signal lines");
  }
  for (std::size_t s = 0; s < h.n_leads; ++s) {
    const auto f = split_ws(content[1 + s]);
    if (f.size() < 2) throw Error("malformed header: signal line " + std::to_string(s + 1));
    if (s == 0) {
      h.dat_file = std::string(f[0]);
    } else if (f[0] != h.dat_file) {
      throw Error("unsupported record layout: signals stored in more than one file");
    }
    auto fmt = f[1];
    if (const auto plus = fmt.find('+'); s == 0 && plus != std::string_view::npos) {
      if (!parse_int(fmt.substr(plus + 1), h.byte_offset)) {
        throw Error("malformed header: byte offset in '" + std::string(f[1]) + "'");
      }
    }
    fmt = fmt.substr(0, fmt.find_first_of("x:+"));
    int code = 0;
    if (!parse_int(fmt, code)) throw Error("malformed header: format field '" + std::string(f[1]) + "'");
    if (code != 212) throw Error("unsupported WFDB format " + std::to_string(code) + " (only 212)");

    LeadCalibration cal;
    bool have_gain = false;
    if (f.size() > 2) {
      auto g = f[2];
      g = g.substr(0, g.find('/'));
      const auto paren = g.find('(');
      double gain = 0.0;
      if (!parse_double(g.substr(0, paren), gain)) {
        throw Error("malformed header: gain field '" + std::string(f[2]) + "'");
      }
      if (paren != std::string_view::npos) {
        const auto close = g.find(')', paren);
        if (close == std::string_view::npos ||
            !parse_double(g.substr(paren + 1, close - paren - 1), cal.baseline)) {
          throw Error("malformed header: baseline in '" + std::string(f[2]) + "'");
        }
      }
      if (gain != 0.0) {
        cal.gain = gain;
        have_gain = true;
      }
    }
    cal.gain_defaulted = !have_gain;
    if (f.size() > 8) {
      std::string desc;
      for (std::size_t k = 8; k < f.size(); ++k) {
        if (!desc.empty()) desc += ' ';
        desc += f[k];
      }
      cal.description = std::move(desc);
    }
    h.leads.push_back(std::move(cal));
  }
  return h;
}

EcgRecord read_wfdb_record(std::string_view header_text, std::span<const std::uint8_t> dat_bytes) {
  const auto h = parse_wfdb_header(header_text);
  if (h.byte_offset > dat_bytes.size()) throw Error("truncated data stream: shorter than byte offset");
  dat_bytes = dat_bytes.subspan(h.byte_offset);

  std::size_t n_samples = h.n_samples;
  if (n_samples == 0) n_samples = (dat_bytes.size() * 2 / 3) / h.n_leads;
  const std::size_t total = n_samples * h.n_leads;
  const std::size_t needed = (total / 2) * 3 + (total % 2 ? 2 : 0);
  if (dat_bytes.size() < needed) {
    throw Error("truncated data stream: need " + std::to_string(needed) + " bytes, have " +
                std::to_string(dat_bytes.size()));
  }
  const auto raw = decode_212(dat_bytes.first(needed));

  EcgRecord rec;
  rec.name = h.name;
  rec.fs = h.fs;
  rec.leads.assign(h.n_leads, std::vector<double>(n_samples));
  for (std::size_t s = 0; s < h.n_leads; ++s) {
    const auto& cal = h.leads[s];
    if (cal.gain_defaulted) {
      rec.warnings.push_back("lead " + std::to_string(s) + ": gain missing, assuming 200 adu/mV");
    }
    auto& lead = rec.leads[s];
    for (std::size_t t = 0; t < n_samples; ++t) {
      lead[t] = (static_cast<double>(raw[t * h.n_leads + s]) - cal.baseline) / cal.gain;
    }
  }
  rec.validate();
  return rec;
}

EcgRecord load_wfdb_record(const std::string& base_path) {
  namespace fs = std::filesystem;
  fs::path hea = base_path;
  if (hea.extension() != ".hea") hea += ".hea";
  const auto header = read_text_file(hea.string());
  const auto h = parse_wfdb_header(header);
  const auto dat = read_binary_file((hea.parent_path() / h.dat_file).string());
  return read_wfdb_record(header, dat);
}

// ---------------------------------------------------------------------------
// CSV

EcgRecord read_csv_record(std::string_view text, double fs, bool has_header) {
  EcgRecord rec;
  rec.fs = fs;
  auto lines = lines_of(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  std::size_t row = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (has_header && li == 0) continue;
    const auto cells = split(lines[li], ',');
    if (rec.leads.empty()) {
      rec.leads.resize(cells.size());
    } else if (cells.size() != rec.leads.size()) {
      throw Error("ragged rows: line " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                  " columns, expected " + std::to_string(rec.leads.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw Error("non-numeric cell '" + std::string(trim(cells[c])) + "' at line " + std::to_string(li + 1));
      }
      rec.leads[c].push_back(v);
    }
    ++row;
  }
  if (row == 0) throw Error("CSV contains no samples");
  rec.validate();
  return rec;
}

std::string write_csv_record(const EcgRecord& record) {
  record.validate();
  std::string out;
  for (std::size_t t = 0; t < record.n_samples(); ++t) {
    for (std::size_t c = 0; c < record.n_leads(); ++c) {
      if (c) out += ',';
      out += format_double(record.leads[c][t]);
    }
    out += '\n';
  }
  return out;
}

EcgRecord load_csv_record(const std::string& path, double fs, bool has_header) {
  auto rec = read_csv_record(read_text_file(path), fs, has_header);
  rec.name = std::filesystem::path(path).stem().string();
  return rec;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

using ojson = nlohmann::ordered_json;

ojson config_to_json(const ReportConfig& c) {
  ojson j;
  j["levels_db"] = c.levels_db;
  j["repetitions"] = c.repetitions;
  j["seed"] = c.seed;
  j["methods"] = c.methods;
  j["leads"] = c.leads;
  j["records"] = c.records;
  ojson extra = ojson::object();
  for (const auto& [k, v] : c.extra) extra[k] = v;
  j["extra"] = extra;
  return j;
}

std::string metrics_cell(const std::map<std::string, double>& m) {
  std::string s;
  for (const auto& [k, v] : m) {
    if (!s.empty()) s += ';';
    s += k + '=' + format_double(v);
  }
  return s;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}

}  // namespace

std::string write_report(const ReportDocument& report, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    std::string out =
        "record,lead,level_db,repetition,method,input_snr_db,output_snr_db,improvement_db,metrics\n";
    for (const auto& r : report.rows) {
      out += csv_escape(r.record) + ',' + std::to_string(r.lead) + ',' + format_double(r.level_db) + ',' +
             std::to_string(r.repetition) + ',' + csv_escape(r.method) + ',' + format_double(r.input_snr_db) +
             ',' + format_double(r.output_snr_db) + ',' + format_double(r.improvement_db) + ',' +
             metrics_cell(r.metrics) + '\n';
    }
    return out;
  }

  ojson doc;
  doc["schema"] = "gpecg-snr-report/1";
  doc["config"] = config_to_json(report.config);
  ojson rows = ojson::array();
  for (const auto& r : report.rows) {
    ojson j;
    j["record"] = r.record;
    j["lead"] = r.lead;
    j["level_db"] = r.level_db;
    j["repetition"] = r.repetition;
    j["method"] = r.method;
    j["input_snr_db"] = r.input_snr_db;
    j["output_snr_db"] = r.output_snr_db;
    j["improvement_db"] = r.improvement_db;
    ojson m = ojson::object();
    for (const auto& [k, v] : r.metrics) m[k] = v;
    j["metrics"] = m;
    rows.push_back(std::move(j));
  }
  doc["rows"] = rows;
  ojson aggs = ojson::array();
  for (const auto& a : report.aggregates) {
    ojson j;
    j["method"] = a.method;
    j["level_db"] = a.level_db;
    j["count"] = a.count;
    j["mean_improvement_db"] = a.mean_improvement_db;
    j["std_improvement_db"] = a.std_improvement_db;
    aggs.push_back(std::move(j));
  }
  doc["aggregates"] = aggs;
  ojson skipped = ojson::array();
  for (const auto& s : report.skipped) {
    ojson j;
    j["record"] = s.record;
    j["lead"] = s.lead;
    j["level_db"] = s.level_db;
    j["repetition"] = s.repetition;
    j["reason"] = s.reason;
    skipped.push_back(std::move(j));
  }
  doc["skipped"] = skipped;
  return doc.dump(2) + '\n';
}

ReportDocument read_report_json(std::string_view text) {
  ReportDocument rep;
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto& c = doc.at("config");
    rep.config.levels_db = c.at("levels_db").get<std::vector<double>>();
    rep.config.repetitions = c.at("repetitions").get<std::size_t>();
    rep.config.seed = c.at("seed").get<std::uint64_t>();
    rep.config.methods = c.at("methods").get<std::vector<std::string>>();
    rep.config.leads = c.at("leads").get<std::vector<std::size_t>>();
    rep.config.records = c.at("records").get<std::vector<std::string>>();
    for (const auto& [k, v] : c.at("extra").items()) rep.config.extra[k] = v.get<std::string>();
    for (const auto& j : doc.at("rows")) {
      SnrResult r;
      r.record = j.at("record").get<std::string>();
      r.lead = j.at("lead").get<std::size_t>();
      r.level_db = j.at("level_db").get<double>();
      r.repetition = j.at("repetition").get<std::size_t>();
      r.method = j.at("method").get<std::string>();
      r.input_snr_db = j.at("input_snr_db").get<double>();
      r.output_snr_db = j.at("output_snr_db").get<double>();
      r.improvement_db = j.at("improvement_db").get<double>();
      for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
      rep.rows.push_back(std::move(r));
    }
    for (const auto& j : doc.at("aggregates")) {
      LevelAggregate a;
      a.method = j.at("method").get<std::string>();
      a.level_db = j.at("level_db").get<double>();
      a.count = j.at("count").get<std::size_t>();
      a.mean_improvement_db = j.at("mean_improvement_db").get<double>();
      a.std_improvement_db = j.at("std_improvement_db").get<double>();
      rep.aggregates.push_back(std::move(a));
    }
    for (const auto& j : doc.at("skipped")) {
      SkippedTask s;
      s.record = j.at("record").get<std::string>();
      s.lead = j.at("lead").get<std::size_t>();
      s.level_db = j.at("level_db").get<double>();
      s.repetition = j.at("repetition").get<std::size_t>();
      s.reason = j.at("reason").get<std::string>();
      rep.skipped.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return rep;
}

std::vector<SnrResult> read_report_csv_rows(std::string_view text) {
  std::vector<SnrResult> rows;
  auto lines = lines_of(text);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    // fields are written unquoted unless they contain separators; record
    // names in practice never do, so a plain split suffices here
    const auto f = split(lines[li], ',');
    if (f.size() != 9) throw Error("malformed report row at line " + std::to_string(li + 1));
    SnrResult r;
    r.record = std::string(f[0]);
    r.method = std::string(f[4]);
    if (!parse_int(f[1], r.lead) || !parse_double(f[2], r.level_db) || !parse_int(f[3], r.repetition) ||
        !parse_double(f[5], r.input_snr_db) || !parse_double(f[6], r.output_snr_db) ||
        !parse_double(f[7], r.improvement_db)) {
      throw Error("malformed report row at line " + std::to_string(li + 1));
    }
    if (!f[8].empty()) {
      for (auto kv : split(f[8], ';')) {
        const auto eq = kv.find('=');
        double v = 0.0;
        if (eq == std::string_view::npos || !parse_double(kv.substr(eq + 1), v)) {
          throw Error("malformed metrics cell at line " + std::to_string(li + 1));
        }
        r.metrics[std::string(kv.substr(0, eq))] = v;
      }
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace gpecg
