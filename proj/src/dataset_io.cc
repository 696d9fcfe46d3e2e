#include "rpdlab/dataset_io.h"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rpdlab/csv.h"
#include "rpdlab/errors.h"

namespace rpdlab {

std::vector<CsvRecord> read_csv(std::istream& in, const std::string& source) {
  std::vector<CsvRecord> records;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    CsvRecord rec;
    rec.line = line;
    std::string field;
    bool done = false;
    while (!done) {
      if (i < n && text[i] == '"') {
        const std::size_t start_line = line;
        ++i;
        for (;;) {
          if (i >= n) {
            throw ValidationError(source + ":" + std::to_string(start_line) +
                                  ": unterminated quoted field");
          }
          if (text[i] == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          field.push_back(text[i++]);
        }
      }
      while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') field.push_back(text[i++]);
      rec.fields.push_back(std::move(field));
      field.clear();
      if (i >= n) {
        done = true;
      } else if (text[i] == ',') {
        ++i;
      } else {
        if (text[i] == '\r') ++i;
        if (i < n && text[i] == '\n') ++i;
        ++line;
        done = true;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

std::string number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

void write_dataset_csv(std::ostream& os, const SessionDataset& data) {
  os << kDatasetHeader << '\n';
  for (const auto& r : data) {
    os << r.session << ',' << csv_escape(r.treatment) << ',' << r.graph << ',' << r.supergame
       << ',' << r.round << ',' << r.subject << ',' << r.partner << ',' << action_code(r.action)
       << ',' << action_code(r.partner_action) << ',' << number(r.payoff) << ',';
    if (r.belief) os << number(*r.belief);
    os << '\n';
  }
}

SessionDataset read_dataset_csv(std::istream& in, const std::string& source) {
  const auto records = read_csv(in, source);
  if (records.empty()) throw ValidationError(source + ": missing header row");
  std::string header;
  for (std::size_t i = 0; i < records[0].fields.size(); ++i) {
    if (i > 0) header += ',';
    header += records[0].fields[i];
  }
  if (header != kDatasetHeader) {
    throw ValidationError(source + ":1: header must be '" + std::string(kDatasetHeader) + "'");
  }
  SessionDataset data;
  data.reserve(records.size() - 1);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const auto fail = [&](const std::string& what) {
      throw ValidationError(source + ": row " + std::to_string(i) + " (line " +
                            std::to_string(rec.line) + "): " + what);
    };
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    if (rec.fields.size() != 11) {
      fail("expected 11 fields, found " + std::to_string(rec.fields.size()));
    }
    const auto& f = rec.fields;
    RoundRecord r;
    const auto integer = [&](std::size_t col, int& out, const char* name, int min) {
      if (!parse_number(f[col], out) || out < min) fail(std::string("bad ") + name + " '" + f[col] + "'");
    };
    integer(0, r.session, "session", 0);
    r.treatment = f[1];
    if (r.treatment.empty()) fail("empty treatment");
    integer(2, r.graph, "graph", 1);
    integer(3, r.supergame, "supergame", 1);
    integer(4, r.round, "round", 1);
    integer(5, r.subject, "subject", 0);
    integer(6, r.partner, "partner", 0);
    if (f[7].size() != 1 || (f[7][0] != 'A' && f[7][0] != 'B')) fail("action must be A or B");
    if (f[8].size() != 1 || (f[8][0] != 'A' && f[8][0] != 'B')) {
      fail("partner_action must be A or B");
    }
    r.action = parse_action(f[7][0]);
    r.partner_action = parse_action(f[8][0]);
    if (!parse_number(f[9], r.payoff) || !std::isfinite(r.payoff)) fail("bad payoff '" + f[9] + "'");
    if (!f[10].empty()) {
      double b = 0.0;
      if (!parse_number(f[10], b) || b < 0.0 || b > 100.0) {
        fail("belief must be empty or a number in [0, 100]");
      }
      r.belief = b;
    }
    data.push_back(std::move(r));
  }
  return data;
}

SessionDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  return read_dataset_csv(in, path.string());
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

const std::set<std::string> kRequiredKeys = {
    "name",  "T",      "R",    "P",    "S",    "delta", "communication", "graphs",
    "belief_mean_sg1", "belief_sd_sg1", "belief_mean_sg5", "belief_sd_sg5"};
const std::set<std::string> kOptionalKeys = {"seed", "subjects", "supergames",
                                              "cooperative_strategy"};

struct Section {
  std::size_t line = 0;
  std::map<std::string, std::pair<std::string, std::size_t>> values;  // key -> (value, line)
};

TreatmentConfig build_treatment(const Section& sec, const std::string& source) {
  const auto where = [&](std::size_t line) { return source + ":" + std::to_string(line) + ": "; };
  for (const auto& key : kRequiredKeys) {
    if (!sec.values.contains(key)) {
      throw ValidationError(where(sec.line) + "treatment section lacks key '" + key + "'");
    }
  }
  const auto real = [&](const std::string& key) {
    const auto& [text, line] = sec.values.at(key);
    double x = 0.0;
    if (!parse_number(std::string_view(text), x) || !std::isfinite(x)) {
      throw ValidationError(where(line) + key + " must be a number, got '" + text + "'");
    }
    return x;
  };
  const auto whole = [&](const std::string& key, int fallback) {
    const auto it = sec.values.find(key);
    if (it == sec.values.end()) return fallback;
    int x = 0;
    if (!parse_number(std::string_view(it->second.first), x)) {
      throw ValidationError(where(it->second.second) + key + " must be an integer, got '" +
                            it->second.first + "'");
    }
    return x;
  };

  TreatmentConfig c;
  c.name = sec.values.at("name").first;
  c.payoffs = {real("T"), real("R"), real("P"), real("S")};
  c.delta = real("delta");
  {
    const auto& [text, line] = sec.values.at("communication");
    if (text == "true" || text == "yes" || text == "1") {
      c.communication = true;
    } else if (text == "false" || text == "no" || text == "0") {
      c.communication = false;
    } else {
      throw ValidationError(where(line) + "communication must be true or false");
    }
  }
  c.n_graphs = whole("graphs", 0);
  c.n_subjects = whole("subjects", 6);
  c.n_supergames = whole("supergames", 5);
  c.belief_model.first = {real("belief_mean_sg1"), real("belief_sd_sg1")};
  c.belief_model.last = {real("belief_mean_sg5"), real("belief_sd_sg5")};
  if (auto it = sec.values.find("seed"); it != sec.values.end()) {
    if (!parse_number(std::string_view(it->second.first), c.seed)) {
      throw ValidationError(where(it->second.second) + "seed must be a non-negative integer");
    }
  }
  if (auto it = sec.values.find("cooperative_strategy"); it != sec.values.end()) {
    try {
      c.cooperative_strategy = parse_strategy(it->second.first);
    } catch (const ValidationError& e) {
      throw ValidationError(where(it->second.second) + e.what());
    }
  }
  try {
    validate_config(c);
  } catch (const ValidationError& e) {
    throw ValidationError(where(sec.line) + e.what());
  }
  return c;
}

}  // namespace

std::vector<TreatmentConfig> parse_config(std::istream& in, const std::string& source) {
  std::vector<Section> sections;
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = source + ":" + std::to_string(n) + ": ";
    if (line.front() == '[') {
      if (line != "[treatment]") throw ValidationError(where + "unknown section " + line);
      sections.push_back({n, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected key = value");
    if (sections.empty()) throw ValidationError(where + "key outside a [treatment] section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!kRequiredKeys.contains(key) && !kOptionalKeys.contains(key)) {
      throw ValidationError(where + "unknown key '" + key + "'");
    }
    if (!sections.back().values.emplace(key, std::pair{value, n}).second) {
      throw ValidationError(where + "duplicate key '" + key + "'");
    }
  }
  if (sections.empty()) throw ValidationError(source + ": no [treatment] sections");
  std::vector<TreatmentConfig> out;
  std::set<std::string> names;
  for (const auto& sec : sections) {
    out.push_back(build_treatment(sec, source));
    if (!names.insert(out.back().name).second) {
      throw ValidationError(source + ":" + std::to_string(sec.line) + ": duplicate treatment '" +
                            out.back().name + "'");
    }
  }
  return out;
}

std::vector<TreatmentConfig> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, path.string());
}

void write_config(std::ostream& os, const std::vector<TreatmentConfig>& configs) {
  bool first = true;
  for (const auto& c : configs) {
    if (!first) os << '\n';
    first = false;
    os << "[treatment]\n"
       << "name = " << c.name << '\n'
       << "T = " << number(c.payoffs.T) << '\n'
       << "R = " << number(c.payoffs.R) << '\n'
       << "P = " << number(c.payoffs.P) << '\n'
       << "S = " << number(c.payoffs.S) << '\n'
       << "delta = " << number(c.delta) << '\n'
       << "communication = " << (c.communication ? "true" : "false") << '\n'
       << "graphs = " << c.n_graphs << '\n'
       << "subjects = " << c.n_subjects << '\n'
       << "supergames = " << c.n_supergames << '\n'
       << "belief_mean_sg1 = " << number(c.belief_model.first.mean) << '\n'
       << "belief_sd_sg1 = " << number(c.belief_model.first.sd) << '\n'
       << "belief_mean_sg5 = " << number(c.belief_model.last.mean) << '\n'
       << "belief_sd_sg5 = " << number(c.belief_model.last.sd) << '\n'
       << "seed = " << c.seed << '\n';
    if (c.cooperative_strategy != StrategyKind::kGrim) {
      os << "cooperative_strategy = " << strategy_name(c.cooperative_strategy) << '\n';
    }
  }
}

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string render_manifest(const RunManifest& m) {
  std::ostringstream os;
  os << "command=" << m.command << '\n';
  if (!m.config_hash.empty()) os << "config_hash=" << m.config_hash << '\n';
  if (m.has_seed) os << "master_seed=" << m.master_seed << '\n';
  for (const auto& [name, hash] : m.inputs) os << "input." << name << '=' << hash << '\n';
  for (const auto& [name, hash] : m.outputs) os << "output." << name << '=' << hash << '\n';
  for (const auto& [key, value] : m.extra) os << key << '=' << value << '\n';
  os << "timestamp_utc=" << m.timestamp_utc << '\n';
  return os.str();
}

void OutputBatch::add(std::filesystem::path path, std::string content) {
  files_.emplace_back(std::move(path), std::move(content));
}

void OutputBatch::commit() {
  std::vector<std::filesystem::path> temps;
  const auto cleanup = [&] {
    std::error_code ec;
    for (const auto& t : temps) std::filesystem::remove(t, ec);
  };
  try {
    for (const auto& [path, content] : files_) {
      std::filesystem::path tmp = path;
      tmp += ".partial";
      temps.push_back(tmp);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write " + path.string());
      out << content;
      out.close();
      if (!out) throw IoError("failed writing " + path.string());
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      std::filesystem::rename(temps[i], files_[i].first);
    }
  } catch (const std::filesystem::filesystem_error& e) {
    cleanup();
    throw IoError(e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace rpdlab
