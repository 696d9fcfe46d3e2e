#include "rpdlab/textlab.h"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "rpdlab/csv.h"
#include "rpdlab/errors.h"
#include "rpdlab/rng.h"

namespace rpdlab {

void check_corpus(const ChatCorpus& corpus) {
  std::set<std::string> seen;
  for (const auto& doc : corpus.documents) {
    if (!seen.insert(doc.id).second) {
      throw ValidationError("duplicate document id '" + doc.id + "'");
    }
  }
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

ChatCorpus load_corpus(const std::filesystem::path& path) {
  std::error_code ec;
  ChatCorpus corpus;
  if (std::filesystem::is_directory(path, ec)) {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) corpus.documents.push_back({f.stem().string(), read_file(f)});
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus " + path.string());
    const auto records = read_csv(in, path.string());
    if (records.empty()) throw ValidationError(path.string() + ": corpus CSV is empty");
    const auto& header = records.front().fields;
    if (header.size() != 2 || header[0] != "id" || header[1] != "text") {
      throw ValidationError(path.string() + ":1: expected header 'id,text'");
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.fields.size() != 2) {
        throw ValidationError(path.string() + ":" + std::to_string(r.line) +
                              ": expected 2 fields, found " + std::to_string(r.fields.size()));
      }
      corpus.documents.push_back({r.fields[0], r.fields[1]});
    }
  }
  check_corpus(corpus);
  return corpus;
}

namespace {

constexpr std::array<std::string_view, 22> kEmoticons = {
    ":-)", ":-(", ":-d", ":-p", ";-)", ":'(", ":-/", ":-*", ":)", ":(", ":d", ":p",
    ";)",  ";(",  ":/",  ":o",  ":*",  "=)",  "<3",  "^^",  "(:", "):"};

bool is_word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string lowercase(std::string_view text) {
  std::string out(text);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = static_cast<unsigned char>(out[i]);
    if (c >= 'A' && c <= 'Z') {
      out[i] = static_cast<char>(c + 32);
    } else if (c == 0xC3 && i + 1 < out.size()) {
      // U+00C0..U+00DE except U+00D7 (multiplication sign).
      const auto next = static_cast<unsigned char>(out[i + 1]);
      if (next >= 0x80 && next <= 0x9E && next != 0x97) out[i + 1] = static_cast<char>(next + 0x20);
      ++i;
    }
  }
  return out;
}

// Length of the emoticon starting at `pos`, or 0.
std::size_t emoticon_at(std::string_view s, std::size_t pos) {
  for (auto e : kEmoticons) {
    if (s.substr(pos, e.size()) != e) continue;
    const std::size_t end = pos + e.size();
    if (end < s.size() && is_word_byte(static_cast<unsigned char>(s[end]))) continue;
    return e.size();
  }
  return 0;
}

}  // namespace

TokenList tokenize(std::string_view text) {
  const std::string s = lowercase(text);
  TokenList out;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (is_word_byte(c)) {
      word.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    flush();
    if (const std::size_t len = emoticon_at(s, i); len > 0) {
      out.emplace_back(s.substr(i, len));
      i += len;
    } else {
      ++i;
    }
  }
  flush();
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string f;
  while (is >> f) out.push_back(f);
  return out;
}

bool skippable(const std::vector<std::string>& fields) {
  return fields.empty() || fields.front().starts_with('#');
}

}  // namespace

TokenMap parse_token_map(std::istream& in, const std::string& source) {
  TokenMap out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto fields = split_fields(line);
    if (skippable(fields)) continue;
    if (fields.size() != 2) {
      throw ValidationError(source + ":" + std::to_string(n) + ": expected 'from to', found " +
                            std::to_string(fields.size()) + " fields");
    }
    out[lowercase(fields[0])] = lowercase(fields[1]);
  }
  return out;
}

std::set<std::string> parse_stopwords(std::istream& in, const std::string& source) {
  std::set<std::string> out;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto fields = split_fields(line);
    if (skippable(fields)) continue;
    if (fields.size() != 1) {
      throw ValidationError(source + ":" + std::to_string(n) + ": expected one stopword per line");
    }
    out.insert(lowercase(fields[0]));
  }
  return out;
}

PreprocessResources load_resources(const std::filesystem::path& spelling,
                                   const std::filesystem::path& lemmas,
                                   const std::filesystem::path& stopwords) {
  PreprocessResources res;
  const auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open " + p.string());
    return in;
  };
  if (!spelling.empty()) {
    auto in = open(spelling);
    res.spelling = parse_token_map(in, spelling.string());
  }
  if (!lemmas.empty()) {
    auto in = open(lemmas);
    res.lemmas = parse_token_map(in, lemmas.string());
  }
  if (!stopwords.empty()) {
    auto in = open(stopwords);
    res.stopwords = parse_stopwords(in, stopwords.string());
  }
  return res;
}

std::vector<TokenList> preprocess(const ChatCorpus& corpus, const PreprocessResources& res) {
  check_corpus(corpus);
  std::vector<TokenList> out;
  out.reserve(corpus.documents.size());
  for (const auto& doc : corpus.documents) {
    TokenList tokens;
    for (auto& t : tokenize(doc.text)) {
      if (auto it = res.spelling.find(t); it != res.spelling.end()) t = it->second;
      if (auto it = res.lemmas.find(t); it != res.lemmas.end()) t = it->second;
      if (res.stopwords.contains(t)) continue;
      tokens.push_back(std::move(t));
    }
    out.push_back(std::move(tokens));
  }
  return out;
}

const std::vector<double>* EmbeddingTable::find(const std::string& token) const {
  const auto it = vectors.find(token);
  return it == vectors.end() ? nullptr : &it->second;
}

namespace {

bool parse_double(const std::string& s, double& out) {
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno == 0 && std::isfinite(out);
}

bool parse_count(const std::string& s, std::size_t& out) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); })) {
    return false;
  }
  out = std::stoull(s);
  return true;
}

}  // namespace

EmbeddingTable parse_embeddings(std::istream& in, const std::string& source) {
  EmbeddingTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": embedding file is empty");
  const auto header = split_fields(line);
  std::size_t declared = 0;
  if (header.size() != 2 || !parse_count(header[0], declared) ||
      !parse_count(header[1], table.dimension) || table.dimension == 0) {
    throw ValidationError(source + ":1: expected header 'vocab_size dim'");
  }
  std::size_t rows = 0;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    const std::string where = source + ":" + std::to_string(n);
    if (fields.size() - 1 != table.dimension) {
      throw ValidationError(where + ": expected " + std::to_string(table.dimension) +
                            " values, found " + std::to_string(fields.size() - 1));
    }
    std::vector<double> v(table.dimension);
    for (std::size_t d = 0; d < table.dimension; ++d) {
      if (!parse_double(fields[d + 1], v[d])) {
        throw ValidationError(where + ": bad number '" + fields[d + 1] + "'");
      }
    }
    ++rows;
    if (!table.vectors.insert_or_assign(fields[0], std::move(v)).second) {
      table.warnings.push_back(where + ": duplicate token '" + fields[0] + "', keeping last");
    }
  }
  if (rows != declared) {
    table.warnings.push_back(source + ": header declares " + std::to_string(declared) +
                             " vectors, found " + std::to_string(rows));
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings " + path.string());
  return parse_embeddings(in, path.string());
}

void dump_embeddings(std::ostream& os, const EmbeddingTable& table) {
  std::vector<std::string> tokens;
  tokens.reserve(table.vectors.size());
  for (const auto& [t, v] : table.vectors) tokens.push_back(t);
  std::sort(tokens.begin(), tokens.end());
  os << tokens.size() << ' ' << table.dimension << '\n';
  os << std::setprecision(9);
  for (const auto& t : tokens) {
    os << t;
    for (double x : table.vectors.at(t)) os << ' ' << x;
    os << '\n';
  }
}

DocumentVector embed_document(std::string id, const TokenList& tokens,
                              const EmbeddingTable& table) {
  DocumentVector doc;
  doc.id = std::move(id);
  doc.values.assign(table.dimension, 0.0);
  for (const auto& t : tokens) {
    const auto* v = table.find(t);
    if (v == nullptr) {
      ++doc.out_of_vocabulary;
      continue;
    }
    ++doc.in_vocabulary;
    for (std::size_t d = 0; d < v->size(); ++d) doc.values[d] += (*v)[d];
  }
  doc.empty = doc.in_vocabulary == 0;
  return doc;
}

std::vector<Point> unit_normalized(const std::vector<Point>& points) {
  std::vector<Point> out = points;
  for (auto& p : out) {
    const double norm = std::sqrt(std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    if (norm > 0.0) {
      for (double& x : p) x /= norm;
    }
  }
  return out;
}

std::size_t count_distinct(const std::vector<Point>& points) {
  std::set<Point> distinct(points.begin(), points.end());
  return distinct.size();
}

namespace {

double squared_distance(const Point& a, const Point& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

void check_points(const std::vector<Point>& points, int k) {
  if (k < 1) throw ValidationError("k must be at least 1");
  if (points.empty()) throw ValidationError("no points to cluster");
  const std::size_t dim = points.front().size();
  for (const auto& p : points) {
    if (p.size() != dim) throw ValidationError("points have differing dimensions");
  }
  if (count_distinct(points) < static_cast<std::size_t>(k)) {
    throw ValidationError("need at least " + std::to_string(k) + " distinct vectors, found " +
                          std::to_string(count_distinct(points)));
  }
}

std::vector<Point> plus_plus_seeds(const std::vector<Point>& points, int k, Rng& rng) {
  const std::size_t n = points.size();
  std::vector<Point> centers;
  centers.push_back(points[rng.below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], centers.back()));
      total += nearest[i];
    }
    const double target = rng.uniform() * total;
    double cumulative = 0.0;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (nearest[i] <= 0.0) continue;
      cumulative += nearest[i];
      pick = i;
      if (cumulative > target) break;
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

int nearest_center(const Point& p, const std::vector<Point>& centers) {
  int best = 0;
  double best_d = squared_distance(p, centers[0]);
  for (std::size_t c = 1; c < centers.size(); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

ClusteringResult kmeans(const std::vector<Point>& input, int k, std::uint64_t seed,
                        const KMeansOptions& options) {
  const std::vector<Point> points =
      options.distance == Distance::kCosine ? unit_normalized(input) : input;
  check_points(points, k);
  if (options.max_iterations < 1) throw ValidationError("max_iterations must be positive");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();

  Rng rng(seed);
  ClusteringResult out;
  out.k = k;
  out.centroids = plus_plus_seeds(points, k, rng);
  std::vector<int> previous;

  for (int it = 1; it <= options.max_iterations; ++it) {
    std::vector<int> assign(n);
    std::vector<std::size_t> size(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = nearest_center(points[i], out.centroids);
      ++size[assign[i]];
    }
    // An empty cluster takes the point farthest from its own centroid.
    for (int c = 0; c < k; ++c) {
      if (size[c] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (size[assign[i]] < 2) continue;
        const double d = squared_distance(points[i], out.centroids[assign[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --size[assign[far]];
      assign[far] = c;
      size[c] = 1;
    }

    std::vector<Point> centroids(k, Point(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t d = 0; d < dim; ++d) centroids[assign[i]][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      for (double& x : centroids[c]) x /= static_cast<double>(size[c]);
    }
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) wcss += squared_distance(points[i], centroids[assign[i]]);

    out.centroids = std::move(centroids);
    out.wcss_trace.push_back(wcss);
    out.wcss = wcss;
    out.iterations = it;
    const bool stable = assign == previous;
    out.assignment = assign;
    previous = std::move(assign);
    if (stable) {
      out.converged = true;
      break;
    }
  }
  return out;
}

WcssCurve wcss_curve(const std::vector<Point>& points, int k_max, std::uint64_t seed,
                     int restarts, const KMeansOptions& options) {
  if (restarts < 1) throw ValidationError("restarts must be at least 1");
  if (k_max < 1) throw ValidationError("k_max must be at least 1");
  check_points(options.distance == Distance::kCosine ? unit_normalized(points) : points, k_max);

  WcssCurve curve;
  for (int k = 1; k <= k_max; ++k) {
    std::vector<std::future<ClusteringResult>> runs;
    for (int r = 0; r < restarts; ++r) {
      runs.push_back(std::async(std::launch::async, [&points, k, &options,
                                                     s = derive_seed(seed, k, r)] {
        return kmeans(points, k, s, options);
      }));
    }
    std::optional<ClusteringResult> best;
    for (auto& run : runs) {
      ClusteringResult res = run.get();
      if (!best || res.wcss < best->wcss) best = std::move(res);
    }
    curve.points.push_back({k, best->wcss});
    curve.best.push_back(std::move(*best));
  }
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const double prev = curve.points[i - 1].wcss;
    if (curve.points[i].wcss > prev + 1e-9 * std::max(1.0, std::abs(prev))) {
      curve.non_increasing = false;
    }
  }
  return curve;
}

ElbowChoice select_k(const std::vector<CurvePoint>& curve) {
  if (curve.size() < 3) throw ValidationError("elbow selection needs k_max >= 3");
  ElbowChoice choice;
  double scale = 0.0;
  for (const auto& p : curve) scale = std::max(scale, std::abs(p.wcss));
  const double tol = 1e-9 * std::max(scale, 1e-300);
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    choice.curvature.emplace_back(curve[i].k,
                                  curve[i - 1].wcss - 2.0 * curve[i].wcss + curve[i + 1].wcss);
  }
  std::vector<std::pair<int, double>> ranked = choice.curvature;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.front().second <= tol) {
    choice.k = 1;
    choice.flat = true;
    return choice;
  }
  choice.k = ranked.front().first;
  if (ranked.size() > 1 && ranked[1].second > tol) choice.runner_up = ranked[1].first;
  return choice;
}

std::map<std::string, double> frequency_ranks(const std::vector<const TokenList*>& docs) {
  std::map<std::string, std::size_t> counts;
  for (const auto* d : docs) {
    for (const auto& t : *d) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> sorted(counts.begin(), counts.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<std::string, double> ranks;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1].second == sorted[i].second) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t m = i; m <= j; ++m) ranks[sorted[m].first] = rank;
    i = j + 1;
  }
  return ranks;
}

RankTable rank_and_rrd(const ClusteringResult& clusters, const std::vector<TokenList>& tokens,
                       std::size_t top_n, std::optional<std::pair<int, int>> designated) {
  if (clusters.assignment.size() != tokens.size()) {
    throw ValidationError("assignment and token lists differ in length");
  }
  if (!designated) {
    if (clusters.k != 2) {
      throw ValidationError("rank report needs k = 2 or two designated clusters, got k = " +
                            std::to_string(clusters.k));
    }
    designated = std::pair{0, 1};
  }
  const auto [first, second] = *designated;
  if (first == second || first < 0 || second < 0 || first >= clusters.k || second >= clusters.k) {
    throw ValidationError("designated clusters must be two distinct ids below k");
  }

  std::vector<const TokenList*> all, in_first, in_second;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    all.push_back(&tokens[i]);
    if (clusters.assignment[i] == first) in_first.push_back(&tokens[i]);
    if (clusters.assignment[i] == second) in_second.push_back(&tokens[i]);
  }
  std::map<std::string, std::size_t> corpus_counts;
  for (const auto* d : all) {
    for (const auto& t : *d) ++corpus_counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> top(corpus_counts.begin(), corpus_counts.end());
  std::stable_sort(top.begin(), top.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (top.size() > top_n) top.resize(top_n);

  const auto ranks_first = frequency_ranks(in_first);
  const auto ranks_second = frequency_ranks(in_second);
  RankTable table;
  table.cluster_first = first;
  table.cluster_second = second;
  for (const auto& [token, count] : top) {
    RankRow row;
    row.token = token;
    if (auto it = ranks_first.find(token); it != ranks_first.end()) row.rank_first = it->second;
    if (auto it = ranks_second.find(token); it != ranks_second.end()) row.rank_second = it->second;
    if (row.rank_first && row.rank_second) {
      const double r1 = *row.rank_first;
      const double r2 = *row.rank_second;
      row.rrd_first = (r2 - r1) / r1;
      row.rrd_second = (r1 - r2) / r2;
      row.distinguishing = *row.rrd_first >= 1.0 || *row.rrd_second >= 1.0;
    } else {
      row.distinguishing = row.rank_first.has_value() != row.rank_second.has_value();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

double rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ValidationError("labelings differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::size_t agree = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++pairs;
      if ((a[i] == a[j]) == (b[i] == b[j])) ++agree;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(pairs);
}

namespace {

void put_optional(std::ostream& os, const std::optional<double>& x) {
  os << ',';
  if (x) os << *x;
}

}  // namespace

void write_assignment_csv(std::ostream& os, const std::vector<std::string>& ids,
                          const ClusteringResult& result) {
  os << "id,cluster\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << csv_escape(ids[i]) << ',' << result.assignment[i] << '\n';
  }
}

void write_curve_csv(std::ostream& os, const WcssCurve& curve, const ElbowChoice* choice) {
  os << std::setprecision(17);
  os << "k,wcss,curvature,selected\n";
  for (const auto& p : curve.points) {
    os << p.k << ',' << p.wcss << ',';
    if (choice) {
      for (const auto& [k, c] : choice->curvature) {
        if (k == p.k) os << c;
      }
    }
    os << ',' << (choice && choice->k == p.k ? 1 : 0) << '\n';
  }
}

void write_rrd_csv(std::ostream& os, const RankTable& table) {
  os << std::setprecision(17);
  os << "token,r1,r2,rrd1,rrd2,distinguishing\n";
  for (const auto& r : table.rows) {
    os << csv_escape(r.token);
    put_optional(os, r.rank_first);
    put_optional(os, r.rank_second);
    put_optional(os, r.rrd_first);
    put_optional(os, r.rrd_second);
    os << ',' << (r.distinguishing ? 1 : 0) << '\n';
  }
}

}  // namespace rpdlab
