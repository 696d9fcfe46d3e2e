#ifndef RPDLAB_TEXTLAB_H_
#define RPDLAB_TEXTLAB_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rpdlab {

struct ChatDocument {
  std::string id;
  std::string text;
};

struct ChatCorpus {
  std::vector<ChatDocument> documents;
};

// Throws ValidationError on duplicate ids.
void check_corpus(const ChatCorpus& corpus);

// A directory of UTF-8 text files (id = file stem, sorted by id) or a CSV
// file with columns id,text and a header row.
ChatCorpus load_corpus(const std::filesystem::path& path);

using TokenList = std::vector<std::string>;

// Lowercases (ASCII and Latin-1 capitals in UTF-8), then splits on
// whitespace and punctuation. Emoticons such as ":)" or ":-(" survive as
// single tokens.
TokenList tokenize(std::string_view text);

// Word -> word replacements, one "from to" pair per line. Blank lines and
// lines starting with '#' are skipped. Entries are lowercased.
using TokenMap = std::unordered_map<std::string, std::string>;
TokenMap parse_token_map(std::istream& in, const std::string& source);
std::set<std::string> parse_stopwords(std::istream& in, const std::string& source);

struct PreprocessResources {
  TokenMap spelling;
  TokenMap lemmas;
  std::set<std::string> stopwords;
};

// Empty paths yield empty resources.
PreprocessResources load_resources(const std::filesystem::path& spelling,
                                   const std::filesystem::path& lemmas,
                                   const std::filesystem::path& stopwords);

// tokenize, then spelling map, lemma map and stopword removal, in that
// order. Output is aligned with corpus.documents.
std::vector<TokenList> preprocess(const ChatCorpus& corpus, const PreprocessResources& res);

struct EmbeddingTable {
  std::size_t dimension = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::vector<std::string> warnings;

  const std::vector<double>* find(const std::string& token) const;
};

// word2vec text format: "vocab_size dim" header, then one token followed by
// dim numbers per line. Later duplicates replace earlier ones with a
// warning.
EmbeddingTable parse_embeddings(std::istream& in, const std::string& source);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
// Writes tokens in sorted order so the output is reproducible.
void dump_embeddings(std::ostream& os, const EmbeddingTable& table);

struct DocumentVector {
  std::string id;
  std::vector<double> values;
  std::size_t in_vocabulary = 0;
  std::size_t out_of_vocabulary = 0;
  // True when no token was found in the table; values are then all zero.
  bool empty = true;
};

DocumentVector embed_document(std::string id, const TokenList& tokens,
                              const EmbeddingTable& table);

using Point = std::vector<double>;

enum class Distance { kSquaredEuclidean, kCosine };

struct KMeansOptions {
  int max_iterations = 300;
  Distance distance = Distance::kSquaredEuclidean;
};

struct ClusteringResult {
  int k = 0;
  std::vector<Point> centroids;
  std::vector<int> assignment;  // cluster per document, 0-based
  std::vector<double> wcss_trace;  // after every Lloyd iteration
  double wcss = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Rows scaled to unit length; zero rows stay zero.
std::vector<Point> unit_normalized(const std::vector<Point>& points);

std::size_t count_distinct(const std::vector<Point>& points);

// Lloyd's algorithm with k-means++ seeding. Throws ValidationError when
// fewer than k distinct points are given.
ClusteringResult kmeans(const std::vector<Point>& points, int k, std::uint64_t seed,
                        const KMeansOptions& options = {});

struct CurvePoint {
  int k = 0;
  double wcss = 0.0;
};

struct WcssCurve {
  std::vector<CurvePoint> points;
  std::vector<ClusteringResult> best;  // best run per k
  // Best-of-restarts can still fail to decrease; reported, not enforced.
  bool non_increasing = true;
};

// For k = 1..k_max, the lowest WCSS over `restarts` seeded runs. Restarts
// run in parallel; ties go to the lower restart index.
WcssCurve wcss_curve(const std::vector<Point>& points, int k_max, std::uint64_t seed,
                     int restarts, const KMeansOptions& options = {});

struct ElbowChoice {
  int k = 1;
  bool flat = false;
  // Discrete curvature WCSS(k-1) - 2 WCSS(k) + WCSS(k+1) for k = 2..k_max-1.
  std::vector<std::pair<int, double>> curvature;
  // Interior k with the second largest curvature, if any.
  std::optional<int> runner_up;
};

// Needs at least three curve points.
ElbowChoice select_k(const std::vector<CurvePoint>& curve);

struct RankRow {
  std::string token;
  std::optional<double> rank_first;   // rank in the first reported cluster
  std::optional<double> rank_second;  // rank in the second reported cluster
  // (r2 - r1) / r1 and (r1 - r2) / r2; only when the token is in both.
  std::optional<double> rrd_first;
  std::optional<double> rrd_second;
  bool distinguishing = false;
};

struct RankTable {
  int cluster_first = 0;
  int cluster_second = 1;
  std::vector<RankRow> rows;  // corpus frequency order
};

// Frequency ranks (1 = most frequent, average ranks on ties) of a token
// list.
std::map<std::string, double> frequency_ranks(const std::vector<const TokenList*>& docs);

// Relative rank differential report over the top_n most frequent corpus
// tokens for two clusters. With k = 2 the pair defaults to (0, 1); for
// other k the pair must be designated. A token is distinguishing when
// either differential is >= 1 or when it occurs in only one of the two
// clusters.
RankTable rank_and_rrd(const ClusteringResult& clusters, const std::vector<TokenList>& tokens,
                       std::size_t top_n,
                       std::optional<std::pair<int, int>> designated = std::nullopt);

// Rand index between two labelings of the same items.
double rand_index(const std::vector<int>& a, const std::vector<int>& b);

void write_assignment_csv(std::ostream& os, const std::vector<std::string>& ids,
                          const ClusteringResult& result);
void write_curve_csv(std::ostream& os, const WcssCurve& curve, const ElbowChoice* choice);
void write_rrd_csv(std::ostream& os, const RankTable& table);

}  // namespace rpdlab

#endif  // RPDLAB_TEXTLAB_H_
