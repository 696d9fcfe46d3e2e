#ifndef RPDLAB_DATASET_IO_H_
#define RPDLAB_DATASET_IO_H_

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rpdlab/sim_engine.h"

namespace rpdlab {

inline constexpr std::string_view kDatasetHeader =
    "session,treatment,graph,supergame,round,subject,partner,action,partner_action,payoff,belief";

void write_dataset_csv(std::ostream& os, const SessionDataset& data);
// Validates the header and every row; errors carry the line number.
SessionDataset read_dataset_csv(std::istream& in, const std::string& source);
SessionDataset load_dataset(const std::filesystem::path& path);

// Treatment sections of the form
//
//   [treatment]
//   name = Comm70
//   T = 100
//   ...
//
// Required keys: name T R P S delta communication graphs belief_mean_sg1
// belief_sd_sg1 belief_mean_sg5 belief_sd_sg5. Optional: seed (stream salt,
// default 0), subjects (6), supergames (5), cooperative_strategy (grim).
// The *_sg5 keys describe the final supergame whatever its number.
std::vector<TreatmentConfig> parse_config(std::istream& in, const std::string& source);
std::vector<TreatmentConfig> load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const std::vector<TreatmentConfig>& configs);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string content_hash(std::string_view bytes);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  bool has_seed = false;
  std::vector<std::pair<std::string, std::string>> inputs;   // name, hash
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, hash
  std::vector<std::pair<std::string, std::string>> extra;
  std::string timestamp_utc;
};

// Flat key=value text. The timestamp line is always last.
std::string render_manifest(const RunManifest& manifest);

// Collects output files in memory and publishes them together: each file
// goes to a temporary sibling first and is renamed into place only after
// all of them were written. Nothing is left behind on failure.
class OutputBatch {
 public:
  void add(std::filesystem::path path, std::string content);
  void commit();
  const std::vector<std::pair<std::filesystem::path, std::string>>& files() const {
    return files_;
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

}  // namespace rpdlab

#endif  // RPDLAB_DATASET_IO_H_
