#pragma once

#include <map>
#include <string>

#include "geli/config.hpp"

namespace geli {

struct StageOptions {
  bool force = false;
  bool partial = false;
};

/// All paths one run touches, resolved from the config (workdir fallback
/// via GELI_WORKDIR). The ground-truth sidecar lives next to the dataset.
struct RunPaths {
  std::string workdir;
  std::string dataset;
  std::string truth;
  std::string manifest;
  std::string lock;
  std::string checkpoint_dir;
  std::string report_dir;
  std::string log_dir;
  std::string eval_dir;

  static RunPaths resolve(const ExperimentConfig& cfg);
  std::string checkpoint(const std::string& tag) const;
  std::string train_log(const std::string& tag) const;
  std::string eval_json(const std::string& tag) const;
};

/// 16-hex-digit FNV-1a hash of a file's bytes. Unreadable file raises
/// ArtifactError.
std::string hash_file(const std::string& path);

struct StageRecord {
  std::string fingerprint;
  std::string completed_at;
  std::map<std::string, std::string> outputs;  // path -> content hash
};

/// On-disk run state: the config snapshot plus one record per completed
/// stage. Saved atomically (tmp file + rename) at every stage boundary.
struct RunManifest {
  std::map<std::string, std::string> config;
  std::map<std::string, StageRecord> stages;

  static RunManifest load(const std::string& path);
  void save(const std::string& path) const;
};

/// Pipeline stages. Each takes the workdir lock, is a no-op when its
/// manifest record is still valid (unless force), and verifies that the
/// stages it builds on are intact before running: a prerequisite whose
/// recorded output hash no longer matches the file on disk, or whose
/// config fingerprint changed, raises ArtifactError.
void cmd_generate(const ExperimentConfig& cfg, const StageOptions& opts);
void cmd_train_reward(const ExperimentConfig& cfg, const StageOptions& opts);
void cmd_eval_reward(const ExperimentConfig& cfg, const StageOptions& opts);
void cmd_adapt_policy(const ExperimentConfig& cfg, const StageOptions& opts);
void cmd_report(const ExperimentConfig& cfg, const StageOptions& opts);
void run_all(const ExperimentConfig& cfg, const StageOptions& opts);

}  // namespace geli
