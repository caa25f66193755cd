#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace geli {

/// How step features are obtained when loading a trajectory file.
enum class FeatureMode { kHashedText, kPrecomputed };

struct FeatureSpec {
  std::size_t dimension = 16;
  FeatureMode mode = FeatureMode::kPrecomputed;
  std::uint64_t hash_seed = 0;
};

/// One turn: the dialogue-history context (state) and the agent's reply
/// (action), both as dense feature vectors, plus an optional binary proxy
/// label attached to the turn.
struct Step {
  std::vector<double> state_features;
  std::vector<double> action_features;
  std::optional<int> mm_label;

  // Raw texts are kept when the source file carried text so a dataset can be
  // written back in the same mode.
  std::optional<std::string> state_text;
  std::optional<std::string> action_text;
};

struct Trajectory {
  std::vector<Step> steps;
  double global_return = 0.0;
};

enum class SplitTag { kRewardTrain, kRewardTest, kPolicyTrain };

struct Dataset {
  std::vector<Trajectory> trajectories;
  SplitTag split_tag = SplitTag::kRewardTrain;

  std::size_t size() const { return trajectories.size(); }
  std::size_t num_steps() const;
  /// Feature dimension per channel (state and action have equal width).
  std::size_t feature_dim() const;
};

/// Hashed bag-of-words embedding: whitespace tokens are hashed into
/// `spec.dimension` buckets, counts accumulated and the vector L2-normalized.
/// Empty or all-whitespace text maps to the zero vector.
std::vector<double> hash_featurize(const std::string& text,
                                   const FeatureSpec& spec);

/// Bucket of a single token under `spec`; exposed so collisions can be
/// reasoned about in tests.
std::size_t hash_bucket(const std::string& token, const FeatureSpec& spec);

/// Loads one trajectory per line. Schema per line:
///   {"return": <num>, "steps": [{"state": <str|null>, "action": <str|null>,
///     "state_vec": [...]|null, "action_vec": [...]|null, "mm": 0|1|null}]}
/// Exactly one of (state, state_vec) must be non-null per step, uniformly
/// across the file, and likewise for actions. Errors carry the line number.
Dataset load_jsonl(const std::string& path, const FeatureSpec& spec);

/// Writes a dataset in the schema accepted by load_jsonl. Text fields are
/// emitted when mode is kHashedText, otherwise feature vectors.
void save_jsonl(const Dataset& dataset, const std::string& path,
                FeatureMode mode);

/// Deterministic split into (reward_train, reward_test, policy_train).
/// Trajectories are shuffled with a seeded Fisher-Yates pass, then cut at
/// cumulative fraction boundaries rounded to the nearest trajectory.
std::array<Dataset, 3> split_dataset(const Dataset& dataset,
                                     const std::array<double, 3>& fractions,
                                     std::uint64_t seed);

/// The index permutation behind split_dataset, so sibling per-trajectory
/// data (e.g. ground-truth rewards) can be partitioned identically.
std::array<std::vector<std::size_t>, 3> split_indices(
    std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace geli
