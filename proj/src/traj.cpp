#include "geli/traj.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "geli/errors.hpp"
#include "geli/rng.hpp"

namespace geli {
namespace {

using nlohmann::json;

[[noreturn]] void fail_line(const std::string& path, std::size_t line,
                            const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

bool is_null_or_missing(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null();
}

std::vector<double> read_vector(const json& arr, const std::string& path,
                                std::size_t line, const char* key) {
  if (!arr.is_array()) fail_line(path, line, std::string(key) + " must be an array");
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) fail_line(path, line, std::string(key) + " must hold numbers");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail_line(path, line, std::string(key) + " holds a non-finite value");
    out.push_back(x);
  }
  return out;
}

}  // namespace

std::size_t Dataset::num_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.steps.size();
  return n;
}

std::size_t Dataset::feature_dim() const {
  for (const auto& t : trajectories)
    for (const auto& s : t.steps) return s.state_features.size();
  return 0;
}

std::size_t hash_bucket(const std::string& token, const FeatureSpec& spec) {
  std::uint64_t sm = spec.hash_seed;
  const std::uint64_t basis = 14695981039346656037ull ^ splitmix64(sm);
  return static_cast<std::size_t>(fnv1a64(token, basis) % spec.dimension);
}

std::vector<double> hash_featurize(const std::string& text,
                                   const FeatureSpec& spec) {
  if (spec.mode != FeatureMode::kHashedText)
    throw ConfigError("hash_featurize requires a hashed_text feature spec");
  if (spec.dimension == 0)
    throw ConfigError("hash_featurize: dimension must be positive");

  std::vector<double> vec(spec.dimension, 0.0);
  std::istringstream tokens(text);
  std::string tok;
  bool any = false;
  while (tokens >> tok) {
    vec[hash_bucket(tok, spec)] += 1.0;
    any = true;
  }
  if (!any) return vec;  // zero vector for empty text

  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  for (double& v : vec) v /= norm;
  return vec;
}

Dataset load_jsonl(const std::string& path, const FeatureSpec& spec) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open trajectory file: " + path);

  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  // -1 = undecided, 0 = text mode, 1 = vector mode; fixed by the first step.
  int file_mode = -1;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) fail_line(path, line_no, "record must be an object");
    if (!rec.contains("return") || !rec["return"].is_number())
      fail_line(path, line_no, "missing numeric \"return\"");
    if (!rec.contains("steps") || !rec["steps"].is_array())
      fail_line(path, line_no, "missing \"steps\" array");

    Trajectory traj;
    traj.global_return = rec["return"].get<double>();
    if (!std::isfinite(traj.global_return))
      fail_line(path, line_no, "non-finite return");
    if (rec["steps"].empty())
      fail_line(path, line_no, "trajectory has no steps");

    // In text mode each turn's state field holds that turn's context
    // utterance; the feature input is the whole history prefix, so utterances
    // seen so far are concatenated before hashing.
    std::string prefix_text;

    for (const auto& js : rec["steps"]) {
      if (!js.is_object()) fail_line(path, line_no, "step must be an object");
      const bool has_text = !is_null_or_missing(js, "state");
      const bool has_vec = !is_null_or_missing(js, "state_vec");
      if (has_text == has_vec)
        fail_line(path, line_no,
                  "exactly one of \"state\"/\"state_vec\" must be non-null");
      const bool has_action_text = !is_null_or_missing(js, "action");
      const bool has_action_vec = !is_null_or_missing(js, "action_vec");
      if (has_action_text == has_action_vec)
        fail_line(path, line_no,
                  "exactly one of \"action\"/\"action_vec\" must be non-null");
      if (has_text != has_action_text)
        fail_line(path, line_no, "state and action must use the same mode");

      const int step_mode = has_text ? 0 : 1;
      if (file_mode == -1) {
        file_mode = step_mode;
        if (file_mode == 0 && spec.mode != FeatureMode::kHashedText)
          fail_line(path, line_no,
                    "file carries text but the feature spec is precomputed");
        if (file_mode == 1 && spec.mode != FeatureMode::kPrecomputed)
          fail_line(path, line_no,
                    "file carries vectors but the feature spec is hashed_text");
      } else if (step_mode != file_mode) {
        fail_line(path, line_no, "mixed text/vector steps in one file");
      }

      Step step;
      if (has_text) {
        step.state_text = js["state"].get<std::string>();
        step.action_text = js["action"].get<std::string>();
        if (!prefix_text.empty()) prefix_text += ' ';
        prefix_text += *step.state_text;
        step.state_features = hash_featurize(prefix_text, spec);
        step.action_features = hash_featurize(*step.action_text, spec);
        prefix_text += ' ';
        prefix_text += *step.action_text;
      } else {
        step.state_features = read_vector(js["state_vec"], path, line_no, "state_vec");
        step.action_features = read_vector(js["action_vec"], path, line_no, "action_vec");
        if (step.state_features.size() != spec.dimension ||
            step.action_features.size() != spec.dimension)
          fail_line(path, line_no, "feature vectors do not match spec dimension");
      }

      if (!is_null_or_missing(js, "mm")) {
        if (!js["mm"].is_number_integer())
          fail_line(path, line_no, "mm must be 0, 1 or null");
        const int mm = js["mm"].get<int>();
        if (mm != 0 && mm != 1) fail_line(path, line_no, "mm must be 0, 1 or null");
        step.mm_label = mm;
      }
      traj.steps.push_back(std::move(step));
    }
    dataset.trajectories.push_back(std::move(traj));
  }

  if (dataset.trajectories.empty())
    throw DataError(path + ": no trajectories found");
  return dataset;
}

void save_jsonl(const Dataset& dataset, const std::string& path,
                FeatureMode mode) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArtifactError("cannot write trajectory file: " + path);

  for (const auto& traj : dataset.trajectories) {
    json steps = json::array();
    for (const auto& step : traj.steps) {
      json js;
      if (mode == FeatureMode::kHashedText) {
        if (!step.state_text || !step.action_text)
          throw DataError("save_jsonl: step has no raw text to write");
        js["state"] = *step.state_text;
        js["action"] = *step.action_text;
        js["state_vec"] = nullptr;
        js["action_vec"] = nullptr;
      } else {
        js["state"] = nullptr;
        js["action"] = nullptr;
        js["state_vec"] = step.state_features;
        js["action_vec"] = step.action_features;
      }
      js["mm"] = step.mm_label ? json(*step.mm_label) : json(nullptr);
      steps.push_back(std::move(js));
    }
    json rec;
    rec["return"] = traj.global_return;
    rec["steps"] = std::move(steps);
    out << rec.dump() << '\n';
  }
  if (!out) throw ArtifactError("write failed: " + path);
}

std::array<std::vector<std::size_t>, 3> split_indices(
    std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must sum to 1");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_index(i)]);

  const auto nd = static_cast<double>(n);
  const std::size_t c1 = static_cast<std::size_t>(std::llround(fractions[0] * nd));
  const std::size_t c2 = static_cast<std::size_t>(
      std::llround((fractions[0] + fractions[1]) * nd));
  if (c1 == 0 || c2 <= c1 || c2 >= n)
    throw ConfigError("split produces an empty part at this dataset size");

  std::array<std::vector<std::size_t>, 3> parts;
  for (std::size_t i = 0; i < n; ++i)
    parts[i < c1 ? 0 : (i < c2 ? 1 : 2)].push_back(order[i]);
  return parts;
}

std::array<Dataset, 3> split_dataset(const Dataset& dataset,
                                     const std::array<double, 3>& fractions,
                                     std::uint64_t seed) {
  const auto parts = split_indices(dataset.size(), fractions, seed);
  std::array<Dataset, 3> out;
  out[0].split_tag = SplitTag::kRewardTrain;
  out[1].split_tag = SplitTag::kRewardTest;
  out[2].split_tag = SplitTag::kPolicyTrain;
  for (std::size_t part = 0; part < 3; ++part)
    for (std::size_t idx : parts[part])
      out[part].trajectories.push_back(dataset.trajectories[idx]);
  return out;
}

}  // namespace geli
