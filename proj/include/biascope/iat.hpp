#pragma once

// Timed association study sessions: trial plans, response logging,
// per-pair reaction-time deltas and cross-participant aggregation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include "biascope/error.hpp"
#include "biascope/gender.hpp"
#include "biascope/jsonl.hpp"

namespace biascope::iat {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Request conflicts with session state (out of order, duplicate, finished).
class ConflictError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kMaxRtMs = 30000;

struct StudyPair {
  std::string name;
  std::string f_label;
  std::string m_label;
};

struct FaceStimulus {
  std::string image;
  Gender gender = Gender::kFemale;
};

struct StudySpec {
  std::string region;
  std::vector<StudyPair> pairs;
  std::size_t trials_per_block = 20;
  std::vector<FaceStimulus> faces;

  // Parses a study file; appends the family-career baseline pair when absent.
  static StudySpec from_json(const Json& j);
  Json to_json() const;
  void validate() const;
};

StudySpec load_study_spec(const std::filesystem::path& path);

enum class BlockKind { kUnreversed, kReversed };
enum class BlockOrder { kUnreversedFirst, kReversedFirst };
enum class Key { kLeft, kRight };
enum class StimulusType { kFace, kTopic };

std::string_view to_string(BlockKind k) noexcept;
std::string_view to_string(BlockOrder o) noexcept;
std::string_view to_string(Key k) noexcept;
std::optional<Key> parse_key(std::string_view text);

struct Trial {
  std::string trial_id;
  std::size_t block_index = 0;
  std::size_t trial_index = 0;  // within the block
  StimulusType type = StimulusType::kFace;
  std::string stimulus;  // image ref or topic label
  Gender stimulus_gender = Gender::kFemale;
  Key expected_key = Key::kLeft;
};

struct Block {
  std::size_t pair_index = 0;
  BlockKind kind = BlockKind::kUnreversed;
  std::string left_caption;
  std::string right_caption;
  std::vector<Trial> trials;
};

// Two blocks per pair, in pair order, each pair's blocks ordered by
// block_order. Deterministic in (spec, order, seed).
std::vector<Block> generate_plan(const StudySpec& spec, BlockOrder order, std::uint64_t seed);

BlockOrder draw_block_order(std::uint64_t seed);

struct Participant {
  std::string region;
  std::string gender;  // "F" or "M" after normalization
  std::string id;
};

enum class TrialStatus { kValid, kVoid, kExcluded };

struct TrialRecord {
  std::string trial_id;
  std::string pair;
  BlockKind block = BlockKind::kUnreversed;
  std::string stimulus;
  Key expected_key = Key::kLeft;
  Key pressed_key = Key::kLeft;
  std::int64_t rt_ms = 0;
  bool correct = false;
  TrialStatus status = TrialStatus::kValid;

  Json to_json() const;
  static TrialRecord from_json(const Json& j);
};

struct PairResult {
  std::string pair;
  std::optional<double> mean_unreversed_ms;
  std::optional<double> mean_reversed_ms;
  std::optional<double> delta_ms;  // reversed - unreversed
  std::size_t trials_used = 0;

  Json to_json() const;
};

// Folds raw trial records into per-pair results: mean RT over correct valid
// trials of each block, or over all valid trials when a block has none correct.
std::vector<PairResult> compute_pair_results(const std::vector<std::string>& pair_names,
                                             const std::vector<TrialRecord>& records);

struct TrialView {
  Trial trial;
  std::string pair;
  BlockKind block = BlockKind::kUnreversed;
  std::string left_caption;
  std::string right_caption;
};

struct BlockTransition {
  std::size_t block_index = 0;
  BlockKind block = BlockKind::kUnreversed;
  std::string pair;
  std::string left_caption;
  std::string right_caption;
};

struct Done {};

using NextStep = std::variant<TrialView, BlockTransition, Done>;

Json to_json(const NextStep& step);

enum class SubmitStatus { kAccepted, kVoided, kExcluded };
std::string_view to_string(SubmitStatus s) noexcept;

struct SessionInfo {
  std::string session_id;
  BlockOrder block_order = BlockOrder::kUnreversedFirst;
  std::uint64_t seed = 0;
  std::string left_caption;
  std::string right_caption;
};

struct GenderBreakdown {
  std::optional<double> mean_delta_ms;  // nullopt: no participants of that gender
  std::size_t participants = 0;
};

struct PairAggregate {
  std::string pair;
  std::optional<double> mean_delta_ms;
  std::size_t participants = 0;
  std::map<std::string, GenderBreakdown> by_gender;  // always has "F" and "M"
};

Json to_json(const std::vector<PairAggregate>& aggregate);

// Replays a session log file into its per-pair results without the service.
std::vector<PairResult> replay_session_log(const std::filesystem::path& path);

// Runs sessions for a set of studies (one per region). Sessions are logged
// to <data_dir>/sessions/<id>.jsonl and reloaded on construction. Each
// session's transitions are serialized; distinct sessions run concurrently.
class StudyService {
 public:
  StudyService(std::vector<StudySpec> studies, std::filesystem::path data_dir);
  ~StudyService();

  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  SessionInfo create_session(const Participant& participant,
                             std::optional<std::uint64_t> seed = std::nullopt);
  NextStep next_trial(const std::string& session_id);
  SubmitStatus submit_response(const std::string& session_id, const std::string& trial_id,
                               Key pressed_key, std::int64_t rt_ms);
  std::vector<PairResult> finish(const std::string& session_id);
  std::vector<PairAggregate> aggregate(const std::string& region) const;

  std::vector<TrialRecord> records(const std::string& session_id) const;
  std::filesystem::path log_path(const std::string& session_id) const;

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id) const;
  void load_existing();

  std::map<std::string, StudySpec> studies_;
  std::filesystem::path data_dir_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

}  // namespace biascope::iat
