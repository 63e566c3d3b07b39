#include "biascope/iat.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "biascope/random.hpp"

namespace biascope::iat {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(StimulusType t) noexcept {
  return t == StimulusType::kFace ? "face" : "topic";
}

std::string_view to_string(TrialStatus s) noexcept {
  switch (s) {
    case TrialStatus::kValid:
      return "valid";
    case TrialStatus::kVoid:
      return "void";
    default:
      return "excluded";
  }
}

TrialStatus parse_status(const std::string& s) {
  if (s == "valid") {
    return TrialStatus::kValid;
  }
  if (s == "void") {
    return TrialStatus::kVoid;
  }
  if (s == "excluded") {
    return TrialStatus::kExcluded;
  }
  throw ValidationError("unknown trial status '" + s + "'");
}

BlockKind parse_block(const std::string& s) {
  if (s == "unreversed") {
    return BlockKind::kUnreversed;
  }
  if (s == "reversed") {
    return BlockKind::kReversed;
  }
  throw ValidationError("unknown block kind '" + s + "'");
}

BlockOrder parse_order(const std::string& s) {
  if (s == "unreversed-first") {
    return BlockOrder::kUnreversedFirst;
  }
  if (s == "reversed-first") {
    return BlockOrder::kReversedFirst;
  }
  throw ValidationError("unknown block order '" + s + "'");
}

Key required_key(const Json& j, const char* field) {
  auto key = parse_key(j.at(field).get<std::string>());
  if (!key) {
    throw ValidationError(std::string("invalid ") + field);
  }
  return *key;
}

std::optional<double> mean_of(const std::vector<double>& values) {
  if (values.empty()) {
    return std::nullopt;
  }
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::string_view to_string(BlockKind k) noexcept {
  return k == BlockKind::kUnreversed ? "unreversed" : "reversed";
}

std::string_view to_string(BlockOrder o) noexcept {
  return o == BlockOrder::kUnreversedFirst ? "unreversed-first" : "reversed-first";
}

std::string_view to_string(Key k) noexcept { return k == Key::kLeft ? "left" : "right"; }

std::optional<Key> parse_key(std::string_view text) {
  const auto lower = ascii_lower(text);
  if (lower == "left" || lower == "e") {
    return Key::kLeft;
  }
  if (lower == "right" || lower == "i") {
    return Key::kRight;
  }
  return std::nullopt;
}

std::string_view to_string(SubmitStatus s) noexcept {
  switch (s) {
    case SubmitStatus::kAccepted:
      return "accepted";
    case SubmitStatus::kVoided:
      return "voided";
    default:
      return "excluded";
  }
}

StudySpec StudySpec::from_json(const Json& j) {
  StudySpec spec;
  try {
    spec.region = j.at("region").get<std::string>();
    for (const auto& p : j.at("pairs")) {
      spec.pairs.push_back({p.at("name").get<std::string>(), p.at("f_label").get<std::string>(),
                            p.at("m_label").get<std::string>()});
    }
    spec.trials_per_block = j.value("trials_per_block", spec.trials_per_block);
    for (const auto& f : j.at("faces")) {
      auto gender = parse_gender_tag(f.at("gender").get<std::string>());
      if (!gender) {
        throw ValidationError("face gender must be F or M");
      }
      spec.faces.push_back({f.at("image").get<std::string>(), *gender});
    }
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed study spec: ") + e.what());
  }
  const bool has_baseline = std::any_of(spec.pairs.begin(), spec.pairs.end(), [](const auto& p) {
    return ascii_lower(p.f_label) == "family" && ascii_lower(p.m_label) == "career";
  });
  if (!has_baseline) {
    spec.pairs.push_back({"family-career", "family", "career"});
  }
  spec.validate();
  return spec;
}

Json StudySpec::to_json() const {
  Json pairs_json = Json::array();
  for (const auto& p : pairs) {
    pairs_json.push_back({{"name", p.name}, {"f_label", p.f_label}, {"m_label", p.m_label}});
  }
  Json faces_json = Json::array();
  for (const auto& f : faces) {
    faces_json.push_back({{"image", f.image}, {"gender", to_string(f.gender)}});
  }
  return {{"region", region},
          {"pairs", pairs_json},
          {"trials_per_block", trials_per_block},
          {"faces", faces_json}};
}

void StudySpec::validate() const {
  if (region.empty()) {
    throw ValidationError("study spec needs a region");
  }
  if (pairs.empty()) {
    throw ValidationError("study spec needs at least one pair");
  }
  std::set<std::string> names;
  for (const auto& p : pairs) {
    if (!names.insert(p.name).second) {
      throw ValidationError("duplicate study pair name '" + p.name + "'");
    }
  }
  if (trials_per_block == 0 || trials_per_block % 2 != 0) {
    throw ValidationError("trials_per_block must be a positive even number");
  }
  const auto female = std::count_if(faces.begin(), faces.end(),
                                    [](const auto& f) { return f.gender == Gender::kFemale; });
  const auto male = static_cast<std::ptrdiff_t>(faces.size()) - female;
  if (female == 0 || female != male) {
    throw ValidationError("study spec needs equal, non-zero numbers of F and M faces");
  }
}

StudySpec load_study_spec(const std::filesystem::path& path) {
  std::string text;
  for (const auto& line : read_lines(path)) {
    text += line;
    text += '\n';
  }
  auto j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw ValidationError("study spec " + path.string() + " is not valid JSON");
  }
  return StudySpec::from_json(j);
}

BlockOrder draw_block_order(std::uint64_t seed) {
  Xoshiro256 rng(seed);
  return rng.coin() ? BlockOrder::kReversedFirst : BlockOrder::kUnreversedFirst;
}

std::vector<Block> generate_plan(const StudySpec& spec, BlockOrder order, std::uint64_t seed) {
  spec.validate();
  // Separate stream from the block-order draw.
  Xoshiro256 rng(splitmix64(seed ^ 0x5a17c0de5a17c0deULL));
  std::vector<const FaceStimulus*> female_faces;
  std::vector<const FaceStimulus*> male_faces;
  for (const auto& f : spec.faces) {
    (f.gender == Gender::kFemale ? female_faces : male_faces).push_back(&f);
  }
  const std::array<BlockKind, 2> kinds =
      order == BlockOrder::kUnreversedFirst
          ? std::array<BlockKind, 2>{BlockKind::kUnreversed, BlockKind::kReversed}
          : std::array<BlockKind, 2>{BlockKind::kReversed, BlockKind::kUnreversed};

  std::vector<Block> plan;
  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    const auto& pair = spec.pairs[p];
    for (const auto kind : kinds) {
      Block block;
      block.pair_index = p;
      block.kind = kind;
      const bool reversed = kind == BlockKind::kReversed;
      block.left_caption = "female OR " + (reversed ? pair.m_label : pair.f_label);
      block.right_caption = "male OR " + (reversed ? pair.f_label : pair.m_label);

      std::vector<Gender> genders(spec.trials_per_block / 2, Gender::kFemale);
      genders.resize(spec.trials_per_block, Gender::kMale);
      shuffle(std::span<Gender>(genders), rng);
      for (std::size_t i = 0; i < genders.size(); ++i) {
        Trial trial;
        trial.block_index = plan.size();
        trial.trial_index = i;
        trial.trial_id = "b" + std::to_string(plan.size()) + "-t" + std::to_string(i);
        trial.stimulus_gender = genders[i];
        trial.type = i % 2 == 0 ? StimulusType::kFace : StimulusType::kTopic;
        const bool female = genders[i] == Gender::kFemale;
        if (trial.type == StimulusType::kFace) {
          const auto& pool = female ? female_faces : male_faces;
          trial.stimulus = pool[rng.below(pool.size())]->image;
          trial.expected_key = female ? Key::kLeft : Key::kRight;
        } else {
          trial.stimulus = female ? pair.f_label : pair.m_label;
          trial.expected_key = (female != reversed) ? Key::kLeft : Key::kRight;
        }
        block.trials.push_back(std::move(trial));
      }
      plan.push_back(std::move(block));
    }
  }
  return plan;
}

Json TrialRecord::to_json() const {
  return {{"kind", "trial"},
          {"trial_id", trial_id},
          {"pair", pair},
          {"block", to_string(block)},
          {"stimulus", stimulus},
          {"expected_key", to_string(expected_key)},
          {"pressed_key", to_string(pressed_key)},
          {"rt_ms", rt_ms},
          {"correct", correct},
          {"status", to_string(status)}};
}

TrialRecord TrialRecord::from_json(const Json& j) {
  try {
    TrialRecord r;
    r.trial_id = j.at("trial_id").get<std::string>();
    r.pair = j.at("pair").get<std::string>();
    r.block = parse_block(j.at("block").get<std::string>());
    r.stimulus = j.value("stimulus", "");
    r.expected_key = required_key(j, "expected_key");
    r.pressed_key = required_key(j, "pressed_key");
    r.rt_ms = j.at("rt_ms").get<std::int64_t>();
    r.correct = j.at("correct").get<bool>();
    r.status = parse_status(j.at("status").get<std::string>());
    return r;
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("malformed trial record: ") + e.what());
  }
}

Json PairResult::to_json() const {
  return {{"pair", pair},
          {"mean_unreversed_ms", optional_number(mean_unreversed_ms)},
          {"mean_reversed_ms", optional_number(mean_reversed_ms)},
          {"delta_ms", optional_number(delta_ms)},
          {"trials_used", trials_used}};
}

std::vector<PairResult> compute_pair_results(const std::vector<std::string>& pair_names,
                                             const std::vector<TrialRecord>& records) {
  std::vector<PairResult> results;
  for (const auto& name : pair_names) {
    PairResult result;
    result.pair = name;
    std::array<std::optional<double>, 2> means;
    for (const auto kind : {BlockKind::kUnreversed, BlockKind::kReversed}) {
      std::vector<double> correct;
      std::vector<double> all;
      for (const auto& r : records) {
        if (r.pair != name || r.block != kind || r.status != TrialStatus::kValid) {
          continue;
        }
        all.push_back(static_cast<double>(r.rt_ms));
        if (r.correct) {
          correct.push_back(static_cast<double>(r.rt_ms));
        }
      }
      const auto& used = correct.empty() ? all : correct;
      result.trials_used += used.size();
      means[kind == BlockKind::kUnreversed ? 0 : 1] = mean_of(used);
    }
    result.mean_unreversed_ms = means[0];
    result.mean_reversed_ms = means[1];
    if (means[0] && means[1]) {
      result.delta_ms = *means[1] - *means[0];
    }
    results.push_back(std::move(result));
  }
  return results;
}

Json to_json(const NextStep& step) {
  if (const auto* view = std::get_if<TrialView>(&step)) {
    return {{"type", "trial"},
            {"trial_id", view->trial.trial_id},
            {"block_index", view->trial.block_index},
            {"trial_index", view->trial.trial_index},
            {"block", to_string(view->block)},
            {"pair", view->pair},
            {"stimulus_type", to_string(view->trial.type)},
            {"stimulus", view->trial.stimulus},
            {"left_caption", view->left_caption},
            {"right_caption", view->right_caption}};
  }
  if (const auto* t = std::get_if<BlockTransition>(&step)) {
    return {{"type", "transition"},
            {"block_index", t->block_index},
            {"block", to_string(t->block)},
            {"pair", t->pair},
            {"left_caption", t->left_caption},
            {"right_caption", t->right_caption}};
  }
  return {{"type", "done"}};
}

Json to_json(const std::vector<PairAggregate>& aggregate) {
  Json pairs = Json::array();
  for (const auto& a : aggregate) {
    Json by_gender = Json::object();
    for (const auto& [gender, b] : a.by_gender) {
      by_gender[gender] = b.mean_delta_ms ? Json{{"mean_delta_ms", *b.mean_delta_ms},
                                                 {"participants", b.participants}}
                                          : Json(nullptr);
    }
    pairs.push_back({{"pair", a.pair},
                     {"mean_delta_ms", optional_number(a.mean_delta_ms)},
                     {"participants", a.participants},
                     {"by_gender", by_gender}});
  }
  return pairs;
}

std::vector<PairResult> replay_session_log(const std::filesystem::path& path) {
  std::vector<std::string> pair_names;
  std::vector<TrialRecord> records;
  bool have_header = false;
  for (const auto& rec : read_jsonl(path)) {
    const std::string kind = rec.value("kind", "");
    if (kind == "session") {
      for (const auto& p : rec.at("spec").at("pairs")) {
        pair_names.push_back(p.at("name").get<std::string>());
      }
      have_header = true;
    } else if (kind == "trial") {
      records.push_back(TrialRecord::from_json(rec));
    }
  }
  if (!have_header) {
    throw ValidationError("session log " + path.string() + " has no header line");
  }
  return compute_pair_results(pair_names, records);
}

struct StudyService::Session {
  std::mutex mutex;
  std::string id;
  Participant participant;
  StudySpec spec;
  BlockOrder order = BlockOrder::kUnreversedFirst;
  std::uint64_t seed = 0;
  std::int64_t started_at = 0;
  std::int64_t finished_at = 0;
  std::vector<Block> plan;
  std::size_t block = 0;
  std::size_t trial = 0;
  bool transition_pending = false;
  bool finished = false;
  std::vector<TrialRecord> records;
  std::set<std::string> completed;
  std::vector<PairResult> results;
  std::filesystem::path log;

  bool all_answered() const { return block >= plan.size(); }
  const Trial& current() const { return plan[block].trials[trial]; }

  std::vector<std::string> pair_names() const {
    std::vector<std::string> names;
    for (const auto& p : spec.pairs) {
      names.push_back(p.name);
    }
    return names;
  }

  // Applies a logged record to the cursor; shared by live submits and replay.
  void apply(const TrialRecord& record) {
    records.push_back(record);
    if (record.status == TrialStatus::kVoid) {
      return;
    }
    completed.insert(record.trial_id);
    if (++trial == plan[block].trials.size()) {
      ++block;
      trial = 0;
      transition_pending = block < plan.size();
    }
  }

  std::size_t voids_on_current() const {
    if (all_answered()) {
      return 0;
    }
    const auto& id = current().trial_id;
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
      return r.trial_id == id && r.status == TrialStatus::kVoid;
    }));
  }
};

StudyService::StudyService(std::vector<StudySpec> studies, std::filesystem::path data_dir)
    : data_dir_(std::move(data_dir)) {
  for (auto& s : studies) {
    s.validate();
    const std::string region = s.region;
    if (!studies_.emplace(region, std::move(s)).second) {
      throw ValidationError("two studies for region '" + region + "'");
    }
  }
  std::filesystem::create_directories(data_dir_ / "sessions");
  load_existing();
}

StudyService::~StudyService() = default;

std::filesystem::path StudyService::log_path(const std::string& session_id) const {
  return data_dir_ / "sessions" / (session_id + ".jsonl");
}

void StudyService::load_existing() {
  std::vector<std::filesystem::path> logs;
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_ / "sessions")) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      logs.push_back(entry.path());
    }
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& path : logs) {
    auto session = std::make_shared<Session>();
    session->log = path;
    // A torn final line from a crash is skipped.
    for (const auto& rec : read_jsonl(path)) {
      const std::string kind = rec.value("kind", "");
      if (kind == "session") {
        session->id = rec.at("session_id").get<std::string>();
        const auto& p = rec.at("participant");
        session->participant = {p.at("region").get<std::string>(),
                                p.at("gender").get<std::string>(), p.at("id").get<std::string>()};
        session->spec = StudySpec::from_json(rec.at("spec"));
        session->order = parse_order(rec.at("block_order").get<std::string>());
        session->seed = rec.at("seed").get<std::uint64_t>();
        session->started_at = rec.value("started_at", std::int64_t{0});
        session->plan = generate_plan(session->spec, session->order, session->seed);
      } else if (kind == "trial") {
        if (session->plan.empty()) {
          throw ValidationError("session log " + path.string() + " has trials before its header");
        }
        session->apply(TrialRecord::from_json(rec));
      } else if (kind == "finish") {
        session->finished = true;
        session->finished_at = rec.value("finished_at", std::int64_t{0});
      }
    }
    if (session->id.empty()) {
      continue;
    }
    if (session->finished) {
      session->results = compute_pair_results(session->pair_names(), session->records);
    }
    sessions_[session->id] = std::move(session);
  }
}

std::shared_ptr<StudyService::Session> StudyService::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) {
    throw NotFoundError("unknown session '" + session_id + "'");
  }
  return it->second;
}

SessionInfo StudyService::create_session(const Participant& participant,
                                         std::optional<std::uint64_t> seed) {
  if (participant.region.empty() || participant.id.empty()) {
    throw ValidationError("participant needs a region and an id");
  }
  const auto gender = parse_gender_tag(participant.gender);
  if (!gender) {
    throw ValidationError("participant gender must be F/M (or female/male)");
  }
  auto study = studies_.find(participant.region);
  if (study == studies_.end()) {
    throw ValidationError("no study configured for region '" + participant.region + "'");
  }

  auto session = std::make_shared<Session>();
  std::random_device rd;
  session->seed = seed ? *seed : (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  session->participant = participant;
  session->participant.gender = std::string(to_string(*gender));
  session->spec = study->second;
  session->order = draw_block_order(session->seed);
  session->plan = generate_plan(session->spec, session->order, session->seed);
  session->started_at = now_ms();

  {
    std::unique_lock lock(sessions_mutex_);
    do {
      session->id = hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd()) +
                    hex64((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    } while (sessions_.contains(session->id));
    session->log = log_path(session->id);
    append_jsonl(session->log, {{"kind", "session"},
                                {"session_id", session->id},
                                {"participant",
                                 {{"region", session->participant.region},
                                  {"gender", session->participant.gender},
                                  {"id", session->participant.id}}},
                                {"block_order", to_string(session->order)},
                                {"seed", session->seed},
                                {"started_at", session->started_at},
                                {"spec", session->spec.to_json()}});
    sessions_[session->id] = session;
  }
  const auto& first = session->plan.front();
  return {session->id, session->order, session->seed, first.left_caption, first.right_caption};
}

NextStep StudyService::next_trial(const std::string& session_id) {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  if (session->finished) {
    throw ConflictError("session is finished");
  }
  if (session->all_answered()) {
    return Done{};
  }
  const auto& block = session->plan[session->block];
  const auto& pair = session->spec.pairs[block.pair_index];
  if (session->transition_pending) {
    session->transition_pending = false;
    return BlockTransition{session->block, block.kind, pair.name, block.left_caption,
                           block.right_caption};
  }
  return TrialView{session->current(), pair.name, block.kind, block.left_caption,
                   block.right_caption};
}

SubmitStatus StudyService::submit_response(const std::string& session_id,
                                           const std::string& trial_id, Key pressed_key,
                                           std::int64_t rt_ms) {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  if (session->finished) {
    throw ConflictError("session is finished");
  }
  if (session->completed.contains(trial_id)) {
    throw ConflictError("trial '" + trial_id + "' already has a response");
  }
  if (session->all_answered() || session->current().trial_id != trial_id) {
    throw ConflictError("trial '" + trial_id + "' is not the current trial");
  }
  const auto& trial = session->current();
  const auto& block = session->plan[session->block];
  TrialRecord record;
  record.trial_id = trial.trial_id;
  record.pair = session->spec.pairs[block.pair_index].name;
  record.block = block.kind;
  record.stimulus = trial.stimulus;
  record.expected_key = trial.expected_key;
  record.pressed_key = pressed_key;
  record.rt_ms = rt_ms;
  record.correct = pressed_key == trial.expected_key;

  SubmitStatus status = SubmitStatus::kAccepted;
  if (rt_ms <= 0 || rt_ms > kMaxRtMs) {
    const bool second = session->voids_on_current() >= 1;
    record.status = second ? TrialStatus::kExcluded : TrialStatus::kVoid;
    status = second ? SubmitStatus::kExcluded : SubmitStatus::kVoided;
  }
  append_jsonl(session->log, record.to_json());
  session->apply(record);
  return status;
}

std::vector<PairResult> StudyService::finish(const std::string& session_id) {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  if (session->finished) {
    return session->results;
  }
  if (!session->all_answered()) {
    throw ConflictError("session has unanswered trials");
  }
  session->results = compute_pair_results(session->pair_names(), session->records);
  session->finished_at = now_ms();
  Json results = Json::array();
  for (const auto& r : session->results) {
    results.push_back(r.to_json());
  }
  append_jsonl(session->log,
               {{"kind", "finish"}, {"finished_at", session->finished_at}, {"results", results}});
  session->finished = true;
  return session->results;
}

std::vector<TrialRecord> StudyService::records(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  return session->records;
}

std::vector<PairAggregate> StudyService::aggregate(const std::string& region) const {
  std::vector<std::shared_ptr<Session>> snapshot;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [id, s] : sessions_) {
      snapshot.push_back(s);
    }
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<std::string, double>>> deltas;
  std::size_t finished = 0;
  for (const auto& s : snapshot) {
    std::lock_guard lock(s->mutex);
    if (!s->finished || s->participant.region != region) {
      continue;
    }
    ++finished;
    for (const auto& r : s->results) {
      if (!deltas.contains(r.pair)) {
        order.push_back(r.pair);
      }
      auto& list = deltas[r.pair];
      if (r.delta_ms) {
        list.emplace_back(s->participant.gender, *r.delta_ms);
      }
    }
  }
  if (finished == 0) {
    throw NotFoundError("no finished sessions for region '" + region + "'");
  }
  std::vector<PairAggregate> out;
  for (const auto& name : order) {
    PairAggregate agg;
    agg.pair = name;
    agg.by_gender["F"] = {};
    agg.by_gender["M"] = {};
    std::map<std::string, std::vector<double>> per_gender;
    std::vector<double> all;
    for (const auto& [gender, delta] : deltas[name]) {
      all.push_back(delta);
      per_gender[gender].push_back(delta);
    }
    agg.mean_delta_ms = mean_of(all);
    agg.participants = all.size();
    for (const auto& [gender, values] : per_gender) {
      agg.by_gender[gender] = {mean_of(values), values.size()};
    }
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace biascope::iat
